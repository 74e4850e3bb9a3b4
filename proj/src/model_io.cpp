#include "smr/model_io.hpp"

#include <fstream>

namespace smr {

using nlohmann::json;

json coefficients_to_json(const CoefficientSet& set) {
  json doc;
  doc["gamma"] = set.gamma;
  doc["sigma"] = set.sigma;
  doc["n"] = set.n;
  doc["xyy"] = json::array();
  for (const auto& t : set.xyy)
    doc["xyy"].push_back(
        {{"j", t.j}, {"k", t.k}, {"a_xyy", t.a_xyy}, {"a_j", t.a_yxy_j}, {"a_k", t.a_yxy_k}});
  doc["yyy"] = json::array();
  for (const auto& t : set.yyy)
    doc["yyy"].push_back({{"i", t.i},
                          {"j", t.j},
                          {"k", t.k},
                          {"b_ijk", t.b_ijk},
                          {"b_jki", t.b_jki},
                          {"b_kij", t.b_kij}});
  return doc;
}

CoefficientSet coefficients_from_json(const json& doc) {
  try {
    CoefficientSet set;
    set.gamma = doc.at("gamma").get<double>();
    set.sigma = doc.at("sigma").get<double>();
    set.n = doc.at("n").get<int>();
    for (const auto& r : doc.at("xyy"))
      set.xyy.push_back({r.at("j").get<int>(), r.at("k").get<int>(), r.at("a_xyy").get<double>(),
                         r.at("a_j").get<double>(), r.at("a_k").get<double>()});
    for (const auto& r : doc.at("yyy"))
      set.yyy.push_back({r.at("i").get<int>(), r.at("j").get<int>(), r.at("k").get<int>(),
                         r.at("b_ijk").get<double>(), r.at("b_jki").get<double>(),
                         r.at("b_kij").get<double>()});
    return set;
  } catch (const json::exception& e) {
    throw ParseError(std::string("coefficient document: ") + e.what());
  }
}

CoefficientSet load_coefficients(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open coefficient file " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return coefficients_from_json(doc);
}

void save_coefficients(const CoefficientSet& set, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << coefficients_to_json(set).dump(2) << '\n';
}

}  // namespace smr
