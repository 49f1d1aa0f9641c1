#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "matchitr/pipeline.hpp"

namespace matchitr {

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& M) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < M.rows(); ++i) {
    nlohmann::json r = nlohmann::json::array();
    for (int j = 0; j < M.cols(); ++j) r.push_back(M(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

inline Eigen::MatrixXd json_to_matrix(const nlohmann::json& j) {
  if (!j.is_array()) throw std::invalid_argument("expected a matrix (array of arrays)");
  const int n = int(j.size());
  if (n == 0) return Eigen::MatrixXd(0, 0);
  const int p = int(j[0].size());
  Eigen::MatrixXd M(n, p);
  for (int i = 0; i < n; ++i) {
    if (int(j[i].size()) != p) throw std::invalid_argument("ragged matrix rows in JSON");
    for (int c = 0; c < p; ++c) M(i, c) = j[i][c].get<double>();
  }
  return M;
}

inline nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  nlohmann::json a = nlohmann::json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline Eigen::VectorXd json_to_vector(const nlohmann::json& j) {
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v[int(i)] = j[i].get<double>();
  return v;
}

inline nlohmann::json standardizer_to_json(const Standardizer& s) {
  return {{"center", vector_to_json(s.center)},
          {"scale", vector_to_json(s.scale)},
          {"constant", s.constant}};
}

inline Standardizer standardizer_from_json(const nlohmann::json& j) {
  Standardizer s;
  s.center = json_to_vector(j.at("center"));
  s.scale = json_to_vector(j.at("scale"));
  s.constant = j.at("constant").get<std::vector<std::uint8_t>>();
  return s;
}

inline nlohmann::json gps_to_json(const GpsModel& g) {
  return {{"k", g.k},
          {"coef", matrix_to_json(g.coef)},
          {"clip_lo", g.clip_lo},
          {"clip_hi", g.clip_hi}};
}

inline GpsModel gps_from_json(const nlohmann::json& j) {
  GpsModel g;
  g.k = j.at("k").get<int>();
  g.coef = json_to_matrix(j.at("coef"));
  g.clip_lo = j.at("clip_lo").get<double>();
  g.clip_hi = j.at("clip_hi").get<double>();
  return g;
}

inline nlohmann::json ramsvm_to_json(const RamsvmModel& m) {
  nlohmann::json j{{"k", m.code.k},
                   {"kernel", m.kernel.type == KernelSpec::Type::Linear ? "linear" : "gaussian"},
                   {"bandwidth", m.kernel.bandwidth},
                   {"lambda", m.lambda},
                   {"gamma", m.gamma},
                   {"converged", m.converged},
                   {"sweeps", m.sweeps},
                   {"dual_objective", m.dual_objective}};
  if (m.kernel.type == KernelSpec::Type::Linear) {
    j["beta"] = matrix_to_json(m.beta);
  } else {
    j["features"] = matrix_to_json(m.pred_features);
    j["coef"] = matrix_to_json(m.pred_coef);
  }
  return j;
}

inline RamsvmModel ramsvm_from_json(const nlohmann::json& j) {
  RamsvmModel m;
  m.code = SimplexCode::make(j.at("k").get<int>());
  m.kernel = parse_kernel(j.at("kernel").get<std::string>(), j.at("bandwidth").get<double>());
  m.lambda = j.at("lambda").get<double>();
  m.gamma = j.at("gamma").get<double>();
  m.converged = j.at("converged").get<bool>();
  m.sweeps = j.at("sweeps").get<int>();
  m.dual_objective = j.at("dual_objective").get<double>();
  if (m.kernel.type == KernelSpec::Type::Linear) {
    m.beta = json_to_matrix(j.at("beta"));
  } else {
    m.pred_features = json_to_matrix(j.at("features"));
    m.pred_coef = json_to_matrix(j.at("coef"));
  }
  return m;
}

inline nlohmann::json fitted_rule_to_json(const FittedRule& f) {
  return {{"format", "matchitr-rule-v1"},
          {"k", f.k},
          {"lambda", f.lambda},
          {"standardizer", standardizer_to_json(f.transform)},
          {"gps", gps_to_json(f.gps)},
          {"model", ramsvm_to_json(f.model)}};
}

inline FittedRule fitted_rule_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "matchitr-rule-v1")
    throw std::invalid_argument("not a matchitr rule file");
  FittedRule f;
  f.k = j.at("k").get<int>();
  f.lambda = j.at("lambda").get<double>();
  f.transform = standardizer_from_json(j.at("standardizer"));
  f.gps = gps_from_json(j.at("gps"));
  f.model = ramsvm_from_json(j.at("model"));
  return f;
}

inline nlohmann::json matched_sets_to_json(const MatchedSets& ms) {
  return {{"n", ms.n},
          {"k", ms.k},
          {"m", ms.m},
          {"metric", ms.metric == MatchMetric::Mahalanobis ? "mahalanobis" : "gps"},
          {"neighbors", ms.neighbors},
          {"distances", ms.distances}};
}

// All artifact files open with '#' comment lines carrying the resolved
// configuration; JSON payloads follow them.
inline void save_json(const nlohmann::json& j, const std::string& path,
                      const std::vector<std::string>& comment_lines) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  for (const auto& c : comment_lines) out << "# " << c << "\n";
  out << j.dump(2) << "\n";
}

inline nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::stringstream body;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] == '#') continue;
    body << line << "\n";
  }
  return nlohmann::json::parse(body.str());
}

}  // namespace matchitr
