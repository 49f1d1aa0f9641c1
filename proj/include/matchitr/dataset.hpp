#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace matchitr {

enum class ColumnRole { Covariate, Treatment, Outcome, Time, Event, Optimal };

inline ColumnRole parse_column_role(const std::string& s) {
  if (s == "covariate") return ColumnRole::Covariate;
  if (s == "treatment") return ColumnRole::Treatment;
  if (s == "outcome") return ColumnRole::Outcome;
  if (s == "time") return ColumnRole::Time;
  if (s == "event") return ColumnRole::Event;
  if (s == "optimal") return ColumnRole::Optimal;
  throw std::invalid_argument("unknown column role '" + s + "'");
}

// Maps column names to roles. declared_k = 0 means infer the arm count.
struct Schema {
  std::map<std::string, ColumnRole> columns;
  int declared_k = 0;
  char delimiter = ',';
};

struct SurvivalData {
  std::vector<double> time;
  std::vector<int> event;  // 1 = event observed, 0 = censored
};

// Observational dataset with treatments relabeled to dense 1..k.
struct Dataset {
  Eigen::MatrixXd covariates;  // n x p
  std::vector<int> treatments;
  std::vector<double> outcomes;  // for survival data, populated by imputation
  std::optional<SurvivalData> survival;
  std::vector<int> optimal_arms;  // simulation truth; empty for real data
  int k = 0;
  std::vector<std::string> covariate_names;
  std::vector<std::string> original_labels;  // original label of each dense arm

  int n() const { return int(covariates.rows()); }
  int p() const { return int(covariates.cols()); }
  bool has_outcomes() const { return !outcomes.empty(); }

  void validate() const {
    const int N = n();
    if (N < 1) throw std::invalid_argument("dataset has no rows");
    if (p() < 1) throw std::invalid_argument("dataset has no covariates");
    if (k < 2)
      throw std::invalid_argument(
          "single-label data: every subject received the same treatment; k >= 2 arms required");
    if (int(treatments.size()) != N) throw std::invalid_argument("treatment length mismatch");
    if (!outcomes.empty() && int(outcomes.size()) != N)
      throw std::invalid_argument("outcome length mismatch");
    if (!optimal_arms.empty() && int(optimal_arms.size()) != N)
      throw std::invalid_argument("optimal-arm length mismatch");
    if (survival) {
      if (int(survival->time.size()) != N || int(survival->event.size()) != N)
        throw std::invalid_argument("survival column length mismatch");
    }
    std::vector<int> count(k, 0);
    for (int i = 0; i < N; ++i) {
      const int a = treatments[i];
      if (a < 1 || a > k)
        throw std::invalid_argument("treatment label " + std::to_string(a) + " out of range at row " +
                                    std::to_string(i + 1));
      ++count[a - 1];
    }
    for (int a = 0; a < k; ++a)
      if (count[a] == 0)
        throw std::invalid_argument("treatment arm " + std::to_string(a + 1) + " has no subjects");
    for (int i = 0; i < N; ++i) {
      for (int j = 0; j < p(); ++j)
        if (!std::isfinite(covariates(i, j)))
          throw std::invalid_argument("non-finite covariate at row " + std::to_string(i + 1));
      if (!outcomes.empty() && !std::isfinite(outcomes[i]))
        throw std::invalid_argument("non-finite outcome at row " + std::to_string(i + 1));
      if (survival) {
        if (!std::isfinite(survival->time[i]) || survival->time[i] < 0.0)
          throw std::invalid_argument("invalid survival time at row " + std::to_string(i + 1));
        if (survival->event[i] != 0 && survival->event[i] != 1)
          throw std::invalid_argument("event indicator must be 0/1 at row " + std::to_string(i + 1));
      }
      if (!optimal_arms.empty() && (optimal_arms[i] < 1 || optimal_arms[i] > k))
        throw std::invalid_argument("optimal arm out of range at row " + std::to_string(i + 1));
    }
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, delim)) out.push_back(trim(cell));
  if (!line.empty() && line.back() == delim) out.push_back("");
  return out;
}

inline double parse_double(const std::string& cell, int row, const std::string& col) {
  const char* s = cell.c_str();
  char* end = nullptr;
  const double v = std::strtod(s, &end);
  if (cell.empty() || end == nullptr || *end != '\0')
    throw std::invalid_argument("non-numeric value '" + cell + "' at row " + std::to_string(row) +
                                ", column '" + col + "'");
  return v;
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// True if s parses fully as a finite number (used to decide label ordering).
inline bool is_numeric(const std::string& s, double* out = nullptr) {
  if (s.empty()) return false;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == nullptr || *end != '\0' || !std::isfinite(v)) return false;
  if (out) *out = v;
  return true;
}

}  // namespace detail

// Loads a delimited text file using the schema. Lines starting with '#' are
// comments. Treatment labels are relabeled to contiguous 1..k in sorted order
// (numeric if all labels are numeric, otherwise lexicographic).
inline Dataset load_dataset(const std::string& path, const Schema& schema) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    header = detail::split_line(t, schema.delimiter);
    break;
  }
  if (header.empty()) throw std::runtime_error("'" + path + "' has no header row");

  std::vector<ColumnRole> roles(header.size());
  std::map<std::string, bool> seen;
  for (const auto& [name, role] : schema.columns) seen[name] = false;
  for (std::size_t c = 0; c < header.size(); ++c) {
    auto it = schema.columns.find(header[c]);
    if (it == schema.columns.end())
      throw std::invalid_argument("column '" + header[c] + "' is not declared in the schema");
    roles[c] = it->second;
    seen[header[c]] = true;
  }
  for (const auto& [name, was] : seen)
    if (!was) throw std::invalid_argument("schema column '" + name + "' is missing from '" + path + "'");

  std::vector<int> cov_cols, time_col, event_col, outcome_col, optimal_col, treat_col;
  for (std::size_t c = 0; c < header.size(); ++c) {
    switch (roles[c]) {
      case ColumnRole::Covariate: cov_cols.push_back(int(c)); break;
      case ColumnRole::Treatment: treat_col.push_back(int(c)); break;
      case ColumnRole::Outcome: outcome_col.push_back(int(c)); break;
      case ColumnRole::Time: time_col.push_back(int(c)); break;
      case ColumnRole::Event: event_col.push_back(int(c)); break;
      case ColumnRole::Optimal: optimal_col.push_back(int(c)); break;
    }
  }
  if (treat_col.size() != 1) throw std::invalid_argument("schema must declare exactly one treatment column");
  if (cov_cols.empty()) throw std::invalid_argument("schema declares no covariate columns");
  if (outcome_col.size() > 1 || time_col.size() > 1 || event_col.size() > 1 || optimal_col.size() > 1)
    throw std::invalid_argument("duplicate outcome/time/event/optimal columns in schema");
  if (time_col.size() != event_col.size())
    throw std::invalid_argument("time and event columns must be declared together");

  std::vector<std::vector<double>> cov_rows;
  std::vector<std::string> treat_raw;
  std::vector<double> outcome, time;
  std::vector<int> event, optimal;
  int row = 0;
  while (std::getline(in, line)) {
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    ++row;
    const auto cells = detail::split_line(t, schema.delimiter);
    if (cells.size() != header.size())
      throw std::invalid_argument("row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                                  " cells, expected " + std::to_string(header.size()));
    std::vector<double> cov(cov_cols.size());
    for (std::size_t j = 0; j < cov_cols.size(); ++j)
      cov[j] = detail::parse_double(cells[cov_cols[j]], row, header[cov_cols[j]]);
    cov_rows.push_back(std::move(cov));
    treat_raw.push_back(cells[treat_col[0]]);
    if (!outcome_col.empty())
      outcome.push_back(detail::parse_double(cells[outcome_col[0]], row, header[outcome_col[0]]));
    if (!time_col.empty()) {
      time.push_back(detail::parse_double(cells[time_col[0]], row, header[time_col[0]]));
      const double ev = detail::parse_double(cells[event_col[0]], row, header[event_col[0]]);
      if (ev != 0.0 && ev != 1.0)
        throw std::invalid_argument("event indicator must be 0 or 1 at row " + std::to_string(row));
      event.push_back(int(ev));
    }
    if (!optimal_col.empty()) {
      const double oa = detail::parse_double(cells[optimal_col[0]], row, header[optimal_col[0]]);
      optimal.push_back(int(oa));
    }
  }
  const int N = int(cov_rows.size());
  if (N == 0) throw std::runtime_error("'" + path + "' has no data rows");

  // Dense relabeling of treatment arms.
  std::set<std::string> distinct(treat_raw.begin(), treat_raw.end());
  std::vector<std::string> labels(distinct.begin(), distinct.end());
  bool all_numeric = true;
  for (const auto& s : labels)
    if (!detail::is_numeric(s)) { all_numeric = false; break; }
  if (all_numeric) {
    std::sort(labels.begin(), labels.end(), [](const std::string& a, const std::string& b) {
      double x = 0, y = 0;
      detail::is_numeric(a, &x);
      detail::is_numeric(b, &y);
      if (x != y) return x < y;
      return a < b;
    });
  }  // else: already lexicographic from std::set
  const int found_k = int(labels.size());
  if (schema.declared_k > 0 && found_k != schema.declared_k) {
    std::string msg = "treatment column has " + std::to_string(found_k) + " distinct labels but k=" +
                      std::to_string(schema.declared_k) + " was declared";
    if (found_k > schema.declared_k) {
      const std::string& excess = labels[schema.declared_k];
      for (int i = 0; i < N; ++i)
        if (treat_raw[i] == excess) {
          msg += "; first excess label '" + excess + "' at row " + std::to_string(i + 1);
          break;
        }
    }
    throw std::invalid_argument(msg);
  }
  std::map<std::string, int> dense;
  for (int a = 0; a < found_k; ++a) dense[labels[a]] = a + 1;

  Dataset d;
  d.covariates.resize(N, int(cov_cols.size()));
  for (int i = 0; i < N; ++i)
    for (std::size_t j = 0; j < cov_cols.size(); ++j) d.covariates(i, int(j)) = cov_rows[i][j];
  d.treatments.resize(N);
  for (int i = 0; i < N; ++i) d.treatments[i] = dense[treat_raw[i]];
  d.outcomes = std::move(outcome);
  if (!time.empty()) d.survival = SurvivalData{std::move(time), std::move(event)};
  d.optimal_arms = std::move(optimal);
  d.k = found_k;
  for (int c : cov_cols) d.covariate_names.push_back(header[c]);
  d.original_labels = labels;
  d.validate();
  return d;
}

// Writes the dataset with canonical column names (covariates keep their own
// names; treatment cells carry the original labels). comment_lines, if any,
// are emitted first as '#' comments. Doubles use %.17g so a reload is
// bit-exact.
inline void save_dataset(const Dataset& d, const std::string& path,
                         const std::vector<std::string>& comment_lines = {}, char delimiter = ',') {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  for (const auto& c : comment_lines) out << "# " << c << "\n";
  const std::string dl(1, delimiter);
  for (int j = 0; j < d.p(); ++j) {
    out << (j ? dl : "") << (j < int(d.covariate_names.size()) ? d.covariate_names[j]
                                                               : "x" + std::to_string(j + 1));
  }
  out << dl << "treatment";
  if (d.has_outcomes()) out << dl << "outcome";
  if (d.survival) out << dl << "time" << dl << "event";
  if (!d.optimal_arms.empty()) out << dl << "optimal";
  out << "\n";
  for (int i = 0; i < d.n(); ++i) {
    for (int j = 0; j < d.p(); ++j) out << (j ? dl : "") << detail::format_double(d.covariates(i, j));
    const int a = d.treatments[i];
    out << dl
        << (a - 1 < int(d.original_labels.size()) ? d.original_labels[a - 1] : std::to_string(a));
    if (d.has_outcomes()) out << dl << detail::format_double(d.outcomes[i]);
    if (d.survival)
      out << dl << detail::format_double(d.survival->time[i]) << dl << d.survival->event[i];
    if (!d.optimal_arms.empty()) out << dl << d.optimal_arms[i];
    out << "\n";
  }
}

// Canonical schema for files produced by save_dataset.
inline Schema canonical_schema(const Dataset& d, int declared_k = 0) {
  Schema s;
  for (int j = 0; j < d.p(); ++j)
    s.columns[j < int(d.covariate_names.size()) ? d.covariate_names[j] : "x" + std::to_string(j + 1)] =
        ColumnRole::Covariate;
  s.columns["treatment"] = ColumnRole::Treatment;
  if (d.has_outcomes()) s.columns["outcome"] = ColumnRole::Outcome;
  if (d.survival) {
    s.columns["time"] = ColumnRole::Time;
    s.columns["event"] = ColumnRole::Event;
  }
  if (!d.optimal_arms.empty()) s.columns["optimal"] = ColumnRole::Optimal;
  s.declared_k = declared_k;
  return s;
}

// Schema inference for files with canonical column names: the reserved names
// take their role, everything else is a covariate.
inline Schema infer_schema(const std::string& path, char delimiter = ',') {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    header = detail::split_line(t, delimiter);
    break;
  }
  if (header.empty()) throw std::runtime_error("'" + path + "' has no header row");
  Schema s;
  s.delimiter = delimiter;
  for (const auto& name : header) {
    if (name == "treatment") s.columns[name] = ColumnRole::Treatment;
    else if (name == "outcome") s.columns[name] = ColumnRole::Outcome;
    else if (name == "time") s.columns[name] = ColumnRole::Time;
    else if (name == "event") s.columns[name] = ColumnRole::Event;
    else if (name == "optimal") s.columns[name] = ColumnRole::Optimal;
    else s.columns[name] = ColumnRole::Covariate;
  }
  return s;
}

}  // namespace matchitr
