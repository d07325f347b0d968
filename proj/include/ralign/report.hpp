#pragma once

#include "ralign/core.hpp"
#include "ralign/cost.hpp"
#include "ralign/data.hpp"

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace ralign {

/// Machine-readable record of one solver run. `ratio` is present exactly when
/// `optimal_ssd_cost` is present and positive.
struct RunReport {
  std::string algorithm;
  InstanceSpec instance;
  CostSpec cost_spec;
  Alignment alignment;
  std::optional<Matching> matching;
  double cost = 0.0;
  std::optional<double> optimal_ssd_cost;
  std::optional<double> ratio;
  // Fraction of non-outlier points matched to their true partner, when the
  // ground truth is known.
  std::optional<double> match_recovery;
  long candidates_evaluated = 0;
  double wall_time_seconds = 0.0;
  std::uint64_t seed = 0;
  std::string note;
};

namespace detail {

inline nlohmann::json alignment_to_json(const Alignment& a) {
  const int d = a.dim();
  std::vector<double> rot;
  rot.reserve(static_cast<size_t>(d * d));
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) rot.push_back(a.rotation(i, j));
  std::vector<double> trans(a.translation.data(), a.translation.data() + d);
  return {{"rotation_row_major", rot}, {"translation", trans}, {"dim", d}};
}

inline Alignment alignment_from_json(const nlohmann::json& j) {
  const int d = j.at("dim").get<int>();
  const auto rot = j.at("rotation_row_major").get<std::vector<double>>();
  const auto trans = j.at("translation").get<std::vector<double>>();
  if (static_cast<int>(rot.size()) != d * d || static_cast<int>(trans.size()) != d)
    throw InvalidArgument("malformed alignment record");
  Alignment a{Matrix(d, d), Vector(d)};
  for (int i = 0; i < d; ++i)
    for (int k = 0; k < d; ++k)
      a.rotation(i, k) = rot[static_cast<size_t>(i * d + k)];
  for (int k = 0; k < d; ++k) a.translation(k) = trans[static_cast<size_t>(k)];
  return a;
}

inline nlohmann::json matching_to_json(const Matching& m) {
  bool ident = m.bijective;
  for (int i = 0; ident && i < m.size(); ++i) ident = m(i) == i;
  if (ident) return "identity";
  return nlohmann::json{{"map", m.map}, {"bijective", m.bijective}};
}

inline Matching matching_from_json(const nlohmann::json& j, int n) {
  if (j.is_string() && j.get<std::string>() == "identity")
    return Matching::identity(n);
  Matching m;
  m.map = j.at("map").get<std::vector<int>>();
  m.bijective = j.at("bijective").get<bool>();
  return m;
}

inline nlohmann::json instance_to_json(const InstanceSpec& s) {
  return {{"source", s.source.empty() ? "synthetic" : s.source},
          {"n", s.n},
          {"d", s.d},
          {"sigma2", s.sigma2},
          {"translation_bound", s.translation_bound},
          {"shuffle", s.shuffle},
          {"outlier_fraction", s.outlier_fraction},
          {"outlier_sigma2", s.outlier_sigma2},
          {"seed", s.seed}};
}

inline InstanceSpec instance_from_json(const nlohmann::json& j) {
  InstanceSpec s;
  const std::string src = j.at("source").get<std::string>();
  s.source = src == "synthetic" ? "" : src;
  s.n = j.at("n").get<int>();
  s.d = j.at("d").get<int>();
  s.sigma2 = j.at("sigma2").get<double>();
  s.translation_bound = j.at("translation_bound").get<double>();
  s.shuffle = j.at("shuffle").get<bool>();
  s.outlier_fraction = j.at("outlier_fraction").get<double>();
  s.outlier_sigma2 = j.at("outlier_sigma2").get<double>();
  s.seed = j.at("seed").get<std::uint64_t>();
  return s;
}

}  // namespace detail

inline nlohmann::json report_to_json(const RunReport& r) {
  nlohmann::json j{{"schema", 1},
                   {"algorithm", r.algorithm},
                   {"instance", detail::instance_to_json(r.instance)},
                   {"cost_spec", format_cost_spec(r.cost_spec)},
                   {"alignment", detail::alignment_to_json(r.alignment)},
                   {"cost", r.cost},
                   {"candidates_evaluated", r.candidates_evaluated},
                   {"wall_time_seconds", r.wall_time_seconds},
                   {"seed", r.seed}};
  if (r.matching) j["matching"] = detail::matching_to_json(*r.matching);
  if (r.optimal_ssd_cost) j["optimal_ssd_cost"] = *r.optimal_ssd_cost;
  if (r.ratio) j["ratio"] = *r.ratio;
  if (r.match_recovery) j["match_recovery"] = *r.match_recovery;
  if (!r.note.empty()) j["note"] = r.note;
  return j;
}

inline RunReport report_from_json(const nlohmann::json& j) {
  RunReport r;
  if (j.at("schema").get<int>() != 1)
    throw InvalidArgument("unsupported report schema");
  r.algorithm = j.at("algorithm").get<std::string>();
  r.instance = detail::instance_from_json(j.at("instance"));
  r.cost_spec = parse_cost_spec(j.at("cost_spec").get<std::string>());
  r.alignment = detail::alignment_from_json(j.at("alignment"));
  r.cost = j.at("cost").get<double>();
  r.candidates_evaluated = j.at("candidates_evaluated").get<long>();
  r.wall_time_seconds = j.at("wall_time_seconds").get<double>();
  r.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("matching"))
    r.matching = detail::matching_from_json(j.at("matching"), r.instance.n);
  if (j.contains("optimal_ssd_cost"))
    r.optimal_ssd_cost = j.at("optimal_ssd_cost").get<double>();
  if (j.contains("ratio")) r.ratio = j.at("ratio").get<double>();
  if (j.contains("match_recovery"))
    r.match_recovery = j.at("match_recovery").get<double>();
  if (j.contains("note")) r.note = j.at("note").get<std::string>();
  return r;
}

inline void save_report(const RunReport& r, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << report_to_json(r).dump(2) << "\n";
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline RunReport load_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  nlohmann::json j;
  in >> j;
  return report_from_json(j);
}

/// Ground-truth sidecar for a generated instance.
inline nlohmann::json truth_to_json(const GeneratedInstance& g) {
  return {{"schema", 1},
          {"true_alignment", detail::alignment_to_json(g.true_alignment)},
          {"true_matching", detail::matching_to_json(g.true_matching)},
          {"outlier_indices", g.outlier_indices}};
}

struct TruthRecord {
  Alignment true_alignment;
  Matching true_matching;
  std::vector<int> outlier_indices;
};

inline TruthRecord truth_from_json(const nlohmann::json& j, int n) {
  TruthRecord t;
  t.true_alignment = detail::alignment_from_json(j.at("true_alignment"));
  t.true_matching = detail::matching_from_json(j.at("true_matching"), n);
  t.outlier_indices = j.at("outlier_indices").get<std::vector<int>>();
  return t;
}

inline void save_truth(const GeneratedInstance& g, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << truth_to_json(g).dump(2) << "\n";
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline TruthRecord load_truth(const std::string& path, int n) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  nlohmann::json j;
  in >> j;
  return truth_from_json(j, n);
}

}  // namespace ralign
