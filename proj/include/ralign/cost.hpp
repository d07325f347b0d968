#pragma once

#include "ralign/core.hpp"
#include "ralign/geom.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace ralign {

/// Inner distance D(p,q) = |p-q|_z for z > 0 (a quasi-norm when z < 1).
struct InnerDistance {
  double z = 2.0;

  double norm(const Vector& u) const {
    if (z == 2.0) return u.norm();
    if (z == 1.0) return u.lpNorm<1>();
    double acc = 0.0;
    for (int k = 0; k < u.size(); ++k) acc += std::pow(std::abs(u(k)), z);
    return std::pow(acc, 1.0 / z);
  }

  double operator()(const Vector& p, const Vector& q) const {
    return norm(p - q);
  }
};

/// Outer per-pair loss. Power: x^r. Threshold: min{x^r, T}. Huber: x^2/2
/// below delta, delta*(x - delta/2) above.
struct OuterLoss {
  enum class Kind { Power, Threshold, Huber };
  Kind kind = Kind::Power;
  double r = 2.0;      // Power / Threshold exponent
  double cap = 0.0;    // Threshold T
  double delta = 1.0;  // Huber knee

  static OuterLoss power(double r) { return {Kind::Power, r, 0.0, 1.0}; }
  static OuterLoss threshold(double r, double cap) {
    return {Kind::Threshold, r, cap, 1.0};
  }
  static OuterLoss huber(double delta) { return {Kind::Huber, 2.0, 0.0, delta}; }

  /// The declared log-Lipschitz constant: r for Power/Threshold, 2 for Huber
  /// (the quadratic regime dominates the growth ratio for c >= 1).
  double log_lipschitz() const { return kind == Kind::Huber ? 2.0 : r; }

  double operator()(double x) const {
    if (x < 0.0) throw InvalidArgument("loss input must be nonnegative");
    switch (kind) {
      case Kind::Power:
        return std::pow(x, r);
      case Kind::Threshold:
        return std::min(std::pow(x, r), cap);
      case Kind::Huber:
        return x <= delta ? 0.5 * x * x : delta * (x - 0.5 * delta);
    }
    return 0.0;
  }
};

/// Aggregator over per-pair losses. SumAll is the l1 norm; SumSmallest drops
/// the k largest entries (outlier trimming), k resolved against n at call
/// time when given as a fraction.
struct Aggregator {
  enum class Kind { SumAll, SumSmallest };
  Kind kind = Kind::SumAll;
  // Exactly one of these is used for SumSmallest: a fixed drop count, or a
  // fraction of n rounded at evaluation time.
  int drop_count = 0;
  double drop_fraction = -1.0;

  static Aggregator sum_all() { return {}; }
  static Aggregator trim_count(int k) { return {Kind::SumSmallest, k, -1.0}; }
  static Aggregator trim_fraction(double f) {
    return {Kind::SumSmallest, 0, f};
  }

  double log_lipschitz() const { return 1.0; }

  int resolve_drop(int n) const {
    int k = drop_fraction >= 0.0
                ? static_cast<int>(std::lround(drop_fraction * n))
                : drop_count;
    if (k < 0 || k >= n) throw InvalidArgument("trim count out of range");
    return k;
  }

  double operator()(std::vector<double>& losses) const {
    const int n = static_cast<int>(losses.size());
    if (n == 0) return 0.0;
    if (kind == Kind::SumAll)
      return std::accumulate(losses.begin(), losses.end(), 0.0);
    const int k = resolve_drop(n);
    std::nth_element(losses.begin(), losses.begin() + (n - k), losses.end());
    return std::accumulate(losses.begin(), losses.begin() + (n - k), 0.0);
  }
};

struct CostSpec {
  InnerDistance distance;
  OuterLoss loss;
  Aggregator aggregator;

  static CostSpec ssd() {
    return {InnerDistance{2.0}, OuterLoss::power(2.0), Aggregator::sum_all()};
  }

  bool is_ssd() const {
    return distance.z == 2.0 && loss.kind == OuterLoss::Kind::Power &&
           loss.r == 2.0 && aggregator.kind == Aggregator::Kind::SumAll;
  }
};

/// Constants of the theory: log-Lipschitz exponents, the weak-triangle
/// factor rho = max{2^(r-1), 1}, and the norm-equivalence factor
/// c = d^|1/z - 1/2|.
struct TheoryConstants {
  double r = 1.0;
  double s = 1.0;
  double z = 2.0;
  int d = 0;
  double rho = 1.0;
  double c_norm = 1.0;
};

inline TheoryConstants lipschitz_constants(const CostSpec& spec, int d) {
  TheoryConstants k;
  k.r = spec.loss.log_lipschitz();
  k.s = spec.aggregator.log_lipschitz();
  k.z = spec.distance.z;
  k.d = d;
  k.rho = std::max(std::pow(2.0, k.r - 1.0), 1.0);
  k.c_norm = std::pow(static_cast<double>(d), std::abs(1.0 / k.z - 0.5));
  return k;
}

/// The worst-case approximation factor w^(rs) * (1+sqrt(2))^(d*r*s) with
/// w = d^|1/z - 1/2|.
inline double theoretical_factor(const CostSpec& spec, int d) {
  const TheoryConstants k = lipschitz_constants(spec, d);
  const double w = k.c_norm;
  return std::pow(w, k.r * k.s) *
         std::pow(1.0 + std::sqrt(2.0), d * k.r * k.s);
}

inline double eval_loss(const OuterLoss& loss, double x) { return loss(x); }

/// Identity-matched cost: aggregator over loss(D(R p_i - t, q_i)).
inline double eval_cost(const PointCloud& P, const PointCloud& Q,
                        const Alignment& a, const CostSpec& spec) {
  if (P.size() != Q.size()) throw InvalidArgument("cloud size mismatch");
  if (P.dim != Q.dim || a.dim() != P.dim)
    throw InvalidArgument("dimension mismatch");
  std::vector<double> losses;
  losses.reserve(P.points.size());
  for (int i = 0; i < P.size(); ++i)
    losses.push_back(spec.loss(spec.distance(a.apply(P[i]), Q[i])));
  return spec.aggregator(losses);
}

/// Correspondence function from P-indices to Q-indices.
struct Matching {
  std::vector<int> map;
  bool bijective = false;

  static Matching identity(int n) {
    Matching m;
    m.map.resize(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) m.map[static_cast<size_t>(i)] = i;
    m.bijective = true;
    return m;
  }

  int operator()(int i) const { return map[static_cast<size_t>(i)]; }
  int size() const { return static_cast<int>(map.size()); }
};

inline double eval_matched_cost(const PointCloud& P, const PointCloud& Q,
                                const Matching& m, const Alignment& a,
                                const CostSpec& spec) {
  if (m.size() != P.size()) throw InvalidArgument("matching size mismatch");
  std::vector<double> losses;
  losses.reserve(P.points.size());
  for (int i = 0; i < P.size(); ++i) {
    const int j = m(i);
    if (j < 0 || j >= Q.size()) throw InvalidArgument("matching out of range");
    losses.push_back(spec.loss(spec.distance(a.apply(P[i]), Q[j])));
  }
  return spec.aggregator(losses);
}

// -- text form ---------------------------------------------------------------
// "z=2,loss=power:2,agg=sum"
// "z=2,loss=thresh:2:0.2,agg=trim:0.2"
// "z=2,loss=huber:1,agg=sum"

inline CostSpec parse_cost_spec(const std::string& text) {
  CostSpec spec;
  std::stringstream ss(text);
  std::string item;
  auto split = [](const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream t(s);
    std::string part;
    while (std::getline(t, part, sep)) out.push_back(part);
    return out;
  };
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos)
      throw InvalidArgument("bad cost spec item: " + item);
    const std::string key = item.substr(0, eq);
    const std::string val = item.substr(eq + 1);
    if (key == "z") {
      spec.distance.z = std::stod(val);
      if (spec.distance.z <= 0.0) throw InvalidArgument("z must be positive");
    } else if (key == "loss") {
      const auto parts = split(val, ':');
      if (parts[0] == "power" && parts.size() == 2)
        spec.loss = OuterLoss::power(std::stod(parts[1]));
      else if (parts[0] == "thresh" && parts.size() == 3)
        spec.loss = OuterLoss::threshold(std::stod(parts[1]), std::stod(parts[2]));
      else if (parts[0] == "huber" && parts.size() == 2)
        spec.loss = OuterLoss::huber(std::stod(parts[1]));
      else
        throw InvalidArgument("bad loss spec: " + val);
    } else if (key == "agg") {
      const auto parts = split(val, ':');
      if (parts[0] == "sum" && parts.size() == 1)
        spec.aggregator = Aggregator::sum_all();
      else if (parts[0] == "trim" && parts.size() == 2)
        spec.aggregator = Aggregator::trim_fraction(std::stod(parts[1]));
      else if (parts[0] == "trim-k" && parts.size() == 2)
        spec.aggregator = Aggregator::trim_count(std::stoi(parts[1]));
      else
        throw InvalidArgument("bad aggregator spec: " + val);
    } else {
      throw InvalidArgument("unknown cost spec key: " + key);
    }
  }
  return spec;
}

inline std::string format_cost_spec(const CostSpec& spec) {
  std::ostringstream os;
  os << "z=" << spec.distance.z << ",loss=";
  switch (spec.loss.kind) {
    case OuterLoss::Kind::Power:
      os << "power:" << spec.loss.r;
      break;
    case OuterLoss::Kind::Threshold:
      os << "thresh:" << spec.loss.r << ":" << spec.loss.cap;
      break;
    case OuterLoss::Kind::Huber:
      os << "huber:" << spec.loss.delta;
      break;
  }
  os << ",agg=";
  if (spec.aggregator.kind == Aggregator::Kind::SumAll)
    os << "sum";
  else if (spec.aggregator.drop_fraction >= 0.0)
    os << "trim:" << spec.aggregator.drop_fraction;
  else
    os << "trim-k:" << spec.aggregator.drop_count;
  return os.str();
}

}  // namespace ralign
