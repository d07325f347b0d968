#pragma once

#include "ralign/core.hpp"
#include "ralign/cost.hpp"
#include "ralign/geom.hpp"
#include "ralign/kdtree.hpp"
#include "ralign/witness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace ralign {

struct RegistrationResult {
  Alignment alignment;
  Matching matching;
  double cost = 0.0;
  long candidates_evaluated = 0;
  double wall_time = 0.0;
  // Empty when the theoretical guarantee applies; set for configurations the
  // bounds do not cover (e.g. trimmed aggregator without a given matching).
  std::string note;
};

/// Enumeration budget for the subset-pair search.
struct WitnessBudget {
  bool exhaustive = true;
  int beta = 0;

  static WitnessBudget all() { return {true, 0}; }
  static WitnessBudget sampled(int beta) { return {false, beta}; }
};

/// m(i) = argmin_j |R p_i - t - q_j|, ties to the lowest Q-index.
inline Matching nearest_neighbor_match(const PointCloud& P, const PointCloud& Q,
                                       const Alignment& a) {
  if (Q.empty()) throw InvalidArgument("empty target cloud");
  NearestNeighborIndex index(Q);
  Matching m;
  m.map.reserve(P.points.size());
  for (const auto& p : P.points) m.map.push_back(index.nearest(a.apply(p)));
  m.bijective = false;
  return m;
}

namespace detail {

inline Matching nearest_neighbor_match_indexed(const PointCloud& P,
                                               const NearestNeighborIndex& index,
                                               const Alignment& a) {
  Matching m;
  m.map.reserve(P.points.size());
  for (const auto& p : P.points) m.map.push_back(index.nearest(a.apply(p)));
  m.bijective = false;
  return m;
}

}  // namespace detail

/// Exact minimum-cost assignment (Kuhn's algorithm with potentials, O(n^3)).
/// Returns the permutation row -> column and the optimal total cost.
inline std::pair<std::vector<int>, double> hungarian_match(
    const std::vector<std::vector<double>>& cost) {
  const int n = static_cast<int>(cost.size());
  if (n == 0) return {{}, 0.0};
  for (const auto& row : cost) {
    if (static_cast<int>(row.size()) != n)
      throw InvalidArgument("cost matrix must be square");
    for (double v : row)
      if (!std::isfinite(v)) throw InvalidArgument("non-finite cost entry");
  }

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<size_t>(n + 1), 0.0);
  std::vector<double> v(static_cast<size_t>(n + 1), 0.0);
  std::vector<int> p(static_cast<size_t>(n + 1), 0);     // column -> row (1-based)
  std::vector<int> way(static_cast<size_t>(n + 1), 0);

  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<size_t>(n + 1), inf);
    std::vector<char> used(static_cast<size_t>(n + 1), 0);
    do {
      used[static_cast<size_t>(j0)] = 1;
      const int i0 = p[static_cast<size_t>(j0)];
      double delta = inf;
      int j1 = -1;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<size_t>(j)]) continue;
        const double cur = cost[static_cast<size_t>(i0 - 1)][static_cast<size_t>(j - 1)] -
                           u[static_cast<size_t>(i0)] - v[static_cast<size_t>(j)];
        if (cur < minv[static_cast<size_t>(j)]) {
          minv[static_cast<size_t>(j)] = cur;
          way[static_cast<size_t>(j)] = j0;
        }
        if (minv[static_cast<size_t>(j)] < delta) {
          delta = minv[static_cast<size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<size_t>(j)]) {
          u[static_cast<size_t>(p[static_cast<size_t>(j)])] += delta;
          v[static_cast<size_t>(j)] -= delta;
        } else {
          minv[static_cast<size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<size_t>(j0)];
      p[static_cast<size_t>(j0)] = p[static_cast<size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> assignment(static_cast<size_t>(n), -1);
  double total = 0.0;
  for (int j = 1; j <= n; ++j) {
    const int i = p[static_cast<size_t>(j)];
    assignment[static_cast<size_t>(i - 1)] = j - 1;
    total += cost[static_cast<size_t>(i - 1)][static_cast<size_t>(j - 1)];
  }
  return {assignment, total};
}

/// Closed-form global minimizer of sum |R p_i - t - q_{m(i)}|^2 via the
/// cross-covariance SVD, with the determinant sign correction applied to the
/// smallest singular direction.
inline Alignment kabsch_ssd(const PointCloud& P, const PointCloud& Q,
                            const Matching* matching = nullptr) {
  const int n = P.size();
  const int d = P.dim;
  if (matching == nullptr && Q.size() != n)
    throw InvalidArgument("cloud size mismatch");
  if (n < d) throw InvalidArgument("need at least d matched pairs");

  auto target = [&](int i) -> const Vector& {
    return matching ? Q[(*matching)(i)] : Q[i];
  };

  Vector p_bar = Vector::Zero(d), q_bar = Vector::Zero(d);
  for (int i = 0; i < n; ++i) {
    p_bar += P[i];
    q_bar += target(i);
  }
  p_bar /= n;
  q_bar /= n;

  Matrix h = Matrix::Zero(d, d);
  for (int i = 0; i < n; ++i)
    h += (P[i] - p_bar) * (target(i) - q_bar).transpose();

  Eigen::JacobiSVD<Matrix> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Matrix corr = Matrix::Identity(d, d);
  corr(d - 1, d - 1) = (svd.matrixV() * svd.matrixU().transpose()).determinant();
  const Matrix r = svd.matrixV() * corr * svd.matrixU().transpose();
  return Alignment{r, r * p_bar - q_bar};
}

/// Classic ICP: alternate nearest-neighbor matching and the SSD solver.
/// The matched SSD is nonincreasing across iterations.
inline RegistrationResult icp(const PointCloud& P, const PointCloud& Q,
                              const Alignment& init, int max_iters = 100,
                              double rel_tol = 1e-8) {
  if (P.empty() || Q.empty()) throw InvalidArgument("empty cloud");
  const auto t0 = std::chrono::steady_clock::now();
  NearestNeighborIndex index(Q);

  Alignment a = init;
  Matching m = detail::nearest_neighbor_match_indexed(P, index, a);
  double prev = std::numeric_limits<double>::infinity();
  double ssd = prev;
  const CostSpec ssd_spec = CostSpec::ssd();
  int iters = 0;
  for (; iters < max_iters; ++iters) {
    a = kabsch_ssd(P, Q, &m);
    ssd = eval_matched_cost(P, Q, m, a, ssd_spec);
    if (prev - ssd <= rel_tol * std::max(prev, 1e-300)) {
      prev = ssd;
      break;
    }
    prev = ssd;
    m = detail::nearest_neighbor_match_indexed(P, index, a);
  }
  // Final matching consistent with the final alignment.
  m = detail::nearest_neighbor_match_indexed(P, index, a);
  RegistrationResult res;
  res.alignment = a;
  res.matching = m;
  res.cost = eval_matched_cost(P, Q, m, a, ssd_spec);
  res.candidates_evaluated = iters;
  res.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

namespace detail {

inline Matching bijective_match(const PointCloud& P, const PointCloud& Q,
                                const Alignment& a, const CostSpec& spec) {
  const int n = P.size();
  if (Q.size() != n)
    throw InvalidArgument("bijective matching requires equal sizes");
  std::vector<std::vector<double>> cost(static_cast<size_t>(n),
                                        std::vector<double>(static_cast<size_t>(n)));
  for (int i = 0; i < n; ++i) {
    const Vector pi = a.apply(P[i]);
    for (int j = 0; j < n; ++j)
      cost[static_cast<size_t>(i)][static_cast<size_t>(j)] =
          spec.loss(spec.distance(pi, Q[j]));
  }
  Matching m;
  m.map = hungarian_match(cost).first;
  m.bijective = true;
  return m;
}

}  // namespace detail

/// The registration search: enumerate (or sample) pairs of d-subsets of P
/// and Q, collect the candidate alignments each pair generates, match per
/// candidate (nearest neighbor, or optimal bijection), and keep the pair
/// minimizing the matched cost.
inline RegistrationResult align_and_match(const PointCloud& P, const PointCloud& Q,
                                          const CostSpec& spec,
                                          const WitnessBudget& budget,
                                          std::uint64_t seed,
                                          bool bijective = false) {
  const int n = P.size();
  const int nq = Q.size();
  const int d = P.dim;
  if (Q.dim != d) throw InvalidArgument("dimension mismatch");
  if (n < d || nq < d) throw InvalidArgument("need at least d points per cloud");
  if (bijective && n != nq)
    throw InvalidArgument("bijective mode requires equal sizes");

  const auto t0 = std::chrono::steady_clock::now();
  NearestNeighborIndex index(Q);

  RegistrationResult best;
  best.cost = std::numeric_limits<double>::infinity();
  bool found = false;
  long evaluated = 0;

  auto consider_pair = [&](const std::vector<int>& p_idx,
                           const std::vector<int>& q_idx) {
    PointCloud Ps(d), Qs(d);
    for (int k = 0; k < d; ++k) {
      Ps.push_back(P[p_idx[static_cast<size_t>(k)]]);
      Qs.push_back(Q[q_idx[static_cast<size_t>(k)]]);
    }
    CandidateSet cands;
    try {
      cands = approx_alignment_exhaustive(Ps, Qs);
    } catch (const InvalidArgument&) {
      return;  // fully degenerate subset
    }
    for (const auto& cand : cands.alignments) {
      Matching m = bijective
                       ? detail::bijective_match(P, Q, cand.alignment, spec)
                       : detail::nearest_neighbor_match_indexed(P, index,
                                                                cand.alignment);
      const double c = eval_matched_cost(P, Q, m, cand.alignment, spec);
      ++evaluated;
      if (!found || c < best.cost) {
        found = true;
        best.alignment = cand.alignment;
        best.matching = std::move(m);
        best.cost = c;
      }
    }
  };

  if (budget.exhaustive) {
    // Unordered d-subsets of P against ordered d-tuples of Q: every distinct
    // pairing appears exactly once.
    std::vector<int> p_idx(static_cast<size_t>(d));
    std::vector<int> q_idx(static_cast<size_t>(d));
    std::vector<bool> q_used(static_cast<size_t>(nq), false);
    auto q_recurse = [&](auto&& self, int depth) -> void {
      if (depth == d) {
        consider_pair(p_idx, q_idx);
        return;
      }
      for (int j = 0; j < nq; ++j) {
        if (q_used[static_cast<size_t>(j)]) continue;
        q_used[static_cast<size_t>(j)] = true;
        q_idx[static_cast<size_t>(depth)] = j;
        self(self, depth + 1);
        q_used[static_cast<size_t>(j)] = false;
      }
    };
    auto p_recurse = [&](auto&& self, int depth, int start) -> void {
      if (depth == d) {
        q_recurse(q_recurse, 0);
        return;
      }
      for (int i = start; i < n; ++i) {
        p_idx[static_cast<size_t>(depth)] = i;
        self(self, depth + 1, i + 1);
      }
    };
    p_recurse(p_recurse, 0, 0);
  } else {
    if (budget.beta < 1) throw InvalidArgument("beta must be positive");
    std::mt19937_64 rng(seed);
    std::vector<int> p_pool(static_cast<size_t>(n));
    std::vector<int> q_pool(static_cast<size_t>(nq));
    std::iota(p_pool.begin(), p_pool.end(), 0);
    std::iota(q_pool.begin(), q_pool.end(), 0);
    std::vector<int> p_idx(static_cast<size_t>(d)), q_idx(static_cast<size_t>(d));
    for (int b = 0; b < budget.beta; ++b) {
      for (int k = 0; k < d; ++k) {
        std::uniform_int_distribution<int> pick_p(k, n - 1);
        std::swap(p_pool[static_cast<size_t>(k)], p_pool[static_cast<size_t>(pick_p(rng))]);
        p_idx[static_cast<size_t>(k)] = p_pool[static_cast<size_t>(k)];
        std::uniform_int_distribution<int> pick_q(k, nq - 1);
        std::swap(q_pool[static_cast<size_t>(k)], q_pool[static_cast<size_t>(pick_q(rng))]);
        q_idx[static_cast<size_t>(k)] = q_pool[static_cast<size_t>(k)];
      }
      consider_pair(p_idx, q_idx);
    }
  }

  if (!found) throw InvalidArgument("no nondegenerate subset pair found");
  best.candidates_evaluated = evaluated;
  if (spec.aggregator.kind == Aggregator::Kind::SumSmallest)
    best.note = "heuristic (no guarantee)";
  best.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return best;
}

/// Registration followed by a single ICP refinement; reports whichever of
/// the two results has the lower cost under `spec`.
inline RegistrationResult p_icp_refined(const PointCloud& P, const PointCloud& Q,
                                        const CostSpec& spec,
                                        const WitnessBudget& budget,
                                        std::uint64_t seed,
                                        bool bijective = false) {
  const auto t0 = std::chrono::steady_clock::now();
  RegistrationResult coarse = align_and_match(P, Q, spec, budget, seed, bijective);

  const PointCloud transformed = apply_alignment(P, coarse.alignment);
  const RegistrationResult refined_icp =
      icp(transformed, Q, Alignment::identity(P.dim));
  const Alignment composed = refined_icp.alignment.after(coarse.alignment);
  Matching m = bijective ? detail::bijective_match(P, Q, composed, spec)
                         : nearest_neighbor_match(P, Q, composed);
  const double refined_cost = eval_matched_cost(P, Q, m, composed, spec);

  RegistrationResult out;
  if (refined_cost <= coarse.cost) {
    out.alignment = composed;
    out.matching = std::move(m);
    out.cost = refined_cost;
  } else {
    out = coarse;
  }
  out.note = coarse.note;
  out.candidates_evaluated = coarse.candidates_evaluated + refined_icp.candidates_evaluated;
  out.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace ralign
