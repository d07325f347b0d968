#pragma once

#include "ralign/core.hpp"
#include "ralign/cost.hpp"
#include "ralign/geom.hpp"

#include <algorithm>
#include <random>
#include <thread>
#include <vector>

namespace ralign {

/// A pivot pair plus the d-1 ordered rotation pairs that generate one
/// candidate alignment.
struct WitnessTuple {
  int pivot = 0;
  std::vector<int> rotation_indices;
};

struct Candidate {
  Alignment alignment;
  WitnessTuple tuple;
};

struct CandidateSet {
  std::vector<Candidate> alignments;

  int size() const { return static_cast<int>(alignments.size()); }
  bool empty() const { return alignments.empty(); }
  auto begin() const { return alignments.begin(); }
  auto end() const { return alignments.end(); }
};

namespace detail {

/// Subspace of `sub` orthogonal to q (q assumed to lie in `sub`).
inline Subspace intersect_complement(const Subspace& sub, const Vector& q) {
  const Vector u = q.normalized();
  Matrix shifted = sub.basis - u * (u.transpose() * sub.basis);
  // Gram-Schmidt over the shifted columns; exactly one drops out.
  std::vector<Vector> cols;
  for (int k = 0; k < shifted.cols(); ++k) {
    Vector v = shifted.col(k);
    for (const auto& c : cols) v -= c.dot(v) * c;
    for (const auto& c : cols) v -= c.dot(v) * c;
    if (v.norm() < 1e-10) continue;
    cols.push_back(v.normalized());
  }
  Matrix b(sub.ambient_dim, static_cast<int>(cols.size()));
  for (int k = 0; k < b.cols(); ++k) b.col(k) = cols[static_cast<size_t>(k)];
  return Subspace(b, sub.ambient_dim);
}

inline Matrix get_rot_impl(std::vector<Vector> P, std::vector<Vector> Q,
                           Subspace subspace, double degeneracy_scale,
                           bool top_level) {
  const int d = subspace.ambient_dim;
  const int tau = subspace.dim();
  if (tau < 2 || P.empty()) return Matrix::Identity(d, d);

  const double tol = 1e-12 * degeneracy_scale;
  if (P.front().norm() <= tol || Q.front().norm() <= tol) {
    if (top_level) throw InvalidArgument("zero-norm leading pair");
    // A vanished pair imposes no direction constraint; the remaining
    // rotation levels collapse to the identity.
    return Matrix::Identity(d, d);
  }

  const Matrix r = rotation_aligning_directions(P.front(), Q.front(), subspace);
  if (tau == 2 || P.size() == 1) return r;

  const Vector u = Q.front().normalized();
  const Subspace inner = intersect_complement(subspace, Q.front());

  std::vector<Vector> Pp, Qp;
  Pp.reserve(P.size() - 1);
  Qp.reserve(Q.size() - 1);
  for (size_t i = 1; i < P.size(); ++i) {
    Vector rp = r * P[i];
    Pp.push_back(rp - u * u.dot(rp));
    Qp.push_back(Q[i] - u * u.dot(Q[i]));
  }
  const Matrix s = get_rot_impl(std::move(Pp), std::move(Qp), inner,
                                degeneracy_scale, false);
  return s * r;
}

}  // namespace detail

/// Recursive direction alignment: returns R in R_subspace with
/// R p_1 / |p_1| = q_1 / |q_1|, and the pairs j >= 2 aligned after
/// sequential projection onto the complements of q_1, ..., q_{j-1}.
inline Matrix get_rot(const std::vector<Vector>& Psub,
                      const std::vector<Vector>& Qsub,
                      const Subspace& subspace) {
  if (Psub.size() != Qsub.size())
    throw InvalidArgument("witness subset size mismatch");
  if (subspace.dim() < 2) throw InvalidArgument("subspace dimension < 2");
  if (Psub.empty()) throw InvalidArgument("empty witness subset");
  double scale = 0.0;
  for (const auto& p : Psub) scale = std::max(scale, p.norm());
  for (const auto& q : Qsub) scale = std::max(scale, q.norm());
  if (scale == 0.0) scale = 1.0;
  return detail::get_rot_impl(Psub, Qsub, subspace, scale, true);
}

namespace detail {

inline Candidate make_candidate(const PointCloud& P, const PointCloud& Q,
                                const WitnessTuple& tuple) {
  const int d = P.dim;
  const Vector& pc = P[tuple.pivot];
  const Vector& qc = Q[tuple.pivot];
  std::vector<Vector> Psub, Qsub;
  Psub.reserve(tuple.rotation_indices.size());
  Qsub.reserve(tuple.rotation_indices.size());
  for (int j : tuple.rotation_indices) {
    Psub.push_back(P[j] - pc);
    Qsub.push_back(Q[j] - qc);
  }
  const Matrix r = get_rot(Psub, Qsub, Subspace::full(d));
  return Candidate{Alignment{r, r * pc - qc}, tuple};
}

inline bool tuple_degenerate(const PointCloud& P, const PointCloud& Q,
                             int pivot, int lead, double tol) {
  return (P[lead] - P[pivot]).norm() < tol || (Q[lead] - Q[pivot]).norm() < tol;
}

}  // namespace detail

/// All candidates (R, R p_i - q_i) from every pivot i and every ordered
/// (d-1)-tuple of distinct non-pivot indices whose leading centered pair is
/// nondegenerate.
inline CandidateSet approx_alignment_exhaustive(const PointCloud& P,
                                                const PointCloud& Q) {
  const int n = P.size();
  const int d = P.dim;
  if (Q.size() != n || Q.dim != d) throw InvalidArgument("cloud mismatch");
  if (n < d) throw InvalidArgument("need at least d points");
  if (d < 2) throw InvalidArgument("dimension must be >= 2");
  const double tol = 1e-12 * std::max(P.bbox_diameter(), Q.bbox_diameter());

  CandidateSet out;
  std::vector<int> tuple(static_cast<size_t>(d - 1));
  std::vector<bool> used(static_cast<size_t>(n), false);

  for (int pivot = 0; pivot < n; ++pivot) {
    // Ordered tuples of distinct non-pivot indices, depth-first.
    auto recurse = [&](auto&& self, int depth) -> void {
      if (depth == d - 1) {
        WitnessTuple w{pivot, tuple};
        out.alignments.push_back(detail::make_candidate(P, Q, w));
        return;
      }
      for (int j = 0; j < n; ++j) {
        if (j == pivot || used[static_cast<size_t>(j)]) continue;
        if (depth == 0 && detail::tuple_degenerate(P, Q, pivot, j, tol))
          continue;
        used[static_cast<size_t>(j)] = true;
        tuple[static_cast<size_t>(depth)] = j;
        self(self, depth + 1);
        used[static_cast<size_t>(j)] = false;
      }
    };
    recurse(recurse, 0);
  }
  return out;
}

/// beta uniformly sampled witness tuples (pivot uniform, ordered tuple
/// uniform without replacement among non-pivot indices). Degenerate tuples
/// are resampled, up to 10*beta attempts in total.
inline CandidateSet approx_alignment_sampled(const PointCloud& P,
                                             const PointCloud& Q, int beta,
                                             std::uint64_t seed) {
  const int n = P.size();
  const int d = P.dim;
  if (Q.size() != n || Q.dim != d) throw InvalidArgument("cloud mismatch");
  if (n < d) throw InvalidArgument("need at least d points");
  if (beta < 1) throw InvalidArgument("beta must be positive");
  const double tol = 1e-12 * std::max(P.bbox_diameter(), Q.bbox_diameter());

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pivot_dist(0, n - 1);

  CandidateSet out;
  out.alignments.reserve(static_cast<size_t>(beta));
  long attempts = 0;
  const long max_attempts = 10L * beta;
  std::vector<int> pool;
  while (out.size() < beta) {
    if (attempts++ >= max_attempts)
      throw InvalidArgument("unable to sample a nondegenerate witness tuple");
    const int pivot = pivot_dist(rng);
    pool.clear();
    for (int j = 0; j < n; ++j)
      if (j != pivot) pool.push_back(j);
    // Partial Fisher-Yates for an ordered sample without replacement.
    WitnessTuple w{pivot, {}};
    w.rotation_indices.reserve(static_cast<size_t>(d - 1));
    for (int k = 0; k < d - 1; ++k) {
      std::uniform_int_distribution<int> pick(k, static_cast<int>(pool.size()) - 1);
      std::swap(pool[static_cast<size_t>(k)], pool[static_cast<size_t>(pick(rng))]);
      w.rotation_indices.push_back(pool[static_cast<size_t>(k)]);
    }
    if (detail::tuple_degenerate(P, Q, pivot, w.rotation_indices.front(), tol))
      continue;
    out.alignments.push_back(detail::make_candidate(P, Q, w));
  }
  return out;
}

/// Minimum-cost candidate; ties broken by generation order. The reduction is
/// a lexicographic min over (cost, index), so the result is independent of
/// the worker count.
inline std::pair<Alignment, double> best_alignment(const PointCloud& P,
                                                   const PointCloud& Q,
                                                   const CandidateSet& candidates,
                                                   const CostSpec& spec,
                                                   int jobs = 1) {
  if (candidates.empty()) throw InvalidArgument("empty candidate set");
  const int m = candidates.size();
  jobs = std::clamp(jobs, 1, m);

  struct Best {
    double cost = std::numeric_limits<double>::infinity();
    int index = -1;
  };
  auto scan = [&](int lo, int hi) {
    Best b;
    for (int i = lo; i < hi; ++i) {
      const double c =
          eval_cost(P, Q, candidates.alignments[static_cast<size_t>(i)].alignment, spec);
      if (b.index < 0 || c < b.cost) b = {c, i};
    }
    return b;
  };

  Best best;
  if (jobs == 1) {
    best = scan(0, m);
  } else {
    std::vector<Best> partial(static_cast<size_t>(jobs));
    std::vector<std::thread> workers;
    const int chunk = (m + jobs - 1) / jobs;
    for (int w = 0; w < jobs; ++w) {
      const int lo = w * chunk;
      const int hi = std::min(m, lo + chunk);
      workers.emplace_back([&, w, lo, hi] { partial[static_cast<size_t>(w)] = scan(lo, hi); });
    }
    for (auto& t : workers) t.join();
    for (const auto& b : partial) {
      if (b.index < 0) continue;
      if (best.index < 0 || b.cost < best.cost ||
          (b.cost == best.cost && b.index < best.index))
        best = b;
    }
  }
  return {candidates.alignments[static_cast<size_t>(best.index)].alignment, best.cost};
}

/// Streaming exhaustive search: visits every candidate of
/// approx_alignment_exhaustive without materializing the set, and terminates
/// SumAll cost accumulation early once a candidate cannot beat the incumbent.
/// The result matches best_alignment over the materialized set and is
/// independent of the worker count (lexicographic (cost, pivot, ordinal)
/// reduction).
struct BestSearchResult {
  Alignment alignment;
  double cost = 0.0;
  long candidates = 0;
};

inline BestSearchResult best_alignment_exhaustive(const PointCloud& P,
                                                  const PointCloud& Q,
                                                  const CostSpec& spec,
                                                  int jobs = 1) {
  const int n = P.size();
  const int d = P.dim;
  if (Q.size() != n || Q.dim != d) throw InvalidArgument("cloud mismatch");
  if (n < d) throw InvalidArgument("need at least d points");
  if (d < 2) throw InvalidArgument("dimension must be >= 2");
  const double tol = 1e-12 * std::max(P.bbox_diameter(), Q.bbox_diameter());
  const bool sum_all = spec.aggregator.kind == Aggregator::Kind::SumAll;

  struct Best {
    double cost = std::numeric_limits<double>::infinity();
    int pivot = -1;
    long ord = -1;
    Alignment alignment;
    long seen = 0;
  };

  auto scan_pivots = [&](int lo, int hi) {
    Best best;
    std::vector<int> tuple(static_cast<size_t>(d - 1));
    std::vector<bool> used(static_cast<size_t>(n), false);
    std::vector<double> losses;
    for (int pivot = lo; pivot < hi; ++pivot) {
      long ord = 0;
      auto recurse = [&](auto&& self, int depth) -> void {
        if (depth == d - 1) {
          const Candidate cand =
              detail::make_candidate(P, Q, WitnessTuple{pivot, tuple});
          ++best.seen;
          double c;
          if (sum_all) {
            c = 0.0;
            for (int i = 0; i < n; ++i) {
              c += spec.loss(spec.distance(cand.alignment.apply(P[i]), Q[i]));
              if (c > best.cost) break;
            }
          } else {
            c = eval_cost(P, Q, cand.alignment, spec);
          }
          if (c < best.cost) {
            best.cost = c;
            best.pivot = pivot;
            best.ord = ord;
            best.alignment = cand.alignment;
          }
          ++ord;
          return;
        }
        for (int j = 0; j < n; ++j) {
          if (j == pivot || used[static_cast<size_t>(j)]) continue;
          if (depth == 0 && detail::tuple_degenerate(P, Q, pivot, j, tol))
            continue;
          used[static_cast<size_t>(j)] = true;
          tuple[static_cast<size_t>(depth)] = j;
          self(self, depth + 1);
          used[static_cast<size_t>(j)] = false;
        }
      };
      recurse(recurse, 0);
    }
    return best;
  };

  jobs = std::clamp(jobs, 1, n);
  Best best;
  if (jobs == 1) {
    best = scan_pivots(0, n);
  } else {
    std::vector<Best> partial(static_cast<size_t>(jobs));
    std::vector<std::thread> workers;
    const int chunk = (n + jobs - 1) / jobs;
    for (int w = 0; w < jobs; ++w) {
      const int lo = w * chunk;
      const int hi = std::min(n, lo + chunk);
      workers.emplace_back(
          [&, w, lo, hi] { partial[static_cast<size_t>(w)] = scan_pivots(lo, hi); });
    }
    for (auto& t : workers) t.join();
    for (const auto& b : partial) {
      best.seen += b.seen;
      if (b.pivot < 0) continue;
      if (best.pivot < 0 || b.cost < best.cost ||
          (b.cost == best.cost &&
           (b.pivot < best.pivot ||
            (b.pivot == best.pivot && b.ord < best.ord)))) {
        const long seen = best.seen;
        best = b;
        best.seen = seen;
      }
    }
  }
  if (best.pivot < 0) throw InvalidArgument("no nondegenerate witness tuple");
  return {best.alignment, best.cost, best.seen};
}

}  // namespace ralign
