#pragma once

#include "ralign/core.hpp"
#include "ralign/geom.hpp"
#include "ralign/witness.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace ralign {

/// Norm-power sampling weights: w_i proportional to |p_i|^r, zeroed when
/// |q_i| = 0. all_zero is set when no index is eligible.
struct SampleWeights {
  std::vector<double> weights;
  bool all_zero = false;
};

inline SampleWeights sample_weights(const std::vector<Vector>& P,
                                    const std::vector<Vector>& Q, double r) {
  SampleWeights w;
  w.weights.resize(P.size(), 0.0);
  double total = 0.0;
  for (size_t i = 0; i < P.size(); ++i) {
    if (Q[i].norm() == 0.0) continue;
    w.weights[i] = std::pow(P[i].norm(), r);
    total += w.weights[i];
  }
  if (total <= 0.0) {
    // Fall back to uniform over pairs with both norms nonzero.
    int eligible = 0;
    for (size_t i = 0; i < P.size(); ++i)
      if (P[i].norm() > 0.0 && Q[i].norm() > 0.0) ++eligible;
    if (eligible == 0) {
      w.all_zero = true;
      return w;
    }
    for (size_t i = 0; i < P.size(); ++i)
      w.weights[i] =
          (P[i].norm() > 0.0 && Q[i].norm() > 0.0) ? 1.0 / eligible : 0.0;
    return w;
  }
  for (auto& x : w.weights) x /= total;
  return w;
}

namespace detail {

/// Cumulative-sum inversion; weights assumed normalized.
inline int sample_index(const std::vector<double>& weights,
                        std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng);
  double acc = 0.0;
  int last = -1;
  for (size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    acc += weights[i];
    last = static_cast<int>(i);
    if (u < acc) return last;
  }
  return last;
}

inline Matrix prob_rot_impl(std::vector<Vector> P, std::vector<Vector> Q,
                            double r, Subspace subspace, std::mt19937_64& rng,
                            unsigned long* point_visits) {
  const int d = subspace.ambient_dim;
  const int j_dim = subspace.dim();
  if (j_dim < 2 || P.empty()) return Matrix::Identity(d, d);

  const SampleWeights w = sample_weights(P, Q, r);
  if (w.all_zero) return Matrix::Identity(d, d);
  const int j = sample_index(w.weights, rng);
  if (j < 0) return Matrix::Identity(d, d);

  const Matrix rot = rotation_aligning_directions(P[static_cast<size_t>(j)],
                                                  Q[static_cast<size_t>(j)],
                                                  subspace);
  if (j_dim == 2) return rot;

  const Vector u = Q[static_cast<size_t>(j)].normalized();
  const Subspace inner = detail::intersect_complement(subspace, Q[static_cast<size_t>(j)]);

  std::vector<Vector> Pp, Qp;
  Pp.reserve(P.size() - 1);
  Qp.reserve(Q.size() - 1);
  for (size_t i = 0; i < P.size(); ++i) {
    if (static_cast<int>(i) == j) continue;
    Vector rp = rot * P[i];
    Pp.push_back(rp - u * u.dot(rp));
    Qp.push_back(Q[i] - u * u.dot(Q[i]));
    if (point_visits) ++*point_visits;
  }
  const Matrix s = prob_rot_impl(std::move(Pp), std::move(Qp), r, inner, rng,
                                 point_visits);
  return s * rot;
}

}  // namespace detail

/// Norm-weighted recursive direction alignment over full clouds. Returns a
/// composed rotation in R_subspace; levels with no eligible pair contribute
/// the identity.
inline Matrix prob_rot(const PointCloud& P, const PointCloud& Q, double r,
                       const Subspace& subspace, std::mt19937_64& rng,
                       unsigned long* point_visits = nullptr) {
  if (P.size() != Q.size()) throw InvalidArgument("cloud size mismatch");
  if (P.empty()) throw InvalidArgument("empty cloud");
  return detail::prob_rot_impl(P.points, Q.points, r, subspace, rng,
                               point_visits);
}

/// The number of amplification iterations: ceil(1 / ln(2^d / (2^d - 1))).
inline int prob_alignment_iterations(int d) {
  const double pow2d = std::pow(2.0, d);
  return static_cast<int>(std::ceil(1.0 / std::log(pow2d / (pow2d - 1.0))));
}

/// Repeated-trial randomized alignment: each iteration picks a uniform pivot,
/// centers both clouds there, runs the weighted rotation recursion, and emits
/// the candidate (R, R p_j - q_j). Iterations use independent RNG streams
/// derived from (seed, iteration).
inline CandidateSet prob_alignment(const PointCloud& P, const PointCloud& Q,
                                   double r, std::uint64_t seed,
                                   int iterations_override = 0,
                                   unsigned long* point_visits = nullptr) {
  const int n = P.size();
  const int d = P.dim;
  if (Q.size() != n || Q.dim != d) throw InvalidArgument("cloud mismatch");
  if (n < 2) throw InvalidArgument("need at least 2 points");

  const int iters =
      iterations_override > 0 ? iterations_override : prob_alignment_iterations(d);

  CandidateSet out;
  out.alignments.reserve(static_cast<size_t>(iters));
  for (int it = 0; it < iters; ++it) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                      static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(it)};
    std::mt19937_64 rng(seq);
    std::uniform_int_distribution<int> pivot_dist(0, n - 1);
    const int j = pivot_dist(rng);

    std::vector<Vector> Pc, Qc;
    Pc.reserve(static_cast<size_t>(n - 1));
    Qc.reserve(static_cast<size_t>(n - 1));
    for (int i = 0; i < n; ++i) {
      if (i == j) continue;
      Pc.push_back(P[i] - P[j]);
      Qc.push_back(Q[i] - Q[j]);
      if (point_visits) ++*point_visits;
    }
    const Matrix rot = detail::prob_rot_impl(std::move(Pc), std::move(Qc), r,
                                             Subspace::full(d), rng,
                                             point_visits);
    out.alignments.push_back(
        Candidate{Alignment{rot, rot * P[j] - Q[j]}, WitnessTuple{j, {}}});
  }
  return out;
}

}  // namespace ralign
