#include "test_util.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

using namespace ralign;
using testutil::random_alignment;
using testutil::random_cloud;
using testutil::random_vector;

namespace {

Vector v2(double x, double y) {
  Vector v(2);
  v << x, y;
  return v;
}

Vector v3(double x, double y, double z) {
  Vector v(3);
  v << x, y, z;
  return v;
}

/// Checks the Get-Rot constraint chain: the composed rotation aligns the
/// leading pair, and each later pair after sequential projection onto the
/// complements of the earlier target directions.
void check_direction_chain(const std::vector<Vector>& P,
                           const std::vector<Vector>& Q, const Matrix& R) {
  std::vector<Vector> p, q;
  for (size_t i = 0; i < P.size(); ++i) {
    p.push_back(R * P[i]);
    q.push_back(Q[i]);
  }
  for (size_t j = 0; j < p.size(); ++j) {
    const double np = p[j].norm(), nq = q[j].norm();
    if (np < 1e-8 || nq < 1e-8) break;  // degenerate level: no constraint
    REQUIRE((p[j] / np - q[j] / nq).norm() < 1e-8);
    const Vector u = q[j] / nq;
    for (size_t i = j + 1; i < p.size(); ++i) {
      p[i] -= u * u.dot(p[i]);
      q[i] -= u * u.dot(q[i]);
    }
  }
}

}  // namespace

TEST_CASE("get_rot base case is the minimal-angle rotation") {
  const Matrix r = get_rot({v2(1, 0)}, {v2(0, 1)}, Subspace::full(2));
  Matrix expect(2, 2);
  expect << 0, -1, 1, 0;
  REQUIRE((r - expect).norm() < 1e-9);
}

TEST_CASE("get_rot composite rotation satisfies both constraints") {
  const std::vector<Vector> P{v3(1, 0, 0), v3(0, 1, 0)};
  const std::vector<Vector> Q{v3(0, 1, 0), v3(-1, 0, 0)};
  const Matrix r = get_rot(P, Q, Subspace::full(3));
  REQUIRE(is_rotation(r));
  check_direction_chain(P, Q, r);
}

TEST_CASE("get_rot on already-aligned pairs is the identity") {
  std::mt19937_64 rng(20);
  for (int it = 0; it < 50; ++it) {
    const int d = 2 + static_cast<int>(rng() % 3);
    std::vector<Vector> P;
    for (int j = 0; j < d - 1; ++j) P.push_back(random_vector(d, rng));
    const Matrix r = get_rot(P, P, Subspace::full(d));
    REQUIRE((r - Matrix::Identity(d, d)).norm() < 1e-8);
  }
}

TEST_CASE("get_rot rejects zero-norm leading pairs") {
  REQUIRE_THROWS_AS(get_rot({v2(0, 0)}, {v2(1, 0)}, Subspace::full(2)),
                    InvalidArgument);
  REQUIRE_THROWS_AS(get_rot({}, {}, Subspace::full(2)), InvalidArgument);
}

TEST_CASE("property: get_rot direction chain on random input") {
  std::mt19937_64 rng(21);
  for (int it = 0; it < 1000; ++it) {
    const int d = 2 + static_cast<int>(rng() % 4);
    std::vector<Vector> P, Q;
    for (int j = 0; j < d - 1; ++j) {
      P.push_back(random_vector(d, rng));
      Q.push_back(random_vector(d, rng));
    }
    if (P.front().norm() < 1e-6 || Q.front().norm() < 1e-6) continue;
    const Matrix r = get_rot(P, Q, Subspace::full(d));
    REQUIRE(is_rotation(r));
    check_direction_chain(P, Q, r);
  }
}

TEST_CASE("approx_alignment_exhaustive two-point hand instance") {
  PointCloud P(2), Q(2);
  P.push_back(v2(0, 0));
  P.push_back(v2(1, 0));
  Q.push_back(v2(5, 5));
  Q.push_back(v2(5, 6));
  const CandidateSet cands = approx_alignment_exhaustive(P, Q);
  REQUIRE(cands.size() == 2);
  double best = 1e300;
  for (const auto& c : cands)
    best = std::min(best, eval_cost(P, Q, c.alignment, CostSpec::ssd()));
  REQUIRE(best < 1e-18);
  // The pivot-0 candidate is the 90 degree rotation with t = -(5,5).
  for (const auto& c : cands) {
    if (c.tuple.pivot != 0) continue;
    Matrix expect(2, 2);
    expect << 0, -1, 1, 0;
    REQUIRE((c.alignment.rotation - expect).norm() < 1e-9);
    REQUIRE((c.alignment.translation - v2(-5, -5)).norm() < 1e-9);
  }
}

TEST_CASE("approx_alignment_exhaustive contains the identity for P = Q") {
  std::mt19937_64 rng(22);
  const PointCloud P = random_cloud(5, 3, rng);
  const CandidateSet cands = approx_alignment_exhaustive(P, P);
  bool found = false;
  for (const auto& c : cands)
    if ((c.alignment.rotation - Matrix::Identity(3, 3)).norm() < 1e-8 &&
        c.alignment.translation.norm() < 1e-8)
      found = true;
  REQUIRE(found);
}

TEST_CASE("approx_alignment_exhaustive candidate count") {
  std::mt19937_64 rng(23);
  const PointCloud P = random_cloud(4, 3, rng);
  const PointCloud Q = random_cloud(4, 3, rng);
  REQUIRE(approx_alignment_exhaustive(P, Q).size() == 24);
}

TEST_CASE("property: noiseless exactness of the exhaustive search") {
  std::mt19937_64 rng(24);
  for (int it = 0; it < 50; ++it) {
    const int d = 2 + static_cast<int>(rng() % 2);
    const PointCloud P = random_cloud(5, d, rng);
    const Alignment a = random_alignment(d, rng);
    const PointCloud Q = apply_alignment(P, a);
    const CandidateSet cands = approx_alignment_exhaustive(P, Q);
    double best = 1e300;
    for (const auto& c : cands)
      best = std::min(best, eval_cost(P, Q, c.alignment, CostSpec::ssd()));
    const double diam = P.bbox_diameter();
    REQUIRE(best < 1e-18 * diam * diam);
  }
}

TEST_CASE("approx_alignment_sampled determinism and coverage") {
  std::mt19937_64 rng(25);
  const PointCloud P = random_cloud(4, 2, rng);
  const PointCloud Q = random_cloud(4, 2, rng);

  const CandidateSet one = approx_alignment_sampled(P, Q, 1, 99);
  const CandidateSet one_again = approx_alignment_sampled(P, Q, 1, 99);
  REQUIRE(one.size() == 1);
  REQUIRE((one.alignments[0].alignment.rotation -
           one_again.alignments[0].alignment.rotation)
              .norm() == 0.0);
  REQUIRE(one.alignments[0].tuple.pivot == one_again.alignments[0].tuple.pivot);

  // Oversampled search matches the exhaustive optimum.
  const CandidateSet ex = approx_alignment_exhaustive(P, Q);
  const CandidateSet big = approx_alignment_sampled(P, Q, 50 * ex.size(), 7);
  const double best_ex = best_alignment(P, Q, ex, CostSpec::ssd()).second;
  const double best_big = best_alignment(P, Q, big, CostSpec::ssd()).second;
  REQUIRE(best_big == Catch::Approx(best_ex).margin(1e-12));
}

TEST_CASE("approx_alignment_sampled finds the exact fit for P = Q") {
  std::mt19937_64 rng(26);
  const PointCloud P = random_cloud(6, 3, rng);
  const CandidateSet cands = approx_alignment_sampled(P, P, 5, 1);
  const double best = best_alignment(P, P, cands, CostSpec::ssd()).second;
  const double diam = P.bbox_diameter();
  REQUIRE(best < 1e-18 * diam * diam);
}

TEST_CASE("best_alignment basics") {
  std::mt19937_64 rng(27);
  const PointCloud P = random_cloud(4, 2, rng);
  const Alignment a = random_alignment(2, rng);
  const PointCloud Q = apply_alignment(P, a);

  CandidateSet single;
  single.alignments.push_back(Candidate{a, WitnessTuple{0, {1}}});
  auto [best1, cost1] = best_alignment(P, Q, single, CostSpec::ssd());
  REQUIRE(cost1 < 1e-18);
  REQUIRE((best1.rotation - a.rotation).norm() == 0.0);

  CandidateSet three = single;
  three.alignments.push_back(Candidate{random_alignment(2, rng), WitnessTuple{0, {1}}});
  three.alignments.push_back(Candidate{random_alignment(2, rng), WitnessTuple{0, {1}}});
  double manual = 1e300;
  int arg = -1;
  for (int i = 0; i < three.size(); ++i) {
    const double c =
        eval_cost(P, Q, three.alignments[static_cast<size_t>(i)].alignment,
                  CostSpec::ssd());
    if (c < manual) {
      manual = c;
      arg = i;
    }
  }
  auto [best3, cost3] = best_alignment(P, Q, three, CostSpec::ssd());
  REQUIRE(cost3 == manual);
  REQUIRE((best3.rotation -
           three.alignments[static_cast<size_t>(arg)].alignment.rotation)
              .norm() == 0.0);

  CandidateSet empty;
  REQUIRE_THROWS_AS(best_alignment(P, Q, empty, CostSpec::ssd()), InvalidArgument);
}

TEST_CASE("property: best_alignment is worker-count invariant") {
  std::mt19937_64 rng(28);
  for (int it = 0; it < 1000; ++it) {
    const int d = 2;
    const int n = 3 + static_cast<int>(rng() % 3);
    const PointCloud P = random_cloud(n, d, rng);
    const PointCloud Q = random_cloud(n, d, rng);
    const CandidateSet cands = approx_alignment_exhaustive(P, Q);
    auto [a1, c1] = best_alignment(P, Q, cands, CostSpec::ssd(), 1);
    auto [a3, c3] = best_alignment(P, Q, cands, CostSpec::ssd(), 3);
    REQUIRE(c1 == c3);
    REQUIRE((a1.rotation - a3.rotation).norm() == 0.0);
    REQUIRE((a1.translation - a3.translation).norm() == 0.0);
  }
}

TEST_CASE("streamed exhaustive search matches the materialized one") {
  std::mt19937_64 rng(29);
  for (int it = 0; it < 100; ++it) {
    const int d = 2 + static_cast<int>(rng() % 2);
    const int n = d + 1 + static_cast<int>(rng() % 3);
    const PointCloud P = random_cloud(n, d, rng);
    const PointCloud Q = random_cloud(n, d, rng);
    const CandidateSet cands = approx_alignment_exhaustive(P, Q);
    const double best = best_alignment(P, Q, cands, CostSpec::ssd()).second;
    const BestSearchResult s1 = best_alignment_exhaustive(P, Q, CostSpec::ssd(), 1);
    const BestSearchResult s2 = best_alignment_exhaustive(P, Q, CostSpec::ssd(), 3);
    REQUIRE(s1.cost == Catch::Approx(best).margin(1e-14));
    REQUIRE(s1.candidates == cands.size());
    REQUIRE(s2.cost == s1.cost);
    REQUIRE((s1.alignment.rotation - s2.alignment.rotation).norm() == 0.0);
  }
}

TEST_CASE("candidates satisfy SO(d) invariants") {
  std::mt19937_64 rng(30);
  for (int it = 0; it < 50; ++it) {
    const int d = 2 + static_cast<int>(rng() % 3);
    const PointCloud P = random_cloud(d + 2, d, rng);
    const PointCloud Q = random_cloud(d + 2, d, rng);
    for (const auto& c : approx_alignment_exhaustive(P, Q).alignments)
      REQUIRE(is_rotation(c.alignment.rotation));
  }
}

TEST_CASE("degenerate leading pairs are skipped or rejected") {
  PointCloud P(2), Q(2);
  P.push_back(v2(0, 0));
  P.push_back(v2(0, 0));  // duplicate: centered leading pair has zero norm
  Q.push_back(v2(1, 1));
  Q.push_back(v2(2, 2));
  REQUIRE(approx_alignment_exhaustive(P, Q).empty());
  REQUIRE_THROWS_AS(approx_alignment_sampled(P, Q, 1, 5), InvalidArgument);
}
