#pragma once

#include "ralign/core.hpp"

#include <algorithm>
#include <limits>

namespace ralign {

/// Builds a d x d rotation that acts as `inner_rot` inside `subspace` and
/// fixes its orthogonal complement: V [R 0; 0 I] V^T with V = [basis | comp].
inline Matrix embed_subspace_rotation(const Matrix& inner_rot,
                                      const Subspace& subspace) {
  const int d = subspace.ambient_dim;
  const int j = subspace.dim();
  if (inner_rot.rows() != j || inner_rot.cols() != j)
    throw InvalidArgument("inner rotation dimension mismatch");
  if (j < 2) throw InvalidArgument("subspace dimension must be >= 2");

  // Complete the basis to a full unitary matrix via householder QR of the
  // basis; the trailing columns of Q span the complement.
  Eigen::HouseholderQR<Matrix> qr(subspace.basis);
  Matrix q = qr.householderQ();
  Matrix v(d, d);
  v.leftCols(j) = subspace.basis;
  // Re-orthogonalize the complement columns against the given basis so V is
  // unitary even when QR flips signs internally.
  Matrix comp = q.rightCols(d - j);
  comp -= subspace.basis * (subspace.basis.transpose() * comp);
  if (d > j) {
    Eigen::HouseholderQR<Matrix> qr2(comp);
    Matrix q2 = qr2.householderQ();
    v.rightCols(d - j) = q2.leftCols(d - j);
  }

  Matrix block = Matrix::Identity(d, d);
  block.topLeftCorner(j, j) = inner_rot;
  return v * block * v.transpose();
}

/// Orthonormal basis of the hyperplane orthogonal to q: a d x (d-1) matrix W
/// with orthonormal columns and W^T q = 0. Built by orthogonalizing q
/// followed by the standard basis vectors, dropping near-dependent
/// candidates, with one re-orthogonalization pass.
inline Matrix orthonormal_complement(const Vector& q) {
  const int d = static_cast<int>(q.size());
  if (q.norm() <= 0.0) throw InvalidArgument("zero-norm input");
  constexpr double kDropTol = 1e-10;

  std::vector<Vector> cols;
  cols.reserve(d);
  cols.push_back(q.normalized());
  for (int k = 0; k < d && static_cast<int>(cols.size()) < d; ++k) {
    Vector v = Vector::Unit(d, k);
    for (const auto& c : cols) v -= c.dot(v) * c;
    // second pass for numerical orthogonality
    for (const auto& c : cols) v -= c.dot(v) * c;
    const double nrm = v.norm();
    if (nrm < kDropTol) continue;
    cols.push_back(v / nrm);
  }
  if (static_cast<int>(cols.size()) != d)
    throw InvalidArgument("failed to complete orthonormal basis");

  Matrix w(d, d - 1);
  for (int k = 1; k < d; ++k) w.col(k - 1) = cols[static_cast<size_t>(k)];
  return w;
}

/// The rotation in R_subspace mapping p/|p| to q/|q| by the minimal angle in
/// the plane span{p, q}. For antipodal p, q the plane is underdetermined; the
/// second plane direction is then built from the standard basis vector least
/// aligned with p, projected into the subspace.
inline Matrix rotation_aligning_directions(const Vector& p, const Vector& q,
                                           const Subspace& subspace) {
  const int d = subspace.ambient_dim;
  if (p.size() != d || q.size() != d)
    throw InvalidArgument("point dimension mismatch");
  if (p.norm() <= 0.0 || q.norm() <= 0.0)
    throw InvalidArgument("zero-norm input");
  if (!subspace.contains(p) || !subspace.contains(q))
    throw InvalidArgument("points not in subspace");

  const Vector u = p.normalized();
  const Vector v = q.normalized();
  const double c = std::clamp(u.dot(v), -1.0, 1.0);

  if (1.0 - c < 1e-15) return Matrix::Identity(d, d);

  if (1.0 + c < 1e-12) {
    // Antipodal: the rotation plane is underdetermined. Use the standard
    // basis vector least aligned with p, projected into the subspace, as
    // the second plane direction; half-turn in span{u, w}, then a tiny
    // residual rotation from -u to v when they are not exactly equal.
    int best = 0;
    double best_abs = std::numeric_limits<double>::infinity();
    for (int k = 0; k < d; ++k) {
      const double a = std::abs(u(k));
      if (a < best_abs) {
        best_abs = a;
        best = k;
      }
    }
    Vector w = subspace.project(Vector::Unit(d, best));
    w -= u.dot(w) * u;
    for (int k = 0; w.norm() < 1e-10 && k < d; ++k) {
      w = subspace.project(Vector::Unit(d, k));
      w -= u.dot(w) * u;
    }
    if (w.norm() < 1e-10)
      throw InvalidArgument("cannot resolve antipodal rotation plane");
    w.normalize();
    Matrix half = Matrix::Identity(d, d) - 2.0 * (u * u.transpose()) -
                  2.0 * (w * w.transpose());
    if ((v + u).norm() < 1e-15) return half;
    Matrix fix = rotation_aligning_directions(-u, v, subspace);
    return fix * half;
  }

  Vector w = v - c * u;
  w.normalize();
  const double s = v.dot(w);  // sin of the rotation angle, >= 0

  Matrix r = Matrix::Identity(d, d);
  r += (c - 1.0) * (u * u.transpose() + w * w.transpose());
  r += s * (w * u.transpose() - u * w.transpose());
  return r;
}

/// p_i -> W W^T p_i for every point.
inline PointCloud project_cloud(const PointCloud& cloud, const Matrix& w) {
  if (w.rows() != cloud.dim) throw InvalidArgument("projector dimension mismatch");
  PointCloud out(cloud.dim);
  out.points.reserve(cloud.points.size());
  for (const auto& p : cloud.points) out.points.push_back(w * (w.transpose() * p));
  return out;
}

inline PointCloud apply_alignment(const PointCloud& cloud, const Alignment& a) {
  if (a.dim() != cloud.dim) throw InvalidArgument("alignment dimension mismatch");
  PointCloud out(cloud.dim);
  out.points.reserve(cloud.points.size());
  for (const auto& p : cloud.points) out.points.push_back(a.apply(p));
  return out;
}

}  // namespace ralign
