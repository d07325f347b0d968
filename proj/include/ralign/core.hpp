#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ralign {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Default relative tolerance for orthogonality / determinant checks.
inline constexpr double kDefaultTol = 1e-9;

/// Thrown on malformed inputs (dimension mismatches, zero norms, ...).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline bool is_rotation(const Matrix& R, double tol = kDefaultTol) {
  if (R.rows() != R.cols()) return false;
  const Matrix gram = R.transpose() * R;
  const Matrix eye = Matrix::Identity(R.rows(), R.cols());
  if ((gram - eye).norm() > tol * 10.0 + tol) return false;
  return std::abs(R.determinant() - 1.0) < tol * 10.0 + tol;
}

/// An ordered point set in R^d. Order is significant: index i of P pairs
/// with index i of Q when the correspondence is known.
struct PointCloud {
  std::vector<Vector> points;
  int dim = 0;

  PointCloud() = default;
  explicit PointCloud(int d) : dim(d) {}
  PointCloud(std::vector<Vector> pts, int d) : points(std::move(pts)), dim(d) {
    for (const auto& p : points) {
      if (p.size() != dim) throw InvalidArgument("point has wrong dimension");
      if (!p.allFinite()) throw InvalidArgument("point has non-finite entries");
    }
  }

  int size() const { return static_cast<int>(points.size()); }
  bool empty() const { return points.empty(); }
  const Vector& operator[](int i) const { return points[static_cast<size_t>(i)]; }
  Vector& operator[](int i) { return points[static_cast<size_t>(i)]; }

  void push_back(Vector p) {
    if (p.size() != dim) throw InvalidArgument("point has wrong dimension");
    points.push_back(std::move(p));
  }

  /// Largest pairwise extent, computed from the bounding box diagonal.
  /// Cheap stand-in for the true diameter; exact within a sqrt(d) factor
  /// and an upper bound on no axis.
  double bbox_diameter() const {
    if (points.empty()) return 0.0;
    Vector lo = points.front(), hi = points.front();
    for (const auto& p : points) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    return (hi - lo).norm();
  }
};

/// Rigid transformation applied as p -> R p - t.
struct Alignment {
  Matrix rotation;
  Vector translation;

  static Alignment identity(int d) {
    return {Matrix::Identity(d, d), Vector::Zero(d)};
  }

  int dim() const { return static_cast<int>(translation.size()); }

  Vector apply(const Vector& p) const { return rotation * p - translation; }

  /// Composition: (*this) after `first`, i.e. apply(first.apply(p)).
  Alignment after(const Alignment& first) const {
    return {rotation * first.rotation,
            rotation * first.translation + translation};
  }

  Alignment inverse() const {
    return {rotation.transpose(), -rotation.transpose() * translation};
  }
};

/// A J-dimensional linear subspace of R^d given by an orthonormal basis
/// (d x J matrix with orthonormal columns).
struct Subspace {
  Matrix basis;
  int ambient_dim = 0;

  Subspace() = default;
  Subspace(Matrix b, int d) : basis(std::move(b)), ambient_dim(d) {
    if (basis.rows() != d) throw InvalidArgument("subspace basis row mismatch");
    const Matrix gram = basis.transpose() * basis;
    if ((gram - Matrix::Identity(basis.cols(), basis.cols())).norm() > 1e-8)
      throw InvalidArgument("subspace basis is not orthonormal");
  }

  static Subspace full(int d) { return {Matrix::Identity(d, d), d}; }

  int dim() const { return static_cast<int>(basis.cols()); }

  /// Orthogonal projection of p onto the subspace.
  Vector project(const Vector& p) const { return basis * (basis.transpose() * p); }

  bool contains(const Vector& p, double tol = 1e-8) const {
    return (p - project(p)).norm() <= tol * (1.0 + p.norm());
  }
};

}  // namespace ralign
