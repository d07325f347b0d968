#pragma once

#include "ralign/core.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

namespace ralign {

/// Nearest-neighbor index over a fixed point set. Uses a kd-tree for large
/// sets and a linear scan below a size threshold where the constant factors
/// dominate. Ties are broken by the lowest point index.
class NearestNeighborIndex {
 public:
  static constexpr int kBruteForceThreshold = 64;

  explicit NearestNeighborIndex(const PointCloud& cloud) : cloud_(&cloud) {
    const int n = cloud.size();
    if (n == 0) throw InvalidArgument("empty point set");
    if (n < kBruteForceThreshold) return;
    order_.resize(static_cast<size_t>(n));
    std::iota(order_.begin(), order_.end(), 0);
    nodes_.reserve(static_cast<size_t>(n));
    root_ = build(0, n, 0);
  }

  int nearest(const Vector& query) const {
    double best_d2 = std::numeric_limits<double>::infinity();
    int best = -1;
    if (nodes_.empty()) {
      for (int i = 0; i < cloud_->size(); ++i) {
        const double d2 = sq_dist((*cloud_)[i], query);
        if (d2 < best_d2 || (d2 == best_d2 && i < best)) {
          best_d2 = d2;
          best = i;
        }
      }
      return best;
    }
    search(root_, query, best_d2, best);
    return best;
  }

 private:
  // Avoids Eigen expression temporaries in the query hot path.
  static double sq_dist(const Vector& a, const Vector& b) {
    double acc = 0.0;
    for (int k = 0; k < a.size(); ++k) {
      const double diff = a(k) - b(k);
      acc += diff * diff;
    }
    return acc;
  }

  struct Node {
    int point = -1;
    int axis = 0;
    int left = -1;
    int right = -1;
  };

  int build(int lo, int hi, int depth) {
    if (lo >= hi) return -1;
    const int axis = depth % cloud_->dim;
    const int mid = (lo + hi) / 2;
    std::nth_element(order_.begin() + lo, order_.begin() + mid,
                     order_.begin() + hi, [&](int a, int b) {
                       const double xa = (*cloud_)[a](axis);
                       const double xb = (*cloud_)[b](axis);
                       return xa < xb || (xa == xb && a < b);
                     });
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(Node{order_[static_cast<size_t>(mid)], axis, -1, -1});
    const int l = build(lo, mid, depth + 1);
    const int r = build(mid + 1, hi, depth + 1);
    nodes_[static_cast<size_t>(id)].left = l;
    nodes_[static_cast<size_t>(id)].right = r;
    return id;
  }

  void search(int id, const Vector& query, double& best_d2, int& best) const {
    if (id < 0) return;
    const Node& node = nodes_[static_cast<size_t>(id)];
    const Vector& pt = (*cloud_)[node.point];
    const double d2 = sq_dist(pt, query);
    if (d2 < best_d2 || (d2 == best_d2 && node.point < best)) {
      best_d2 = d2;
      best = node.point;
    }
    const double diff = query(node.axis) - pt(node.axis);
    const int near = diff < 0.0 ? node.left : node.right;
    const int far = diff < 0.0 ? node.right : node.left;
    search(near, query, best_d2, best);
    if (diff * diff <= best_d2) search(far, query, best_d2, best);
  }

  const PointCloud* cloud_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace ralign
