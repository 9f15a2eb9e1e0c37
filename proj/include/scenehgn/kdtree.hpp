#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace scenehgn {

/// Static 3-d tree for exact nearest-neighbour queries over a point set.
/// The tree keeps a reference to the points; they must outlive it.
template <typename Scalar = double>
class KdTree {
 public:
  using Point = Eigen::Matrix<Scalar, 3, 1>;

  struct Hit {
    std::size_t index = 0;
    Scalar sq_dist = std::numeric_limits<Scalar>::infinity();
  };

  explicit KdTree(std::span<const Point> points) : points_(points) {
    order_.resize(points.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    if (!points.empty()) {
      nodes_.reserve(2 * points.size() / kLeafSize + 2);
      build(0, points.size(), 0);
    }
  }

  bool empty() const { return points_.empty(); }

  Hit nearest(const Point& q) const {
    Hit best;
    if (!nodes_.empty()) search(0, q, best);
    return best;
  }

 private:
  static constexpr std::size_t kLeafSize = 8;

  struct Node {
    std::size_t begin, end;
    int axis = -1;  // -1 marks a leaf
    Scalar split = 0;
    int left = -1, right = -1;
  };

  int build(std::size_t begin, std::size_t end, int depth) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(Node{begin, end});
    if (end - begin <= kLeafSize) return id;

    Point lo = points_[order_[begin]], hi = lo;
    for (std::size_t i = begin + 1; i < end; ++i) {
      lo = lo.cwiseMin(points_[order_[i]]);
      hi = hi.cwiseMax(points_[order_[i]]);
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    (void)depth;

    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::size_t a, std::size_t b) { return points_[a][axis] < points_[b][axis]; });
    const Scalar split = points_[order_[mid]][axis];
    const int left = build(begin, mid, depth + 1);
    const int right = build(mid, end, depth + 1);
    Node& n = nodes_[id];
    n.axis = axis;
    n.split = split;
    n.left = left;
    n.right = right;
    return id;
  }

  void search(int id, const Point& q, Hit& best) const {
    const Node& n = nodes_[id];
    if (n.axis < 0) {
      for (std::size_t i = n.begin; i < n.end; ++i) {
        const std::size_t idx = order_[i];
        const Scalar d = (points_[idx] - q).squaredNorm();
        if (d < best.sq_dist || (d == best.sq_dist && idx < best.index)) {
          best.sq_dist = d;
          best.index = idx;
        }
      }
      return;
    }
    const Scalar diff = q[n.axis] - n.split;
    const int near = diff < 0 ? n.left : n.right;
    const int far = diff < 0 ? n.right : n.left;
    search(near, q, best);
    if (diff * diff <= best.sq_dist) search(far, q, best);
  }

  std::span<const Point> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace scenehgn
