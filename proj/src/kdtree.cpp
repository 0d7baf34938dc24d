#include "empmr/kdtree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "empmr/kernels.hpp"

namespace empmr {

namespace {
constexpr std::uint32_t kLeaf = std::numeric_limits<std::uint32_t>::max();
}

NnIndex::NnIndex(const PointSet& set, const RigidTransform& transform) : set_id_(set.id) {
  const std::size_t n = set.points.size();
  if (n == 0) throw std::invalid_argument("empty point set");

  std::vector<double> sx(n), sy(n), sz(n);
  for (std::size_t k = 0; k < n; ++k) {
    sx[k] = set.points[k].x();
    sy[k] = set.points[k].y();
    sz[k] = set.points[k].z();
  }
  x_.resize(n);
  y_.resize(n);
  z_.resize(n);
  Eigen::Matrix<double, 3, 3, Eigen::RowMajor> r = transform.rotation();
  kernels::ops().transform_points(r.data(), transform.translation().data(),
                                  sx.data(), sy.data(), sz.data(),
                                  x_.data(), y_.data(), z_.data(), n);

  order_.resize(n);
  std::iota(order_.begin(), order_.end(), 0u);
  nodes_.reserve(2 * n / kLeafSize + 2);
  root_ = build(0, static_cast<std::uint32_t>(n));
}

std::uint32_t NnIndex::build(std::uint32_t begin, std::uint32_t end) {
  const std::uint32_t id = static_cast<std::uint32_t>(nodes_.size());
  nodes_.push_back({});
  Node node{};
  if (end - begin <= kLeafSize) {
    node.left = kLeaf;
    node.begin = begin;
    node.end = end;
    nodes_[id] = node;
    return id;
  }

  const double* coords[3] = {x_.data(), y_.data(), z_.data()};
  double lo[3], hi[3];
  for (int a = 0; a < 3; ++a) {
    lo[a] = std::numeric_limits<double>::infinity();
    hi[a] = -std::numeric_limits<double>::infinity();
  }
  for (std::uint32_t k = begin; k < end; ++k) {
    const std::uint32_t h = order_[k];
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], coords[a][h]);
      hi[a] = std::max(hi[a], coords[a][h]);
    }
  }
  int axis = 0;
  for (int a = 1; a < 3; ++a) {
    if (hi[a] - lo[a] > hi[axis] - lo[axis]) axis = a;
  }

  const std::uint32_t mid = begin + (end - begin) / 2;
  const double* c = coords[axis];
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [c](std::uint32_t a, std::uint32_t b) {
                     return c[a] < c[b] || (c[a] == c[b] && a < b);
                   });
  node.axis = static_cast<std::uint8_t>(axis);
  node.split = c[order_[mid]];
  node.left = build(begin, mid);
  node.right = build(mid, end);
  nodes_[id] = node;
  return id;
}

void NnIndex::search(std::uint32_t ni, const Point3& q, std::size_t& best_idx, double& best_d2) const {
  const Node& node = nodes_[ni];
  if (node.left == kLeaf) {
    for (std::uint32_t k = node.begin; k < node.end; ++k) {
      const std::uint32_t h = order_[k];
      const double dx = q.x() - x_[h];
      const double dy = q.y() - y_[h];
      const double dz = q.z() - z_[h];
      const double d2 = dx * dx + dy * dy + dz * dz;
      if (d2 < best_d2 || (d2 == best_d2 && h < best_idx)) {
        best_d2 = d2;
        best_idx = h;
      }
    }
    return;
  }
  const double delta = q[node.axis] - node.split;
  const std::uint32_t near = delta < 0.0 ? node.left : node.right;
  const std::uint32_t far = delta < 0.0 ? node.right : node.left;
  search(near, q, best_idx, best_d2);
  // <= keeps equal-distance candidates reachable so the index tie-break is exact
  if (delta * delta <= best_d2) search(far, q, best_idx, best_d2);
}

NnIndex::Result NnIndex::nearest(const Point3& query) const {
  std::size_t best_idx = std::numeric_limits<std::size_t>::max();
  double best_d2 = std::numeric_limits<double>::infinity();
  search(root_, query, best_idx, best_d2);
  return {best_idx, std::sqrt(best_d2)};
}

}  // namespace empmr
