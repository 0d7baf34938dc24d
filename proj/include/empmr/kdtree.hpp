#pragma once

#include <cstdint>
#include <vector>

#include "empmr/geometry.hpp"

namespace empmr {

/// Exact nearest-neighbor index over a point set transformed into the model
/// frame. The transform is snapshotted at build time; rebuild whenever it
/// moves. Balanced splits: axis of largest spread, split at the median.
/// Ties on distance resolve to the smallest original point index.
class NnIndex {
 public:
  NnIndex(const PointSet& set, const RigidTransform& transform);

  struct Result {
    std::size_t index;   // original point index within the source set
    double distance;
  };

  Result nearest(const Point3& query) const;

  std::size_t size() const { return x_.size(); }
  int set_id() const { return set_id_; }

  /// Transformed coordinates of the original point h (build-time snapshot).
  Point3 transformed_point(std::size_t h) const { return Point3(x_[h], y_[h], z_[h]); }

 private:
  struct Node {
    double split;
    std::uint32_t left;    // node index; leaf when left == 0
    std::uint32_t right;
    std::uint32_t begin;   // leaf payload: range into order_
    std::uint32_t end;
    std::uint8_t axis;
  };

  std::uint32_t build(std::uint32_t begin, std::uint32_t end);
  void search(std::uint32_t node, const Point3& q, std::size_t& best_idx, double& best_d2) const;

  int set_id_;
  std::vector<double> x_, y_, z_;      // SoA in original index order
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
  std::uint32_t root_ = 0;

  static constexpr std::uint32_t kLeafSize = 16;
};

}  // namespace empmr
