#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace empmr {

using Point3 = Eigen::Vector3d;

/// One view's points, expressed in its own set-centered frame.
struct PointSet {
  int id = 0;
  std::vector<Point3> points;

  std::size_t size() const { return points.size(); }
};

bool all_finite(const PointSet& set);

/// Rotation + translation, kept on SO(3) by construction.
///
/// The constructor accepts matrices whose orthonormality drift is below
/// 1e-9 as-is, re-orthonormalizes (polar decomposition) up to 1e-6 drift,
/// and rejects anything worse, including reflections.
class RigidTransform {
 public:
  RigidTransform() : rotation_(Eigen::Matrix3d::Identity()), translation_(Eigen::Vector3d::Zero()) {}
  RigidTransform(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation);

  static RigidTransform identity() { return RigidTransform(); }

  const Eigen::Matrix3d& rotation() const { return rotation_; }
  const Eigen::Vector3d& translation() const { return translation_; }

  Point3 apply(const Point3& p) const { return rotation_ * p + translation_; }

 private:
  Eigen::Matrix3d rotation_;
  Eigen::Vector3d translation_;
};

Point3 apply_transform(const RigidTransform& t, const Point3& p);

/// compose(a, b) applies b first: result(p) = a(b(p)).
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);

RigidTransform inverse(const RigidTransform& t);

/// Full parameter set: M transforms, isotropic variance, outlier ratio.
struct ModelParams {
  std::vector<RigidTransform> transforms;
  double sigma2 = 1.0;
  double w = 0.01;

  std::size_t set_count() const { return transforms.size(); }
};

}  // namespace empmr
