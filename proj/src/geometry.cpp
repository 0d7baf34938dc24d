#include "empmr/geometry.hpp"

#include <cmath>
#include <stdexcept>

namespace empmr {

namespace {

double orthonormality_drift(const Eigen::Matrix3d& r) {
  return (r.transpose() * r - Eigen::Matrix3d::Identity()).norm();
}

Eigen::Matrix3d polar_rotation(const Eigen::Matrix3d& m) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().transpose();
}

}  // namespace

bool all_finite(const PointSet& set) {
  for (const auto& p : set.points) {
    if (!p.allFinite()) return false;
  }
  return true;
}

RigidTransform::RigidTransform(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation)
    : rotation_(rotation), translation_(translation) {
  if (!rotation_.allFinite() || !translation_.allFinite()) {
    throw std::invalid_argument("rigid transform has non-finite entries");
  }
  const double drift = orthonormality_drift(rotation_);
  const double det_drift = std::abs(rotation_.determinant() - 1.0);
  if (drift <= 1e-9 && det_drift <= 1e-9) return;
  if (drift <= 1e-6 && det_drift <= 1e-6) {
    rotation_ = polar_rotation(rotation_);
    if (rotation_.determinant() < 0.0) {
      throw std::invalid_argument("rotation matrix is a reflection");
    }
    return;
  }
  throw std::invalid_argument("matrix is not a rotation (orthonormality drift exceeds 1e-6)");
}

Point3 apply_transform(const RigidTransform& t, const Point3& p) { return t.apply(p); }

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  return RigidTransform(a.rotation() * b.rotation(), a.rotation() * b.translation() + a.translation());
}

RigidTransform inverse(const RigidTransform& t) {
  const Eigen::Matrix3d rt = t.rotation().transpose();
  return RigidTransform(rt, -(rt * t.translation()));
}

}  // namespace empmr
