#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "empmr/geometry.hpp"

using namespace empmr;

namespace {

std::mt19937_64 rng(42);

Eigen::Matrix3d random_rotation() {
  std::normal_distribution<double> gauss;
  Eigen::Vector3d axis(gauss(rng), gauss(rng), gauss(rng));
  axis.normalize();
  std::uniform_real_distribution<double> angle(0.0, 3.14159);
  return Eigen::AngleAxisd(angle(rng), axis).toRotationMatrix();
}

RigidTransform random_transform() {
  std::normal_distribution<double> gauss;
  return RigidTransform(random_rotation(), Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng)));
}

Point3 random_point() {
  std::normal_distribution<double> gauss;
  return Point3(gauss(rng), gauss(rng), gauss(rng));
}

// Independent oracle: 4x4 homogeneous matrix multiply.
Point3 homogeneous_apply(const RigidTransform& t, const Point3& p) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.block<3, 3>(0, 0) = t.rotation();
  m.block<3, 1>(0, 3) = t.translation();
  Eigen::Vector4d hp(p.x(), p.y(), p.z(), 1.0);
  return (m * hp).head<3>();
}

}  // namespace

TEST_CASE("apply_transform identity and axis rotation") {
  CHECK(apply_transform(RigidTransform::identity(), Point3(1, 2, 3)).isApprox(Point3(1, 2, 3)));

  const Eigen::Matrix3d rz = Eigen::AngleAxisd(M_PI / 2, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  const Point3 q = apply_transform(RigidTransform(rz, Eigen::Vector3d::Zero()), Point3(1, 0, 0));
  CHECK(q.isApprox(Point3(0, 1, 0), 1e-12));
}

TEST_CASE("apply_transform matches homogeneous-matrix oracle") {
  for (int k = 0; k < 200; ++k) {
    const RigidTransform t = random_transform();
    const Point3 p = random_point();
    CHECK((apply_transform(t, p) - homogeneous_apply(t, p)).norm() < 1e-12);
  }
}

TEST_CASE("compose identity, inverse, pointwise oracle") {
  const RigidTransform t = random_transform();
  CHECK((compose(t, RigidTransform::identity()).rotation() - t.rotation()).norm() < 1e-12);

  const RigidTransform id = compose(t, inverse(t));
  CHECK((id.rotation() - Eigen::Matrix3d::Identity()).norm() < 1e-12);
  CHECK(id.translation().norm() < 1e-12);

  for (int k = 0; k < 100; ++k) {
    const RigidTransform a = random_transform();
    const RigidTransform b = random_transform();
    const Point3 p = random_point();
    CHECK((compose(a, b).apply(p) - a.apply(b.apply(p))).norm() < 1e-12);
  }
}

TEST_CASE("inverse of pure translation and point round trip") {
  const RigidTransform shift(Eigen::Matrix3d::Identity(), Eigen::Vector3d(0, 0, 5));
  CHECK(inverse(shift).translation().isApprox(Eigen::Vector3d(0, 0, -5)));
  CHECK(inverse(RigidTransform::identity()).translation().norm() == 0.0);

  for (int k = 0; k < 100; ++k) {
    const RigidTransform t = random_transform();
    const Point3 p = random_point();
    CHECK((inverse(t).apply(t.apply(p)) - p).norm() < 1e-12);
  }
}

TEST_CASE("constructed transforms satisfy SO(3) invariants") {
  for (int k = 0; k < 100; ++k) {
    const RigidTransform t = random_transform();
    CHECK((t.rotation().transpose() * t.rotation() - Eigen::Matrix3d::Identity()).norm() < 1e-9);
    CHECK(std::abs(t.rotation().determinant() - 1.0) < 1e-9);
  }
}

TEST_CASE("apply preserves pairwise distances") {
  for (int k = 0; k < 100; ++k) {
    const RigidTransform t = random_transform();
    const Point3 p = random_point(), q = random_point();
    CHECK(std::abs((t.apply(p) - t.apply(q)).norm() - (p - q).norm()) < 1e-9);
  }
}

TEST_CASE("compose is associative") {
  for (int k = 0; k < 50; ++k) {
    const RigidTransform a = random_transform(), b = random_transform(), c = random_transform();
    const RigidTransform lhs = compose(compose(a, b), c);
    const RigidTransform rhs = compose(a, compose(b, c));
    CHECK((lhs.rotation() - rhs.rotation()).norm() < 1e-9);
    CHECK((lhs.translation() - rhs.translation()).norm() < 1e-9);
  }
}

TEST_CASE("constructor re-orthonormalizes small drift, rejects large") {
  Eigen::Matrix3d r = random_rotation();
  Eigen::Matrix3d drifted = r + 1e-8 * Eigen::Matrix3d::Random();
  const RigidTransform fixed(drifted, Eigen::Vector3d::Zero());
  CHECK((fixed.rotation().transpose() * fixed.rotation() - Eigen::Matrix3d::Identity()).norm() < 1e-12);

  Eigen::Matrix3d broken = r + 1e-3 * Eigen::Matrix3d::Random();
  CHECK_THROWS_AS(RigidTransform(broken, Eigen::Vector3d::Zero()), std::invalid_argument);

  Eigen::Matrix3d reflection = Eigen::Matrix3d::Identity();
  reflection(2, 2) = -1.0;
  CHECK_THROWS_AS(RigidTransform(reflection, Eigen::Vector3d::Zero()), std::invalid_argument);
}
