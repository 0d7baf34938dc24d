#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <random>
#include <vector>

#include "empmr/kernels.hpp"

using namespace empmr::kernels;

namespace {

struct Arrays {
  std::vector<double> w, ax, ay, az, bx, by, bz;
};

Arrays random_arrays(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> weight(0.0, 1.0);
  Arrays a;
  for (std::size_t k = 0; k < n; ++k) {
    a.w.push_back(weight(rng));
    a.ax.push_back(gauss(rng));
    a.ay.push_back(gauss(rng));
    a.az.push_back(gauss(rng));
    a.bx.push_back(gauss(rng));
    a.by.push_back(gauss(rng));
    a.bz.push_back(gauss(rng));
  }
  return a;
}

}  // namespace

TEST_CASE("transform_points matches Eigen per point") {
  const auto a = random_arrays(101, 1);
  Eigen::Matrix3d r = Eigen::AngleAxisd(0.7, Eigen::Vector3d(1, 2, 3).normalized()).toRotationMatrix();
  Eigen::Matrix<double, 3, 3, Eigen::RowMajor> rr = r;
  const Eigen::Vector3d t(0.1, -0.2, 0.3);
  std::vector<double> ox(101), oy(101), oz(101);
  scalar_ops().transform_points(rr.data(), t.data(), a.ax.data(), a.ay.data(), a.az.data(),
                                ox.data(), oy.data(), oz.data(), 101);
  for (std::size_t k = 0; k < 101; ++k) {
    const Eigen::Vector3d expect = r * Eigen::Vector3d(a.ax[k], a.ay[k], a.az[k]) + t;
    CHECK((expect - Eigen::Vector3d(ox[k], oy[k], oz[k])).norm() < 1e-14);
  }
}

TEST_CASE("simd backends agree with scalar reference") {
  if (!avx2_available()) {
    MESSAGE("avx2 not available; dispatch falls back to scalar");
    return;
  }
  // odd length exercises the vector body and the scalar tail
  for (std::size_t n : {1u, 7u, 64u, 1023u}) {
    const auto a = random_arrays(n, 17 + n);

    Eigen::Matrix<double, 3, 3, Eigen::RowMajor> r =
        Eigen::AngleAxisd(1.1, Eigen::Vector3d(3, 1, 2).normalized()).toRotationMatrix();
    const Eigen::Vector3d t(-1.0, 0.5, 2.0);
    std::vector<double> sx(n), sy(n), sz(n), vx(n), vy(n), vz(n);
    scalar_ops().transform_points(r.data(), t.data(), a.ax.data(), a.ay.data(), a.az.data(),
                                  sx.data(), sy.data(), sz.data(), n);
    avx2_ops().transform_points(r.data(), t.data(), a.ax.data(), a.ay.data(), a.az.data(),
                                vx.data(), vy.data(), vz.data(), n);
    for (std::size_t k = 0; k < n; ++k) {
      CHECK(std::abs(sx[k] - vx[k]) < 1e-13);
      CHECK(std::abs(sy[k] - vy[k]) < 1e-13);
      CHECK(std::abs(sz[k] - vz[k]) < 1e-13);
    }

    std::vector<double> ds(n), dv(n);
    scalar_ops().paired_sqdist(a.ax.data(), a.ay.data(), a.az.data(), a.bx.data(), a.by.data(),
                               a.bz.data(), ds.data(), n);
    avx2_ops().paired_sqdist(a.ax.data(), a.ay.data(), a.az.data(), a.bx.data(), a.by.data(),
                             a.bz.data(), dv.data(), n);
    for (std::size_t k = 0; k < n; ++k) CHECK(ds[k] == doctest::Approx(dv[k]).epsilon(1e-13));

    double sw_s, swd_s, sw_v, swd_v;
    scalar_ops().weighted_sums(a.w.data(), ds.data(), n, &sw_s, &swd_s);
    avx2_ops().weighted_sums(a.w.data(), ds.data(), n, &sw_v, &swd_v);
    CHECK(sw_s == doctest::Approx(sw_v).epsilon(1e-12));
    CHECK(swd_s == doctest::Approx(swd_v).epsilon(1e-12));

    CrossMoments ms, mv;
    scalar_ops().cross_moments(a.w.data(), a.ax.data(), a.ay.data(), a.az.data(), a.bx.data(),
                               a.by.data(), a.bz.data(), n, &ms);
    avx2_ops().cross_moments(a.w.data(), a.ax.data(), a.ay.data(), a.az.data(), a.bx.data(),
                             a.by.data(), a.bz.data(), n, &mv);
    CHECK(ms.sum_w == doctest::Approx(mv.sum_w).epsilon(1e-12));
    for (int i = 0; i < 3; ++i) {
      CHECK(ms.sum_p[i] == doctest::Approx(mv.sum_p[i]).epsilon(1e-11));
      CHECK(ms.sum_q[i] == doctest::Approx(mv.sum_q[i]).epsilon(1e-11));
    }
    for (int i = 0; i < 9; ++i) CHECK(ms.sum_qp[i] == doctest::Approx(mv.sum_qp[i]).epsilon(1e-11));
  }
}

TEST_CASE("weighted sums match naive summation") {
  const std::size_t n = 333;
  const auto a = random_arrays(n, 5);
  std::vector<double> d2(n);
  ops().paired_sqdist(a.ax.data(), a.ay.data(), a.az.data(), a.bx.data(), a.by.data(), a.bz.data(),
                      d2.data(), n);
  double sw, swd;
  ops().weighted_sums(a.w.data(), d2.data(), n, &sw, &swd);
  double esw = 0, eswd = 0;
  for (std::size_t k = 0; k < n; ++k) {
    esw += a.w[k];
    eswd += a.w[k] * d2[k];
  }
  CHECK(sw == doctest::Approx(esw).epsilon(1e-12));
  CHECK(swd == doctest::Approx(eswd).epsilon(1e-12));
}
