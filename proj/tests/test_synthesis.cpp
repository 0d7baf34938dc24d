#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "empmr/synthesis.hpp"

using namespace empmr;

TEST_CASE("zero perturbation yields identity ground truth") {
  SynthSpec spec;
  spec.sets = 4;
  spec.points_per_set = 200;
  spec.perturb_deg = 0.0;
  spec.perturb_trans = 0.0;
  spec.seed = 1;
  const auto scene = synth_scene(spec);
  REQUIRE(scene.truth.size() == 4);
  for (const auto& t : scene.truth) {
    CHECK((t.rotation() - Eigen::Matrix3d::Identity()).norm() < 1e-15);
    CHECK(t.translation().norm() < 1e-15);
  }
}

TEST_CASE("same seed reproduces the scene bit-identically") {
  SynthSpec spec;
  spec.sets = 3;
  spec.points_per_set = 300;
  spec.perturb_deg = 8.0;
  spec.perturb_trans = 0.1;
  spec.jitter = 0.002;
  spec.seed = 42;
  const auto a = synth_scene(spec);
  const auto b = synth_scene(spec);
  REQUIRE(a.sets.size() == b.sets.size());
  for (std::size_t i = 0; i < a.sets.size(); ++i) {
    REQUIRE(a.sets[i].points.size() == b.sets[i].points.size());
    for (std::size_t l = 0; l < a.sets[i].points.size(); ++l) {
      CHECK(a.sets[i].points[l] == b.sets[i].points[l]);
    }
    CHECK(a.truth[i].rotation() == b.truth[i].rotation());
    CHECK(a.truth[i].translation() == b.truth[i].translation());
  }
  CHECK(a.diameter == b.diameter);
}

TEST_CASE("transformed sets overlap: cross-set NN residuals stay below sampling spacing") {
  SynthSpec spec;
  spec.sets = 2;
  spec.points_per_set = 1500;
  spec.perturb_deg = 5.0;
  spec.perturb_trans = 0.05;
  spec.overlap = 0.9;
  spec.seed = 7;
  const auto scene = synth_scene(spec);

  // expected spacing on the unit sphere with ~N samples in the shared window
  const double spacing = std::sqrt(4.0 * std::numbers::pi / spec.points_per_set);
  double worst = 0.0;
  std::size_t shared = 0;
  for (const auto& p : scene.sets[0].points) {
    const Point3 q = scene.truth[0].apply(p);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& r : scene.sets[1].points) {
      best = std::min(best, (q - scene.truth[1].apply(r)).norm());
    }
    if (best < 1e-12) ++shared;  // exact shared master sample
    worst = std::max(worst, best);
  }
  CHECK(worst < 2.0 * spacing);
  CHECK(shared > scene.sets[0].points.size() / 2);  // required overlap fraction
}

TEST_CASE("overlap outside (0,1] is rejected") {
  SynthSpec spec;
  spec.overlap = 0.0;
  CHECK_THROWS_AS(synth_scene(spec), std::invalid_argument);
  spec.overlap = 1.5;
  CHECK_THROWS_AS(synth_scene(spec), std::invalid_argument);
}

TEST_CASE("all shapes synthesize with expected point counts") {
  for (Shape shape : {Shape::Sphere, Shape::Box, Shape::Composite}) {
    SynthSpec spec;
    spec.shape = shape;
    spec.sets = 3;
    spec.points_per_set = 250;
    spec.seed = 9;
    const auto scene = synth_scene(spec);
    for (const auto& s : scene.sets) CHECK(s.size() == 250);
    CHECK(scene.diameter > 0.5);
  }
}

TEST_CASE("shape names round-trip") {
  for (Shape shape : {Shape::Sphere, Shape::Box, Shape::Composite}) {
    CHECK(shape_from_name(shape_name(shape)) == shape);
  }
  CHECK_THROWS_AS(shape_from_name("torus"), std::invalid_argument);
}

TEST_CASE("add_noise: infinite SNR is the identity, finite SNR is calibrated") {
  PointSet set;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> gauss;
  for (int k = 0; k < 100000; ++k) set.points.emplace_back(gauss(rng), gauss(rng), gauss(rng));

  SUBCASE("snr = +inf leaves the set untouched") {
    NoiseSpec spec;
    const PointSet out = add_noise(set, spec);
    for (std::size_t l = 0; l < set.size(); ++l) CHECK(out.points[l] == set.points[l]);
  }

  SUBCASE("empirical SNR within 0.2 dB of the request") {
    for (double snr : {25.0, 40.0}) {
      NoiseSpec spec;
      spec.snr_db = snr;
      spec.seed = 17;
      const PointSet out = add_noise(set, spec);
      Point3 mean = Point3::Zero();
      for (const auto& p : set.points) mean += p;
      mean /= static_cast<double>(set.size());
      double signal = 0.0, noise = 0.0;
      for (std::size_t l = 0; l < set.size(); ++l) {
        signal += (set.points[l] - mean).squaredNorm();
        noise += (out.points[l] - set.points[l]).squaredNorm();
      }
      const double measured = 10.0 * std::log10(signal / noise);
      CHECK(std::abs(measured - snr) < 0.2);
    }
  }

  SUBCASE("same seed, same noise") {
    NoiseSpec spec;
    spec.snr_db = 30.0;
    spec.seed = 5;
    const PointSet a = add_noise(set, spec);
    const PointSet b = add_noise(set, spec);
    for (std::size_t l = 0; l < set.size(); ++l) CHECK(a.points[l] == b.points[l]);
  }
}

TEST_CASE("downsample_uniform: identity, exact strides, subsequence property") {
  PointSet set;
  for (int k = 0; k < 10; ++k) set.points.emplace_back(k, 0, 0);

  SUBCASE("target >= size returns the set unchanged") {
    const PointSet out = downsample_uniform(set, 10);
    CHECK(out.size() == 10);
    const PointSet out2 = downsample_uniform(set, 100);
    CHECK(out2.size() == 10);
  }

  SUBCASE("10 -> 5 picks every other point") {
    const PointSet out = downsample_uniform(set, 5);
    REQUIRE(out.size() == 5);
    for (int k = 0; k < 5; ++k) CHECK(out.points[static_cast<std::size_t>(k)].x() == doctest::Approx(2.0 * k));
  }

  SUBCASE("result is an ordered subsequence of the input") {
    PointSet big;
    for (int k = 0; k < 997; ++k) big.points.emplace_back(k, -k, 2 * k);
    const PointSet out = downsample_uniform(big, 313);
    CHECK(out.size() == 313);
    double last = -1.0;
    for (const auto& p : out.points) {
      CHECK(p.x() > last);
      last = p.x();
    }
  }
}

TEST_CASE("compute_errors: zero on equality, gauge invariance, formula oracle") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> gauss;
  auto random_transform = [&] {
    Eigen::Vector3d axis(gauss(rng), gauss(rng), gauss(rng));
    axis.normalize();
    return RigidTransform(Eigen::AngleAxisd(0.3 * gauss(rng), axis).toRotationMatrix(),
                          Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng)));
  };

  std::vector<RigidTransform> truth;
  for (int i = 0; i < 4; ++i) truth.push_back(random_transform());

  SUBCASE("identical transforms give zero error") {
    const auto err = compute_errors(truth, truth, false);
    CHECK(err.e_R < 1e-15);
    CHECK(err.e_t < 1e-15);
  }

  SUBCASE("a global motion is removed by gauge fixing only") {
    const RigidTransform g = random_transform();
    std::vector<RigidTransform> moved;
    for (const auto& t : truth) moved.push_back(compose(g, t));
    const auto raw = compute_errors(moved, truth, false);
    CHECK(raw.e_R > 1e-3);
    const auto fixed = compute_errors(moved, truth, true);
    CHECK(fixed.e_R < 1e-12);
    CHECK(fixed.e_t < 1e-12);
    CHECK(fixed.gauge_fixed);
  }

  SUBCASE("matches the mean Frobenius / Euclidean formulas") {
    std::vector<RigidTransform> est;
    for (int i = 0; i < 4; ++i) est.push_back(random_transform());
    const auto err = compute_errors(est, truth, false);
    double er = 0.0, et = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
      er += (est[i].rotation() - truth[i].rotation()).norm();
      et += (est[i].translation() - truth[i].translation()).norm();
      CHECK(err.per_set_eR[i] == doctest::Approx((est[i].rotation() - truth[i].rotation()).norm()));
    }
    CHECK(err.e_R == doctest::Approx(er / 4.0).epsilon(1e-12));
    CHECK(err.e_t == doctest::Approx(et / 4.0).epsilon(1e-12));
  }

  SUBCASE("size mismatch is rejected") {
    std::vector<RigidTransform> three(truth.begin(), truth.begin() + 3);
    CHECK_THROWS_AS(compute_errors(three, truth, true), std::invalid_argument);
  }
}

TEST_CASE("sweep_w: trivial cases and CSV shape") {
  SynthSpec spec;
  spec.sets = 2;
  spec.points_per_set = 300;
  spec.perturb_deg = 3.0;
  spec.perturb_trans = 0.03;
  spec.seed = 21;
  const auto scene = synth_scene(spec);

  EmConfig cfg;
  const auto empty = sweep_w(scene, {}, cfg);
  CHECK(empty.empty());
  CHECK(sweep_csv(empty) == "w,e_R,e_t,runtime_s,iterations\n");

  const auto rows = sweep_w(scene, {0.01}, cfg);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].w == 0.01);
  CHECK(rows[0].e_R < 1e-3);
  CHECK(rows[0].iterations >= 1);

  std::istringstream csv(sweep_csv(rows));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "w,e_R,e_t,runtime_s,iterations");
  std::getline(csv, line);
  CHECK(line.rfind("0.01,", 0) == 0);
}

TEST_CASE("trial_statistics: degenerate spreads") {
  SynthSpec spec;
  spec.sets = 2;
  spec.points_per_set = 300;
  spec.perturb_deg = 3.0;
  spec.perturb_trans = 0.03;
  spec.seed = 23;
  const auto scene = synth_scene(spec);
  EmConfig cfg;

  SUBCASE("one trial has zero spread by definition") {
    NoiseSpec noise;
    noise.snr_db = 30.0;
    const auto stats = trial_statistics(scene, noise, 1, cfg);
    CHECK(stats.trials == 1);
    CHECK(stats.std_eR == 0.0);
    CHECK(stats.std_et == 0.0);
  }

  SUBCASE("noise-free trials are identical") {
    NoiseSpec noise;  // snr = +inf
    const auto stats = trial_statistics(scene, noise, 3, cfg);
    CHECK(stats.std_eR < 1e-12);
    CHECK(stats.std_et < 1e-12);
  }
}

TEST_CASE("registering a clean identity scene changes nothing") {
  SynthSpec spec;
  spec.sets = 3;
  spec.points_per_set = 400;
  spec.perturb_deg = 0.0;
  spec.perturb_trans = 0.0;
  spec.seed = 29;
  const auto scene = synth_scene(spec);
  auto [params, report] =
      register_sets(scene.sets, std::vector<RigidTransform>(3, RigidTransform::identity()), EmConfig{});
  const auto err = compute_errors(params.transforms, scene.truth, true);
  CHECK(err.e_R < 1e-6);
  CHECK(err.e_t < 1e-6);
}
