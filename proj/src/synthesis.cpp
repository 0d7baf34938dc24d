#include "empmr/synthesis.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

namespace empmr {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  // splitmix64 over the combined stream id
  std::uint64_t x = seed + 0x9e3779b97f4a7c15ULL * (a + 1) + 0xbf58476d1ce4e5b9ULL * (b + 1);
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

Point3 sample_sphere(std::mt19937_64& rng, double radius, const Point3& center) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> angle(0.0, kTwoPi);
  const double z = unit(rng);
  const double az = angle(rng);
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  return center + radius * Point3(r * std::cos(az), r * std::sin(az), z);
}

Point3 sample_box(std::mt19937_64& rng, double half, const Point3& center) {
  std::uniform_int_distribution<int> face(0, 5);
  std::uniform_real_distribution<double> uv(-half, half);
  const int f = face(rng);
  const double u = uv(rng), v = uv(rng);
  Point3 p;
  switch (f) {
    case 0: p = Point3(half, u, v); break;
    case 1: p = Point3(-half, u, v); break;
    case 2: p = Point3(u, half, v); break;
    case 3: p = Point3(u, -half, v); break;
    case 4: p = Point3(u, v, half); break;
    default: p = Point3(u, v, -half); break;
  }
  return center + p;
}

Point3 sample_shape(std::mt19937_64& rng, Shape shape) {
  switch (shape) {
    case Shape::Sphere:
      return sample_sphere(rng, 1.0, Point3::Zero());
    case Shape::Box:
      return sample_box(rng, 0.5, Point3::Zero());
    case Shape::Composite: {
      std::uniform_int_distribution<int> part(0, 1);
      if (part(rng) == 0) return sample_sphere(rng, 0.5, Point3(-0.4, 0.0, 0.0));
      return sample_box(rng, 0.4, Point3(0.4, 0.0, 0.0));
    }
  }
  throw std::logic_error("unknown shape");
}

bool in_window(double azimuth, double center, double width) {
  double d = std::fmod(std::abs(azimuth - center), kTwoPi);
  if (d > std::numbers::pi) d = kTwoPi - d;
  return d <= width / 2.0;
}

double shape_area(Shape shape) {
  switch (shape) {
    case Shape::Sphere: return 4.0 * std::numbers::pi;
    case Shape::Box: return 6.0;
    case Shape::Composite: return std::numbers::pi + 6.0 * 0.8 * 0.8;
  }
  return 4.0 * std::numbers::pi;
}

RigidTransform random_transform(std::mt19937_64& rng, double max_angle_rad, double max_trans) {
  if (max_angle_rad == 0.0 && max_trans == 0.0) return RigidTransform::identity();
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> angle(0.0, kTwoPi);
  const double z = unit(rng);
  const double az = angle(rng);
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  const Eigen::Vector3d axis(r * std::cos(az), r * std::sin(az), z);
  std::uniform_real_distribution<double> amp(0.0, 1.0);
  const double theta = amp(rng) * max_angle_rad;

  const double tz = unit(rng);
  const double taz = angle(rng);
  const double tr = std::sqrt(std::max(0.0, 1.0 - tz * tz));
  const Eigen::Vector3d dir(tr * std::cos(taz), tr * std::sin(taz), tz);
  const double mag = amp(rng) * max_trans;

  return RigidTransform(Eigen::AngleAxisd(theta, axis).toRotationMatrix(), mag * dir);
}

}  // namespace

Shape shape_from_name(const std::string& name) {
  if (name == "sphere") return Shape::Sphere;
  if (name == "box") return Shape::Box;
  if (name == "composite") return Shape::Composite;
  throw std::invalid_argument("unknown shape: " + name);
}

std::string shape_name(Shape shape) {
  switch (shape) {
    case Shape::Sphere: return "sphere";
    case Shape::Box: return "box";
    case Shape::Composite: return "composite";
  }
  return "?";
}

GroundTruthScene synth_scene(const SynthSpec& spec) {
  if (spec.sets < 2) throw std::invalid_argument("need at least two point sets");
  if (spec.points_per_set < 10) throw std::invalid_argument("points_per_set must be >= 10");
  if (!(spec.overlap > 0.0) || spec.overlap > 1.0) {
    throw std::invalid_argument("overlap_fraction must lie in (0, 1]");
  }

  const std::size_t m = static_cast<std::size_t>(spec.sets);
  const std::size_t target = static_cast<std::size_t>(spec.points_per_set);

  // Widest pairwise window-center separation on the azimuth circle.
  const double max_sep = kTwoPi * static_cast<double>(m / 2) / static_cast<double>(m);
  double width = kTwoPi;
  if (spec.overlap < 1.0) width = std::min(kTwoPi, max_sep / (1.0 - spec.overlap));
  const double window_fraction = width / kTwoPi;

  std::vector<double> centers(m);
  for (std::size_t i = 0; i < m; ++i) centers[i] = kTwoPi * static_cast<double>(i) / static_cast<double>(m);

  // The master cloud models the surface at finite resolution. Its spacing is
  // tied to the perturbation bound so that nearest neighbors of a point moved
  // by the worst-case initial misalignment are still its true counterparts:
  // spacing below ~half the misalignment leaves registration from identity
  // outside the basin of attraction. Sets then sample the shared surfels,
  // repeating them when the budget exceeds the distinct count.
  const double max_angle = spec.perturb_deg * std::numbers::pi / 180.0;
  const double misalignment = max_angle + spec.perturb_trans;
  std::size_t distinct_target = target;
  if (misalignment > 0.0) {
    // Two sets may disagree by twice the per-set bound, so size the basin
    // (about twice the surfel spacing) for the pairwise misalignment.
    const double spacing = misalignment;
    const double in_window_count = shape_area(spec.shape) * window_fraction / (4.0 * spacing * spacing);
    distinct_target = std::min<std::size_t>(
        target, std::max<std::size_t>(32, static_cast<std::size_t>(std::ceil(in_window_count))));
  }
  const bool coarse = distinct_target < target;
  const std::size_t need = coarse ? std::max<std::size_t>(16, distinct_target * 4 / 5) : target;

  std::vector<Point3> master;
  std::vector<std::vector<std::uint32_t>> candidates(m);
  std::size_t master_size =
      coarse ? static_cast<std::size_t>(std::ceil(1.05 * static_cast<double>(distinct_target) /
                                                  window_fraction)) +
                   16
             : static_cast<std::size_t>(std::ceil(static_cast<double>(target) / window_fraction * 1.3)) +
                   64;
  for (int attempt = 0; attempt < 24; ++attempt) {
    std::mt19937_64 rng(mix_seed(spec.seed, 1));
    master.clear();
    master.reserve(master_size);
    for (std::size_t k = 0; k < master_size; ++k) master.push_back(sample_shape(rng, spec.shape));
    bool enough = true;
    for (std::size_t i = 0; i < m; ++i) {
      candidates[i].clear();
      for (std::size_t k = 0; k < master.size(); ++k) {
        if (in_window(std::atan2(master[k].y(), master[k].x()), centers[i], width)) {
          candidates[i].push_back(static_cast<std::uint32_t>(k));
        }
      }
      if (candidates[i].size() < need) enough = false;
    }
    if (enough) break;
    master_size = coarse ? master_size * 5 / 4 + 1 : master_size * 2;
    if (attempt == 23) throw std::runtime_error("could not sample enough points in sector windows");
  }

  GroundTruthScene scene;
  Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector3d hi = -lo;
  for (const auto& p : master) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  scene.diameter = (hi - lo).norm();

  std::mt19937_64 truth_rng(mix_seed(spec.seed, 2));
  scene.truth.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    scene.truth.push_back(random_transform(truth_rng, max_angle, spec.perturb_trans));
  }

  scene.sets.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    PointSet& set = scene.sets[i];
    set.id = static_cast<int>(i);
    set.points.reserve(target);
    std::mt19937_64 jitter_rng(mix_seed(spec.seed, 3, i));
    std::normal_distribution<double> jitter(0.0, spec.jitter);
    const RigidTransform to_set = inverse(scene.truth[i]);
    const std::size_t avail = candidates[i].size();
    for (std::size_t k = 0; k < target; ++k) {
      const std::size_t pick = k * avail / target;
      Point3 p = master[candidates[i][pick]];
      if (spec.jitter > 0.0) p += Point3(jitter(jitter_rng), jitter(jitter_rng), jitter(jitter_rng));
      set.points.push_back(to_set.apply(p));
    }
  }
  return scene;
}

PointSet add_noise(const PointSet& set, const NoiseSpec& spec) {
  if (set.points.empty()) throw std::invalid_argument("empty point set");
  if (std::isinf(spec.snr_db)) return set;

  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& p : set.points) centroid += p;
  centroid /= static_cast<double>(set.points.size());
  double signal_power = 0.0;
  for (const auto& p : set.points) signal_power += (p - centroid).squaredNorm();
  signal_power /= static_cast<double>(set.points.size());

  const double noise_power = signal_power / std::pow(10.0, spec.snr_db / 10.0);
  const double stddev = std::sqrt(noise_power / 3.0);

  PointSet out = set;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, stddev);
  for (auto& p : out.points) {
    p += Point3(gauss(rng), gauss(rng), gauss(rng));
  }
  return out;
}

PointSet downsample_uniform(const PointSet& set, std::size_t target) {
  if (target < 1) throw std::invalid_argument("downsample target must be >= 1");
  const std::size_t n = set.points.size();
  if (target >= n) return set;
  PointSet out;
  out.id = set.id;
  out.points.reserve(target);
  std::size_t last = std::numeric_limits<std::size_t>::max();
  for (std::size_t k = 0; k < target; ++k) {
    std::size_t idx = static_cast<std::size_t>(
        std::llround(static_cast<double>(k) * static_cast<double>(n) / static_cast<double>(target)));
    idx = std::min(idx, n - 1);
    if (idx == last) continue;
    last = idx;
    out.points.push_back(set.points[idx]);
  }
  return out;
}

ErrorMetrics compute_errors(const std::vector<RigidTransform>& estimated,
                            const std::vector<RigidTransform>& truth, bool gauge_fix) {
  if (estimated.size() != truth.size()) throw std::invalid_argument("transform count mismatch");
  const std::size_t m = estimated.size();

  std::vector<RigidTransform> est = estimated;
  if (gauge_fix) {
    const RigidTransform g = compose(truth[0], inverse(estimated[0]));
    for (auto& t : est) t = compose(g, t);
  }

  ErrorMetrics metrics;
  metrics.gauge_fixed = gauge_fix;
  metrics.per_set_eR.resize(m);
  metrics.per_set_et.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    metrics.per_set_eR[i] = (est[i].rotation() - truth[i].rotation()).norm();
    metrics.per_set_et[i] = (est[i].translation() - truth[i].translation()).norm();
    metrics.e_R += metrics.per_set_eR[i];
    metrics.e_t += metrics.per_set_et[i];
  }
  metrics.e_R /= static_cast<double>(m);
  metrics.e_t /= static_cast<double>(m);
  return metrics;
}

std::vector<SweepRow> sweep_w(const GroundTruthScene& scene, const std::vector<double>& w_values,
                              const EmConfig& cfg) {
  std::vector<SweepRow> rows;
  rows.reserve(w_values.size());
  const std::vector<RigidTransform> init(scene.sets.size(), RigidTransform::identity());
  for (double w : w_values) {
    EmConfig run_cfg = cfg;
    run_cfg.w = w;
    const auto t0 = std::chrono::steady_clock::now();
    auto [params, report] = register_sets(scene.sets, init, run_cfg);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const ErrorMetrics err = compute_errors(params.transforms, scene.truth, true);
    rows.push_back({w, err.e_R, err.e_t, seconds, report.iterations});
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string csv = "w,e_R,e_t,runtime_s,iterations\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.6f,%d\n", r.w, r.e_R, r.e_t, r.runtime_s,
                  r.iterations);
    csv += buf;
  }
  return csv;
}

TrialStats trial_statistics(const GroundTruthScene& scene, const NoiseSpec& noise, int trials,
                            const EmConfig& cfg) {
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");
  const std::vector<RigidTransform> init(scene.sets.size(), RigidTransform::identity());

  std::vector<double> ers, ets, times;
  ers.reserve(trials);
  for (int t = 0; t < trials; ++t) {
    std::vector<PointSet> noisy;
    noisy.reserve(scene.sets.size());
    for (std::size_t i = 0; i < scene.sets.size(); ++i) {
      NoiseSpec per_set{noise.snr_db, mix_seed(noise.seed, static_cast<std::uint64_t>(t), i)};
      noisy.push_back(add_noise(scene.sets[i], per_set));
    }
    const auto t0 = std::chrono::steady_clock::now();
    auto [params, report] = register_sets(noisy, init, cfg);
    times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    const ErrorMetrics err = compute_errors(params.transforms, scene.truth, true);
    ers.push_back(err.e_R);
    ets.push_back(err.e_t);
  }

  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  auto sample_std = [&](const std::vector<double>& v, double mu) {
    if (v.size() < 2) return 0.0;
    double s = 0.0;
    for (double x : v) s += (x - mu) * (x - mu);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
  };

  TrialStats stats;
  stats.trials = trials;
  stats.mean_eR = mean(ers);
  stats.std_eR = sample_std(ers, stats.mean_eR);
  stats.mean_et = mean(ets);
  stats.std_et = sample_std(ets, stats.mean_et);
  stats.mean_runtime = mean(times);
  return stats;
}

}  // namespace empmr
