#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "empmr/em.hpp"
#include "empmr/geometry.hpp"

namespace empmr {

enum class Shape { Sphere, Box, Composite };

Shape shape_from_name(const std::string& name);
std::string shape_name(Shape shape);

struct SynthSpec {
  Shape shape = Shape::Sphere;
  int sets = 2;
  int points_per_set = 2000;
  double perturb_deg = 5.0;       // max rotation angle, degrees
  double perturb_trans = 0.05;    // max translation magnitude, scene units
  double overlap = 0.5;           // required pairwise overlap fraction, (0,1]
  double jitter = 0.0;            // per-set Gaussian surface jitter (std, scene units)
  std::uint64_t seed = 0;
};

/// Sets share samples of one master surface cloud, each restricted to its
/// azimuth window, so the exact joint alignment is recoverable.
struct GroundTruthScene {
  std::vector<PointSet> sets;
  std::vector<RigidTransform> truth;  // set frame -> model frame
  double diameter = 0.0;
};

GroundTruthScene synth_scene(const SynthSpec& spec);

struct NoiseSpec {
  double snr_db = std::numeric_limits<double>::infinity();  // +inf: no noise
  std::uint64_t seed = 0;
};

PointSet add_noise(const PointSet& set, const NoiseSpec& spec);

PointSet downsample_uniform(const PointSet& set, std::size_t target);

struct ErrorMetrics {
  double e_R = 0.0;
  double e_t = 0.0;
  std::vector<double> per_set_eR;
  std::vector<double> per_set_et;
  bool gauge_fixed = false;
};

/// Mean Frobenius rotation error and mean translation error versus truth.
/// With gauge_fix, estimated transforms are first left-composed with the
/// global motion that makes set 1 agree exactly.
ErrorMetrics compute_errors(const std::vector<RigidTransform>& estimated,
                            const std::vector<RigidTransform>& truth, bool gauge_fix);

struct SweepRow {
  double w;
  double e_R;
  double e_t;
  double runtime_s;
  int iterations;
};

std::vector<SweepRow> sweep_w(const GroundTruthScene& scene, const std::vector<double>& w_values,
                              const EmConfig& cfg);

std::string sweep_csv(const std::vector<SweepRow>& rows);

struct TrialStats {
  int trials = 0;
  double mean_eR = 0.0, std_eR = 0.0;
  double mean_et = 0.0, std_et = 0.0;
  double mean_runtime = 0.0;
};

/// Independent noisy trials; trial t draws its noise from (spec.seed, t).
TrialStats trial_statistics(const GroundTruthScene& scene, const NoiseSpec& noise, int trials,
                            const EmConfig& cfg);

}  // namespace empmr
