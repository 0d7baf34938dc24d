#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "empmr/geometry.hpp"
#include "empmr/kdtree.hpp"

namespace empmr {

struct EmConfig {
  double w = 0.01;
  int max_iters = 100;
  double tol = 1e-6;
  double sigma2_floor_rel = 1e-12;  // floor = sigma2_floor_rel * diameter^2
  std::uint64_t seed = 0;           // reserved for stochastic tie handling
  int threads = 1;
};

/// Per data set i: nearest-neighbor indices and posteriors against every
/// opposite set. Opposite sets are stored in ascending set order, so column
/// j' maps to set j = (j' < i ? j' : j' + 1).
struct CorrespondenceField {
  std::size_t set_index = 0;  // i
  std::size_t set_count = 0;  // M
  std::size_t n = 0;          // N_i
  std::vector<std::uint32_t> corr;  // n * (M-1), c(j,l)
  std::vector<double> alpha;        // n * (M-1)
  std::vector<double> outlier;      // n, alpha_{i,l,i}

  std::size_t opposite_count() const { return set_count - 1; }
  std::size_t opposite_set(std::size_t jp) const { return jp < set_index ? jp : jp + 1; }
};

struct IterationStats {
  double objective = 0.0;
  double sigma2 = 0.0;
  double max_delta = 0.0;  // convergence metric value for this iteration
  double seconds = 0.0;
};

struct RegistrationReport {
  int iterations = 0;
  bool converged = false;
  double scene_diameter = 0.0;
  std::vector<IterationStats> trace;
  std::vector<std::string> warnings;
};

double gaussian_density(double dist2, double sigma2, int dim);

/// E-Corresponding-step for set i: NN index of the transformed data point in
/// every opposite set's index. indices[j] must be built for set j (entry i is
/// ignored). threads > 1 splits the per-point loop; results are identical.
std::vector<std::uint32_t> e_correspond(std::size_t i, const std::vector<PointSet>& sets,
                                        const ModelParams& params,
                                        const std::vector<NnIndex>& indices, int threads = 1);

/// E-Probability-step: Gaussian posteriors with the uniform outlier component,
/// evaluated at the current transforms. Normalized so that row sums plus the
/// outlier mass equal one exactly.
CorrespondenceField e_posteriors(std::size_t i, const std::vector<std::uint32_t>& corr,
                                 const std::vector<PointSet>& sets, const ModelParams& params);

Eigen::Vector3d estimate_translation(std::size_t i, const CorrespondenceField& field,
                                     const std::vector<PointSet>& sets, const ModelParams& params,
                                     const Eigen::Matrix3d& rotation);

struct RotationEstimate {
  Eigen::Matrix3d rotation;
  bool ambiguous = false;  // near-equal singular values spanning the reflection
};

RotationEstimate estimate_rotation(std::size_t i, const CorrespondenceField& field,
                                   const std::vector<PointSet>& sets, const ModelParams& params);

double update_sigma(const std::vector<PointSet>& sets, const ModelParams& params,
                    const std::vector<CorrespondenceField>& fields, double sigma2_floor);

/// Monitoring objective: -sum alpha * (|residual|^2 / sigma2 + d log sigma2).
double objective(const std::vector<PointSet>& sets, const ModelParams& params,
                 const std::vector<CorrespondenceField>& fields);

double scene_diameter(const std::vector<PointSet>& sets, const std::vector<RigidTransform>& transforms);

std::pair<ModelParams, RegistrationReport> register_sets(const std::vector<PointSet>& sets,
                                                         const std::vector<RigidTransform>& init,
                                                         const EmConfig& cfg);

}  // namespace empmr
