#include "empmr/em.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <thread>

#include "empmr/kernels.hpp"

namespace empmr {

namespace {

struct Soa {
  std::vector<double> x, y, z;
  std::size_t size() const { return x.size(); }
};

Soa to_soa(const PointSet& set) {
  Soa s;
  const std::size_t n = set.points.size();
  s.x.resize(n);
  s.y.resize(n);
  s.z.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    s.x[k] = set.points[k].x();
    s.y[k] = set.points[k].y();
    s.z[k] = set.points[k].z();
  }
  return s;
}

Soa transform_soa(const Soa& in, const RigidTransform& t) {
  Soa out;
  const std::size_t n = in.size();
  out.x.resize(n);
  out.y.resize(n);
  out.z.resize(n);
  Eigen::Matrix<double, 3, 3, Eigen::RowMajor> r = t.rotation();
  kernels::ops().transform_points(r.data(), t.translation().data(), in.x.data(), in.y.data(),
                                  in.z.data(), out.x.data(), out.y.data(), out.z.data(), n);
  return out;
}

/// Corresponding model points phi_j(v_{j,c(j,l)}) for opposite column jp,
/// gathered in data-point order and transformed by the current T_j.
Soa gather_column(const PointSet& set_j, const RigidTransform& t_j,
                  const std::vector<std::uint32_t>& corr, std::size_t jp, std::size_t n,
                  std::size_t mprime) {
  Soa raw;
  raw.x.resize(n);
  raw.y.resize(n);
  raw.z.resize(n);
  for (std::size_t l = 0; l < n; ++l) {
    const Point3& p = set_j.points[corr[l * mprime + jp]];
    raw.x[l] = p.x();
    raw.y[l] = p.y();
    raw.z[l] = p.z();
  }
  return transform_soa(raw, t_j);
}

/// Squared residuals per (l, jp) at the current params, column-major blocks.
std::vector<std::vector<double>> residual_columns(std::size_t i, const std::vector<std::uint32_t>& corr,
                                                  const std::vector<PointSet>& sets,
                                                  const ModelParams& params) {
  const std::size_t m = sets.size();
  const std::size_t mprime = m - 1;
  const std::size_t n = sets[i].points.size();
  const Soa data = transform_soa(to_soa(sets[i]), params.transforms[i]);
  std::vector<std::vector<double>> d2(mprime);
  for (std::size_t jp = 0; jp < mprime; ++jp) {
    const std::size_t j = jp < i ? jp : jp + 1;
    const Soa q = gather_column(sets[j], params.transforms[j], corr, jp, n, mprime);
    d2[jp].resize(n);
    kernels::ops().paired_sqdist(data.x.data(), data.y.data(), data.z.data(), q.x.data(),
                                 q.y.data(), q.z.data(), d2[jp].data(), n);
  }
  return d2;
}

template <typename Fn>
void parallel_chunks(std::size_t n, int threads, Fn fn) {
  if (threads <= 1 || n < 256) {
    fn(std::size_t{0}, n);
    return;
  }
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  const std::size_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
  for (auto& t : pool) t.join();
}

kernels::CrossMoments mstep_moments(std::size_t i, const CorrespondenceField& field,
                                    const std::vector<PointSet>& sets, const ModelParams& params) {
  const std::size_t n = field.n;
  const std::size_t mprime = field.opposite_count();
  const Soa p = to_soa(sets[i]);  // data points stay in the set frame
  std::vector<double> wcol(n);
  kernels::CrossMoments total;
  for (std::size_t jp = 0; jp < mprime; ++jp) {
    const std::size_t j = field.opposite_set(jp);
    const Soa q = gather_column(sets[j], params.transforms[j], field.corr, jp, n, mprime);
    for (std::size_t l = 0; l < n; ++l) wcol[l] = field.alpha[l * mprime + jp];
    kernels::CrossMoments m;
    kernels::ops().cross_moments(wcol.data(), p.x.data(), p.y.data(), p.z.data(), q.x.data(),
                                 q.y.data(), q.z.data(), n, &m);
    total.sum_w += m.sum_w;
    for (int a = 0; a < 3; ++a) {
      total.sum_p[a] += m.sum_p[a];
      total.sum_q[a] += m.sum_q[a];
    }
    for (int a = 0; a < 9; ++a) total.sum_qp[a] += m.sum_qp[a];
  }
  return total;
}

}  // namespace

double gaussian_density(double dist2, double sigma2, int dim) {
  return std::pow(2.0 * std::numbers::pi * sigma2, -0.5 * dim) * std::exp(-dist2 / (2.0 * sigma2));
}

std::vector<std::uint32_t> e_correspond(std::size_t i, const std::vector<PointSet>& sets,
                                        const ModelParams& params,
                                        const std::vector<NnIndex>& indices, int threads) {
  const std::size_t m = sets.size();
  const std::size_t mprime = m - 1;
  const std::size_t n = sets[i].points.size();
  const Soa data = transform_soa(to_soa(sets[i]), params.transforms[i]);
  std::vector<std::uint32_t> corr(n * mprime);
  parallel_chunks(n, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t l = begin; l < end; ++l) {
      const Point3 q(data.x[l], data.y[l], data.z[l]);
      for (std::size_t jp = 0; jp < mprime; ++jp) {
        const std::size_t j = jp < i ? jp : jp + 1;
        corr[l * mprime + jp] = static_cast<std::uint32_t>(indices[j].nearest(q).index);
      }
    }
  });
  return corr;
}

CorrespondenceField e_posteriors(std::size_t i, const std::vector<std::uint32_t>& corr,
                                 const std::vector<PointSet>& sets, const ModelParams& params) {
  if (params.sigma2 <= 0.0) throw std::invalid_argument("degenerate covariance");
  const std::size_t m = sets.size();
  const std::size_t mprime = m - 1;
  const std::size_t n = sets[i].points.size();
  const double sigma2 = params.sigma2;
  const double w = params.w;
  const double lambda = w * static_cast<double>(mprime) / ((1.0 - w) * static_cast<double>(m));
  // lambda competes with densities carrying the (2*pi*sigma2)^(-d/2)
  // normalizer; dividing it out keeps the exp-normalized form exact.
  const double lambda_over_norm = lambda * std::pow(2.0 * std::numbers::pi * sigma2, 1.5);

  const auto d2 = residual_columns(i, corr, sets, params);

  CorrespondenceField field;
  field.set_index = i;
  field.set_count = m;
  field.n = n;
  field.corr = corr;
  field.alpha.resize(n * mprime);
  field.outlier.resize(n);

  std::vector<double> e(mprime);
  for (std::size_t l = 0; l < n; ++l) {
    double dmin = d2[0][l];
    for (std::size_t jp = 1; jp < mprime; ++jp) dmin = std::min(dmin, d2[jp][l]);
    double denom = 0.0;
    for (std::size_t jp = 0; jp < mprime; ++jp) {
      e[jp] = std::exp(-(d2[jp][l] - dmin) / (2.0 * sigma2));
      denom += e[jp];
    }
    // exp may overflow to inf for tiny sigma2; alphas then collapse to zero
    denom += lambda_over_norm * std::exp(dmin / (2.0 * sigma2));
    double row = 0.0;
    for (std::size_t jp = 0; jp < mprime; ++jp) {
      const double a = e[jp] / denom;
      field.alpha[l * mprime + jp] = a;
      row += a;
    }
    field.outlier[l] = 1.0 - row;
  }
  return field;
}

Eigen::Vector3d estimate_translation(std::size_t i, const CorrespondenceField& field,
                                     const std::vector<PointSet>& sets, const ModelParams& params,
                                     const Eigen::Matrix3d& rotation) {
  const kernels::CrossMoments m = mstep_moments(i, field, sets, params);
  if (!(m.sum_w > 0.0)) throw std::invalid_argument("no effective correspondences");
  const Eigen::Vector3d sp(m.sum_p[0], m.sum_p[1], m.sum_p[2]);
  const Eigen::Vector3d sq(m.sum_q[0], m.sum_q[1], m.sum_q[2]);
  return (sq - rotation * sp) / m.sum_w;
}

RotationEstimate estimate_rotation(std::size_t i, const CorrespondenceField& field,
                                   const std::vector<PointSet>& sets, const ModelParams& params) {
  const kernels::CrossMoments m = mstep_moments(i, field, sets, params);
  if (!(m.sum_w > 0.0)) throw std::invalid_argument("no effective correspondences");
  const Eigen::Vector3d pbar = Eigen::Vector3d(m.sum_p[0], m.sum_p[1], m.sum_p[2]) / m.sum_w;
  const Eigen::Vector3d qbar = Eigen::Vector3d(m.sum_q[0], m.sum_q[1], m.sum_q[2]) / m.sum_w;
  Eigen::Matrix3d h;
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      h(a, b) = m.sum_qp[3 * a + b] - m.sum_w * qbar(a) * pbar(b);
    }
  }
  // For the cross-covariance H = sum w (q - qbar)(p - pbar)^T the rotation
  // minimizing sum w |R p - q|^2 is U D V^T (not V U^T, which is its inverse).
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Matrix3d u = svd.matrixU();
  const Eigen::Matrix3d v = svd.matrixV();
  const double det = (u * v.transpose()).determinant();
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  d(2, 2) = det < 0.0 ? -1.0 : 1.0;

  RotationEstimate est;
  est.rotation = u * d * v.transpose();
  const auto& s = svd.singularValues();
  est.ambiguous = det < 0.0 && s(1) - s(2) <= 1e-9 * std::max(s(0), 1e-300);
  return est;
}

double update_sigma(const std::vector<PointSet>& sets, const ModelParams& params,
                    const std::vector<CorrespondenceField>& fields, double sigma2_floor) {
  double sum_w = 0.0, sum_wd2 = 0.0;
  for (const auto& field : fields) {
    if (field.n == 0) continue;
    const auto d2 = residual_columns(field.set_index, field.corr, sets, params);
    const std::size_t mprime = field.opposite_count();
    std::vector<double> wcol(field.n);
    for (std::size_t jp = 0; jp < mprime; ++jp) {
      for (std::size_t l = 0; l < field.n; ++l) wcol[l] = field.alpha[l * mprime + jp];
      double sw = 0.0, swd = 0.0;
      kernels::ops().weighted_sums(wcol.data(), d2[jp].data(), field.n, &sw, &swd);
      sum_w += sw;
      sum_wd2 += swd;
    }
  }
  if (!(sum_w > 0.0)) throw std::invalid_argument("no effective correspondences");
  return std::max(sum_wd2 / (3.0 * sum_w), sigma2_floor);
}

double objective(const std::vector<PointSet>& sets, const ModelParams& params,
                 const std::vector<CorrespondenceField>& fields) {
  double sum_w = 0.0, sum_wd2 = 0.0;
  for (const auto& field : fields) {
    if (field.n == 0) continue;
    const auto d2 = residual_columns(field.set_index, field.corr, sets, params);
    const std::size_t mprime = field.opposite_count();
    std::vector<double> wcol(field.n);
    for (std::size_t jp = 0; jp < mprime; ++jp) {
      for (std::size_t l = 0; l < field.n; ++l) wcol[l] = field.alpha[l * mprime + jp];
      double sw = 0.0, swd = 0.0;
      kernels::ops().weighted_sums(wcol.data(), d2[jp].data(), field.n, &sw, &swd);
      sum_w += sw;
      sum_wd2 += swd;
    }
  }
  return -(sum_wd2 / params.sigma2 + 3.0 * std::log(params.sigma2) * sum_w);
}

double scene_diameter(const std::vector<PointSet>& sets, const std::vector<RigidTransform>& transforms) {
  Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector3d hi = -lo;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    for (const auto& p : sets[i].points) {
      const Point3 q = transforms[i].apply(p);
      lo = lo.cwiseMin(q);
      hi = hi.cwiseMax(q);
    }
  }
  const double d = (hi - lo).norm();
  return std::isfinite(d) ? d : 0.0;
}

namespace {

double initial_sigma2(const std::vector<PointSet>& sets, const ModelParams& params,
                      const std::vector<NnIndex>& indices, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick_set(0, sets.size() - 1);
  double sum = 0.0;
  const int samples = 1000;
  for (int s = 0; s < samples; ++s) {
    const std::size_t i = pick_set(rng);
    std::uniform_int_distribution<std::size_t> pick_point(0, sets[i].points.size() - 1);
    const std::size_t l = pick_point(rng);
    const Point3 q = params.transforms[i].apply(sets[i].points[l]);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < sets.size(); ++j) {
      if (j == i) continue;
      best = std::min(best, indices[j].nearest(q).distance);
    }
    sum += best * best;
  }
  return sum / (3.0 * samples);
}

}  // namespace

std::pair<ModelParams, RegistrationReport> register_sets(const std::vector<PointSet>& sets,
                                                         const std::vector<RigidTransform>& init,
                                                         const EmConfig& cfg) {
  const std::size_t m = sets.size();
  if (m < 2) throw std::invalid_argument("need at least two point sets");
  if (init.size() != m) throw std::invalid_argument("initial transform count does not match set count");

  ModelParams params;
  params.transforms = init;
  params.w = cfg.w;

  RegistrationReport report;
  double diam = scene_diameter(sets, init);
  if (!(diam > 0.0)) diam = 1.0;  // coincident degenerate scenes still terminate
  report.scene_diameter = diam;
  const double sigma2_floor = cfg.sigma2_floor_rel * diam * diam;

  {
    std::vector<NnIndex> indices;
    indices.reserve(m);
    for (std::size_t j = 0; j < m; ++j) indices.emplace_back(sets[j], params.transforms[j]);
    params.sigma2 = std::max(initial_sigma2(sets, params, indices, cfg.seed), sigma2_floor);
  }

  std::vector<RigidTransform> prev = params.transforms;
  double prev_sigma2 = params.sigma2;

  for (int k = 1; k <= cfg.max_iters; ++k) {
    const auto t0 = std::chrono::steady_clock::now();

    // All indices are rebuilt once per outer iteration; inner visits see the
    // snapshot for NN search but the latest transforms for residuals.
    std::vector<NnIndex> indices;
    indices.reserve(m);
    for (std::size_t j = 0; j < m; ++j) indices.emplace_back(sets[j], params.transforms[j]);

    std::vector<CorrespondenceField> fields(m);
    for (std::size_t i = 0; i < m; ++i) {
      auto corr = e_correspond(i, sets, params, indices, cfg.threads);
      fields[i] = e_posteriors(i, corr, sets, params);

      double mass = 0.0;
      for (double a : fields[i].alpha) mass += a;
      if (mass < 1e-12) {
        report.warnings.push_back("set " + std::to_string(sets[i].id) +
                                  ": all points classified as outliers; transform frozen");
        continue;
      }
      const RotationEstimate rot = estimate_rotation(i, fields[i], sets, params);
      if (rot.ambiguous) {
        report.warnings.push_back("set " + std::to_string(sets[i].id) +
                                  ": degenerate rotation optimum (equal singular values)");
      }
      const Eigen::Vector3d t = estimate_translation(i, fields[i], sets, params, rot.rotation);
      params.transforms[i] = RigidTransform(rot.rotation, t);
    }

    const double sigma2_new = update_sigma(sets, params, fields, sigma2_floor);

    double delta = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double dr = (params.transforms[i].rotation() - prev[i].rotation()).norm();
      const double dt = (params.transforms[i].translation() - prev[i].translation()).norm() / diam;
      delta = std::max(delta, dr + dt);
    }
    const double sigma_delta = std::abs(sigma2_new - prev_sigma2) / prev_sigma2;
    params.sigma2 = sigma2_new;

    IterationStats stats;
    stats.objective = objective(sets, params, fields);
    stats.sigma2 = sigma2_new;
    stats.max_delta = std::max(delta, sigma_delta);
    stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.trace.push_back(stats);
    report.iterations = k;

    prev = params.transforms;
    prev_sigma2 = sigma2_new;

    if (delta < cfg.tol && sigma_delta < cfg.tol) {
      report.converged = true;
      break;
    }
  }
  return {params, report};
}

}  // namespace empmr
