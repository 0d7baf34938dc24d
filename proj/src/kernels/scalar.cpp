#include "empmr/kernels.hpp"

namespace empmr::kernels {

namespace {

void transform_points_scalar(const double* r, const double* t,
                             const double* x, const double* y, const double* z,
                             double* ox, double* oy, double* oz, std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) {
    const double px = x[k], py = y[k], pz = z[k];
    ox[k] = r[0] * px + r[1] * py + r[2] * pz + t[0];
    oy[k] = r[3] * px + r[4] * py + r[5] * pz + t[1];
    oz[k] = r[6] * px + r[7] * py + r[8] * pz + t[2];
  }
}

void paired_sqdist_scalar(const double* ax, const double* ay, const double* az,
                          const double* bx, const double* by, const double* bz,
                          double* d2, std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) {
    const double dx = ax[k] - bx[k];
    const double dy = ay[k] - by[k];
    const double dz = az[k] - bz[k];
    d2[k] = dx * dx + dy * dy + dz * dz;
  }
}

void weighted_sums_scalar(const double* w, const double* d2, std::size_t n,
                          double* sum_w, double* sum_wd2) {
  double sw = 0.0, swd = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    sw += w[k];
    swd += w[k] * d2[k];
  }
  *sum_w = sw;
  *sum_wd2 = swd;
}

void cross_moments_scalar(const double* w,
                          const double* px, const double* py, const double* pz,
                          const double* qx, const double* qy, const double* qz,
                          std::size_t n, CrossMoments* out) {
  CrossMoments m;
  for (std::size_t k = 0; k < n; ++k) {
    const double wk = w[k];
    const double pxk = px[k], pyk = py[k], pzk = pz[k];
    const double qxk = qx[k], qyk = qy[k], qzk = qz[k];
    m.sum_w += wk;
    m.sum_p[0] += wk * pxk;
    m.sum_p[1] += wk * pyk;
    m.sum_p[2] += wk * pzk;
    m.sum_q[0] += wk * qxk;
    m.sum_q[1] += wk * qyk;
    m.sum_q[2] += wk * qzk;
    m.sum_qp[0] += wk * qxk * pxk;
    m.sum_qp[1] += wk * qxk * pyk;
    m.sum_qp[2] += wk * qxk * pzk;
    m.sum_qp[3] += wk * qyk * pxk;
    m.sum_qp[4] += wk * qyk * pyk;
    m.sum_qp[5] += wk * qyk * pzk;
    m.sum_qp[6] += wk * qzk * pxk;
    m.sum_qp[7] += wk * qzk * pyk;
    m.sum_qp[8] += wk * qzk * pzk;
  }
  *out = m;
}

}  // namespace

const Ops& scalar_ops() {
  static const Ops ops = {
      "scalar",
      transform_points_scalar,
      paired_sqdist_scalar,
      weighted_sums_scalar,
      cross_moments_scalar,
  };
  return ops;
}

}  // namespace empmr::kernels
