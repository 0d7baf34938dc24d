#include "empmr/kernels.hpp"

#include <cmath>

#if defined(__x86_64__) || defined(_M_X64)
#define EMPMR_X86 1
#include <immintrin.h>
#else
#define EMPMR_X86 0
#endif

namespace empmr::kernels {

#if EMPMR_X86

namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

void transform_points_avx2(const double* r, const double* t,
                           const double* x, const double* y, const double* z,
                           double* ox, double* oy, double* oz, std::size_t n) {
  const __m256d r0 = _mm256_set1_pd(r[0]), r1 = _mm256_set1_pd(r[1]), r2 = _mm256_set1_pd(r[2]);
  const __m256d r3 = _mm256_set1_pd(r[3]), r4 = _mm256_set1_pd(r[4]), r5 = _mm256_set1_pd(r[5]);
  const __m256d r6 = _mm256_set1_pd(r[6]), r7 = _mm256_set1_pd(r[7]), r8 = _mm256_set1_pd(r[8]);
  const __m256d t0 = _mm256_set1_pd(t[0]), t1 = _mm256_set1_pd(t[1]), t2 = _mm256_set1_pd(t[2]);
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    const __m256d px = _mm256_loadu_pd(x + k);
    const __m256d py = _mm256_loadu_pd(y + k);
    const __m256d pz = _mm256_loadu_pd(z + k);
    _mm256_storeu_pd(ox + k, _mm256_fmadd_pd(r0, px, _mm256_fmadd_pd(r1, py, _mm256_fmadd_pd(r2, pz, t0))));
    _mm256_storeu_pd(oy + k, _mm256_fmadd_pd(r3, px, _mm256_fmadd_pd(r4, py, _mm256_fmadd_pd(r5, pz, t1))));
    _mm256_storeu_pd(oz + k, _mm256_fmadd_pd(r6, px, _mm256_fmadd_pd(r7, py, _mm256_fmadd_pd(r8, pz, t2))));
  }
  for (; k < n; ++k) {
    // fuse exactly like the vector body so identical input points map to
    // identical outputs regardless of their position in the array
    const double px = x[k], py = y[k], pz = z[k];
    ox[k] = std::fma(r[0], px, std::fma(r[1], py, std::fma(r[2], pz, t[0])));
    oy[k] = std::fma(r[3], px, std::fma(r[4], py, std::fma(r[5], pz, t[1])));
    oz[k] = std::fma(r[6], px, std::fma(r[7], py, std::fma(r[8], pz, t[2])));
  }
}

void paired_sqdist_avx2(const double* ax, const double* ay, const double* az,
                        const double* bx, const double* by, const double* bz,
                        double* d2, std::size_t n) {
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    const __m256d dx = _mm256_sub_pd(_mm256_loadu_pd(ax + k), _mm256_loadu_pd(bx + k));
    const __m256d dy = _mm256_sub_pd(_mm256_loadu_pd(ay + k), _mm256_loadu_pd(by + k));
    const __m256d dz = _mm256_sub_pd(_mm256_loadu_pd(az + k), _mm256_loadu_pd(bz + k));
    _mm256_storeu_pd(d2 + k, _mm256_fmadd_pd(dx, dx, _mm256_fmadd_pd(dy, dy, _mm256_mul_pd(dz, dz))));
  }
  for (; k < n; ++k) {
    const double dx = ax[k] - bx[k], dy = ay[k] - by[k], dz = az[k] - bz[k];
    d2[k] = std::fma(dx, dx, std::fma(dy, dy, dz * dz));
  }
}

void weighted_sums_avx2(const double* w, const double* d2, std::size_t n,
                        double* sum_w, double* sum_wd2) {
  __m256d sw = _mm256_setzero_pd();
  __m256d swd = _mm256_setzero_pd();
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    const __m256d wk = _mm256_loadu_pd(w + k);
    sw = _mm256_add_pd(sw, wk);
    swd = _mm256_fmadd_pd(wk, _mm256_loadu_pd(d2 + k), swd);
  }
  double s = hsum(sw), sd = hsum(swd);
  for (; k < n; ++k) {
    s += w[k];
    sd += w[k] * d2[k];
  }
  *sum_w = s;
  *sum_wd2 = sd;
}

void cross_moments_avx2(const double* w,
                        const double* px, const double* py, const double* pz,
                        const double* qx, const double* qy, const double* qz,
                        std::size_t n, CrossMoments* out) {
  __m256d acc[16];
  for (auto& a : acc) a = _mm256_setzero_pd();
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    const __m256d wk = _mm256_loadu_pd(w + k);
    const __m256d pxk = _mm256_loadu_pd(px + k);
    const __m256d pyk = _mm256_loadu_pd(py + k);
    const __m256d pzk = _mm256_loadu_pd(pz + k);
    const __m256d wqx = _mm256_mul_pd(wk, _mm256_loadu_pd(qx + k));
    const __m256d wqy = _mm256_mul_pd(wk, _mm256_loadu_pd(qy + k));
    const __m256d wqz = _mm256_mul_pd(wk, _mm256_loadu_pd(qz + k));
    acc[0] = _mm256_add_pd(acc[0], wk);
    acc[1] = _mm256_fmadd_pd(wk, pxk, acc[1]);
    acc[2] = _mm256_fmadd_pd(wk, pyk, acc[2]);
    acc[3] = _mm256_fmadd_pd(wk, pzk, acc[3]);
    acc[4] = _mm256_add_pd(acc[4], wqx);
    acc[5] = _mm256_add_pd(acc[5], wqy);
    acc[6] = _mm256_add_pd(acc[6], wqz);
    acc[7] = _mm256_fmadd_pd(wqx, pxk, acc[7]);
    acc[8] = _mm256_fmadd_pd(wqx, pyk, acc[8]);
    acc[9] = _mm256_fmadd_pd(wqx, pzk, acc[9]);
    acc[10] = _mm256_fmadd_pd(wqy, pxk, acc[10]);
    acc[11] = _mm256_fmadd_pd(wqy, pyk, acc[11]);
    acc[12] = _mm256_fmadd_pd(wqy, pzk, acc[12]);
    acc[13] = _mm256_fmadd_pd(wqz, pxk, acc[13]);
    acc[14] = _mm256_fmadd_pd(wqz, pyk, acc[14]);
    acc[15] = _mm256_fmadd_pd(wqz, pzk, acc[15]);
  }
  CrossMoments m;
  m.sum_w = hsum(acc[0]);
  for (int a = 0; a < 3; ++a) m.sum_p[a] = hsum(acc[1 + a]);
  for (int a = 0; a < 3; ++a) m.sum_q[a] = hsum(acc[4 + a]);
  for (int a = 0; a < 9; ++a) m.sum_qp[a] = hsum(acc[7 + a]);
  for (; k < n; ++k) {
    const double wk = w[k];
    const double pv[3] = {px[k], py[k], pz[k]};
    const double qv[3] = {qx[k], qy[k], qz[k]};
    m.sum_w += wk;
    for (int a = 0; a < 3; ++a) {
      m.sum_p[a] += wk * pv[a];
      m.sum_q[a] += wk * qv[a];
      for (int b = 0; b < 3; ++b) m.sum_qp[3 * a + b] += wk * qv[a] * pv[b];
    }
  }
  *out = m;
}

}  // namespace

bool avx2_available() {
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}

const Ops& avx2_ops() {
  static const Ops ops = {
      "avx2",
      transform_points_avx2,
      paired_sqdist_avx2,
      weighted_sums_avx2,
      cross_moments_avx2,
  };
  return ops;
}

#else

bool avx2_available() { return false; }
const Ops& avx2_ops() { return scalar_ops(); }

#endif  // EMPMR_X86

}  // namespace empmr::kernels
