#pragma once

#include <cstddef>
#include <string>

// Data-parallel inner loops over SoA point arrays. A scalar reference
// implementation always exists; on x86 an AVX2+FMA variant is selected at
// runtime when the CPU supports it. Set EMPMR_KERNELS=scalar|avx2 to force
// a particular backend.

namespace empmr::kernels {

/// Raw weighted moments feeding the Kabsch M-step:
///   sum_w, sum_w*p, sum_w*q and the 3x3 row-major sum of w * q * p^T.
struct CrossMoments {
  double sum_w = 0.0;
  double sum_p[3] = {0.0, 0.0, 0.0};
  double sum_q[3] = {0.0, 0.0, 0.0};
  double sum_qp[9] = {0.0};  // sum_qp[3*a + b] = sum w * q[a] * p[b]
};

struct Ops {
  const char* name;

  /// out = R * in + t for n points; R is row-major 3x3.
  void (*transform_points)(const double* r, const double* t,
                           const double* x, const double* y, const double* z,
                           double* ox, double* oy, double* oz, std::size_t n);

  /// d2[k] = |a_k - b_k|^2 for paired points.
  void (*paired_sqdist)(const double* ax, const double* ay, const double* az,
                        const double* bx, const double* by, const double* bz,
                        double* d2, std::size_t n);

  /// sum_w = sum w[k], sum_wd2 = sum w[k]*d2[k].
  void (*weighted_sums)(const double* w, const double* d2, std::size_t n,
                        double* sum_w, double* sum_wd2);

  void (*cross_moments)(const double* w,
                        const double* px, const double* py, const double* pz,
                        const double* qx, const double* qy, const double* qz,
                        std::size_t n, CrossMoments* out);
};

const Ops& scalar_ops();
bool avx2_available();
const Ops& avx2_ops();  // valid only when avx2_available()

/// Runtime-selected backend (env override honored, resolved once).
const Ops& ops();

}  // namespace empmr::kernels
