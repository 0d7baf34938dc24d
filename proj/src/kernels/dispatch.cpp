#include "empmr/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace empmr::kernels {

namespace {

const Ops* select() {
  if (const char* force = std::getenv("EMPMR_KERNELS")) {
    if (std::strcmp(force, "scalar") == 0) return &scalar_ops();
    if (std::strcmp(force, "avx2") == 0 && avx2_available()) return &avx2_ops();
  }
  return avx2_available() ? &avx2_ops() : &scalar_ops();
}

}  // namespace

const Ops& ops() {
  static const Ops* selected = select();
  return *selected;
}

}  // namespace empmr::kernels
