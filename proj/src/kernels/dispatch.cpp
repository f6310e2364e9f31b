// Runtime kernel selection. Checked once; SHAD_KERNELS=scalar forces the
// reference path (used by the equivalence tests and for debugging).

#include <cstdlib>
#include <cstring>

#include "shad/kernels.hpp"

namespace shad::kernels {

bool cpu_has_avx2() {
#if defined(__GNUC__) && (defined(__x86_64__) || defined(__i386__))
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

namespace {

const KernelTable& select() {
    const char* env = std::getenv("SHAD_KERNELS");
    if (env && std::strcmp(env, "scalar") == 0) return scalar();
#if defined(SHAD_BUILD_AVX2)
    if (env && std::strcmp(env, "avx2") == 0) return avx2();
    if (cpu_has_avx2()) return avx2();
#endif
    return scalar();
}

} // namespace

const KernelTable& active() {
    static const KernelTable& t = select();
    return t;
}

} // namespace shad::kernels
