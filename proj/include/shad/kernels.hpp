#pragma once

// Data-parallel inner loops behind the graph engine. Two implementations
// ship: a scalar reference and an AVX2 variant; the active table is picked
// once at startup from CPUID, overridable with SHAD_KERNELS=scalar|avx2.
// The two must agree within tight tolerance (see tests/test_kernels.cpp);
// the scalar table is the reference semantics.

#include <cstddef>

namespace shad::kernels {

struct KernelTable {
    const char* name;

    // C += A * B        A: n x k, B: k x m, C: n x m (all row-major)
    void (*matmul_nn)(double* c, const double* a, const double* b, int n, int k, int m);
    // C += A * B^T      A: n x k, B: m x k, C: n x m
    void (*matmul_nt)(double* c, const double* a, const double* b, int n, int k, int m);
    // C += A^T * B      A: k x n, B: k x m, C: n x m
    void (*matmul_tn)(double* c, const double* a, const double* b, int n, int k, int m);

    void (*add)(double* out, const double* a, const double* b, int n);
    void (*sub)(double* out, const double* a, const double* b, int n);
    void (*mul)(double* out, const double* a, const double* b, int n);
    void (*scale)(double* out, const double* x, double a, int n);
    // y += a * x
    void (*axpy)(double* y, double a, const double* x, int n);
    // y += a * x (elementwise product accumulate): y += a .* x
    void (*mul_accum)(double* y, const double* a, const double* x, int n);

    void (*relu)(double* out, const double* x, int n);
    // dx += g where x > 0
    void (*relu_grad)(double* dx, const double* x, const double* g, int n);

    double (*sum)(const double* x, int n);
    double (*dot)(const double* a, const double* b, int n);
    double (*max)(const double* x, int n);
};

const KernelTable& scalar();
#if defined(SHAD_BUILD_AVX2)
const KernelTable& avx2();
#endif

// The table selected at process start. Stable for the process lifetime.
const KernelTable& active();

bool cpu_has_avx2();

} // namespace shad::kernels
