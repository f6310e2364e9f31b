// Scalar reference kernels. Plain loops, no intrinsics; this file defines
// the semantics the SIMD variants are tested against.

#include "shad/kernels.hpp"

namespace shad::kernels {
namespace {

void matmul_nn_scalar(double* c, const double* a, const double* b, int n, int k, int m) {
    for (int i = 0; i < n; ++i) {
        double* ci = c + static_cast<size_t>(i) * m;
        const double* ai = a + static_cast<size_t>(i) * k;
        for (int l = 0; l < k; ++l) {
            const double s = ai[l];
            const double* bl = b + static_cast<size_t>(l) * m;
            for (int j = 0; j < m; ++j) ci[j] += s * bl[j];
        }
    }
}

void matmul_nt_scalar(double* c, const double* a, const double* b, int n, int k, int m) {
    for (int i = 0; i < n; ++i) {
        const double* ai = a + static_cast<size_t>(i) * k;
        double* ci = c + static_cast<size_t>(i) * m;
        for (int j = 0; j < m; ++j) {
            const double* bj = b + static_cast<size_t>(j) * k;
            double acc = 0.0;
            for (int l = 0; l < k; ++l) acc += ai[l] * bj[l];
            ci[j] += acc;
        }
    }
}

void matmul_tn_scalar(double* c, const double* a, const double* b, int n, int k, int m) {
    for (int i = 0; i < k; ++i) {
        const double* ai = a + static_cast<size_t>(i) * n;
        const double* bi = b + static_cast<size_t>(i) * m;
        for (int l = 0; l < n; ++l) {
            const double s = ai[l];
            double* cl = c + static_cast<size_t>(l) * m;
            for (int j = 0; j < m; ++j) cl[j] += s * bi[j];
        }
    }
}

void add_scalar(double* out, const double* a, const double* b, int n) {
    for (int i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void sub_scalar(double* out, const double* a, const double* b, int n) {
    for (int i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void mul_scalar(double* out, const double* a, const double* b, int n) {
    for (int i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void scale_scalar(double* out, const double* x, double a, int n) {
    for (int i = 0; i < n; ++i) out[i] = a * x[i];
}

void axpy_scalar(double* y, double a, const double* x, int n) {
    for (int i = 0; i < n; ++i) y[i] += a * x[i];
}

void mul_accum_scalar(double* y, const double* a, const double* x, int n) {
    for (int i = 0; i < n; ++i) y[i] += a[i] * x[i];
}

void relu_scalar(double* out, const double* x, int n) {
    for (int i = 0; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_grad_scalar(double* dx, const double* x, const double* g, int n) {
    for (int i = 0; i < n; ++i)
        if (x[i] > 0.0) dx[i] += g[i];
}

double sum_scalar(const double* x, int n) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += x[i];
    return acc;
}

double dot_scalar(const double* a, const double* b, int n) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

double max_scalar(const double* x, int n) {
    double m = x[0];
    for (int i = 1; i < n; ++i)
        if (x[i] > m) m = x[i];
    return m;
}

} // namespace

const KernelTable& scalar() {
    static const KernelTable t{
        "scalar",
        matmul_nn_scalar, matmul_nt_scalar, matmul_tn_scalar,
        add_scalar, sub_scalar, mul_scalar, scale_scalar, axpy_scalar, mul_accum_scalar,
        relu_scalar, relu_grad_scalar,
        sum_scalar, dot_scalar, max_scalar,
    };
    return t;
}

} // namespace shad::kernels
