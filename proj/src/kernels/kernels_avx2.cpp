// AVX2/FMA kernels. 4-wide double lanes with scalar tails; only dispatched
// to when CPUID reports AVX2.

#include <immintrin.h>

#include "shad/kernels.hpp"

namespace shad::kernels {
namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    __m128d s2 = _mm_add_pd(lo, hi);
    __m128d sh = _mm_unpackhi_pd(s2, s2);
    return _mm_cvtsd_f64(_mm_add_sd(s2, sh));
}

// c_row += s * b_row over m entries.
inline void row_axpy(double* c, double s, const double* b, int m) {
    const __m256d vs = _mm256_set1_pd(s);
    int j = 0;
    for (; j + 4 <= m; j += 4) {
        __m256d vb = _mm256_loadu_pd(b + j);
        __m256d vc = _mm256_loadu_pd(c + j);
        _mm256_storeu_pd(c + j, _mm256_fmadd_pd(vs, vb, vc));
    }
    for (; j < m; ++j) c[j] += s * b[j];
}

void matmul_nn_avx2(double* c, const double* a, const double* b, int n, int k, int m) {
    for (int i = 0; i < n; ++i) {
        double* ci = c + static_cast<size_t>(i) * m;
        const double* ai = a + static_cast<size_t>(i) * k;
        for (int l = 0; l < k; ++l)
            row_axpy(ci, ai[l], b + static_cast<size_t>(l) * m, m);
    }
}

void matmul_nt_avx2(double* c, const double* a, const double* b, int n, int k, int m) {
    for (int i = 0; i < n; ++i) {
        const double* ai = a + static_cast<size_t>(i) * k;
        double* ci = c + static_cast<size_t>(i) * m;
        for (int j = 0; j < m; ++j) {
            const double* bj = b + static_cast<size_t>(j) * k;
            __m256d acc = _mm256_setzero_pd();
            int l = 0;
            for (; l + 4 <= k; l += 4)
                acc = _mm256_fmadd_pd(_mm256_loadu_pd(ai + l), _mm256_loadu_pd(bj + l), acc);
            double s = hsum(acc);
            for (; l < k; ++l) s += ai[l] * bj[l];
            ci[j] += s;
        }
    }
}

void matmul_tn_avx2(double* c, const double* a, const double* b, int n, int k, int m) {
    for (int i = 0; i < k; ++i) {
        const double* ai = a + static_cast<size_t>(i) * n;
        const double* bi = b + static_cast<size_t>(i) * m;
        for (int l = 0; l < n; ++l)
            row_axpy(c + static_cast<size_t>(l) * m, ai[l], bi, m);
    }
}

void add_avx2(double* out, const double* a, const double* b, int n) {
    int i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] + b[i];
}

void sub_avx2(double* out, const double* a, const double* b, int n) {
    int i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] - b[i];
}

void mul_avx2(double* out, const double* a, const double* b, int n) {
    int i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

void scale_avx2(double* out, const double* x, double a, int n) {
    const __m256d va = _mm256_set1_pd(a);
    int i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) out[i] = a * x[i];
}

void axpy_avx2(double* y, double a, const double* x, int n) { row_axpy(y, a, x, n); }

void mul_accum_avx2(double* y, const double* a, const double* x, int n) {
    int i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vy = _mm256_loadu_pd(y + i);
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(x + i), vy));
    }
    for (; i < n; ++i) y[i] += a[i] * x[i];
}

void relu_avx2(double* out, const double* x, int n) {
    const __m256d z = _mm256_setzero_pd();
    int i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_max_pd(z, _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_grad_avx2(double* dx, const double* x, const double* g, int n) {
    const __m256d z = _mm256_setzero_pd();
    int i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vx = _mm256_loadu_pd(x + i);
        __m256d mask = _mm256_cmp_pd(vx, z, _CMP_GT_OQ);
        __m256d vg = _mm256_and_pd(_mm256_loadu_pd(g + i), mask);
        _mm256_storeu_pd(dx + i, _mm256_add_pd(_mm256_loadu_pd(dx + i), vg));
    }
    for (; i < n; ++i)
        if (x[i] > 0.0) dx[i] += g[i];
}

double sum_avx2(const double* x, int n) {
    __m256d acc = _mm256_setzero_pd();
    int i = 0;
    for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
    double s = hsum(acc);
    for (; i < n; ++i) s += x[i];
    return s;
}

double dot_avx2(const double* a, const double* b, int n) {
    __m256d acc = _mm256_setzero_pd();
    int i = 0;
    for (; i + 4 <= n; i += 4)
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
    double s = hsum(acc);
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

double max_avx2(const double* x, int n) {
    double m = x[0];
    int i = 0;
    if (n >= 4) {
        __m256d vm = _mm256_loadu_pd(x);
        for (i = 4; i + 4 <= n; i += 4) vm = _mm256_max_pd(vm, _mm256_loadu_pd(x + i));
        __m128d lo = _mm256_castpd256_pd128(vm);
        __m128d hi = _mm256_extractf128_pd(vm, 1);
        __m128d m2 = _mm_max_pd(lo, hi);
        m = _mm_cvtsd_f64(_mm_max_sd(m2, _mm_unpackhi_pd(m2, m2)));
    } else {
        i = 1;
    }
    for (; i < n; ++i)
        if (x[i] > m) m = x[i];
    return m;
}

} // namespace

const KernelTable& avx2() {
    static const KernelTable t{
        "avx2",
        matmul_nn_avx2, matmul_nt_avx2, matmul_tn_avx2,
        add_avx2, sub_avx2, mul_avx2, scale_avx2, axpy_avx2, mul_accum_avx2,
        relu_avx2, relu_grad_avx2,
        sum_avx2, dot_avx2, max_avx2,
    };
    return t;
}

} // namespace shad::kernels
