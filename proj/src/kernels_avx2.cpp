// Compiled with -mavx2 -mfma; nothing here runs unless the CPU reports AVX2.
#include "gbt/kernels.hpp"

#include <cassert>
#include <cmath>

#if defined(__x86_64__) || defined(_M_X64)
#include <immintrin.h>
#define GBT_HAVE_AVX2_BUILD 1
#endif

namespace gbt::kernels {

#ifdef GBT_HAVE_AVX2_BUILD

namespace {

void axpy_avx2(double a, std::span<const double> x, std::span<double> y) {
    assert(x.size() == y.size());
    size_t n = x.size();
    __m256d va = _mm256_set1_pd(a);
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vx = _mm256_loadu_pd(x.data() + i);
        __m256d vy = _mm256_loadu_pd(y.data() + i);
        _mm256_storeu_pd(y.data() + i, _mm256_fmadd_pd(va, vx, vy));
    }
    for (; i < n; ++i) y[i] = std::fma(a, x[i], y[i]);
}

void grad_hess_avx2(std::span<const double> p, std::span<const double> labels,
                    std::span<double> g, std::span<double> h) {
    size_t n = p.size();
    __m256d one = _mm256_set1_pd(1.0);
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vp = _mm256_loadu_pd(p.data() + i);
        __m256d vy = _mm256_loadu_pd(labels.data() + i);
        _mm256_storeu_pd(g.data() + i, _mm256_sub_pd(vp, vy));
        _mm256_storeu_pd(h.data() + i, _mm256_mul_pd(vp, _mm256_sub_pd(one, vp)));
    }
    for (; i < n; ++i) {
        g[i] = p[i] - labels[i];
        h[i] = p[i] * (1.0 - p[i]);
    }
}

double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

double sum_avx2(std::span<const double> x) {
    size_t n = x.size();
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x.data() + i));
        acc1 = _mm256_add_pd(acc1, _mm256_loadu_pd(x.data() + i + 4));
    }
    double s = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) s += x[i];
    return s;
}

double dot_avx2(std::span<const double> x, std::span<const double> y) {
    assert(x.size() == y.size());
    size_t n = x.size();
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x.data() + i),
                               _mm256_loadu_pd(y.data() + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x.data() + i + 4),
                               _mm256_loadu_pd(y.data() + i + 4), acc1);
    }
    double s = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) s += x[i] * y[i];
    return s;
}

const Backend kAvx2{axpy_avx2, grad_hess_avx2, sum_avx2, dot_avx2, "avx2"};

} // namespace

bool avx2_available() {
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}

const Backend& avx2_backend() { return kAvx2; }

#else

bool avx2_available() { return false; }
const Backend& avx2_backend() { return scalar_backend(); }

#endif

} // namespace gbt::kernels
