#include "gbt/kernels.hpp"

#include <cassert>
#include <cmath>
#include <cstdlib>
#include <cstring>

namespace gbt::kernels {

namespace {

void axpy_scalar(double a, std::span<const double> x, std::span<double> y) {
    assert(x.size() == y.size());
    // fma keeps this bit-identical to the AVX2 variant
    for (size_t i = 0; i < x.size(); ++i) y[i] = std::fma(a, x[i], y[i]);
}

void grad_hess_scalar(std::span<const double> p, std::span<const double> labels,
                      std::span<double> g, std::span<double> h) {
    assert(p.size() == labels.size() && p.size() == g.size() && p.size() == h.size());
    for (size_t i = 0; i < p.size(); ++i) {
        g[i] = p[i] - labels[i];
        h[i] = p[i] * (1.0 - p[i]);
    }
}

double sum_scalar(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v;
    return s;
}

double dot_scalar(std::span<const double> x, std::span<const double> y) {
    assert(x.size() == y.size());
    double s = 0.0;
    for (size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    return s;
}

const Backend kScalar{axpy_scalar, grad_hess_scalar, sum_scalar, dot_scalar, "scalar"};

const Backend& select() {
    const char* env = std::getenv("GBT_KERNEL");
    if (env && std::strcmp(env, "scalar") == 0) return kScalar;
    if (env && std::strcmp(env, "avx2") == 0 && avx2_available()) return avx2_backend();
    if (avx2_available()) return avx2_backend();
    return kScalar;
}

} // namespace

const Backend& scalar_backend() { return kScalar; }

const Backend& active() {
    static const Backend& b = select();
    return b;
}

} // namespace gbt::kernels
