#pragma once

#include <cstddef>
#include <span>
#include <string_view>

namespace gbt::kernels {

// Data-parallel inner loops used by the boosting trainers. Each kernel has a
// scalar reference implementation and an AVX2 variant; the active backend is
// picked once at startup (overridable with GBT_KERNEL=scalar|avx2).
//
// Elementwise kernels are bit-identical across backends. Reductions may
// differ in the last bits because the vector paths use multiple accumulators;
// the equivalence tests bound that difference.
struct Backend {
    // y[i] += a * x[i]
    void (*axpy)(double a, std::span<const double> x, std::span<double> y);
    // g[i] = p[i] - labels[i];  h[i] = p[i] * (1 - p[i])
    void (*grad_hess)(std::span<const double> p, std::span<const double> labels,
                      std::span<double> g, std::span<double> h);
    double (*sum)(std::span<const double> x);
    double (*dot)(std::span<const double> x, std::span<const double> y);
    const char* name;
};

const Backend& scalar_backend();
bool avx2_available();
const Backend& avx2_backend();   // valid only if avx2_available()

// Active backend after runtime dispatch.
const Backend& active();

inline void axpy(double a, std::span<const double> x, std::span<double> y) {
    active().axpy(a, x, y);
}
inline void grad_hess(std::span<const double> p, std::span<const double> labels,
                      std::span<double> g, std::span<double> h) {
    active().grad_hess(p, labels, g, h);
}
inline double sum(std::span<const double> x) { return active().sum(x); }
inline double dot(std::span<const double> x, std::span<const double> y) {
    return active().dot(x, y);
}

} // namespace gbt::kernels
