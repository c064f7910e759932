#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace matb {

enum class Exec { Serial, Parallel };

// Gradient reductions are split into this many contiguous chunks regardless of
// the thread count, and the per-chunk partial sums are added in chunk order.
// Serial and parallel execution therefore produce bit-identical results.
inline constexpr std::size_t kGradientChunks = 16;

template <class Body>
void for_chunks(std::size_t n, std::size_t chunks, Exec exec, Body&& body) {
    const auto count = static_cast<long>(chunks);
    if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
        for (long c = 0; c < count; ++c) {
            const auto cu = static_cast<std::size_t>(c);
            body(cu, n * cu / chunks, n * (cu + 1) / chunks);
        }
    } else {
        for (long c = 0; c < count; ++c) {
            const auto cu = static_cast<std::size_t>(c);
            body(cu, n * cu / chunks, n * (cu + 1) / chunks);
        }
    }
}

// Sums `sample_grad(i, g)` over i in [0, n) into `out` (size `dim`) with the
// fixed chunk decomposition above. Returns the summed per-sample loss.
template <class SampleGrad>
double accumulate_gradient(std::size_t n, std::size_t dim, Exec exec, std::vector<double>& out,
                           SampleGrad&& sample_grad) {
    std::vector<std::vector<double>> partial(kGradientChunks);
    std::vector<double> loss(kGradientChunks, 0.0);
    for_chunks(n, kGradientChunks, exec, [&](std::size_t c, std::size_t begin, std::size_t end) {
        auto& g = partial[c];
        g.assign(dim, 0.0);
        for (std::size_t i = begin; i < end; ++i) loss[c] += sample_grad(i, g);
    });
    out.assign(dim, 0.0);
    double total = 0.0;
    for (std::size_t c = 0; c < kGradientChunks; ++c) {
        total += loss[c];
        for (std::size_t k = 0; k < dim; ++k) out[k] += partial[c][k];
    }
    return total;
}

struct Adam {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::vector<double> m;
    std::vector<double> v;
    long step_count = 0;

    void step(std::vector<double>& params, const std::vector<double>& grad) {
        if (m.size() != params.size()) {
            m.assign(params.size(), 0.0);
            v.assign(params.size(), 0.0);
        }
        ++step_count;
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
        for (std::size_t k = 0; k < params.size(); ++k) {
            m[k] = beta1 * m[k] + (1.0 - beta1) * grad[k];
            v[k] = beta2 * v[k] + (1.0 - beta2) * grad[k] * grad[k];
            params[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps);
        }
    }
};

}  // namespace matb
