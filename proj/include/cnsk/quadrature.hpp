#pragma once

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "cnsk/numerics.hpp"

namespace cnsk {

/// Gauss-Legendre rule mapped to [0, 1].
struct GaussLegendre {
    std::vector<double> nodes;
    std::vector<double> weights;

    explicit GaussLegendre(std::size_t order) : nodes(order), weights(order) {
        const std::size_t n = order;
        // Returns (P_n(x), P_n'(x)) by the three-term recurrence.
        const auto legendre = [n](double x) {
            double p0 = 1.0, p1 = x;
            for (std::size_t k = 2; k <= n; ++k) {
                const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
                p0 = p1;
                p1 = pk;
            }
            return std::pair{p1, static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0)};
        };
        for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
            double x = std::cos(pi * (static_cast<double>(i) + 0.75) / (static_cast<double>(n) + 0.5));
            for (int iter = 0; iter < 100; ++iter) {
                const auto [p, d] = legendre(x);
                const double dx = p / d;
                x -= dx;
                if (std::abs(dx) < 1e-16) break;
            }
            const double dp = legendre(x).second;
            const double w = 2.0 / ((1.0 - x * x) * dp * dp);
            // [-1,1] -> [0,1]
            nodes[i] = 0.5 * (1.0 - x);
            nodes[n - 1 - i] = 0.5 * (1.0 + x);
            weights[i] = 0.5 * w;
            weights[n - 1 - i] = 0.5 * w;
        }
    }

    template <class F>
    double integrate(const F& f) const {
        double acc = 0.0;
        for (std::size_t i = 0; i < nodes.size(); ++i) acc += weights[i] * f(nodes[i]);
        return acc;
    }
};

}  // namespace cnsk
