#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>

#include "topomap/error.hpp"
#include "topomap/layout.hpp"
#include "topomap/rng.hpp"

namespace topomap {

int som_grid_size(std::size_t n) { return static_cast<int>(std::floor(std::sqrt(static_cast<double>(n)) + 1.0)); }

Coords circle_placement(double cx, double cy, std::size_t m, double radius) {
    Coords out(static_cast<Eigen::Index>(m), 2);
    for (std::size_t k = 0; k < m; ++k) {
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(m);
        out(static_cast<Eigen::Index>(k), 0) = cx + radius * std::cos(angle);
        out(static_cast<Eigen::Index>(k), 1) = cy + radius * std::sin(angle);
    }
    return out;
}

Layout layout_som(const NapMatrix& nap, const SomParams& params, std::uint64_t seed) {
    const Matrix& data = nap.layout_features;
    const Eigen::Index n = data.rows();
    const Eigen::Index dim = data.cols();
    if (n < 2) throw Error("layout_som needs at least 2 neurons");
    if (params.epochs < 1) throw Error("layout_som: epochs must be positive");

    const int side = som_grid_size(static_cast<std::size_t>(n));
    const Eigen::Index cells = static_cast<Eigen::Index>(side) * side;
    Rng rng(seed);

    // Random unit-norm initial weights.
    Matrix weights(cells, dim);
    for (Eigen::Index c = 0; c < cells; ++c) {
        for (Eigen::Index k = 0; k < dim; ++k) weights(c, k) = rng.uniform(-1.0, 1.0);
        const double norm = weights.row(c).norm();
        if (norm > 0) weights.row(c) /= norm;
    }

    auto best_matching_unit = [&](Eigen::Index row) {
        Eigen::Index best = 0;
        double best_dist = std::numeric_limits<double>::infinity();
        for (Eigen::Index c = 0; c < cells; ++c) {
            const double d = (weights.row(c) - data.row(row)).squaredNorm();
            if (d < best_dist) {
                best_dist = d;
                best = c;
            }
        }
        return best;
    };

    const double total = static_cast<double>(params.epochs) * static_cast<double>(n);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    double t = 0.0;
    for (int epoch = 0; epoch < params.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        rng.shuffle(std::span<Eigen::Index>(order));
        for (Eigen::Index row : order) {
            const Eigen::Index bmu = best_matching_unit(row);
            const double decay = 1.0 + t / (total / 2.0);
            const double eta = params.learning_rate / decay;
            const double sig = params.sigma / decay;
            const double bx = static_cast<double>(bmu / side);
            const double by = static_cast<double>(bmu % side);
            for (Eigen::Index c = 0; c < cells; ++c) {
                const double dx = static_cast<double>(c / side) - bx;
                const double dy = static_cast<double>(c % side) - by;
                const double h = std::exp(-(dx * dx) / (2 * sig * sig)) * std::exp(-(dy * dy) / (2 * sig * sig));
                if (h < 1e-300) continue;
                weights.row(c) += eta * h * (data.row(row) - weights.row(c));
            }
            t += 1.0;
        }
    }

    std::map<Eigen::Index, std::vector<Eigen::Index>> members;
    for (Eigen::Index i = 0; i < n; ++i) members[best_matching_unit(i)].push_back(i);

    Layout layout;
    layout.coords.resize(n, 2);
    for (const auto& [cell, ids] : members) {
        const double cx = static_cast<double>(cell / side);
        const double cy = static_cast<double>(cell % side);
        if (ids.size() == 1) {
            layout.coords.row(ids[0]) << cx, cy;
            continue;
        }
        const Coords ring = circle_placement(cx, cy, ids.size(), params.collision_radius);
        for (std::size_t k = 0; k < ids.size(); ++k) layout.coords.row(ids[k]) = ring.row(static_cast<Eigen::Index>(k));
    }
    layout.method = Method::som;
    layout.seed = seed;
    layout.neuron_ids = nap.neuron_ids;
    layout.params = {{"epochs", params.epochs},
                     {"grid", side},
                     {"sigma", params.sigma},
                     {"learning_rate", params.learning_rate},
                     {"collision_radius", params.collision_radius}};
    return layout;
}

}  // namespace topomap
