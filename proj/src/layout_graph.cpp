#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <tuple>

#include "topomap/error.hpp"
#include "topomap/layout.hpp"
#include "topomap/rng.hpp"

namespace topomap {

namespace {

class DisjointSets {
public:
    explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), std::size_t{0}); }

    std::size_t find(std::size_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }

    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (b < a) std::swap(a, b);
        parent_[b] = a;
    }

private:
    std::vector<std::size_t> parent_;
};

using Edge = std::pair<std::size_t, std::size_t>;

}  // namespace

std::vector<Edge> CoactivationGraph::edges() const {
    std::vector<Edge> all = threshold_edges;
    all.insert(all.end(), bridge_edges.begin(), bridge_edges.end());
    return all;
}

std::size_t threshold_edge_count(std::size_t n, double fraction) {
    const double pairs = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
    // The small slack keeps exact products such as 0.5 * 6 from rounding up.
    const auto count = static_cast<std::size_t>(std::ceil(fraction * pairs - 1e-9));
    return std::min(count, static_cast<std::size_t>(pairs));
}

std::size_t component_count(std::size_t nodes, const std::vector<Edge>& edges) {
    DisjointSets sets(nodes);
    for (const auto& [a, b] : edges) sets.unite(a, b);
    std::size_t count = 0;
    for (std::size_t i = 0; i < nodes; ++i) count += sets.find(i) == i ? 1 : 0;
    return count;
}

CoactivationGraph build_coactivation_graph(const Matrix& dist, double edge_fraction) {
    const auto n = static_cast<std::size_t>(dist.rows());
    if (n < 2) throw Error("co-activation graph needs at least 2 neurons");
    if (!(edge_fraction > 0.0 && edge_fraction < 1.0)) throw Error("edge_fraction must lie in (0, 1)");

    std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
    pairs.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            pairs.emplace_back(dist(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)), i, j);
    const std::size_t keep = threshold_edge_count(n, edge_fraction);
    std::partial_sort(pairs.begin(), pairs.begin() + static_cast<std::ptrdiff_t>(keep), pairs.end());

    CoactivationGraph graph;
    graph.nodes = n;
    DisjointSets sets(n);
    for (std::size_t k = 0; k < keep; ++k) {
        const auto& [d, i, j] = pairs[k];
        graph.threshold_edges.emplace_back(i, j);
        sets.unite(i, j);
    }

    std::vector<std::size_t> root(n), size(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        root[i] = sets.find(i);
        ++size[root[i]];
    }
    // Largest component; ties go to the one holding the lowest node index,
    // which is its root because unite keeps the smaller index.
    std::size_t largest = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (root[i] == i && size[i] > size[largest]) largest = i;

    for (std::size_t c = 0; c < n; ++c) {
        if (root[c] != c || c == largest) continue;
        double best = std::numeric_limits<double>::infinity();
        Edge link{0, 0};
        for (std::size_t i = 0; i < n; ++i) {
            if (root[i] != c) continue;
            for (std::size_t j = 0; j < n; ++j) {
                if (root[j] != largest) continue;
                const double d = dist(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
                const Edge candidate{std::min(i, j), std::max(i, j)};
                if (d < best || (d == best && candidate < link)) {
                    best = d;
                    link = candidate;
                }
            }
        }
        graph.bridge_edges.push_back(link);
    }
    return graph;
}

Coords fruchterman_reingold(std::size_t nodes, const std::vector<Edge>& edges, int iterations, std::uint64_t seed) {
    const auto n = static_cast<Eigen::Index>(nodes);
    Rng rng(seed);
    Coords pos(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) pos.row(i) << rng.uniform(), rng.uniform();
    if (nodes < 2) return pos;

    Matrix adjacency = Matrix::Zero(n, n);
    for (const auto& [a, b] : edges) {
        adjacency(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = 1.0;
        adjacency(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = 1.0;
    }

    const double k = std::sqrt(1.0 / static_cast<double>(nodes));
    double temperature = 0.1;
    const double cooling = temperature / static_cast<double>(iterations + 1);
    Coords displacement(n, 2);
    for (int it = 0; it < iterations; ++it) {
        displacement.setZero();
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) {
                if (i == j) continue;
                const Eigen::RowVector2d delta = pos.row(i) - pos.row(j);
                const double distance = std::max(delta.norm(), 0.01);
                const double magnitude = k * k / (distance * distance) - adjacency(i, j) * distance / k;
                displacement.row(i) += delta * magnitude;
            }
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            double length = displacement.row(i).norm();
            if (length < 0.01) length = 0.1;
            pos.row(i) += displacement.row(i) * (temperature / length);
        }
        temperature -= cooling;
    }
    return pos;
}

Layout layout_graph(const NapMatrix& nap, const GraphParams& params, std::uint64_t seed) {
    if (nap.layout_features.rows() < 2) throw Error("layout_graph needs at least 2 neurons");
    if (params.fr_iterations < 1) throw Error("layout_graph: fr_iterations must be positive");
    const Matrix dist = cosine_distance_matrix(nap.layout_features);
    const CoactivationGraph graph = build_coactivation_graph(dist, params.edge_fraction);

    Layout layout;
    layout.coords = fruchterman_reingold(graph.nodes, graph.edges(), params.fr_iterations, seed);
    layout.method = Method::graph;
    layout.seed = seed;
    layout.neuron_ids = nap.neuron_ids;
    layout.params = {{"edge_fraction", params.edge_fraction},
                     {"fr_iterations", params.fr_iterations},
                     {"threshold_edges", graph.threshold_edges.size()},
                     {"bridge_edges", graph.bridge_edges.size()}};
    return layout;
}

}  // namespace topomap
