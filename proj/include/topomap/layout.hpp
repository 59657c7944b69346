#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "topomap/matrix.hpp"
#include "topomap/nap.hpp"

namespace topomap {

enum class Method {
    som,
    graph,
    pca,
    tsne,
    umap,
    pso,
    som_pso,
    graph_pso,
    pca_pso,
    tsne_pso,
    umap_pso,
    random_baseline,
};

std::string to_string(Method method);
Method parse_method(const std::string& text);
const std::vector<Method>& all_methods();

/// 2-D neuron positions. Engines return raw coordinates (`scaled == false`);
/// make_layout and the hybrids return them mapped to the unit square.
struct Layout {
    Coords coords;
    Method method = Method::pca;
    std::uint64_t seed = 0;
    std::vector<std::string> neuron_ids;
    nlohmann::json params = nlohmann::json::object();
    bool scaled = false;

    std::size_t size() const { return static_cast<std::size_t>(coords.rows()); }
};

/// Per dimension (v - min) / (max - min); a dimension whose values all
/// coincide becomes 0.5.
Coords scale_coordinates(const Coords& raw);

/// Returns a copy with coordinates scaled and `scaled` set.
Layout scaled(Layout layout);

struct SomParams {
    int epochs = 10;
    double sigma = 1.0;
    double learning_rate = 0.5;
    /// Radius of the circle that separates neurons sharing a grid cell.
    double collision_radius = 0.2;
};

struct GraphParams {
    double edge_fraction = 0.075;
    int fr_iterations = 50;
};

struct TsneParams {
    double perplexity = 30.0;
    int iterations = 1000;
    double learning_rate = 200.0;
    double early_exaggeration = 12.0;
    int exaggeration_iterations = 250;
};

struct UmapParams {
    int n_neighbors = 15;
    double min_dist = 0.1;
    int epochs = 500;
    double spread = 1.0;
    int negative_sample_rate = 5;
};

/// Side length of the square SOM grid for n neurons: floor(sqrt(n) + 1).
int som_grid_size(std::size_t n);

/// Places m >= 2 neurons sharing a cell uniformly on a circle around it,
/// starting at angle 0. Exposed for testing.
Coords circle_placement(double cx, double cy, std::size_t m, double radius);

Layout layout_som(const NapMatrix& nap, const SomParams& params, std::uint64_t seed);

/// Co-activation graph before force-directed placement.
struct CoactivationGraph {
    std::size_t nodes = 0;
    std::vector<std::pair<std::size_t, std::size_t>> threshold_edges;
    std::vector<std::pair<std::size_t, std::size_t>> bridge_edges;

    std::vector<std::pair<std::size_t, std::size_t>> edges() const;
};

/// ceil(fraction * n(n-1)/2), the number of most-similar pairs kept.
std::size_t threshold_edge_count(std::size_t n, double fraction);

/// Connects the most similar pairs, then bridges every smaller connected
/// component to the largest through its most similar cross pair.
CoactivationGraph build_coactivation_graph(const Matrix& cosine_distance, double edge_fraction);

/// Number of connected components of an undirected edge list.
std::size_t component_count(std::size_t nodes, const std::vector<std::pair<std::size_t, std::size_t>>& edges);

/// Fruchterman-Reingold placement from seeded random initial positions.
Coords fruchterman_reingold(std::size_t nodes, const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                            int iterations, std::uint64_t seed);

Layout layout_graph(const NapMatrix& nap, const GraphParams& params, std::uint64_t seed);

/// Result of the two-component PCA used by layout_pca and the t-SNE init.
struct PcaProjection {
    Coords scores;
    Matrix components;  ///< 2 x D, unit rows
    Eigen::Vector2d explained_variance;
};

PcaProjection pca_2d(const Matrix& features);

Layout layout_pca(const NapMatrix& nap);

/// min(requested, (n - 1) / 3)
double effective_perplexity(double requested, std::size_t n);

Layout layout_tsne(const NapMatrix& nap, const TsneParams& params, std::uint64_t seed);

/// Fits 1 / (1 + a x^(2b)) to the UMAP target curve for min_dist and spread.
std::pair<double, double> umap_curve_parameters(double min_dist, double spread);

Layout layout_umap(const NapMatrix& nap, const UmapParams& params, std::uint64_t seed);

}  // namespace topomap
