#include <array>
#include <cmath>

#include "topomap/error.hpp"
#include "topomap/layout.hpp"

namespace topomap {

namespace {

constexpr std::array<std::pair<Method, const char*>, 12> kMethodNames{{
    {Method::som, "som"},
    {Method::graph, "graph"},
    {Method::pca, "pca"},
    {Method::tsne, "tsne"},
    {Method::umap, "umap"},
    {Method::pso, "pso"},
    {Method::som_pso, "som_pso"},
    {Method::graph_pso, "graph_pso"},
    {Method::pca_pso, "pca_pso"},
    {Method::tsne_pso, "tsne_pso"},
    {Method::umap_pso, "umap_pso"},
    {Method::random_baseline, "random_baseline"},
}};

}  // namespace

std::string to_string(Method method) {
    for (const auto& [m, name] : kMethodNames)
        if (m == method) return name;
    return "unknown";
}

Method parse_method(const std::string& text) {
    for (const auto& [m, name] : kMethodNames)
        if (text == name) return m;
    throw Error("unknown layout method '" + text + "'");
}

const std::vector<Method>& all_methods() {
    static const std::vector<Method> methods = [] {
        std::vector<Method> out;
        for (const auto& entry : kMethodNames) out.push_back(entry.first);
        return out;
    }();
    return methods;
}

Coords scale_coordinates(const Coords& raw) {
    Coords out(raw.rows(), 2);
    for (int dim = 0; dim < 2; ++dim) {
        if (raw.rows() == 0) break;
        const double lo = raw.col(dim).minCoeff();
        const double hi = raw.col(dim).maxCoeff();
        if (!std::isfinite(lo) || !std::isfinite(hi)) throw Error("scale_coordinates: non-finite coordinate");
        if (hi == lo) {
            out.col(dim).setConstant(0.5);
            continue;
        }
        const double span = hi - lo;
        for (Eigen::Index i = 0; i < raw.rows(); ++i) {
            const double v = raw(i, dim);
            // Pin the extremes so repeated scaling is exactly idempotent.
            out(i, dim) = v == lo ? 0.0 : v == hi ? 1.0 : (v - lo) / span;
        }
    }
    return out;
}

Layout scaled(Layout layout) {
    layout.coords = scale_coordinates(layout.coords);
    layout.scaled = true;
    return layout;
}

}  // namespace topomap
