#include "topomap/pso.hpp"

#include <cmath>
#include <numbers>

#include "topomap/error.hpp"

namespace topomap {

namespace {

/// Offset between the seed of a base engine and the seed of the PSO stage
/// that refines it, so the two stages draw from unrelated streams.
constexpr std::uint64_t kPsoSeedOffset = 0x9E3779B97F4A7C15ULL;

nlohmann::json pso_json(const PsoParams& p, std::size_t n) {
    return {{"steps", p.steps},
            {"global", {p.global.a, p.global.b, p.global.c}},
            {"local", {p.local.a, p.local.b, p.local.c}},
            {"step_size", p.effective_step(n)},
            {"max_step", p.max_step},
            {"mode", p.mode == PsoMode::full ? "full" : "local_only"},
            {"max_cubed", p.max_cubed}};
}

Coords uniform_square(std::size_t n, Rng& rng) {
    Coords c(static_cast<Eigen::Index>(n), 2);
    for (Eigen::Index i = 0; i < c.rows(); ++i) c.row(i) << rng.uniform(), rng.uniform();
    return c;
}

double max_off_diagonal(const Matrix& d) {
    double m = 0.0;
    for (Eigen::Index i = 0; i < d.rows(); ++i)
        for (Eigen::Index j = 0; j < d.cols(); ++j)
            if (i != j) m = std::max(m, d(i, j));
    return m;
}

}  // namespace

void PsoParams::validate() const {
    if (steps < 1) throw Error("PSO steps must be at least 1");
    for (const auto& w : {global, local})
        if (!(w.a > 0 && w.b > 0 && w.c > 0)) throw Error("PSO force weights must be positive");
    if (step_size < 0) throw Error("PSO step size must be non-negative");
    if (!(max_step > 0)) throw Error("PSO max_step must be positive");
}

double global_force_value(double dist, double max_dist, const ForceWeights& w, bool max_cubed) {
    double attraction = w.a;
    if (max_dist > 0) {
        attraction = max_cubed ? w.a * (1.0 - dist / (max_dist * max_dist * max_dist))
                                 : w.a * (1.0 - std::pow(dist / max_dist, 3));
    }
    return attraction - w.b * std::exp(-dist / w.c);
}

double local_force_value(double dist, const ForceWeights& w) {
    const double shifted = dist + 1.0;
    return w.a / (shifted * shifted * shifted) - w.b * std::exp(-dist / w.c);
}

Matrix global_force(const Matrix& nap_dist, const PsoParams& params) {
    const Eigen::Index n = nap_dist.rows();
    if (nap_dist.cols() != n) throw Error("global_force: distance matrix must be square");
    const double max_dist = max_off_diagonal(nap_dist);
    Matrix f = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            if (i != j) f(i, j) = global_force_value(nap_dist(i, j), max_dist, params.global, params.max_cubed);
    return f;
}

Matrix local_force(const Coords& coords, const PsoParams& params) {
    const Eigen::Index n = coords.rows();
    Matrix f = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double v = local_force_value((coords.row(i) - coords.row(j)).norm(), params.local);
            f(i, j) = v;
            f(j, i) = v;
        }
    return f;
}

std::pair<double, double> weight_schedule(int t, int total_steps) {
    if (total_steps < 1 || t < 0 || t > total_steps) throw Error("weight_schedule: t must lie in [0, T]");
    const double s = 9.0 * static_cast<double>(t) / static_cast<double>(total_steps) - 3.0;
    const double th = std::tanh(s);
    // The smaller weight is formed as 1 - larger, which is exact for a larger
    // weight in [0.5, 1], so the pair always sums to exactly 1.
    if (th >= 0.0) {
        const double w_l = (th + 1.0) / 2.0;
        return {1.0 - w_l, w_l};
    }
    const double w_g = (1.0 - th) / 2.0;
    return {w_g, 1.0 - w_g};
}

Coords pso_displacements(const Coords& coords, const Matrix* global, const PsoParams& params, double w_g, double w_l,
                         Rng& rng) {
    const Eigen::Index n = coords.rows();
    const double eta = params.effective_step(static_cast<std::size_t>(n));
    Coords disp = Coords::Zero(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            Eigen::RowVector2d delta = coords.row(j) - coords.row(i);
            const double d = delta.norm();
            double f = w_l != 0.0 ? w_l * local_force_value(d, params.local) : 0.0;
            if (w_g != 0.0 && global != nullptr) f += w_g * (*global)(i, j);
            f *= 0.5;
            Eigen::RowVector2d unit;
            if (d > 0.0) {
                unit = delta / d;
            } else {
                const double angle = 2.0 * std::numbers::pi * rng.uniform();
                unit << std::cos(angle), std::sin(angle);
            }
            disp.row(i) += eta * f * unit;
            disp.row(j) -= eta * f * unit;
        }
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        const double len = disp.row(i).norm();
        if (len > params.max_step) disp.row(i) *= params.max_step / len;
    }
    return disp;
}

Coords pso_run(const Coords& init, const Matrix* nap_dist, const PsoParams& params, std::uint64_t seed) {
    params.validate();
    const Eigen::Index n = init.rows();
    if (!init.allFinite()) throw Error("PSO initial coordinates must be finite");
    std::optional<Matrix> global;
    if (params.mode == PsoMode::full) {
        if (nap_dist == nullptr) throw Error("full PSO needs the NAP distance matrix");
        if (nap_dist->rows() != n || nap_dist->cols() != n)
            throw Error("NAP distance matrix does not match the number of particles");
        global = global_force(*nap_dist, params);
    }

    Rng rng(seed);
    Coords coords = init;
    for (int t = 0; t < params.steps; ++t) {
        auto [w_g, w_l] = params.mode == PsoMode::full ? weight_schedule(t, params.steps) : std::pair{0.0, 1.0};
        coords += pso_displacements(coords, global ? &*global : nullptr, params, w_g, w_l, rng);
        if (!coords.allFinite()) throw Error("PSO produced non-finite coordinates at step " + std::to_string(t));
    }
    return coords;
}

Layout pso_optimize(const Coords& init, const Matrix* nap_dist, const PsoParams& params, std::uint64_t seed) {
    Layout layout;
    layout.coords = pso_run(init, nap_dist, params, seed);
    layout.method = Method::pso;
    layout.seed = seed;
    layout.params = pso_json(params, static_cast<std::size_t>(init.rows()));
    return scaled(std::move(layout));
}

Layout random_baseline(std::size_t n, const PsoParams& params, std::uint64_t seed) {
    if (n < 2) throw Error("random_baseline needs at least 2 particles");
    Rng rng(seed);
    const Coords init = uniform_square(n, rng);
    PsoParams local = params;
    local.mode = PsoMode::local_only;
    Layout layout = pso_optimize(init, nullptr, local, seed + kPsoSeedOffset);
    layout.method = Method::random_baseline;
    layout.seed = seed;
    layout.params["pso_seed"] = seed + kPsoSeedOffset;
    return layout;
}

std::optional<Method> hybrid_base(Method method) {
    switch (method) {
        case Method::som_pso: return Method::som;
        case Method::graph_pso: return Method::graph;
        case Method::pca_pso: return Method::pca;
        case Method::tsne_pso: return Method::tsne;
        case Method::umap_pso: return Method::umap;
        default: return std::nullopt;
    }
}

namespace {

Layout base_layout(Method method, const NapMatrix& nap, const MethodParams& params, std::uint64_t seed) {
    switch (method) {
        case Method::som: return layout_som(nap, params.som, seed);
        case Method::graph: return layout_graph(nap, params.graph, seed);
        case Method::pca: {
            Layout l = layout_pca(nap);
            l.seed = seed;
            return l;
        }
        case Method::tsne: return layout_tsne(nap, params.tsne, seed);
        case Method::umap: return layout_umap(nap, params.umap, seed);
        default: throw Error("'" + to_string(method) + "' is not a base layout engine");
    }
}

Method hybrid_of(Method base) {
    switch (base) {
        case Method::som: return Method::som_pso;
        case Method::graph: return Method::graph_pso;
        case Method::pca: return Method::pca_pso;
        case Method::tsne: return Method::tsne_pso;
        case Method::umap: return Method::umap_pso;
        default: throw Error("no hybrid variant of '" + to_string(base) + "'");
    }
}

}  // namespace

Layout hybrid_layout(Method base, const NapMatrix& nap, const MethodParams& params, std::uint64_t seed) {
    const Method hybrid = hybrid_of(base);
    const Layout first = scaled(base_layout(base, nap, params, seed));
    PsoParams local = params.pso;
    local.mode = PsoMode::local_only;
    Layout layout = pso_optimize(first.coords, nullptr, local, seed + kPsoSeedOffset);
    layout.method = hybrid;
    layout.seed = seed;
    layout.neuron_ids = nap.neuron_ids;
    layout.params = {{"base", first.params}, {"base_seed", seed}, {"pso", layout.params}, {"pso_seed", seed + kPsoSeedOffset}};
    return layout;
}

Layout make_layout(Method method, const NapMatrix& nap, const MethodParams& params, std::uint64_t seed) {
    const std::size_t n = nap.units();
    if (nap.layout_features.rows() != static_cast<Eigen::Index>(n) || nap.neuron_ids.size() != n)
        throw Error("NAP matrix is inconsistent: layout rows, color rows and neuron ids differ");
    Layout layout;
    if (auto base = hybrid_base(method)) {
        layout = hybrid_layout(*base, nap, params, seed);
    } else if (method == Method::random_baseline) {
        layout = random_baseline(n, params.pso, seed);
    } else if (method == Method::pso) {
        Rng rng(seed);
        const Coords init = uniform_square(n, rng);
        const Matrix dist = cosine_distance_matrix(nap.layout_features);
        PsoParams full = params.pso;
        full.mode = PsoMode::full;
        layout = pso_optimize(init, &dist, full, seed + kPsoSeedOffset);
        layout.params["pso_seed"] = seed + kPsoSeedOffset;
    } else {
        layout = scaled(base_layout(method, nap, params, seed));
    }
    layout.method = method;
    layout.seed = seed;
    layout.neuron_ids = nap.neuron_ids;
    return layout;
}

}  // namespace topomap
