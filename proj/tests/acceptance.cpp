// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "support.hpp"
#include "topomap/image_io.hpp"
#include "topomap/layout.hpp"
#include "topomap/nap.hpp"
#include "topomap/pso.hpp"
#include "topomap/quality.hpp"
#include "topomap/render.hpp"
#include "topomap/rng.hpp"
#include "topomap/synth.hpp"

using namespace topomap;

namespace {

/// Collects failed checks of one criterion.
struct Checks {
    std::vector<std::string> failures;
    std::ostringstream notes;

    void expect(bool ok, const std::string& what) {
        if (!ok) failures.push_back(what);
    }
};

int jobs() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

GroupSpec by_label(const ActivationSet& acts, std::size_t samples) {
    GroupSpec spec = make_groups(acts, Grouping::by_label);
    spec.samples_per_group = samples;
    return spec;
}

NapMatrix criterion_nap() { return testing::planted_nap(128, 10, 4, 0.1, 0, 200); }

// 1. Every PSO hybrid beats the random baseline by at least 10% on both metrics.
void baseline_dominance(Checks& c) {
    const auto start = std::chrono::steady_clock::now();
    const NapMatrix nap = criterion_nap();
    NapSource source;
    source.fixed = &nap;
    const MethodParams params;
    const auto base = robustness_trials(source, Method::random_baseline, params, 20, false, 0, jobs());
    const double base_blur = base.first.trial_mean();
    const double base_resize = base.second.trial_mean();
    c.notes << "baseline blur " << base_blur << " resize " << base_resize;
    for (Method m : {Method::pca_pso, Method::som_pso, Method::graph_pso, Method::tsne_pso, Method::umap_pso}) {
        const auto r = robustness_trials(source, m, params, 20, false, 0, jobs());
        const double blur = r.first.trial_mean();
        const double resize = r.second.trial_mean();
        c.notes << "; " << to_string(m) << " " << blur / base_blur << "/" << resize / base_resize;
        c.expect(blur < 0.9 * base_blur, to_string(m) + " blur AUC not below 0.9x baseline");
        c.expect(resize < 0.9 * base_resize, to_string(m) + " resize AUC not below 0.9x baseline");
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    c.notes << "; " << seconds << " s";
    c.expect(seconds < 300.0, "runtime budget of 5 minutes exceeded");
}

// 2. Deterministic methods have zero variance; stochastic ones replay exactly.
void determinism(Checks& c) {
    const NapMatrix nap = criterion_nap();
    NapSource source;
    source.fixed = &nap;
    const MethodParams params;
    for (Method m : {Method::pca_pso, Method::tsne_pso}) {
        const auto r = robustness_trials(source, m, params, 10, false, 0, jobs());
        c.expect(r.first.trial_variance() == 0.0, to_string(m) + " blur AUC varies across trials");
        c.expect(r.second.trial_variance() == 0.0, to_string(m) + " resize AUC varies across trials");
    }
    for (Method m : {Method::som, Method::graph, Method::umap, Method::pso, Method::som_pso, Method::graph_pso,
                     Method::umap_pso, Method::random_baseline}) {
        const Layout a = make_layout(m, nap, params, 11);
        const Layout b = make_layout(m, nap, params, 11);
        c.expect(a.coords == b.coords, to_string(m) + " layout differs under the same seed");
        const auto ea = evaluate_layout(nap, a);
        const auto eb = evaluate_layout(nap, b);
        c.expect(ea.first.auc == eb.first.auc && ea.second.auc == eb.second.auc,
                 to_string(m) + " AUC differs under the same seed");
    }
    const auto t1 = robustness_trials(source, Method::umap_pso, params, 4, false, 3, 1);
    const auto t2 = robustness_trials(source, Method::umap_pso, params, 4, false, 3, jobs());
    c.expect(t1.first.trials == t2.first.trials && t1.second.trials == t2.second.trials,
             "umap_pso trials depend on concurrency");
}

ActivationSet quantized(std::uint64_t seed, double k) {
    SynthParams p;
    p.neurons = 24;
    p.groups = 5;
    p.clusters = 3;
    p.noise = 0.3;
    p.examples_per_group = 40;
    p.seed = seed;
    ActivationSet acts = synthesize(p);
    // 10 m / 256 keeps both v and 3.7 v exact in float32.
    for (float& v : acts.values) v = static_cast<float>(k * 10.0 * std::round(static_cast<double>(v) * 25.6) / 256.0);
    return acts;
}

// 3. NAP invariants.
void nap_invariants(Checks& c) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const NapMatrix nap = testing::planted_nap(64, 7, 3, 0.4, seed, 25);
        double worst = 0;
        for (Eigen::Index i = 0; i < nap.color_values.rows(); ++i)
            worst = std::max(worst, std::abs(nap.color_values.row(i).sum()));
        c.expect(worst <= 1e-6 * nap.vmax(), "NAP row sum not zero");
    }

    const double k = 3.7;
    const ActivationSet a = quantized(5, 1.0);
    const ActivationSet b = quantized(5, k);
    const NapMatrix na = build_nap(a, by_label(a, 25), 9);
    const NapMatrix nb = build_nap(b, by_label(b, 25), 9);
    c.expect((nb.color_values - k * na.color_values).cwiseAbs().maxCoeff() <= 1e-12 * nb.vmax(),
             "NAP does not scale with the activations");
    c.expect((cosine_distance_matrix(na.layout_features) - cosine_distance_matrix(nb.layout_features))
                     .cwiseAbs()
                     .maxCoeff() <= 1e-9,
             "cosine distances change under scaling");

    SynthParams p;
    p.neurons = 12;
    p.groups = 3;
    p.examples_per_group = 20;
    p.seed = 4;
    const ActivationSet dense = synthesize(p);
    ActivationSet conv = dense;
    conv.layer_kind = LayerKind::conv;
    conv.shape = {dense.shape[0], 1, 1, dense.shape[1]};
    const GroupSpec spec = by_label(dense, 15);
    const NapMatrix nd = build_nap(dense, spec, 1);
    const NapMatrix nc = build_nap(conv, spec, 1);
    c.expect(nd.layout_features == nc.layout_features && nd.color_values == nc.color_values,
             "1x1 conv NAP differs from the dense NAP");
}

double global_ref(double d, double dmax) {
    const double r = d / dmax;
    return 1.5 * (1.0 - r * r * r) - 0.5 * std::exp(-d / 2.0);
}

double local_ref(double d) { return 1.5 / ((d + 1.0) * (d + 1.0) * (d + 1.0)) - 15.0 * std::exp(-d / 2.0); }

// 4. Force oracles, weight schedule and the two-particle equilibrium.
void force_oracle(Checks& c) {
    const PsoParams p;
    Rng rng(17);
    double worst = 0;
    for (int k = 0; k < 1000; ++k) {
        const double d = 2.0 * rng.uniform();
        const double dmax = 0.5 + 1.5 * rng.uniform();
        const double x = 5.0 * rng.uniform();
        worst = std::max(worst, std::abs(global_force_value(d, dmax, p.global) - global_ref(d, dmax)));
        worst = std::max(worst, std::abs(local_force_value(x, p.local) - local_ref(x)));
    }
    c.expect(worst <= 1e-12, "scalar force mismatch");

    // Matrix forms on random geometry.
    Coords pos(30, 2);
    Matrix features(30, 6);
    for (Eigen::Index i = 0; i < pos.size(); ++i) pos.data()[i] = rng.uniform();
    for (Eigen::Index i = 0; i < features.size(); ++i) features.data()[i] = rng.normal();
    const Matrix dist = cosine_distance_matrix(features);
    const Matrix g = global_force(dist, p);
    const Matrix l = local_force(pos, p);
    double dmax = 0;
    for (Eigen::Index i = 0; i < 30; ++i)
        for (Eigen::Index j = 0; j < 30; ++j)
            if (i != j) dmax = std::max(dmax, dist(i, j));
    worst = 0;
    for (Eigen::Index i = 0; i < 30; ++i)
        for (Eigen::Index j = 0; j < 30; ++j) {
            if (i == j) continue;
            worst = std::max(worst, std::abs(g(i, j) - global_ref(dist(i, j), dmax)));
            worst = std::max(worst, std::abs(l(i, j) - local_ref((pos.row(i) - pos.row(j)).norm())));
        }
    c.expect(worst <= 1e-12, "force matrix mismatch");

    for (int t = 0; t <= 1000; ++t) {
        const auto [wg, wl] = weight_schedule(t);
        if (wg + wl != 1.0) {
            c.expect(false, "w_g + w_l != 1 at t = " + std::to_string(t));
            break;
        }
    }
    c.expect(std::abs(weight_schedule(333).second - 0.5) < 0.005, "w_l(333) not within 0.005 of 0.5");

    double lo = 1.0, hi = 100.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (local_ref(mid) < 0 ? lo : hi) = mid;
    }
    const double d_star = 0.5 * (lo + hi);
    PsoParams local = p;
    local.mode = PsoMode::local_only;
    Coords pair(2, 2);
    pair << 0, 0, d_star, 0;
    Rng step_rng(0);
    const double disp = pso_displacements(pair, nullptr, local, 0.0, 1.0, step_rng).norm();
    c.notes << "d* = " << d_star << ", displacement " << disp;
    c.expect(disp < 1e-9, "two particles at d* move");
}

// 5. Metric oracles.
void metric_oracles(Checks& c) {
    const std::vector<double> curve = {0, 2, 4};
    c.expect(auc(curve) == 4.0, "auc([0,2,4]) != 4");
    for (double v : {0.0, 0.25, 0.5, 1.0}) {
        const Matrix img = Matrix::Constant(kMetricResolution, kMetricResolution, v);
        for (double m : blur_mse_curve(img)) c.expect(m == 0.0, "blur MSE of a constant image is nonzero");
        for (double m : resize_mse_curve(img)) c.expect(m == 0.0, "resize MSE of a constant image is nonzero");
    }
    Matrix impulse = Matrix::Zero(kMetricResolution, kMetricResolution);
    impulse(150, 150) = 1.0;
    const auto blur = blur_mse_curve(impulse);
    for (std::size_t k = 1; k < blur.size(); ++k)
        c.expect(blur[k] > blur[k - 1], "impulse blur MSE not increasing at radius " + std::to_string(2 * (k + 1)));
}

std::size_t components_before_layout(const NapMatrix& nap) {
    const CoactivationGraph g = build_coactivation_graph(cosine_distance_matrix(nap.layout_features), 0.075);
    return component_count(nap.units(), g.edges());
}

// 6. Geometry invariants.
void geometry(Checks& c) {
    Rng rng(1);
    Coords raw(50, 2);
    for (Eigen::Index i = 0; i < raw.size(); ++i) raw.data()[i] = 1e3 * rng.normal();
    const Coords once = scale_coordinates(raw);
    c.expect(scale_coordinates(once) == once, "scale_coordinates not idempotent");

    Matrix rows(50, 6);
    rows.rowwise() = Eigen::RowVectorXd::LinSpaced(6, -1, 1);
    const Layout som = layout_som(testing::nap_from_rows(rows), {}, 3);
    std::set<std::pair<double, double>> seen;
    for (Eigen::Index i = 0; i < 50; ++i) seen.insert({som.coords(i, 0), som.coords(i, 1)});
    c.expect(seen.size() == 50, "SOM stacked neurons on identical rows");

    // Noise-free clusters leave the threshold graph disconnected until bridged.
    for (double noise : {0.0, 0.1})
        c.expect(components_before_layout(testing::planted_nap(128, 10, 4, noise, 3, 50)) == 1,
                 "co-activation graph not connected");

    PsoParams p;
    p.mode = PsoMode::local_only;
    p.steps = 1;
    const Coords out = pso_run(Coords::Constant(10, 2, 0.5), nullptr, p, 1);
    bool separated = true;
    for (Eigen::Index i = 0; i < 10; ++i)
        for (Eigen::Index j = i + 1; j < 10; ++j) separated = separated && (out.row(i) - out.row(j)).norm() > 0.0;
    c.expect(separated, "coincident particles not separated after one step");
}

// 7. Rendering.
void rendering(Checks& c) {
    const int r = 100;
    Rng rng(4);
    Coords pts(30, 2);
    Vector v(30);
    std::set<std::pair<int, int>> cells = {{0, 0}, {99, 99}, {0, 99}, {99, 0}};
    pts.row(0) << 0, 0;
    pts.row(1) << 1, 1;
    pts.row(2) << 0, 1;
    pts.row(3) << 1, 0;
    for (Eigen::Index i = 4; i < 30; ++i) {
        std::pair<int, int> cell;
        do cell = {static_cast<int>(rng.index(r)), static_cast<int>(rng.index(r))};
        while (!cells.insert(cell).second);
        pts.row(i) << cell.first / double(r - 1), cell.second / double(r - 1);
    }
    for (Eigen::Index i = 0; i < 30; ++i) v(i) = rng.normal();
    Layout layout;
    layout.coords = pts;
    layout.scaled = true;
    for (int i = 0; i < 30; ++i) layout.neuron_ids.push_back(std::to_string(i));
    const TopoImage img = interpolate_field(layout, v, r);
    double worst = 0;
    for (Eigen::Index i = 0; i < 30; ++i) {
        const auto col = static_cast<Eigen::Index>(std::lround(pts(i, 0) * (r - 1)));
        const auto row = static_cast<Eigen::Index>(std::lround((1.0 - pts(i, 1)) * (r - 1)));
        worst = std::max(worst, std::abs(img.field(row, col) - v(i)));
    }
    c.expect(worst <= 1e-6, "interpolation not exact at vertices");

    c.expect(diverging_color(-1.0, 1.0) == Rgb{0, 0, 255}, "-vmax is not blue");
    c.expect(diverging_color(0.0, 1.0) == Rgb{255, 255, 255}, "0 is not white");
    c.expect(diverging_color(1.0, 1.0) == Rgb{255, 0, 0}, "+vmax is not red");

    TopoImage neg = img;
    neg.vmax = img.field.cwiseAbs().maxCoeff();
    TopoImage pos = neg;
    neg.field = -pos.field;
    const RgbImage a = colorize(pos);
    const RgbImage b = colorize(neg);
    bool swapped = a.width == b.width && a.height == b.height;
    for (int y = 0; swapped && y < a.height; ++y)
        for (int x = 0; x < a.width; ++x) {
            const Rgb p = a.at(x, y), q = b.at(x, y);
            swapped = swapped && p.r == q.b && p.g == q.g && p.b == q.r;
        }
    c.expect(swapped, "colorize(-f) is not the red/blue swap of colorize(f)");

    const NapMatrix nap = testing::planted_nap(40, 4, 2, 0.1, 1, 20);
    MethodParams params;
    params.pso.steps = 200;
    const Layout l = make_layout(Method::pca_pso, nap, params, 1);
    testing::TempDir tmp("acceptance_render");
    const Figure fig = render_grid(nap, l, GridDescriptor::all_groups(nap, false), tmp.path / "map.png");
    c.expect(fig.resolution == 100 && fig.panels.size() == 4, "default render is not 4 panels of 100 x 100");
    const RgbImage png = read_png(tmp.path / "map.png");
    c.expect(png.width >= 4 * 100 && png.height >= 100, "rendered PNG too small");
    const Matrix metric = metric_image(nap, l, 0);
    c.expect(metric.rows() == 300 && metric.cols() == 300, "metric image is not 300 x 300");
}

// 8. Similarity-driven engines keep noise-free clusters together.
void cluster_fidelity(Checks& c) {
    for (std::uint64_t seed : {1u, 2u}) {
        const NapMatrix nap = testing::planted_nap(40, 4, 2, 0.0, seed, 10);
        for (Method m : all_methods()) {
            if (m == Method::random_baseline) continue;
            const Coords xy = make_layout(m, nap, {}, seed + 2).coords;
            double intra = 0, inter = 0;
            int ni = 0, nx = 0;
            for (Eigen::Index i = 0; i < 40; ++i)
                for (Eigen::Index j = i + 1; j < 40; ++j) {
                    const double d = (xy.row(i) - xy.row(j)).norm();
                    if (planted_cluster(static_cast<std::size_t>(i), {.neurons = 40, .clusters = 2}) ==
                        planted_cluster(static_cast<std::size_t>(j), {.neurons = 40, .clusters = 2})) {
                        intra += d;
                        ++ni;
                    } else {
                        inter += d;
                        ++nx;
                    }
                }
            c.expect(intra / ni < inter / nx, to_string(m) + " mixes the clusters (seed " + std::to_string(seed) + ")");
        }
    }
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<void(Checks&)>>> criteria = {
        {"baseline dominance", baseline_dominance}, {"determinism", determinism},
        {"NAP invariants", nap_invariants},         {"PSO force oracle", force_oracle},
        {"metric oracles", metric_oracles},         {"geometry invariants", geometry},
        {"rendering", rendering},                   {"cluster fidelity", cluster_fidelity},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Checks c;
        try {
            criteria[i].second(c);
        } catch (const std::exception& e) {
            c.failures.push_back(std::string("exception: ") + e.what());
        }
        const bool ok = c.failures.empty();
        failed += ok ? 0 : 1;
        std::printf("criterion %zu: %s %s", i + 1, ok ? "PASS" : "FAIL", criteria[i].first.c_str());
        if (!c.notes.str().empty()) std::printf(" [%s]", c.notes.str().c_str());
        std::printf("\n");
        for (const auto& f : c.failures) std::printf("    %s\n", f.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
