// topomap: activation profiles -> layouts -> topographic map images -> quality scores.

#include <CLI11.hpp>

#include <filesystem>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <thread>

#include "json.hpp"
#include "topomap/error.hpp"
#include "topomap/layout.hpp"
#include "topomap/nap.hpp"
#include "topomap/pso.hpp"
#include "topomap/quality.hpp"
#include "topomap/render.hpp"
#include "topomap/serialize.hpp"
#include "topomap/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace topomap;

namespace {

constexpr const char* kVersion = "1.0.0";

/// Malformed configuration; reported like a command-line usage error.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Collects command-line values as JSON overrides of the config file. Only
/// options actually given on the command line override.
class Overrides {
public:
    template <typename T>
    CLI::Option* option(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
        auto value = std::make_shared<T>();
        CLI::Option* opt = app->add_option(flag, *value, help);
        commits_.push_back([this, opt, value, key] {
            if (opt->count() > 0) values_[key] = *value;
        });
        return opt;
    }

    CLI::Option* path(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
        auto value = std::make_shared<std::string>();
        CLI::Option* opt = app->add_option(flag, *value, help);
        commits_.push_back([this, opt, value, key] {
            if (opt->count() > 0) values_[key] = fs::absolute(*value).lexically_normal().string();
        });
        return opt;
    }

    CLI::Option* flag(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
        CLI::Option* opt = app->add_flag(flag, help);
        commits_.push_back([this, opt, key] {
            if (opt->count() > 0) values_[key] = true;
        });
        return opt;
    }

    json merged(const std::string& config_path) {
        for (auto& c : commits_) c();
        json cfg = json::object();
        if (!config_path.empty()) {
            cfg = read_json(config_path);
            if (!cfg.is_object()) throw UsageError("config file must hold a JSON object");
            // Relative paths in a config file are relative to the file.
            const fs::path base = fs::absolute(config_path).parent_path();
            for (const char* key : {"manifest", "groups", "nap", "layout", "grid", "out"})
                if (cfg.contains(key) && cfg[key].is_string() && fs::path(cfg[key].get<std::string>()).is_relative())
                    cfg[key] = (base / cfg[key].get<std::string>()).lexically_normal().string();
        }
        cfg.update(values_);
        return cfg;
    }

private:
    json values_ = json::object();
    std::vector<std::function<void()>> commits_;
};

std::vector<std::string> method_names() {
    std::vector<std::string> names;
    for (Method m : all_methods()) names.push_back(to_string(m));
    return names;
}

template <typename T>
T get(const json& cfg, const std::string& key, T fallback) {
    if (!cfg.contains(key) || cfg[key].is_null()) return fallback;
    try {
        return cfg[key].get<T>();
    } catch (const json::exception&) {
        throw UsageError("config value '" + key + "' has the wrong type");
    }
}

std::optional<fs::path> get_path(const json& cfg, const std::string& key) {
    if (!cfg.contains(key) || cfg[key].is_null()) return std::nullopt;
    return fs::path(get<std::string>(cfg, key, ""));
}

fs::path out_dir(const json& cfg) {
    const fs::path out = get_path(cfg, "out").value_or(fs::current_path());
    fs::create_directories(out);
    return out;
}

MethodParams method_params(const json& cfg) {
    MethodParams p;
    p.som.epochs = get(cfg, "epochs", p.som.epochs);
    p.graph.edge_fraction = get(cfg, "edge_fraction", p.graph.edge_fraction);
    p.graph.fr_iterations = get(cfg, "fr_iterations", p.graph.fr_iterations);
    p.tsne.perplexity = get(cfg, "perplexity", p.tsne.perplexity);
    p.tsne.iterations = get(cfg, "tsne_iterations", p.tsne.iterations);
    p.umap.n_neighbors = get(cfg, "n_neighbors", p.umap.n_neighbors);
    p.umap.min_dist = get(cfg, "min_dist", p.umap.min_dist);
    p.umap.epochs = get(cfg, "umap_epochs", p.umap.epochs);
    p.pso.steps = get(cfg, "pso_steps", p.pso.steps);
    p.pso.max_cubed = get(cfg, "max_cubed", p.pso.max_cubed);
    if (p.som.epochs < 1) throw UsageError("epochs must be >= 1");
    if (!(p.graph.edge_fraction > 0 && p.graph.edge_fraction < 1)) throw UsageError("edge fraction must be in (0, 1)");
    if (p.graph.fr_iterations < 1) throw UsageError("fr iterations must be >= 1");
    if (!(p.tsne.perplexity > 0)) throw UsageError("perplexity must be positive");
    if (p.tsne.iterations < 1) throw UsageError("t-SNE iterations must be >= 1");
    if (p.umap.n_neighbors < 2) throw UsageError("n_neighbors must be >= 2");
    if (!(p.umap.min_dist >= 0)) throw UsageError("min_dist must be non-negative");
    if (p.umap.epochs < 1) throw UsageError("UMAP epochs must be >= 1");
    try {
        p.pso.validate();
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
    return p;
}

Grouping parse_grouping(const std::string& s) {
    if (s == "label") return Grouping::by_label;
    if (s == "correct_wrong") return Grouping::correct_wrong;
    if (s == "confusion") return Grouping::confusion;
    throw Error("unknown grouping '" + s + "' (expected label, correct_wrong or confusion)");
}

/// The activation set and grouping a NAP matrix is built from, as recorded
/// in nap.json for resampled evaluation.
struct NapRecipe {
    fs::path manifest;
    std::optional<fs::path> groups_file;
    std::string grouping = "label";
    std::optional<std::string> mode;
    std::optional<std::size_t> samples;
    std::optional<std::size_t> total;

    static NapRecipe from_config(const json& cfg) {
        NapRecipe r;
        auto manifest = get_path(cfg, "manifest");
        if (!manifest) throw UsageError("--manifest is required");
        r.manifest = *manifest;
        r.groups_file = get_path(cfg, "groups");
        r.grouping = get<std::string>(cfg, "grouping", r.grouping);
        if (cfg.contains("mode")) r.mode = get<std::string>(cfg, "mode", "");
        if (cfg.contains("samples")) r.samples = get<std::size_t>(cfg, "samples", 0);
        if (cfg.contains("total")) r.total = get<std::size_t>(cfg, "total", 0);
        return r;
    }

    static NapRecipe from_source(const json& src) {
        if (src.is_null()) throw Error("NAP file carries no source block; it cannot be resampled");
        return from_config(src);
    }

    json to_json() const {
        json j = {{"manifest", fs::absolute(manifest).lexically_normal().string()}, {"grouping", grouping}};
        if (groups_file) j["groups"] = fs::absolute(*groups_file).lexically_normal().string();
        if (mode) j["mode"] = *mode;
        if (samples) j["samples"] = *samples;
        if (total) j["total"] = *total;
        return j;
    }

    GroupSpec spec(const ActivationSet& acts) const {
        GroupSpec s = groups_file ? load_group_spec(*groups_file) : make_groups(acts, parse_grouping(grouping));
        if (mode) s.mode = parse_input_mode(*mode);
        if (samples) s.samples_per_group = *samples;
        if (total) s.random_total = *total;
        return s;
    }
};

json provenance(const std::string& command, const json& cfg) {
    return {{"tool", "topomap"}, {"version", kVersion}, {"command", command}, {"config", cfg}};
}

// Stage implementations. Each returns what the pipeline needs next and
// records its seeds and parameters into `prov`.

NapMatrix run_nap(const json& cfg, const fs::path& out, json& prov) {
    const NapRecipe recipe = NapRecipe::from_config(cfg);
    const ActivationSet acts = load_activation_set(recipe.manifest);
    const GroupSpec spec = recipe.spec(acts);
    const std::uint64_t seed = get<std::uint64_t>(cfg, "nap_seed", get<std::uint64_t>(cfg, "seed", acts.seed));
    NapMatrix nap = build_nap(acts, spec, seed);
    save_nap(out, nap, recipe.to_json());
    prov["nap"] = {{"seed", seed},
                   {"mode", to_string(spec.mode)},
                   {"samples_per_group", spec.samples_per_group},
                   {"random_total", spec.random_total},
                   {"groups", nap.group_ids.size()},
                   {"units", nap.units()},
                   {"output", "nap.json"}};
    return nap;
}

Layout run_layout(const json& cfg, const NapMatrix& nap, const fs::path& out, json& prov) {
    const Method method = parse_method(get<std::string>(cfg, "method", "pca_pso"));
    const std::uint64_t seed = get<std::uint64_t>(cfg, "seed", 0);
    const Layout layout = make_layout(method, nap, method_params(cfg), seed);
    save_layout(out / "layout.json", layout);
    prov["layout"] = {{"method", to_string(method)}, {"seed", seed}, {"params", layout.params}, {"output", "layout.json"}};
    return layout;
}

void run_render(const json& cfg, const NapMatrix& nap, const Layout& layout, const fs::path& out, json& prov) {
    const int resolution = get(cfg, "resolution", 100);
    if (resolution < 2) throw Error("resolution must be at least 2");
    const bool sort = get(cfg, "sort", false);
    GridDescriptor grid;
    if (auto path = get_path(cfg, "grid")) {
        grid = GridDescriptor::load(*path);
        if (cfg.contains("sort")) grid.sort = sort;
    } else if (get(cfg, "confusion", false)) {
        json rows = json::array();
        for (const auto& id : nap.group_ids) rows.push_back({{"group_id", id}});
        grid = GridDescriptor::from_json({{"mode", "confusion"}, {"rows", rows}});
    } else {
        grid = GridDescriptor::all_groups(nap, sort);
    }
    const std::string name = get<std::string>(cfg, "image", "topomap.png");
    const Figure fig = render_grid(nap, layout, grid, out / name, resolution, get(cfg, "svg", false));
    prov["render"] = {{"resolution", resolution},
                      {"sort", grid.sort},
                      {"mode", grid.mode == GridMode::strip ? "strip" : "confusion"},
                      {"rows", fig.row_order},
                      {"vmax", fig.vmax},
                      {"output", name}};
}

void run_eval(const json& cfg, const NapMatrix& nap, const json& nap_source, const std::optional<Layout>& layout,
              const fs::path& out, json& prov) {
    const int trials = get(cfg, "trials", 1);
    const bool resample = get(cfg, "resample", false);
    if (trials < 1) throw Error("trials must be >= 1");
    if (resample && trials < 2) throw Error("--resample needs --trials >= 2");

    QualityReport blur, resize;
    if (trials == 1) {
        if (!layout) throw UsageError("eval needs --layout for a single evaluation");
        std::tie(blur, resize) = evaluate_layout(nap, *layout);
    } else {
        const std::string method_name =
            get<std::string>(cfg, "method", layout ? to_string(layout->method) : std::string("pca_pso"));
        const Method method = parse_method(method_name);
        const std::uint64_t seed = get<std::uint64_t>(cfg, "seed", layout ? layout->seed : 0);
        const int hw = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
        const int jobs = get(cfg, "jobs", hw);
        if (jobs < 1) throw Error("jobs must be >= 1");

        NapSource source;
        source.fixed = &nap;
        std::optional<ActivationSet> acts;
        if (resample) {
            const NapRecipe recipe = NapRecipe::from_source(nap_source);
            acts = load_activation_set(recipe.manifest);
            source.activations = &*acts;
            source.spec = recipe.spec(*acts);
        }
        std::tie(blur, resize) = robustness_trials(source, method, method_params(cfg), trials, resample, seed, jobs);
    }
    write_json(out / "quality_blur.json", to_json(blur));
    write_json(out / "quality_resize.json", to_json(resize));
    write_long_csv(out / "auc_long.csv", {blur, resize});
    if (!blur.trials.empty()) write_trial_csv(out / "trials.csv", blur, resize);
    prov["eval"] = {{"trials", trials},
                    {"resample", resample},
                    {"method", blur.method},
                    {"seeds", blur.seeds},
                    {"blur_auc", blur.auc},
                    {"resize_auc", resize.auc}};
}

NapMatrix load_nap_input(const json& cfg, const fs::path& out, json* source) {
    const fs::path path = get_path(cfg, "nap").value_or(out / "nap.json");
    return load_nap(path, source);
}

Layout load_layout_input(const json& cfg, const fs::path& out) {
    return load_layout(get_path(cfg, "layout").value_or(out / "layout.json"));
}

void check_ids(const NapMatrix& nap, const Layout& layout) {
    if (nap.neuron_ids != layout.neuron_ids)
        throw Error("neuron ids of the NAP matrix and the layout do not match");
}

void add_method_options(CLI::App* app, Overrides& o) {
    o.option<double>(app, "--edge-fraction", "edge_fraction", "Fraction of neuron pairs kept as graph edges");
    o.option<int>(app, "--epochs", "epochs", "SOM training epochs");
    o.option<int>(app, "--fr-iterations", "fr_iterations", "Force-directed graph layout iterations");
    o.option<double>(app, "--perplexity", "perplexity", "t-SNE perplexity");
    o.option<int>(app, "--tsne-iterations", "tsne_iterations", "t-SNE gradient steps");
    o.option<int>(app, "--n-neighbors", "n_neighbors", "UMAP neighborhood size");
    o.option<double>(app, "--min-dist", "min_dist", "UMAP minimum distance");
    o.option<int>(app, "--umap-epochs", "umap_epochs", "UMAP optimization epochs");
    o.option<int>(app, "--pso-steps", "pso_steps", "Particle simulation steps");
    o.flag(app, "--max-cubed", "max_cubed", "Global attraction a*(1 - d/max^3) instead of a*(1 - (d/max)^3)");
}

void add_nap_options(CLI::App* app, Overrides& o) {
    o.path(app, "--manifest", "manifest", "Activation manifest JSON");
    o.path(app, "--groups", "groups", "Group file JSON (default: group by label)");
    o.option<std::string>(app, "--grouping", "grouping", "label, correct_wrong or confusion")
        ->check(CLI::IsMember({"label", "correct_wrong", "confusion"}));
    o.option<std::string>(app, "--mode", "mode", "naps, balanced or random")
        ->check(CLI::IsMember({"naps", "balanced", "random"}));
    o.option<std::size_t>(app, "--samples", "samples", "Examples sampled per group");
    o.option<std::size_t>(app, "--total", "total", "Examples drawn in random mode");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Topographic activation maps of neural network layers"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    std::string config_path;
    Overrides o;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON config; command-line flags take precedence");
        o.path(sub, "-o,--out", "out", "Output directory");
    };

    auto* synth = app.add_subcommand("synth", "Generate planted-cluster activations");
    add_common(synth);
    o.option<std::size_t>(synth, "--neurons", "n_neurons", "Neurons (default 128)");
    o.option<std::size_t>(synth, "--groups", "n_groups", "Groups / labels (default 10)");
    o.option<std::size_t>(synth, "--clusters", "n_clusters", "Planted clusters (default 4)");
    o.option<double>(synth, "--noise", "noise", "Gaussian noise std (default 0.1)");
    o.option<std::size_t>(synth, "--examples", "examples_per_group", "Examples per group (default 200)");
    o.option<std::size_t>(synth, "--height", "height", "Conv layer height (0: dense)");
    o.option<std::size_t>(synth, "--width", "width", "Conv layer width (0: dense)");
    o.option<double>(synth, "--error-rate", "error_rate", "Fraction of wrong predictions (default 0.1)");
    o.option<std::uint64_t>(synth, "--seed", "seed", "Random seed");

    auto* nap = app.add_subcommand("nap", "Compute the NAP matrix");
    add_common(nap);
    add_nap_options(nap, o);
    o.option<std::uint64_t>(nap, "--seed", "seed", "Subsampling seed (default: manifest seed)");

    auto* layout = app.add_subcommand("layout", "Compute neuron positions");
    add_common(layout);
    o.path(layout, "--nap", "nap", "nap.json (default <out>/nap.json)");
    o.option<std::string>(layout, "--method", "method", "Layout method")->check(CLI::IsMember(method_names()));
    o.option<std::uint64_t>(layout, "--seed", "seed", "Layout seed");
    add_method_options(layout, o);

    auto* render = app.add_subcommand("render", "Draw topographic maps");
    add_common(render);
    o.path(render, "--nap", "nap", "nap.json (default <out>/nap.json)");
    o.path(render, "--layout", "layout", "layout.json (default <out>/layout.json)");
    o.path(render, "--grid", "grid", "Grid descriptor JSON (default: one strip of all groups)");
    o.flag(render, "--confusion", "confusion", "Confusion-matrix grid from 'true→pred' group ids");
    o.flag(render, "--sort", "sort", "Order panels by average-linkage clustering");
    o.option<int>(render, "--resolution", "resolution", "Panel size in pixels (default 100)");
    o.flag(render, "--svg", "svg", "Also write an SVG");
    o.option<std::string>(render, "--image", "image", "Output PNG name (default topomap.png)");

    auto* eval = app.add_subcommand("eval", "Score map quality");
    add_common(eval);
    o.path(eval, "--nap", "nap", "nap.json (default <out>/nap.json)");
    o.path(eval, "--layout", "layout", "layout.json (default <out>/layout.json when it exists)");
    o.option<std::string>(eval, "--method", "method", "Method for repeated trials")->check(CLI::IsMember(method_names()));
    o.option<std::uint64_t>(eval, "--seed", "seed", "Base seed; trial k uses seed + k");
    o.option<int>(eval, "--trials", "trials", "Number of trials (default 1)");
    o.flag(eval, "--resample", "resample", "Resample the NAP matrix in every trial");
    o.option<int>(eval, "--jobs", "jobs", "Concurrent trials (default: hardware threads)");
    add_method_options(eval, o);

    auto* pipeline = app.add_subcommand("pipeline", "nap, layout, render and eval in one run");
    add_common(pipeline);
    add_nap_options(pipeline, o);
    o.option<std::uint64_t>(pipeline, "--seed", "seed", "Seed of every stage");
    o.option<std::string>(pipeline, "--method", "method", "Layout method")->check(CLI::IsMember(method_names()));
    add_method_options(pipeline, o);
    o.path(pipeline, "--grid", "grid", "Grid descriptor JSON");
    o.flag(pipeline, "--confusion", "confusion", "Confusion-matrix grid from 'true→pred' group ids");
    o.flag(pipeline, "--sort", "sort", "Order panels by average-linkage clustering");
    o.option<int>(pipeline, "--resolution", "resolution", "Panel size in pixels (default 100)");
    o.flag(pipeline, "--svg", "svg", "Also write an SVG");
    o.option<int>(pipeline, "--trials", "trials", "Number of evaluation trials (default 1)");
    o.flag(pipeline, "--resample", "resample", "Resample the NAP matrix in every trial");
    o.option<int>(pipeline, "--jobs", "jobs", "Concurrent trials");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    std::string stage;
    try {
        const json cfg = o.merged(config_path);
        const fs::path out = out_dir(cfg);
        json prov;

        if (synth->parsed()) {
            SynthParams p;
            p.neurons = get(cfg, "n_neurons", p.neurons);
            p.groups = get(cfg, "n_groups", p.groups);
            p.clusters = get(cfg, "n_clusters", p.clusters);
            p.noise = get(cfg, "noise", p.noise);
            p.examples_per_group = get(cfg, "examples_per_group", p.examples_per_group);
            p.height = get(cfg, "height", p.height);
            p.width = get(cfg, "width", p.width);
            p.error_rate = get(cfg, "error_rate", p.error_rate);
            p.seed = get(cfg, "seed", p.seed);
            write_activation_set(out, synthesize(p));
            prov = provenance("synth", cfg);
            prov["synth"] = {{"seed", p.seed}, {"output", "manifest.json"}};
            write_json(out / "provenance_synth.json", prov);
        } else if (nap->parsed()) {
            prov = provenance("nap", cfg);
            run_nap(cfg, out, prov);
            write_json(out / "provenance_nap.json", prov);
        } else if (layout->parsed()) {
            if (!cfg.contains("method")) throw UsageError("--method is required");
            prov = provenance("layout", cfg);
            const NapMatrix m = load_nap_input(cfg, out, nullptr);
            run_layout(cfg, m, out, prov);
            write_json(out / "provenance_layout.json", prov);
        } else if (render->parsed()) {
            prov = provenance("render", cfg);
            const NapMatrix m = load_nap_input(cfg, out, nullptr);
            const Layout l = load_layout_input(cfg, out);
            check_ids(m, l);
            run_render(cfg, m, l, out, prov);
            write_json(out / "provenance_render.json", prov);
        } else if (eval->parsed()) {
            prov = provenance("eval", cfg);
            json source;
            const NapMatrix m = load_nap_input(cfg, out, &source);
            std::optional<Layout> l;
            const fs::path layout_path = get_path(cfg, "layout").value_or(out / "layout.json");
            if (cfg.contains("layout") || fs::exists(layout_path)) {
                l = load_layout(layout_path);
                check_ids(m, *l);
            }
            run_eval(cfg, m, source, l, out, prov);
            write_json(out / "provenance_eval.json", prov);
        } else if (pipeline->parsed()) {
            prov = provenance("pipeline", cfg);
            stage = "nap";
            const NapMatrix m = run_nap(cfg, out, prov);
            stage = "layout";
            const Layout l = run_layout(cfg, m, out, prov);
            stage = "render";
            run_render(cfg, m, l, out, prov);
            stage = "eval";
            json source;
            load_nap(out / "nap.json", &source);
            run_eval(cfg, m, source, l, out, prov);
            write_json(out / "provenance.json", prov);
        }
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error" << (stage.empty() ? "" : " in stage " + stage) << ": " << e.what() << "\n";
        return 1;
    }
    return 0;
}
