#include "topomap/synth.hpp"

#include <charconv>
#include <fstream>

#include "json.hpp"
#include "topomap/error.hpp"
#include "topomap/npy.hpp"
#include "topomap/rng.hpp"

namespace topomap {

namespace {

bool all_integers(const std::vector<std::string>& labels, std::vector<double>& out) {
    out.clear();
    for (const auto& s : labels) {
        long long v = 0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return false;
        out.push_back(static_cast<double>(v));
    }
    return true;
}

std::string write_labels(const std::filesystem::path& dir, const std::string& stem,
                         const std::vector<std::string>& labels) {
    std::vector<double> numeric;
    if (all_integers(labels, numeric)) {
        npy::write(dir / (stem + ".npy"), {labels.size()}, numeric, npy::DType::i64);
        return stem + ".npy";
    }
    std::ofstream out(dir / (stem + ".txt"), std::ios::trunc);
    if (!out) throw Error("cannot write " + (dir / (stem + ".txt")).string());
    for (const auto& l : labels) {
        if (l.find('\n') != std::string::npos) throw Error("labels must not contain newlines");
        out << l << '\n';
    }
    return stem + ".txt";
}

}  // namespace

void SynthParams::validate() const {
    if (neurons < 1 || groups < 1 || examples_per_group < 1) throw Error("synth sizes must be positive");
    if (clusters < 1 || clusters > neurons) throw Error("synth needs 1 <= clusters <= neurons");
    if (!(noise >= 0)) throw Error("synth noise must be non-negative");
    if (!(error_rate >= 0 && error_rate <= 1)) throw Error("synth error rate must be in [0, 1]");
    if ((height == 0) != (width == 0)) throw Error("synth conv layers need both height and width");
}

std::size_t planted_cluster(std::size_t neuron, const SynthParams& params) {
    return neuron * params.clusters / params.neurons;
}

ActivationSet synthesize(const SynthParams& params) {
    params.validate();
    const bool conv = params.height > 0;
    const std::size_t positions = conv ? params.height * params.width : 1;
    const std::size_t examples = params.groups * params.examples_per_group;

    ActivationSet acts;
    acts.layer_kind = conv ? LayerKind::conv : LayerKind::dense;
    acts.layer_name = conv ? "synth_conv" : "synth_dense";
    acts.shape = conv ? std::vector<std::size_t>{examples, params.height, params.width, params.neurons}
                      : std::vector<std::size_t>{examples, params.neurons};
    acts.seed = params.seed;
    acts.values.resize(examples * positions * params.neurons);

    Rng rng(params.seed);
    std::size_t k = 0;
    for (std::size_t e = 0; e < examples; ++e) {
        const std::size_t group = e / params.examples_per_group;
        const std::size_t active = group % params.clusters;
        for (std::size_t p = 0; p < positions; ++p)
            for (std::size_t n = 0; n < params.neurons; ++n) {
                const double base = planted_cluster(n, params) == active ? 1.0 : 0.0;
                const double noise = params.noise > 0 ? params.noise * rng.normal() : 0.0;
                acts.values[k++] = static_cast<float>(base + noise);
            }
        acts.labels.push_back(std::to_string(group));
    }
    acts.predictions = acts.labels;
    if (params.error_rate > 0 && params.groups > 1)
        for (std::size_t e = 0; e < examples; ++e)
            if (rng.uniform() < params.error_rate)
                acts.predictions[e] = std::to_string((e / params.examples_per_group + 1) % params.groups);
    acts.validate();
    return acts;
}

std::filesystem::path write_activation_set(const std::filesystem::path& dir, const ActivationSet& acts) {
    acts.validate();
    std::filesystem::create_directories(dir);
    npy::write_f32(dir / "activations.npy", acts.shape, acts.values);
    nlohmann::json m = {{"layer_name", acts.layer_name},
                        {"layer_kind", to_string(acts.layer_kind)},
                        {"activations", "activations.npy"},
                        {"shape", acts.shape},
                        {"seed", acts.seed},
                        {"labels", write_labels(dir, "labels", acts.labels)}};
    if (!acts.predictions.empty()) m["predictions"] = write_labels(dir, "predictions", acts.predictions);
    const auto path = dir / "manifest.json";
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << m.dump(2) << '\n';
    return path;
}

}  // namespace topomap
