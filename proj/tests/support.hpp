#pragma once

#include <unistd.h>

#include <filesystem>
#include <string>
#include <vector>

#include "topomap/nap.hpp"
#include "topomap/synth.hpp"

namespace testing {

namespace fs = std::filesystem;

/// Scratch directory removed on destruction.
struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) {
        path = fs::temp_directory_path() / ("topomap_test_" + name + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

/// Dense activation set from an E x N matrix and one label per row.
inline topomap::ActivationSet dense_set(const topomap::Matrix& values, const std::vector<std::string>& labels,
                                        std::uint64_t seed = 0) {
    topomap::ActivationSet acts;
    acts.layer_kind = topomap::LayerKind::dense;
    acts.shape = {static_cast<std::size_t>(values.rows()), static_cast<std::size_t>(values.cols())};
    acts.values.assign(values.size(), 0.0f);
    for (Eigen::Index e = 0; e < values.rows(); ++e)
        for (Eigen::Index n = 0; n < values.cols(); ++n)
            acts.values[static_cast<std::size_t>(e * values.cols() + n)] = static_cast<float>(values(e, n));
    acts.labels = labels;
    acts.seed = seed;
    return acts;
}

/// NAP matrix whose layout features and color values are both `rows`.
inline topomap::NapMatrix nap_from_rows(const topomap::Matrix& rows) {
    topomap::NapMatrix nap;
    nap.layout_features = rows;
    nap.color_values = rows;
    for (Eigen::Index g = 0; g < rows.cols(); ++g) nap.group_ids.push_back("g" + std::to_string(g));
    for (Eigen::Index n = 0; n < rows.rows(); ++n) nap.neuron_ids.push_back(std::to_string(n));
    return nap;
}

/// Planted-cluster NAP matrix grouped by label.
inline topomap::NapMatrix planted_nap(std::size_t neurons, std::size_t groups, std::size_t clusters, double noise,
                                      std::uint64_t seed, std::size_t examples_per_group = 200) {
    topomap::SynthParams p;
    p.neurons = neurons;
    p.groups = groups;
    p.clusters = clusters;
    p.noise = noise;
    p.seed = seed;
    p.examples_per_group = examples_per_group;
    const auto acts = topomap::synthesize(p);
    return topomap::build_nap(acts, topomap::make_groups(acts, topomap::Grouping::by_label), seed);
}

}  // namespace testing
