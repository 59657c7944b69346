#pragma once

#include <cstdint>
#include <filesystem>

#include "topomap/nap.hpp"

namespace topomap {

/// Planted-cluster activations. Neuron n belongs to cluster n * C / N;
/// cluster c fires (activation 1) for every group g with g mod C == c and is
/// silent otherwise. Gaussian noise of standard deviation `noise` is added to
/// every value. Group g is label "g".
struct SynthParams {
    std::size_t neurons = 128;
    std::size_t groups = 10;
    std::size_t clusters = 4;
    double noise = 0.1;
    std::size_t examples_per_group = 200;
    /// Spatial size of a conv layer; 0 gives a dense layer.
    std::size_t height = 0;
    std::size_t width = 0;
    /// Fraction of examples whose prediction is replaced by the next label.
    double error_rate = 0.1;
    std::uint64_t seed = 0;

    void validate() const;
};

std::size_t planted_cluster(std::size_t neuron, const SynthParams& params);

ActivationSet synthesize(const SynthParams& params);

/// Writes manifest.json, activations.npy (float32), labels.npy and
/// predictions.npy (int64) into `dir`; returns the manifest path.
std::filesystem::path write_activation_set(const std::filesystem::path& dir, const ActivationSet& acts);

}  // namespace topomap
