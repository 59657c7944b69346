#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "topomap/matrix.hpp"

namespace topomap {

enum class LayerKind { dense, conv };

/// Raw activations of one layer for E examples.
///
/// Dense layers are stored E x N, convolutional layers E x h x w x C, both in
/// C order. `labels` holds one categorical label per example; `predictions`
/// is optional and only used to derive correct/wrong or confusion groupings.
struct ActivationSet {
    LayerKind layer_kind = LayerKind::dense;
    std::string layer_name;
    std::vector<std::size_t> shape;
    std::vector<float> values;
    std::vector<std::string> labels;
    std::vector<std::string> predictions;
    std::uint64_t seed = 0;

    std::size_t examples() const { return shape.empty() ? 0 : shape[0]; }
    /// Number of layout units: neurons for dense layers, filters for conv layers.
    std::size_t units() const { return shape.empty() ? 0 : shape.back(); }
    /// Spatial positions per unit (h*w for conv, 1 for dense).
    std::size_t positions() const;

    /// Checks every invariant; throws Error describing the first violation.
    void validate() const;
};

enum class InputMode { naps, balanced, random };

struct Group {
    std::string id;
    std::vector<std::size_t> members;
};

struct GroupSpec {
    std::vector<Group> groups;
    std::size_t samples_per_group = 200;
    InputMode mode = InputMode::naps;
    /// Total examples drawn for mode=random.
    std::size_t random_total = 1000;

    void validate(std::size_t n_examples) const;
};

enum class Grouping { by_label, correct_wrong, confusion };

/// Per-unit activation profiles.
///
/// `layout_features` drives the layout engines (N x G dense, N x h*w*G conv,
/// N x E' for stacked inputs); `color_values` is always N x G and drives
/// coloring.
struct NapMatrix {
    Matrix layout_features;
    Matrix color_values;
    std::vector<std::string> group_ids;
    std::vector<std::string> neuron_ids;
    InputMode mode = InputMode::naps;
    std::uint64_t seed = 0;

    std::size_t units() const { return static_cast<std::size_t>(color_values.rows()); }
    std::size_t group_count() const { return group_ids.size(); }
    /// max |color_values|, the shared color limit of a figure.
    double vmax() const;
};

ActivationSet load_activation_set(const std::filesystem::path& manifest_path);

/// Groups keyed by label (numeric labels sort numerically), by label plus
/// correctness of the prediction, or by (label, prediction) cell.
GroupSpec make_groups(const ActivationSet& acts, Grouping grouping);

/// Reads a group file: {"groups":[{"group_id":..., "members":[...]}, ...],
/// optional "samples_per_group" and "mode"}.
GroupSpec load_group_spec(const std::filesystem::path& path);

NapMatrix compute_nap_dense(const ActivationSet& acts, const GroupSpec& spec);
NapMatrix compute_nap_conv(const ActivationSet& acts, const GroupSpec& spec);
NapMatrix build_stacked_input(const ActivationSet& acts, const GroupSpec& spec);

/// Dispatches on layer kind and spec.mode with an explicit subsampling seed.
/// The named operations above use acts.seed.
NapMatrix build_nap(const ActivationSet& acts, const GroupSpec& spec, std::uint64_t seed);

/// Pairwise 1 - cosine similarity of the rows, in [0, 2]. Rows whose norm is
/// negligible relative to the largest row are treated as zero vectors:
/// distance 0 to each other and 1 to everything else.
Matrix cosine_distance_matrix(const Matrix& features);

std::string to_string(InputMode mode);
InputMode parse_input_mode(const std::string& text);
std::string to_string(LayerKind kind);

}  // namespace topomap
