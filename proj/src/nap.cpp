#include "topomap/nap.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "json.hpp"
#include "topomap/error.hpp"
#include "topomap/npy.hpp"
#include "topomap/rng.hpp"

namespace topomap {

namespace {

using nlohmann::json;

std::string format_label(double v) {
    if (v == std::floor(v) && std::abs(v) < 9.0e15) return std::to_string(static_cast<long long>(v));
    json j = v;
    return j.dump();
}

std::vector<std::string> read_labels(const std::filesystem::path& path) {
    std::vector<std::string> labels;
    if (path.extension() == ".npy") {
        const npy::Array a = npy::read(path);
        if (a.shape.size() > 1) throw Error(path.string() + ": label array must be one-dimensional");
        labels.reserve(a.data.size());
        for (double v : a.data) labels.push_back(format_label(v));
        return labels;
    }
    std::ifstream in(path);
    if (!in) throw Error("cannot open label file " + path.string());
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        labels.push_back(line);
    }
    while (!labels.empty() && labels.back().empty()) labels.pop_back();
    return labels;
}

bool as_integer(const std::string& s, long long& out) {
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last && !s.empty();
}

/// Sorted distinct labels; numeric order when every label is an integer.
std::vector<std::string> label_order(const std::vector<std::string>& a, const std::vector<std::string>& b = {}) {
    std::set<std::string> distinct(a.begin(), a.end());
    distinct.insert(b.begin(), b.end());
    std::vector<std::string> out(distinct.begin(), distinct.end());
    bool numeric = true;
    long long tmp = 0;
    for (const auto& s : out) numeric = numeric && as_integer(s, tmp);
    if (numeric) {
        std::sort(out.begin(), out.end(), [](const std::string& x, const std::string& y) {
            long long a1 = 0, b1 = 0;
            as_integer(x, a1);
            as_integer(y, b1);
            return a1 < b1;
        });
    }
    return out;
}

std::vector<std::string> index_ids(std::size_t n) {
    std::vector<std::string> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = std::to_string(i);
    return ids;
}

std::vector<std::string> group_ids(const GroupSpec& spec) {
    std::vector<std::string> ids;
    ids.reserve(spec.groups.size());
    for (const auto& g : spec.groups) ids.push_back(g.id);
    return ids;
}

/// Per-group mean activation, one P x C matrix per group (P = 1 for dense).
/// Groups are sampled in order from one generator, so dense and 1x1 conv
/// layers draw identical examples.
std::vector<Matrix> group_means(const ActivationSet& acts, const GroupSpec& spec, std::uint64_t seed) {
    const std::size_t positions = acts.positions();
    const std::size_t channels = acts.units();
    const std::size_t stride = positions * channels;
    Rng rng(seed);
    std::vector<Matrix> means;
    means.reserve(spec.groups.size());
    std::vector<std::string> small;
    for (const auto& g : spec.groups) {
        const std::vector<std::size_t> drawn = rng.sample(g.members, spec.samples_per_group);
        if (drawn.empty()) throw Error("group '" + g.id + "' is empty after sampling");
        if (g.members.size() < spec.samples_per_group) small.push_back(g.id);
        Matrix acc = Matrix::Zero(static_cast<Eigen::Index>(positions), static_cast<Eigen::Index>(channels));
        for (std::size_t e : drawn) {
            const float* row = acts.values.data() + e * stride;
            for (std::size_t p = 0; p < positions; ++p)
                for (std::size_t c = 0; c < channels; ++c)
                    acc(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(c)) += row[p * channels + c];
        }
        acc /= static_cast<double>(drawn.size());
        means.push_back(std::move(acc));
    }
    if (!small.empty()) {
        std::string names;
        for (const auto& s : small) names += (names.empty() ? "" : ", ") + s;
        warn("groups smaller than " + std::to_string(spec.samples_per_group) + " samples use all members: " + names);
    }
    return means;
}

/// Subtracts the unweighted mean of the group means. The mean is formed as
/// an offset from the first group so that identical groups cancel exactly.
void normalize_across_groups(std::vector<Matrix>& means) {
    if (means.empty()) return;
    const double g = static_cast<double>(means.size());
    const Matrix ref = means.front();
    Matrix shift = Matrix::Zero(ref.rows(), ref.cols());
    for (const auto& m : means) shift += (m - ref) / g;
    const Matrix center = ref + shift;
    for (auto& m : means) m -= center;
}

void check_spec(const ActivationSet& acts, const GroupSpec& spec) {
    acts.validate();
    spec.validate(acts.examples());
}

NapMatrix nap_from_means(const ActivationSet& acts, const GroupSpec& spec, std::uint64_t seed) {
    std::vector<Matrix> means = group_means(acts, spec, seed);
    normalize_across_groups(means);
    const auto n_groups = static_cast<Eigen::Index>(means.size());
    const auto positions = static_cast<Eigen::Index>(acts.positions());
    const auto units = static_cast<Eigen::Index>(acts.units());

    NapMatrix nap;
    nap.layout_features.resize(units, positions * n_groups);
    nap.color_values.resize(units, n_groups);
    for (Eigen::Index g = 0; g < n_groups; ++g) {
        const Matrix& m = means[static_cast<std::size_t>(g)];
        for (Eigen::Index c = 0; c < units; ++c) {
            double sum = 0.0;
            for (Eigen::Index p = 0; p < positions; ++p) {
                nap.layout_features(c, g * positions + p) = m(p, c);
                sum += m(p, c);
            }
            nap.color_values(c, g) = positions == 1 ? m(0, c) : sum / static_cast<double>(positions);
        }
    }
    nap.group_ids = group_ids(spec);
    nap.neuron_ids = index_ids(acts.units());
    nap.mode = InputMode::naps;
    nap.seed = seed;
    return nap;
}

NapMatrix dense_nap(const ActivationSet& acts, const GroupSpec& spec, std::uint64_t seed) {
    if (acts.layer_kind != LayerKind::dense) throw Error("compute_nap_dense requires a dense layer");
    check_spec(acts, spec);
    return nap_from_means(acts, spec, seed);
}

NapMatrix conv_nap(const ActivationSet& acts, const GroupSpec& spec, std::uint64_t seed) {
    if (acts.layer_kind != LayerKind::conv) throw Error("compute_nap_conv requires a conv layer");
    check_spec(acts, spec);
    return nap_from_means(acts, spec, seed);
}

NapMatrix stacked(const ActivationSet& acts, const GroupSpec& spec, std::uint64_t seed) {
    if (acts.layer_kind != LayerKind::dense)
        throw Error("stacked inputs (balanced/random) are only supported for dense layers");
    if (spec.mode == InputMode::naps) throw Error("build_stacked_input requires mode balanced or random");
    check_spec(acts, spec);

    std::vector<std::size_t> chosen;
    Rng rng(seed);
    if (spec.mode == InputMode::balanced) {
        for (const auto& g : spec.groups) {
            const auto drawn = rng.sample(g.members, spec.samples_per_group);
            chosen.insert(chosen.end(), drawn.begin(), drawn.end());
        }
    } else {
        std::size_t available = 0;
        for (const auto& g : spec.groups) available += g.members.size();
        if (spec.random_total > available)
            throw Error("requested total of " + std::to_string(spec.random_total) +
                        " examples exceeds the " + std::to_string(available) + " available");
        // Multinomial draw with uniform class probabilities; a class that runs
        // out of members drops out of later draws.
        std::vector<std::vector<std::size_t>> remaining;
        for (const auto& g : spec.groups) remaining.push_back(g.members);
        std::vector<std::size_t> open(remaining.size());
        for (std::size_t i = 0; i < open.size(); ++i) open[i] = i;
        for (std::size_t k = 0; k < spec.random_total; ++k) {
            const std::size_t slot = rng.index(open.size());
            auto& pool = remaining[open[slot]];
            const std::size_t pick = rng.index(pool.size());
            chosen.push_back(pool[pick]);
            pool[pick] = pool.back();
            pool.pop_back();
            if (pool.empty()) open.erase(open.begin() + static_cast<std::ptrdiff_t>(slot));
        }
    }

    const auto n = static_cast<Eigen::Index>(acts.units());
    NapMatrix nap;
    nap.layout_features.resize(n, static_cast<Eigen::Index>(chosen.size()));
    for (std::size_t j = 0; j < chosen.size(); ++j) {
        const float* row = acts.values.data() + chosen[j] * acts.units();
        for (Eigen::Index i = 0; i < n; ++i) nap.layout_features(i, static_cast<Eigen::Index>(j)) = row[i];
    }
    nap.color_values = nap_from_means(acts, spec, seed).color_values;
    nap.group_ids = group_ids(spec);
    nap.neuron_ids = index_ids(acts.units());
    nap.mode = spec.mode;
    nap.seed = seed;
    return nap;
}

}  // namespace

std::size_t ActivationSet::positions() const {
    if (layer_kind == LayerKind::dense || shape.size() < 4) return 1;
    return shape[1] * shape[2];
}

void ActivationSet::validate() const {
    if (layer_kind == LayerKind::dense) {
        if (shape.size() != 2) throw Error("dense activations must be 2-D (examples x neurons)");
        if (shape[1] < 2) throw Error("dense layer needs at least 2 neurons");
    } else {
        if (shape.size() != 4) throw Error("conv activations must be 4-D (examples x h x w x channels)");
        if (shape[1] < 1 || shape[2] < 1) throw Error("conv feature maps must be at least 1x1");
        if (shape[3] < 2) throw Error("conv layer needs at least 2 channels");
    }
    if (shape[0] < 1) throw Error("activation set has no examples");
    std::size_t total = 1;
    for (auto s : shape) total *= s;
    if (total != values.size()) throw Error("activation values do not match the declared shape");
    if (labels.size() != shape[0]) throw Error("label/example count mismatch");
    if (!predictions.empty() && predictions.size() != shape[0])
        throw Error("prediction/example count mismatch");
    for (std::size_t i = 0; i < values.size(); ++i)
        if (!std::isfinite(values[i])) throw Error("non-finite activation at flat index " + std::to_string(i));
}

void GroupSpec::validate(std::size_t n_examples) const {
    if (groups.empty()) throw Error("group spec has no groups");
    if (samples_per_group == 0) throw Error("samples_per_group must be positive");
    std::set<std::string> seen;
    for (const auto& g : groups) {
        if (!seen.insert(g.id).second) throw Error("duplicate group id '" + g.id + "'");
        if (g.members.empty()) throw Error("group '" + g.id + "' has no members");
        for (auto m : g.members)
            if (m >= n_examples)
                throw Error("group '" + g.id + "' references example " + std::to_string(m) + " out of range");
    }
}

double NapMatrix::vmax() const { return color_values.size() == 0 ? 0.0 : color_values.cwiseAbs().maxCoeff(); }

ActivationSet load_activation_set(const std::filesystem::path& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw Error("cannot open manifest " + manifest_path.string());
    json m;
    try {
        in >> m;
    } catch (const json::exception& e) {
        throw Error("malformed manifest " + manifest_path.string() + ": " + e.what());
    }
    const auto base = manifest_path.parent_path();
    auto resolve = [&](const std::string& p) {
        std::filesystem::path path(p);
        return path.is_absolute() ? path : base / path;
    };
    for (const char* key : {"layer_kind", "activations", "labels", "shape"})
        if (!m.contains(key)) throw Error(std::string("manifest is missing field '") + key + "'");

    ActivationSet acts;
    acts.layer_name = m.value("layer_name", std::string{});
    const std::string kind = m.at("layer_kind").get<std::string>();
    if (kind == "dense") acts.layer_kind = LayerKind::dense;
    else if (kind == "conv") acts.layer_kind = LayerKind::conv;
    else throw Error("unknown layer_kind '" + kind + "'");
    acts.seed = m.value("seed", std::uint64_t{0});

    std::vector<std::size_t> declared = m.at("shape").get<std::vector<std::size_t>>();
    std::vector<std::size_t> shape;
    acts.values = npy::read_f32(resolve(m.at("activations").get<std::string>()), shape);
    if (shape != declared) throw Error("activation array shape does not match the manifest shape");
    acts.shape = shape;
    acts.labels = read_labels(resolve(m.at("labels").get<std::string>()));
    if (m.contains("predictions")) acts.predictions = read_labels(resolve(m.at("predictions").get<std::string>()));
    acts.validate();
    return acts;
}

GroupSpec make_groups(const ActivationSet& acts, Grouping grouping) {
    GroupSpec spec;
    const auto& labels = acts.labels;
    if (grouping != Grouping::by_label && acts.predictions.empty())
        throw Error("correct/wrong and confusion groupings need predictions in the manifest");
    const auto order = grouping == Grouping::confusion ? label_order(labels, acts.predictions) : label_order(labels);
    std::map<std::string, std::size_t> rank;
    for (std::size_t i = 0; i < order.size(); ++i) rank[order[i]] = i;

    switch (grouping) {
        case Grouping::by_label: {
            spec.groups.resize(order.size());
            for (std::size_t i = 0; i < order.size(); ++i) spec.groups[i].id = order[i];
            for (std::size_t e = 0; e < labels.size(); ++e) spec.groups[rank[labels[e]]].members.push_back(e);
            break;
        }
        case Grouping::correct_wrong: {
            std::vector<Group> all(2 * order.size());
            for (std::size_t i = 0; i < order.size(); ++i) {
                all[2 * i].id = order[i] + "_correct";
                all[2 * i + 1].id = order[i] + "_wrong";
            }
            for (std::size_t e = 0; e < labels.size(); ++e)
                all[2 * rank[labels[e]] + (labels[e] == acts.predictions[e] ? 0 : 1)].members.push_back(e);
            for (auto& g : all)
                if (!g.members.empty()) spec.groups.push_back(std::move(g));
            break;
        }
        case Grouping::confusion: {
            const std::size_t k = order.size();
            std::vector<Group> all(k * k);
            for (std::size_t t = 0; t < k; ++t)
                for (std::size_t p = 0; p < k; ++p) all[t * k + p].id = order[t] + "→" + order[p];
            for (std::size_t e = 0; e < labels.size(); ++e)
                all[rank[labels[e]] * k + rank[acts.predictions[e]]].members.push_back(e);
            for (auto& g : all)
                if (!g.members.empty()) spec.groups.push_back(std::move(g));
            break;
        }
    }
    return spec;
}

GroupSpec load_group_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open group file " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error("malformed group file " + path.string() + ": " + e.what());
    }
    GroupSpec spec;
    if (!j.contains("groups")) throw Error("group file is missing 'groups'");
    for (const auto& g : j.at("groups")) {
        Group group;
        group.id = g.at("group_id").get<std::string>();
        group.members = g.at("members").get<std::vector<std::size_t>>();
        spec.groups.push_back(std::move(group));
    }
    spec.samples_per_group = j.value("samples_per_group", spec.samples_per_group);
    if (j.contains("mode")) spec.mode = parse_input_mode(j.at("mode").get<std::string>());
    spec.random_total = j.value("random_total", spec.random_total);
    return spec;
}

NapMatrix compute_nap_dense(const ActivationSet& acts, const GroupSpec& spec) {
    if (spec.mode != InputMode::naps) throw Error("compute_nap_dense requires mode naps");
    return dense_nap(acts, spec, acts.seed);
}

NapMatrix compute_nap_conv(const ActivationSet& acts, const GroupSpec& spec) {
    return conv_nap(acts, spec, acts.seed);
}

NapMatrix build_stacked_input(const ActivationSet& acts, const GroupSpec& spec) {
    return stacked(acts, spec, acts.seed);
}

NapMatrix build_nap(const ActivationSet& acts, const GroupSpec& spec, std::uint64_t seed) {
    if (spec.mode != InputMode::naps) return stacked(acts, spec, seed);
    return acts.layer_kind == LayerKind::dense ? dense_nap(acts, spec, seed) : conv_nap(acts, spec, seed);
}

Matrix cosine_distance_matrix(const Matrix& features) {
    const Eigen::Index n = features.rows();
    const Vector norms = features.rowwise().norm();
    const double largest = n > 0 ? norms.maxCoeff() : 0.0;
    const double tiny = largest * 1e-12;
    std::vector<bool> zero(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) zero[static_cast<std::size_t>(i)] = !(norms(i) > tiny);

    const Matrix gram = features * features.transpose();
    Matrix d = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const bool zi = zero[static_cast<std::size_t>(i)];
            const bool zj = zero[static_cast<std::size_t>(j)];
            double v;
            if (zi && zj) v = 0.0;
            else if (zi || zj) v = 1.0;
            else v = std::clamp(1.0 - gram(i, j) / (norms(i) * norms(j)), 0.0, 2.0);
            d(i, j) = v;
            d(j, i) = v;
        }
    }
    return d;
}

std::string to_string(InputMode mode) {
    switch (mode) {
        case InputMode::naps: return "naps";
        case InputMode::balanced: return "balanced";
        case InputMode::random: return "random";
    }
    return "naps";
}

InputMode parse_input_mode(const std::string& text) {
    if (text == "naps") return InputMode::naps;
    if (text == "balanced") return InputMode::balanced;
    if (text == "random") return InputMode::random;
    throw Error("unknown input mode '" + text + "'");
}

std::string to_string(LayerKind kind) { return kind == LayerKind::dense ? "dense" : "conv"; }

}  // namespace topomap
