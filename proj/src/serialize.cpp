#include "topomap/serialize.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "topomap/error.hpp"
#include "topomap/npy.hpp"

namespace topomap {

using nlohmann::json;

namespace {

constexpr const char* kFeaturesFile = "nap_layout_features.npy";
constexpr const char* kColorsFile = "nap_color_values.npy";

void write_matrix(const std::filesystem::path& path, const Matrix& m) {
    std::vector<double> data(m.data(), m.data() + m.size());
    npy::write(path, {static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())}, data, npy::DType::f64);
}

Matrix read_matrix(const std::filesystem::path& path) {
    const npy::Array a = npy::read(path);
    if (a.shape.size() != 2) throw Error(path.string() + " is not a 2-D array");
    Matrix m(static_cast<Eigen::Index>(a.shape[0]), static_cast<Eigen::Index>(a.shape[1]));
    std::copy(a.data.begin(), a.data.end(), m.data());
    return m;
}

std::string format_double(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

}  // namespace

void write_json(const std::filesystem::path& path, const json& j) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw Error("failed writing " + path.string());
}

json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error("malformed JSON in " + path.string() + ": " + e.what());
    }
}

void save_nap(const std::filesystem::path& dir, const NapMatrix& nap, const json& source) {
    std::filesystem::create_directories(dir);
    json j = {{"group_ids", nap.group_ids},
              {"neuron_ids", nap.neuron_ids},
              {"mode", to_string(nap.mode)},
              {"seed", nap.seed},
              {"layout_features", kFeaturesFile},
              {"color_values", kColorsFile}};
    if (!source.is_null()) j["source"] = source;
    write_matrix(dir / kFeaturesFile, nap.layout_features);
    write_matrix(dir / kColorsFile, nap.color_values);
    write_json(dir / "nap.json", j);
}

NapMatrix load_nap(const std::filesystem::path& nap_json, json* source) {
    const json j = read_json(nap_json);
    const auto base = nap_json.parent_path();
    NapMatrix nap;
    try {
        nap.group_ids = j.at("group_ids").get<std::vector<std::string>>();
        nap.neuron_ids = j.at("neuron_ids").get<std::vector<std::string>>();
        nap.mode = parse_input_mode(j.at("mode").get<std::string>());
        nap.seed = j.value("seed", std::uint64_t{0});
        nap.layout_features = read_matrix(base / j.value("layout_features", std::string(kFeaturesFile)));
        nap.color_values = read_matrix(base / j.value("color_values", std::string(kColorsFile)));
    } catch (const json::exception& e) {
        throw Error("malformed NAP file " + nap_json.string() + ": " + e.what());
    }
    if (nap.color_values.rows() != static_cast<Eigen::Index>(nap.neuron_ids.size()) ||
        nap.layout_features.rows() != nap.color_values.rows() ||
        nap.color_values.cols() != static_cast<Eigen::Index>(nap.group_ids.size()))
        throw Error("NAP file " + nap_json.string() + " has inconsistent array shapes");
    if (source) *source = j.value("source", json());
    return nap;
}

json to_json(const Layout& layout) {
    json coords = json::array();
    for (Eigen::Index i = 0; i < layout.coords.rows(); ++i)
        coords.push_back({layout.coords(i, 0), layout.coords(i, 1)});
    return {{"method", to_string(layout.method)},
            {"seed", layout.seed},
            {"scaled", layout.scaled},
            {"params", layout.params},
            {"neuron_ids", layout.neuron_ids},
            {"coords", coords}};
}

Layout layout_from_json(const json& j) {
    Layout layout;
    try {
        layout.method = parse_method(j.at("method").get<std::string>());
        layout.seed = j.value("seed", std::uint64_t{0});
        layout.scaled = j.value("scaled", true);
        layout.params = j.value("params", json::object());
        layout.neuron_ids = j.at("neuron_ids").get<std::vector<std::string>>();
        const auto& coords = j.at("coords");
        layout.coords.resize(static_cast<Eigen::Index>(coords.size()), 2);
        for (std::size_t i = 0; i < coords.size(); ++i) {
            layout.coords(static_cast<Eigen::Index>(i), 0) = coords[i].at(0).get<double>();
            layout.coords(static_cast<Eigen::Index>(i), 1) = coords[i].at(1).get<double>();
        }
    } catch (const json::exception& e) {
        throw Error(std::string("malformed layout: ") + e.what());
    }
    if (layout.neuron_ids.size() != layout.size()) throw Error("layout has a different number of ids and coordinates");
    return layout;
}

void save_layout(const std::filesystem::path& path, const Layout& layout) { write_json(path, to_json(layout)); }

Layout load_layout(const std::filesystem::path& path) { return layout_from_json(read_json(path)); }

json to_json(const QualityReport& r) {
    json j = {{"metric", to_string(r.metric)},
              {"method", r.method},
              {"params", r.params},
              {"per_param_mse", r.per_param_mse},
              {"auc", r.auc},
              {"seeds", r.seeds}};
    if (!r.trials.empty()) {
        j["trials"] = r.trials;
        j["summary"] = {{"n", r.trials.size()},
                        {"mean", r.trial_mean()},
                        {"min", r.trial_min()},
                        {"max", r.trial_max()},
                        {"variance", r.trial_variance()}};
    }
    return j;
}

void write_trial_csv(const std::filesystem::path& path, const QualityReport& blur, const QualityReport& resize) {
    if (blur.trials.size() != resize.trials.size()) throw Error("blur and resize reports have different trial counts");
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << "trial,seed,blur_auc,resize_auc\n";
    for (std::size_t k = 0; k < blur.trials.size(); ++k)
        out << k << ',' << (k < blur.seeds.size() ? blur.seeds[k] : 0) << ',' << format_double(blur.trials[k]) << ','
            << format_double(resize.trials[k]) << '\n';
}

void write_long_csv(const std::filesystem::path& path, const std::vector<QualityReport>& reports) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << "trial,method,metric,auc\n";
    for (const auto& r : reports) {
        if (r.trials.empty()) {
            out << 0 << ',' << r.method << ',' << to_string(r.metric) << ',' << format_double(r.auc) << '\n';
            continue;
        }
        for (std::size_t k = 0; k < r.trials.size(); ++k)
            out << k << ',' << r.method << ',' << to_string(r.metric) << ',' << format_double(r.trials[k]) << '\n';
    }
}

json to_json(const GroupSpec& spec) {
    json groups = json::array();
    for (const auto& g : spec.groups) groups.push_back({{"group_id", g.id}, {"members", g.members}});
    return {{"groups", groups},
            {"samples_per_group", spec.samples_per_group},
            {"mode", to_string(spec.mode)},
            {"random_total", spec.random_total}};
}

}  // namespace topomap
