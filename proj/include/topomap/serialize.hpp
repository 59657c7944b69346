#pragma once

#include <filesystem>
#include <vector>

#include "json.hpp"
#include "topomap/layout.hpp"
#include "topomap/nap.hpp"
#include "topomap/quality.hpp"

namespace topomap {

/// Indented by 2 spaces plus a trailing newline; identical values give
/// byte-identical files.
void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

/// nap.json (ids, mode, seed, optional `source` block) next to
/// nap_layout_features.npy and nap_color_values.npy (float64).
void save_nap(const std::filesystem::path& dir, const NapMatrix& nap,
              const nlohmann::json& source = nlohmann::json());
/// Loads from nap.json; `source` receives the stored source block if present.
NapMatrix load_nap(const std::filesystem::path& nap_json, nlohmann::json* source = nullptr);

nlohmann::json to_json(const Layout& layout);
Layout layout_from_json(const nlohmann::json& j);
void save_layout(const std::filesystem::path& path, const Layout& layout);
Layout load_layout(const std::filesystem::path& path);

nlohmann::json to_json(const QualityReport& report);

/// trial,seed,blur_auc,resize_auc
void write_trial_csv(const std::filesystem::path& path, const QualityReport& blur, const QualityReport& resize);
/// trial,method,metric,auc, one row per trial and report.
void write_long_csv(const std::filesystem::path& path, const std::vector<QualityReport>& reports);

/// Group spec JSON as read by load_group_spec.
nlohmann::json to_json(const GroupSpec& spec);

}  // namespace topomap
