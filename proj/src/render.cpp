#include "topomap/render.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>

#include "topomap/error.hpp"
#include "topomap/image_io.hpp"

namespace topomap {

namespace {

constexpr int kPadding = 8;
constexpr int kCaptionHeight = 16;
constexpr int kFontScale = 2;

std::uint8_t channel(double v) { return static_cast<std::uint8_t>(std::floor(v + 0.5)); }

void check_ids(const NapMatrix& nap, const Layout& layout) {
    if (layout.neuron_ids != nap.neuron_ids) throw Error("layout and NAP matrix have mismatched neuron ids");
    if (layout.coords.rows() != static_cast<Eigen::Index>(nap.units()))
        throw Error("layout and NAP matrix have different neuron counts");
}

std::pair<std::string, std::string> split_arrow(const std::string& id) {
    for (const std::string sep : {"→", "->"}) {
        auto pos = id.find(sep);
        if (pos != std::string::npos) return {id.substr(0, pos), id.substr(pos + sep.size())};
    }
    throw Error("confusion grid entry '" + id + "' needs 'true' and 'pred' labels");
}

}  // namespace

TopoImage interpolate_field(const Layout& layout, const Vector& values, int resolution) {
    FieldInterpolator interp(layout.coords, resolution, layout.seed);
    TopoImage img;
    img.field = interp.interpolate(values, 0.0);
    img.mask = interp.mask();
    img.vmax = values.size() ? values.cwiseAbs().maxCoeff() : 0.0;
    return img;
}

RgbImage::RgbImage(int w, int h, Rgb fill) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3) {
    for (std::size_t i = 0; i < pixels.size(); i += 3) {
        pixels[i] = fill.r;
        pixels[i + 1] = fill.g;
        pixels[i + 2] = fill.b;
    }
}

Rgb RgbImage::at(int x, int y) const {
    const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
    return {pixels[i], pixels[i + 1], pixels[i + 2]};
}

void RgbImage::set(int x, int y, Rgb c) {
    if (x < 0 || y < 0 || x >= width || y >= height) return;
    const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
    pixels[i] = c.r;
    pixels[i + 1] = c.g;
    pixels[i + 2] = c.b;
}

Rgb diverging_color(double value, double vmax) {
    if (!(vmax > 0) || !std::isfinite(value)) return {255, 255, 255};
    const double v = std::clamp(value, -vmax, vmax);
    if (v < 0) {
        const std::uint8_t c = channel(255.0 * (1.0 + v / vmax));
        return {c, c, 255};
    }
    const std::uint8_t c = channel(255.0 * (1.0 - v / vmax));
    return {255, c, c};
}

RgbImage colorize(const TopoImage& img) {
    const int r = img.resolution();
    RgbImage out(r, r);
    for (int y = 0; y < r; ++y)
        for (int x = 0; x < r; ++x) {
            const std::size_t p = static_cast<std::size_t>(y) * r + x;
            if (!img.mask.empty() && !img.mask[p]) continue;
            out.set(x, y, diverging_color(img.field(y, x), img.vmax));
        }
    return out;
}

std::vector<std::size_t> order_columns(const Matrix& items) {
    const auto g = static_cast<std::size_t>(items.rows());
    if (g == 0) return {};
    if (g == 1) return {0};

    struct Cluster {
        std::size_t id;
        std::size_t size;
        std::vector<std::size_t> leaves;
    };
    std::vector<Cluster> active;
    for (std::size_t i = 0; i < g; ++i) active.push_back({i, 1, {i}});
    std::vector<std::vector<double>> dist(g, std::vector<double>(g, 0.0));
    for (std::size_t i = 0; i < g; ++i)
        for (std::size_t j = 0; j < g; ++j)
            dist[i][j] = (items.row(static_cast<Eigen::Index>(i)) - items.row(static_cast<Eigen::Index>(j))).norm();

    std::size_t next_id = g;
    while (active.size() > 1) {
        std::size_t best_a = 0, best_b = 1;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < active.size(); ++a)
            for (std::size_t b = a + 1; b < active.size(); ++b)
                if (dist[a][b] < best) {  // strict: earlier (lower id) pairs win ties
                    best = dist[a][b];
                    best_a = a;
                    best_b = b;
                }
        Cluster& left = active[best_a];
        Cluster& right = active[best_b];
        Cluster merged{next_id++, left.size + right.size, left.leaves};
        merged.leaves.insert(merged.leaves.end(), right.leaves.begin(), right.leaves.end());

        // Average linkage update, then drop row/column best_b and reuse best_a.
        for (std::size_t k = 0; k < active.size(); ++k) {
            if (k == best_a || k == best_b) continue;
            const double d = (static_cast<double>(left.size) * dist[best_a][k] +
                              static_cast<double>(right.size) * dist[best_b][k]) /
                             static_cast<double>(merged.size);
            dist[best_a][k] = d;
            dist[k][best_a] = d;
        }
        active[best_a] = std::move(merged);
        active.erase(active.begin() + static_cast<std::ptrdiff_t>(best_b));
        dist.erase(dist.begin() + static_cast<std::ptrdiff_t>(best_b));
        for (auto& row : dist) row.erase(row.begin() + static_cast<std::ptrdiff_t>(best_b));
        // Keep clusters ordered by id so ties and left/right placement follow ids.
        std::vector<std::size_t> perm(active.size());
        for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
        std::stable_sort(perm.begin(), perm.end(),
                         [&](std::size_t x, std::size_t y) { return active[x].id < active[y].id; });
        std::vector<Cluster> sorted;
        std::vector<std::vector<double>> sorted_dist(perm.size(), std::vector<double>(perm.size()));
        for (std::size_t i = 0; i < perm.size(); ++i) {
            sorted.push_back(std::move(active[perm[i]]));
            for (std::size_t j = 0; j < perm.size(); ++j) sorted_dist[i][j] = dist[perm[i]][perm[j]];
        }
        active = std::move(sorted);
        dist = std::move(sorted_dist);
    }
    return active.front().leaves;
}

std::vector<std::size_t> order_groups(const NapMatrix& nap) {
    if (nap.group_count() < 2) throw Error("order_groups needs at least 2 groups");
    return order_columns(nap.color_values.transpose());
}

GridDescriptor GridDescriptor::from_json(const nlohmann::json& j) {
    GridDescriptor grid;
    const std::string mode = j.value("mode", std::string("strip"));
    if (mode == "strip") grid.mode = GridMode::strip;
    else if (mode == "confusion") grid.mode = GridMode::confusion;
    else throw Error("unknown grid mode '" + mode + "'");
    grid.sort = j.value("sort", false);
    if (j.contains("labels")) grid.labels = j.at("labels").get<std::vector<std::string>>();
    if (!j.contains("rows")) throw Error("grid descriptor is missing 'rows'");
    for (const auto& e : j.at("rows")) {
        GridEntry entry;
        entry.group_id = e.at("group_id").get<std::string>();
        entry.row = e.value("row", 0);
        if (entry.row < 0) throw Error("grid row index must be non-negative");
        if (grid.mode == GridMode::confusion) {
            if (e.contains("true") && e.contains("pred")) {
                entry.true_label = e.at("true").get<std::string>();
                entry.pred_label = e.at("pred").get<std::string>();
            } else {
                std::tie(entry.true_label, entry.pred_label) = split_arrow(entry.group_id);
            }
        }
        grid.entries.push_back(std::move(entry));
    }
    return grid;
}

GridDescriptor GridDescriptor::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open grid descriptor " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error("malformed grid descriptor: " + std::string(e.what()));
    }
    return from_json(j);
}

GridDescriptor GridDescriptor::all_groups(const NapMatrix& nap, bool sort) {
    GridDescriptor grid;
    grid.sort = sort;
    for (const auto& id : nap.group_ids) grid.entries.push_back({id, 0, {}, {}});
    return grid;
}

Figure compose_grid(const NapMatrix& nap, const Layout& layout, const GridDescriptor& grid, int resolution) {
    check_ids(nap, layout);
    std::map<std::string, std::size_t> index;
    for (std::size_t g = 0; g < nap.group_ids.size(); ++g) index[nap.group_ids[g]] = g;
    auto lookup = [&](const std::string& id) -> std::optional<std::size_t> {
        auto it = index.find(id);
        if (it == index.end()) return std::nullopt;
        return it->second;
    };

    Figure fig;
    fig.resolution = resolution;
    const int cell_w = resolution + kPadding;
    const int cell_h = resolution + kCaptionHeight + kPadding;

    // Cells: (row, column, caption, group)
    struct Cell {
        int row;
        int col;
        std::string caption;
        std::optional<std::size_t> group;
    };
    std::vector<Cell> cells;
    int rows = 0, cols = 0;
    int header_w = 0, header_h = 0;
    std::vector<std::string> axis;

    if (grid.mode == GridMode::strip) {
        std::map<int, std::vector<const GridEntry*>> by_row;
        for (const auto& e : grid.entries) by_row[e.row].push_back(&e);
        int r = 0;
        for (auto& [row_id, entries] : by_row) {
            std::vector<const GridEntry*> present;
            std::vector<const GridEntry*> missing;
            for (const auto* e : entries) (lookup(e->group_id) ? present : missing).push_back(e);
            if (grid.sort && present.size() >= 2) {
                Matrix cols_as_rows(static_cast<Eigen::Index>(present.size()), nap.color_values.rows());
                for (std::size_t k = 0; k < present.size(); ++k)
                    cols_as_rows.row(static_cast<Eigen::Index>(k)) =
                        nap.color_values.col(static_cast<Eigen::Index>(*lookup(present[k]->group_id))).transpose();
                const auto order = order_columns(cols_as_rows);
                std::vector<const GridEntry*> sorted;
                for (auto k : order) sorted.push_back(present[k]);
                present = std::move(sorted);
            }
            std::vector<const GridEntry*> drawn = present;
            drawn.insert(drawn.end(), missing.begin(), missing.end());
            std::vector<std::string> ids;
            for (std::size_t c = 0; c < drawn.size(); ++c) {
                cells.push_back({r, static_cast<int>(c), drawn[c]->group_id, lookup(drawn[c]->group_id)});
                ids.push_back(drawn[c]->group_id);
            }
            fig.row_order.push_back(std::move(ids));
            cols = std::max(cols, static_cast<int>(drawn.size()));
            ++r;
        }
        rows = r;
    } else {
        axis = grid.labels;
        if (axis.empty()) {
            std::set<std::string> seen;
            for (const auto& e : grid.entries)
                for (const auto* l : {&e.true_label, &e.pred_label})
                    if (seen.insert(*l).second) axis.push_back(*l);
        }
        std::map<std::string, int> pos;
        for (std::size_t i = 0; i < axis.size(); ++i) pos[axis[i]] = static_cast<int>(i);
        std::map<std::pair<int, int>, const GridEntry*> placed;
        for (const auto& e : grid.entries) {
            if (!pos.contains(e.true_label) || !pos.contains(e.pred_label))
                throw Error("confusion entry '" + e.group_id + "' uses a label outside the axis labels");
            placed[{pos[e.true_label], pos[e.pred_label]}] = &e;
        }
        rows = cols = static_cast<int>(axis.size());
        for (int t = 0; t < rows; ++t) {
            std::vector<std::string> ids;
            for (int p = 0; p < cols; ++p) {
                auto it = placed.find({t, p});
                std::optional<std::size_t> group;
                std::string caption = axis[static_cast<std::size_t>(t)] + ">" + axis[static_cast<std::size_t>(p)];
                if (it != placed.end()) {
                    group = lookup(it->second->group_id);
                    caption = it->second->group_id;
                }
                cells.push_back({t, p, caption, group});
                ids.push_back(group ? nap.group_ids[*group] : std::string{});
            }
            fig.row_order.push_back(std::move(ids));
        }
        int longest = 0;
        for (const auto& l : axis) longest = std::max(longest, text_width(l, kFontScale));
        header_w = longest + kPadding;
        header_h = kCaptionHeight;
    }

    // Shared color limit over every group drawn in the figure.
    for (const auto& c : cells)
        if (c.group)
            fig.vmax = std::max(fig.vmax, nap.color_values.col(static_cast<Eigen::Index>(*c.group)).cwiseAbs().maxCoeff());

    const int width = std::max(1, header_w + cols * cell_w + kPadding);
    const int height = std::max(1, header_h + rows * cell_h + kPadding);
    fig.image = RgbImage(width, height);

    std::optional<FieldInterpolator> interp;
    for (const auto& c : cells)
        if (c.group) {
            interp.emplace(layout.coords, resolution, layout.seed);
            break;
        }

    if (grid.mode == GridMode::confusion) {
        for (int i = 0; i < cols; ++i)
            draw_text(fig.image, header_w + kPadding + i * cell_w, 2, axis[static_cast<std::size_t>(i)], kFontScale);
        for (int i = 0; i < rows; ++i)
            draw_text(fig.image, 2, header_h + kPadding + i * cell_h + resolution / 2, axis[static_cast<std::size_t>(i)],
                      kFontScale);
    }

    for (const auto& c : cells) {
        Panel panel;
        panel.x = header_w + kPadding + c.col * cell_w;
        panel.y = header_h + kPadding + c.row * cell_h;
        panel.caption = c.caption;
        panel.group = c.group;
        if (c.group) {
            TopoImage img;
            img.field = interp->interpolate(nap.color_values.col(static_cast<Eigen::Index>(*c.group)));
            img.mask = interp->mask();
            img.vmax = fig.vmax;
            img.group_id = nap.group_ids[*c.group];
            const RgbImage tile = colorize(img);
            for (int y = 0; y < resolution; ++y)
                for (int x = 0; x < resolution; ++x) fig.image.set(panel.x + x, panel.y + y, tile.at(x, y));
            draw_text(fig.image, panel.x, panel.y + resolution + 3, c.caption, kFontScale);
        }
        fig.panels.push_back(std::move(panel));
    }
    return fig;
}

Figure render_grid(const NapMatrix& nap, const Layout& layout, const GridDescriptor& grid,
                   const std::filesystem::path& output, int resolution, bool svg) {
    Figure fig = compose_grid(nap, layout, grid, resolution);
    write_png(output, fig.image);
    if (svg) {
        std::vector<RgbImage> tiles;
        for (const auto& p : fig.panels) {
            RgbImage tile(resolution, resolution);
            if (p.group)
                for (int y = 0; y < resolution; ++y)
                    for (int x = 0; x < resolution; ++x) tile.set(x, y, fig.image.at(p.x + x, p.y + y));
            tiles.push_back(std::move(tile));
        }
        auto svg_path = output;
        svg_path.replace_extension(".svg");
        write_svg(svg_path, fig, tiles);
    }
    return fig;
}

}  // namespace topomap
