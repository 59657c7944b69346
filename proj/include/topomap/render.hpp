#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "topomap/layout.hpp"
#include "topomap/matrix.hpp"
#include "topomap/nap.hpp"

namespace topomap {

/// Delaunay triangulation of 2-D points. Exact duplicates are separated by a
/// seeded jitter of about 1e-9 before triangulating; `points` holds the
/// positions actually triangulated.
struct Triangulation {
    Coords points;
    std::vector<std::array<std::size_t, 3>> triangles;
};

/// Throws Error("insufficient points for triangulation") for fewer than 3
/// points or when every point is collinear.
Triangulation triangulate(const Coords& points, std::uint64_t seed = 0);

/// Barycentric interpolation weights of a square pixel grid over the unit
/// square, computed once per layout and reused for every group.
///
/// Pixel (row r, column c) samples x = c / (R - 1), y = 1 - r / (R - 1), so
/// the corners of the unit square fall exactly on the corner pixels.
class FieldInterpolator {
public:
    FieldInterpolator(const Coords& unit_coords, int resolution, std::uint64_t seed = 0);

    int resolution() const { return resolution_; }
    std::size_t points() const { return n_points_; }
    bool inside(std::size_t pixel) const { return inside_[pixel] != 0; }
    const std::vector<std::uint8_t>& mask() const { return inside_; }

    /// R x R field; pixels outside the convex hull are set to `fill`.
    Matrix interpolate(const Vector& values, double fill = 0.0) const;

private:
    int resolution_;
    std::size_t n_points_;
    std::vector<std::uint8_t> inside_;
    std::vector<std::array<std::uint32_t, 3>> vertex_;
    std::vector<std::array<double, 3>> weight_;
};

/// One interpolated topographic map.
struct TopoImage {
    Matrix field;                      ///< R x R, 0 outside the hull
    std::vector<std::uint8_t> mask;    ///< R*R, row-major, 1 inside the hull
    std::string group_id;
    double vmax = 0.0;

    int resolution() const { return static_cast<int>(field.rows()); }
};

TopoImage interpolate_field(const Layout& layout, const Vector& values, int resolution = 100);

struct Rgb {
    std::uint8_t r, g, b;
    bool operator==(const Rgb&) const = default;
};

struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  ///< interleaved RGB, row-major

    RgbImage() = default;
    RgbImage(int w, int h, Rgb fill = {255, 255, 255});
    Rgb at(int x, int y) const;
    void set(int x, int y, Rgb c);
};

/// Blue-white-red diverging map, linear on each side of 0 and clamped to
/// [-vmax, vmax]; channels round half up.
Rgb diverging_color(double value, double vmax);

RgbImage colorize(const TopoImage& img);

/// Dendrogram leaf order of the groups under average-linkage clustering of
/// the color_values columns (Euclidean distance).
std::vector<std::size_t> order_groups(const NapMatrix& nap);
std::vector<std::size_t> order_columns(const Matrix& columns_as_rows);

enum class GridMode { strip, confusion };

struct GridEntry {
    std::string group_id;
    int row = 0;              ///< strip mode: which row the panel goes to
    std::string true_label;   ///< confusion mode
    std::string pred_label;   ///< confusion mode
};

/// Panel arrangement, read from JSON
/// {"mode": "strip"|"confusion", "sort": bool, "rows": [{"group_id": ...}, ...]}.
/// Strip entries may carry "row"; confusion entries carry "true" and "pred"
/// (or ids of the form "t→p"), and an optional "labels" list fixes the axis
/// order.
struct GridDescriptor {
    GridMode mode = GridMode::strip;
    bool sort = false;
    std::vector<GridEntry> entries;
    std::vector<std::string> labels;

    static GridDescriptor from_json(const nlohmann::json& j);
    static GridDescriptor load(const std::filesystem::path& path);
    /// One strip row holding every group of the NAP matrix.
    static GridDescriptor all_groups(const NapMatrix& nap, bool sort);
};

struct Panel {
    int x = 0;
    int y = 0;
    std::string caption;
    std::optional<std::size_t> group;  ///< nullopt: blank cell
};

struct Figure {
    RgbImage image;
    std::vector<Panel> panels;
    std::vector<std::vector<std::string>> row_order;  ///< group ids per row, as drawn
    double vmax = 0.0;
    int resolution = 0;
};

Figure compose_grid(const NapMatrix& nap, const Layout& layout, const GridDescriptor& grid, int resolution = 100);

/// Writes `output` as PNG and, when `svg` is set, a sibling .svg file.
Figure render_grid(const NapMatrix& nap, const Layout& layout, const GridDescriptor& grid,
                   const std::filesystem::path& output, int resolution = 100, bool svg = false);

}  // namespace topomap
