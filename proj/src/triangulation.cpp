#include <boost/polygon/voronoi.hpp>
#include <algorithm>
#include <cmath>
#include <map>

#include "topomap/error.hpp"
#include "topomap/render.hpp"
#include "topomap/rng.hpp"

namespace topomap {

namespace {

using IntPoint = boost::polygon::point_data<int>;

/// Integer grid used for the exact Voronoi construction: 2^30 steps across
/// the larger side of the bounding box, i.e. about 1e-9 of the extent.
constexpr double kGridSteps = 1073741824.0;

}  // namespace

Triangulation triangulate(const Coords& points, std::uint64_t seed) {
    const Eigen::Index n = points.rows();
    if (n < 3) throw Error("insufficient points for triangulation");
    if (!points.allFinite()) throw Error("triangulation input must be finite");

    const double lo_x = points.col(0).minCoeff();
    const double lo_y = points.col(1).minCoeff();
    const double span = std::max(points.col(0).maxCoeff() - lo_x, points.col(1).maxCoeff() - lo_y);
    if (!(span > 0)) throw Error("insufficient points for triangulation");
    const double scale = kGridSteps / span;

    std::vector<IntPoint> grid;
    grid.reserve(static_cast<std::size_t>(n));
    std::map<std::pair<int, int>, std::size_t> occupied;
    Rng rng(seed);
    for (Eigen::Index i = 0; i < n; ++i) {
        int x = static_cast<int>(std::llround((points(i, 0) - lo_x) * scale));
        int y = static_cast<int>(std::llround((points(i, 1) - lo_y) * scale));
        while (occupied.contains({x, y})) {
            x += static_cast<int>(rng.index(5)) - 2;
            y += static_cast<int>(rng.index(5)) - 2;
        }
        occupied[{x, y}] = static_cast<std::size_t>(i);
        grid.emplace_back(x, y);
    }

    Triangulation tri;
    tri.points.resize(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        tri.points(i, 0) = lo_x + grid[static_cast<std::size_t>(i)].x() / scale;
        tri.points(i, 1) = lo_y + grid[static_cast<std::size_t>(i)].y() / scale;
    }

    boost::polygon::voronoi_diagram<double> diagram;
    boost::polygon::construct_voronoi(grid.begin(), grid.end(), &diagram);
    // Every finite Voronoi vertex is the circumcenter of one Delaunay face;
    // faces of more than three cocircular sites are fanned into triangles.
    std::vector<std::size_t> ring;
    for (const auto& vertex : diagram.vertices()) {
        ring.clear();
        const auto* edge = vertex.incident_edge();
        do {
            ring.push_back(edge->cell()->source_index());
            edge = edge->rot_next();
        } while (edge != vertex.incident_edge());
        for (std::size_t k = 1; k + 1 < ring.size(); ++k) tri.triangles.push_back({ring[0], ring[k], ring[k + 1]});
    }
    if (tri.triangles.empty()) throw Error("insufficient points for triangulation");
    return tri;
}

FieldInterpolator::FieldInterpolator(const Coords& unit_coords, int resolution, std::uint64_t seed)
    : resolution_(resolution), n_points_(static_cast<std::size_t>(unit_coords.rows())) {
    if (resolution < 2) throw Error("render resolution must be at least 2");
    const Triangulation tri = triangulate(unit_coords, seed);
    const auto pixels = static_cast<std::size_t>(resolution) * static_cast<std::size_t>(resolution);
    inside_.assign(pixels, 0);
    vertex_.assign(pixels, {0, 0, 0});
    weight_.assign(pixels, {0.0, 0.0, 0.0});

    const double step = static_cast<double>(resolution - 1);
    constexpr double eps = 1e-12;
    for (const auto& t : tri.triangles) {
        const Eigen::RowVector2d a = tri.points.row(static_cast<Eigen::Index>(t[0]));
        const Eigen::RowVector2d b = tri.points.row(static_cast<Eigen::Index>(t[1]));
        const Eigen::RowVector2d c = tri.points.row(static_cast<Eigen::Index>(t[2]));
        const double det = (b.y() - c.y()) * (a.x() - c.x()) + (c.x() - b.x()) * (a.y() - c.y());
        if (det == 0.0) continue;

        const double min_x = std::min({a.x(), b.x(), c.x()});
        const double max_x = std::max({a.x(), b.x(), c.x()});
        const double min_y = std::min({a.y(), b.y(), c.y()});
        const double max_y = std::max({a.y(), b.y(), c.y()});
        const int c0 = std::max(0, static_cast<int>(std::ceil(min_x * step - 1e-9)));
        const int c1 = std::min(resolution - 1, static_cast<int>(std::floor(max_x * step + 1e-9)));
        // Row r samples y = 1 - r / step.
        const int r0 = std::max(0, static_cast<int>(std::ceil((1.0 - max_y) * step - 1e-9)));
        const int r1 = std::min(resolution - 1, static_cast<int>(std::floor((1.0 - min_y) * step + 1e-9)));
        for (int r = r0; r <= r1; ++r) {
            const double y = 1.0 - r / step;
            for (int col = c0; col <= c1; ++col) {
                const std::size_t p = static_cast<std::size_t>(r) * static_cast<std::size_t>(resolution) +
                                      static_cast<std::size_t>(col);
                if (inside_[p]) continue;
                const double x = col / step;
                const double l0 = ((b.y() - c.y()) * (x - c.x()) + (c.x() - b.x()) * (y - c.y())) / det;
                const double l1 = ((c.y() - a.y()) * (x - c.x()) + (a.x() - c.x()) * (y - c.y())) / det;
                const double l2 = 1.0 - l0 - l1;
                if (l0 < -eps || l1 < -eps || l2 < -eps) continue;
                inside_[p] = 1;
                vertex_[p] = {static_cast<std::uint32_t>(t[0]), static_cast<std::uint32_t>(t[1]),
                              static_cast<std::uint32_t>(t[2])};
                weight_[p] = {std::max(l0, 0.0), std::max(l1, 0.0), std::max(l2, 0.0)};
            }
        }
    }
}

Matrix FieldInterpolator::interpolate(const Vector& values, double fill) const {
    if (static_cast<std::size_t>(values.size()) != n_points_)
        throw Error("value count does not match the number of layout points");
    Matrix out(resolution_, resolution_);
    double* data = out.data();
    for (std::size_t p = 0; p < inside_.size(); ++p) {
        if (!inside_[p]) {
            data[p] = fill;
            continue;
        }
        const auto& v = vertex_[p];
        const auto& w = weight_[p];
        const double a = values(v[0]), b = values(v[1]), c = values(v[2]);
        const double value = (w[0] * a + w[1] * b + w[2] * c) / (w[0] + w[1] + w[2]);
        data[p] = std::clamp(value, std::min({a, b, c}), std::max({a, b, c}));
    }
    return out;
}

}  // namespace topomap
