#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "topomap/error.hpp"
#include "topomap/layout.hpp"
#include "topomap/rng.hpp"

namespace topomap {

namespace {

struct Neighbors {
    std::vector<std::vector<std::size_t>> index;   // k entries per row, self first
    std::vector<std::vector<double>> distance;
};

Neighbors nearest_neighbors(const Matrix& dist, std::size_t k) {
    const auto n = static_cast<std::size_t>(dist.rows());
    Neighbors nn;
    nn.index.resize(n);
    nn.distance.resize(n);
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        const auto row = static_cast<Eigen::Index>(i);
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                          [&](std::size_t a, std::size_t b) {
                              if (a == i || b == i) return a == i && b != i;
                              const double da = dist(row, static_cast<Eigen::Index>(a));
                              const double db = dist(row, static_cast<Eigen::Index>(b));
                              return da < db || (da == db && a < b);
                          });
        for (std::size_t m = 0; m < k; ++m) {
            nn.index[i].push_back(order[m]);
            nn.distance[i].push_back(order[m] == i ? 0.0 : dist(row, static_cast<Eigen::Index>(order[m])));
        }
    }
    return nn;
}

/// Per-point distance to the nearest neighbor (rho) and the bandwidth
/// (sigma) that makes the neighbor memberships sum to log2(k).
void smooth_knn(const Neighbors& nn, std::vector<double>& rho, std::vector<double>& sigma) {
    const std::size_t n = nn.index.size();
    const std::size_t k = nn.index.empty() ? 0 : nn.index[0].size();
    const double target = std::log2(static_cast<double>(k));
    double global_mean = 0.0;
    for (const auto& row : nn.distance) global_mean += std::accumulate(row.begin(), row.end(), 0.0);
    global_mean /= static_cast<double>(n * k);

    rho.assign(n, 0.0);
    sigma.assign(n, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& d = nn.distance[i];
        for (double v : d)
            if (v > 0.0) {
                rho[i] = v;
                break;
            }
        double lo = 0.0;
        double hi = std::numeric_limits<double>::infinity();
        double mid = 1.0;
        for (int iter = 0; iter < 64; ++iter) {
            double psum = 0.0;
            for (std::size_t j = 1; j < k; ++j) {
                const double shifted = d[j] - rho[i];
                psum += shifted > 0.0 ? std::exp(-shifted / mid) : 1.0;
            }
            if (std::abs(psum - target) < 1e-5) break;
            if (psum > target) {
                hi = mid;
                mid = (lo + hi) / 2.0;
            } else {
                lo = mid;
                mid = std::isinf(hi) ? mid * 2.0 : (lo + hi) / 2.0;
            }
        }
        const double local_mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(k);
        const double floor = 1e-3 * (rho[i] > 0.0 ? local_mean : global_mean);
        sigma[i] = std::max(mid, floor);
    }
}

struct WeightedEdge {
    std::size_t head;
    std::size_t tail;
    double weight;
};

/// Fuzzy union A + A^T - A o A^T of the directed membership graph, listed
/// in both directions in row-major order.
std::vector<WeightedEdge> fuzzy_union(const Neighbors& nn, const std::vector<double>& rho,
                                      const std::vector<double>& sigma) {
    std::map<std::pair<std::size_t, std::size_t>, double> directed;
    for (std::size_t i = 0; i < nn.index.size(); ++i) {
        for (std::size_t m = 0; m < nn.index[i].size(); ++m) {
            const std::size_t j = nn.index[i][m];
            if (j == i) continue;
            const double shifted = nn.distance[i][m] - rho[i];
            const double w = (shifted <= 0.0 || sigma[i] == 0.0) ? 1.0 : std::exp(-shifted / sigma[i]);
            directed[{i, j}] = w;
        }
    }
    std::map<std::pair<std::size_t, std::size_t>, double> sym;
    for (const auto& [key, w] : directed) {
        const auto rev = directed.find({key.second, key.first});
        const double wt = rev == directed.end() ? 0.0 : rev->second;
        const double u = w + wt - w * wt;
        sym[key] = u;
        sym[{key.second, key.first}] = u;
    }
    std::vector<WeightedEdge> edges;
    edges.reserve(sym.size());
    for (const auto& [key, w] : sym)
        if (w > 0.0) edges.push_back({key.first, key.second, w});
    return edges;
}

void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
    Eigen::Index pivot = 0;
    for (Eigen::Index i = 1; i < v.size(); ++i)
        if (std::abs(v(i)) > std::abs(v(pivot))) pivot = i;
    if (v(pivot) < 0) v = -v;
}

Coords spectral_embedding(std::size_t n, const std::vector<WeightedEdge>& edges) {
    const auto size = static_cast<Eigen::Index>(n);
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(size, size);
    for (const auto& e : edges) w(static_cast<Eigen::Index>(e.head), static_cast<Eigen::Index>(e.tail)) = e.weight;
    const Eigen::VectorXd degree = w.rowwise().sum();
    const Eigen::VectorXd inv_sqrt = degree.unaryExpr([](double d) { return d > 0 ? 1.0 / std::sqrt(d) : 0.0; });
    Eigen::MatrixXd laplacian = -(inv_sqrt.asDiagonal() * w * inv_sqrt.asDiagonal());
    laplacian.diagonal().array() += 1.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(laplacian);
    if (solver.info() != Eigen::Success) throw Error("UMAP spectral initialization failed");
    Coords out(size, 2);
    for (int k = 0; k < 2; ++k) {
        Eigen::VectorXd v = solver.eigenvectors().col(k + 1);
        fix_sign(v);
        out.col(k) = v;
    }
    return out;
}

double clip(double v) { return std::clamp(v, -4.0, 4.0); }

}  // namespace

std::pair<double, double> umap_curve_parameters(double min_dist, double spread) {
    constexpr int samples = 300;
    std::vector<double> xs(samples), ys(samples);
    for (int i = 0; i < samples; ++i) {
        xs[i] = 3.0 * spread * static_cast<double>(i) / (samples - 1);
        ys[i] = xs[i] < min_dist ? 1.0 : std::exp(-(xs[i] - min_dist) / spread);
    }
    auto residual_sum = [&](double a, double b) {
        double s = 0.0;
        for (int i = 0; i < samples; ++i) {
            const double r = 1.0 / (1.0 + a * std::pow(xs[i], 2.0 * b)) - ys[i];
            s += r * r;
        }
        return s;
    };

    // Levenberg-Marquardt on (a, b).
    double a = 1.0, b = 1.0, lambda = 1e-3;
    double cost = residual_sum(a, b);
    for (int iter = 0; iter < 500; ++iter) {
        Eigen::Matrix2d jtj = Eigen::Matrix2d::Zero();
        Eigen::Vector2d jtr = Eigen::Vector2d::Zero();
        for (int i = 0; i < samples; ++i) {
            const double x = xs[i];
            const double xp = x > 0.0 ? std::pow(x, 2.0 * b) : 0.0;
            const double denom = 1.0 + a * xp;
            const double f = 1.0 / denom;
            const double r = f - ys[i];
            Eigen::Vector2d j;
            j(0) = -xp / (denom * denom);
            j(1) = x > 0.0 ? -a * xp * 2.0 * std::log(x) / (denom * denom) : 0.0;
            jtj += j * j.transpose();
            jtr += j * r;
        }
        bool improved = false;
        for (int tries = 0; tries < 30 && !improved; ++tries) {
            Eigen::Matrix2d damped = jtj;
            damped.diagonal() *= 1.0 + lambda;
            const Eigen::Vector2d step = damped.ldlt().solve(-jtr);
            const double na = a + step(0), nb = b + step(1);
            const double ncost = na > 0 && nb > 0 ? residual_sum(na, nb) : std::numeric_limits<double>::infinity();
            if (ncost < cost) {
                const double gain = cost - ncost;
                a = na;
                b = nb;
                cost = ncost;
                lambda = std::max(lambda / 10.0, 1e-12);
                improved = true;
                if (gain < 1e-15 * std::max(cost, 1e-30)) iter = 500;
            } else {
                lambda *= 10.0;
            }
        }
        if (!improved) break;
    }
    return {a, b};
}

Layout layout_umap(const NapMatrix& nap, const UmapParams& params, std::uint64_t seed) {
    const Matrix& x = nap.layout_features;
    const auto n = static_cast<std::size_t>(x.rows());
    if (params.n_neighbors < 2) throw Error("layout_umap: n_neighbors must be at least 2");
    if (n <= static_cast<std::size_t>(params.n_neighbors))
        throw Error("layout_umap needs more neurons (" + std::to_string(n) + ") than n_neighbors (" +
                    std::to_string(params.n_neighbors) + ")");
    if (params.epochs < 1) throw Error("layout_umap: epochs must be positive");

    const Matrix dist = cosine_distance_matrix(x);
    const Neighbors nn = nearest_neighbors(dist, static_cast<std::size_t>(params.n_neighbors));
    std::vector<double> rho, sigma;
    smooth_knn(nn, rho, sigma);
    std::vector<WeightedEdge> edges = fuzzy_union(nn, rho, sigma);

    Rng rng(seed);
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (const auto& e : edges) pairs.emplace_back(e.head, e.tail);
    Coords embedding;
    bool spectral = true;
    if (component_count(n, pairs) > 1) {
        warn("UMAP neighbor graph is disconnected; falling back to PCA initialization");
        embedding = pca_2d(x).scores;
        spectral = false;
    } else {
        embedding = spectral_embedding(n, edges);
    }
    for (int d = 0; d < 2; ++d) {
        const double lo = embedding.col(d).minCoeff();
        const double hi = embedding.col(d).maxCoeff();
        if (hi > lo) embedding.col(d) = 10.0 * (embedding.col(d).array() - lo) / (hi - lo);
        else embedding.col(d).setConstant(5.0);
    }
    for (Eigen::Index i = 0; i < embedding.rows(); ++i)
        for (int d = 0; d < 2; ++d) embedding(i, d) += 1e-4 * rng.normal();

    const auto [a, b] = umap_curve_parameters(params.min_dist, params.spread);

    double max_weight = 0.0;
    for (const auto& e : edges) max_weight = std::max(max_weight, e.weight);
    const double n_epochs = params.epochs;
    std::erase_if(edges, [&](const WeightedEdge& e) { return e.weight < max_weight / n_epochs; });

    const std::size_t m = edges.size();
    std::vector<double> per_sample(m), next_sample(m), per_negative(m), next_negative(m);
    for (std::size_t i = 0; i < m; ++i) {
        per_sample[i] = max_weight / edges[i].weight;
        next_sample[i] = per_sample[i];
        per_negative[i] = per_sample[i] / params.negative_sample_rate;
        next_negative[i] = per_negative[i];
    }

    for (int epoch = 0; epoch < params.epochs; ++epoch) {
        const double alpha = 1.0 - static_cast<double>(epoch) / n_epochs;
        const double now = epoch;
        for (std::size_t i = 0; i < m; ++i) {
            if (next_sample[i] > now) continue;
            const auto head = static_cast<Eigen::Index>(edges[i].head);
            const auto tail = static_cast<Eigen::Index>(edges[i].tail);

            double d2 = (embedding.row(head) - embedding.row(tail)).squaredNorm();
            double coeff = 0.0;
            if (d2 > 0.0) coeff = -2.0 * a * b * std::pow(d2, b - 1.0) / (a * std::pow(d2, b) + 1.0);
            for (int d = 0; d < 2; ++d) {
                const double g = clip(coeff * (embedding(head, d) - embedding(tail, d)));
                embedding(head, d) += g * alpha;
                embedding(tail, d) -= g * alpha;
            }
            next_sample[i] += per_sample[i];

            const auto negatives = static_cast<int>((now - next_negative[i]) / per_negative[i]);
            for (int s = 0; s < negatives; ++s) {
                const auto other = static_cast<Eigen::Index>(rng.index(n));
                d2 = (embedding.row(head) - embedding.row(other)).squaredNorm();
                if (d2 > 0.0) {
                    coeff = 2.0 * b / ((0.001 + d2) * (a * std::pow(d2, b) + 1.0));
                } else if (head == other) {
                    continue;
                } else {
                    coeff = 0.0;
                }
                for (int d = 0; d < 2; ++d) {
                    const double g = coeff > 0.0 ? clip(coeff * (embedding(head, d) - embedding(other, d))) : 4.0;
                    embedding(head, d) += g * alpha;
                }
            }
            next_negative[i] += negatives * per_negative[i];
        }
    }
    if (!embedding.allFinite()) throw Error("UMAP optimization produced non-finite coordinates");

    Layout layout;
    layout.coords = embedding;
    layout.method = Method::umap;
    layout.seed = seed;
    layout.neuron_ids = nap.neuron_ids;
    layout.params = {{"n_neighbors", params.n_neighbors},
                     {"min_dist", params.min_dist},
                     {"epochs", params.epochs},
                     {"a", a},
                     {"b", b},
                     {"init", spectral ? "spectral" : "pca"}};
    return layout;
}

}  // namespace topomap
