#include <algorithm>
#include <cmath>
#include <limits>

#include "topomap/error.hpp"
#include "topomap/layout.hpp"

namespace topomap {

namespace {

/// Row-conditional Gaussian affinities whose entropy matches log(perplexity),
/// found by bisection on the precision of each row.
Matrix conditional_affinities(const Matrix& sq_dist, double perplexity) {
    const Eigen::Index n = sq_dist.rows();
    const double target = std::log(perplexity);
    Matrix p = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double nearest = std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < n; ++j)
            if (j != i) nearest = std::min(nearest, sq_dist(i, j));

        double beta = 1.0;
        double lo = -std::numeric_limits<double>::infinity();
        double hi = std::numeric_limits<double>::infinity();
        for (int iter = 0; iter < 200; ++iter) {
            double sum = 0.0;
            double weighted = 0.0;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (j == i) continue;
                const double shifted = sq_dist(i, j) - nearest;
                const double v = std::exp(-beta * shifted);
                p(i, j) = v;
                sum += v;
                weighted += shifted * v;
            }
            const double entropy = std::log(sum) + beta * weighted / sum;
            const double diff = entropy - target;
            if (std::abs(diff) < 1e-5) break;
            if (diff > 0) {
                lo = beta;
                beta = std::isinf(hi) ? beta * 2.0 : (beta + hi) / 2.0;
            } else {
                hi = beta;
                beta = std::isinf(lo) ? beta / 2.0 : (beta + lo) / 2.0;
            }
        }
        p.row(i) /= p.row(i).sum();
    }
    return p;
}

}  // namespace

double effective_perplexity(double requested, std::size_t n) {
    return std::min(requested, (static_cast<double>(n) - 1.0) / 3.0);
}

Layout layout_tsne(const NapMatrix& nap, const TsneParams& params, std::uint64_t seed) {
    const Matrix& x = nap.layout_features;
    const Eigen::Index n = x.rows();
    if (n < 4) throw Error("layout_tsne needs at least 4 neurons");
    if (params.iterations < 1) throw Error("layout_tsne: iterations must be positive");
    const double perplexity = effective_perplexity(params.perplexity, static_cast<std::size_t>(n));

    const Eigen::VectorXd sq_norm = x.rowwise().squaredNorm();
    Matrix sq_dist = (-2.0 * x * x.transpose()).colwise() + sq_norm;
    sq_dist.rowwise() += sq_norm.transpose();
    sq_dist = sq_dist.cwiseMax(0.0);
    sq_dist.diagonal().setZero();

    Matrix p = conditional_affinities(sq_dist, perplexity);
    p = (p + p.transpose()) / (2.0 * static_cast<double>(n));
    p = p.cwiseMax(std::numeric_limits<double>::epsilon());
    p.diagonal().setZero();

    Coords y = pca_2d(x).scores;
    Eigen::Vector2d mean = y.colwise().mean().transpose();
    const double spread = std::sqrt((y.col(0).array() - mean(0)).square().mean());
    if (spread > 0) y *= 1e-4 / spread;

    Coords update = Coords::Zero(n, 2);
    Coords gains = Coords::Ones(n, 2);
    Coords grad(n, 2);
    Matrix num(n, n);
    for (int iter = 0; iter < params.iterations; ++iter) {
        const bool early = iter < params.exaggeration_iterations;
        const double exaggeration = early ? params.early_exaggeration : 1.0;
        const double momentum = early ? 0.5 : 0.8;

        double z = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            num(i, i) = 0.0;
            for (Eigen::Index j = i + 1; j < n; ++j) {
                const double v = 1.0 / (1.0 + (y.row(i) - y.row(j)).squaredNorm());
                num(i, j) = v;
                num(j, i) = v;
                z += 2.0 * v;
            }
        }
        grad.setZero();
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) {
                if (i == j) continue;
                const double mult = (exaggeration * p(i, j) - num(i, j) / z) * num(i, j);
                grad.row(i) += 4.0 * mult * (y.row(i) - y.row(j));
            }
        }
        if (!grad.allFinite())
            throw Error("t-SNE gradient became non-finite at iteration " + std::to_string(iter) +
                        " (degenerate affinities)");

        for (Eigen::Index i = 0; i < n; ++i) {
            for (int d = 0; d < 2; ++d) {
                const bool same_sign = (grad(i, d) > 0) == (update(i, d) > 0);
                gains(i, d) = std::max(same_sign ? gains(i, d) * 0.8 : gains(i, d) + 0.2, 0.01);
                update(i, d) = momentum * update(i, d) - params.learning_rate * gains(i, d) * grad(i, d);
                y(i, d) += update(i, d);
            }
        }
        mean = y.colwise().mean().transpose();
        y.rowwise() -= mean.transpose();
    }

    Layout layout;
    layout.coords = y;
    layout.method = Method::tsne;
    layout.seed = seed;
    layout.neuron_ids = nap.neuron_ids;
    layout.params = {{"perplexity", perplexity},
                     {"requested_perplexity", params.perplexity},
                     {"iterations", params.iterations},
                     {"learning_rate", params.learning_rate},
                     {"early_exaggeration", params.early_exaggeration}};
    return layout;
}

}  // namespace topomap
