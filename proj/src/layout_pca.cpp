#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>

#include "topomap/error.hpp"
#include "topomap/layout.hpp"

namespace topomap {

PcaProjection pca_2d(const Matrix& features) {
    const Eigen::Index n = features.rows();
    const Eigen::Index d = features.cols();
    if (n < 2) throw Error("PCA needs at least 2 rows");
    if (d < 2) throw Error("PCA needs at least 2 feature columns");

    const Eigen::MatrixXd centered = features.rowwise() - features.colwise().mean();
    Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
    const Eigen::VectorXd& sv = svd.singularValues();
    const double tolerance =
        static_cast<double>(std::max(n, d)) * std::numeric_limits<double>::epsilon() * (sv.size() ? sv(0) : 0.0);

    PcaProjection out;
    out.components = Matrix::Zero(2, d);
    out.scores = Coords::Zero(n, 2);
    for (int k = 0; k < 2; ++k) {
        if (k >= sv.size() || !(sv(k) > tolerance)) continue;  // rank < k + 1: constant coordinate
        Eigen::VectorXd axis = svd.matrixV().col(k);
        Eigen::Index pivot = 0;
        for (Eigen::Index i = 1; i < axis.size(); ++i)
            if (std::abs(axis(i)) > std::abs(axis(pivot))) pivot = i;
        if (axis(pivot) < 0) axis = -axis;
        out.components.row(k) = axis.transpose();
        out.scores.col(k) = centered * axis;
        out.explained_variance(k) = sv(k) * sv(k) / static_cast<double>(n - 1);
    }
    for (int k = 0; k < 2; ++k)
        if (k >= sv.size() || !(sv(k) > tolerance)) out.explained_variance(k) = 0.0;
    return out;
}

Layout layout_pca(const NapMatrix& nap) {
    Layout layout;
    layout.coords = pca_2d(nap.layout_features).scores;
    layout.method = Method::pca;
    layout.neuron_ids = nap.neuron_ids;
    return layout;
}

}  // namespace topomap
