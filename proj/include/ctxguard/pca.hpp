#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "ctxguard/common.hpp"

namespace ctxguard {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Principal-component preprocessing baked into every density model.
// components is (output_dim x input_dim) with orthonormal rows.
struct PcaTransform {
    VectorXd mean;
    MatrixXd components;
    VectorXd explained_variance;
    bool degenerate = false;  // zero-variance training data; identity completion

    int input_dim() const { return static_cast<int>(mean.size()); }
    int output_dim() const { return static_cast<int>(components.rows()); }

    VectorXd transform(const VectorXd& x) const {
        if (x.size() != mean.size())
            throw NumericError("pca: input dim " + std::to_string(x.size()) +
                               " != " + std::to_string(mean.size()));
        return components * (x - mean);
    }

    MatrixXd transform_rows(const MatrixXd& X) const {
        if (X.cols() != mean.size())
            throw NumericError("pca: input dim mismatch");
        return (X.rowwise() - mean.transpose()) * components.transpose();
    }

    VectorXd reconstruct(const VectorXd& z) const {
        return mean + components.transpose() * z;
    }

    // Identity pass-through, for models trained on raw features.
    static PcaTransform identity(int dim) {
        PcaTransform p;
        p.mean = VectorXd::Zero(dim);
        p.components = MatrixXd::Identity(dim, dim);
        p.explained_variance = VectorXd::Zero(dim);
        return p;
    }
};

// Top-output_dim principal directions of mean-centered data, ordered by
// decreasing explained variance. Deterministic: each component's first
// coordinate with |v| > 1e-9 is made positive.
inline PcaTransform fit_pca(const MatrixXd& data, int output_dim) {
    const auto n = data.rows();
    const auto d = data.cols();
    if (n < 2) throw NumericError("fit_pca: need at least 2 rows");
    if (output_dim < 1 || output_dim > std::min(n, d))
        throw NumericError("fit_pca: output_dim must be in [1, min(n, d)]");
    if (!data.allFinite()) throw NumericError("fit_pca: non-finite input");

    PcaTransform p;
    p.mean = data.colwise().mean();
    MatrixXd centered = data.rowwise() - p.mean.transpose();

    const double total_var = centered.squaredNorm() / double(n - 1);
    if (total_var < 1e-20) {
        // all rows identical: identity completion, zero variance, warn flag
        p.components = MatrixXd::Identity(output_dim, d);
        p.explained_variance = VectorXd::Zero(output_dim);
        p.degenerate = true;
        return p;
    }

    Eigen::BDCSVD<MatrixXd> svd(centered, Eigen::ComputeThinV);
    const VectorXd& sv = svd.singularValues();
    if (sv(output_dim - 1) <= sv(0) * 1e-12)
        throw NumericError("fit_pca: output_dim exceeds data rank");

    p.components = svd.matrixV().leftCols(output_dim).transpose();
    p.explained_variance.resize(output_dim);
    for (int i = 0; i < output_dim; ++i)
        p.explained_variance(i) = sv(i) * sv(i) / double(n - 1);

    for (int i = 0; i < output_dim; ++i) {
        for (int j = 0; j < d; ++j) {
            const double v = p.components(i, j);
            if (std::abs(v) > 1e-9) {
                if (v < 0) p.components.row(i) = -p.components.row(i);
                break;
            }
        }
    }
    return p;
}

}  // namespace ctxguard
