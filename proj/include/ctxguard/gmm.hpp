#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "ctxguard/common.hpp"
#include "ctxguard/pca.hpp"

namespace ctxguard {

// Full-covariance Gaussian mixture fit by EM. Scores are mixture
// log-likelihoods (larger = more in-distribution).
struct GmmModel {
    std::vector<double> weights;
    std::vector<VectorXd> means;
    std::vector<MatrixXd> covariances;
    PcaTransform preprocessing;
    std::vector<double> loglik_trace;  // mean training log-lik per EM iteration

    int k() const { return static_cast<int>(weights.size()); }
    int dim() const { return means.empty() ? 0 : static_cast<int>(means[0].size()); }

    // log N(z; mu, Sigma) via Cholesky
    static double log_gaussian(const VectorXd& z, const VectorXd& mu,
                               const Eigen::LLT<MatrixXd>& llt, double log_det) {
        static constexpr double kLog2Pi = 1.8378770664093454836;
        const VectorXd diff = z - mu;
        const VectorXd sol = llt.matrixL().solve(diff);
        return -0.5 * (double(z.size()) * kLog2Pi + log_det + sol.squaredNorm());
    }

    // Precomputes Cholesky factors so scoring is a cheap solve. Called by
    // fit/load; safe to call again after mutating covariances.
    void prepare() {
        llt_.resize(covariances.size());
        log_det_.assign(covariances.size(), 0.0);
        for (std::size_t j = 0; j < covariances.size(); ++j) {
            llt_[j].compute(covariances[j]);
            if (llt_[j].info() != Eigen::Success)
                throw NumericError("gmm: covariance not positive definite");
            for (int i = 0; i < covariances[j].rows(); ++i)
                log_det_[j] += 2.0 * std::log(llt_[j].matrixL()(i, i));
        }
    }

    // log-lik of an already-preprocessed point
    double score_reduced(const VectorXd& z) const {
        if (llt_.size() != weights.size())
            throw NumericError("gmm: model not prepared");
        double best = -std::numeric_limits<double>::infinity();
        std::vector<double> terms(weights.size());
        for (std::size_t j = 0; j < weights.size(); ++j) {
            terms[j] = std::log(weights[j]) +
                       log_gaussian(z, means[j], llt_[j], log_det_[j]);
            best = std::max(best, terms[j]);
        }
        double acc = 0.0;
        for (double t : terms) acc += std::exp(t - best);
        return best + std::log(acc);
    }

    double score(const VectorXd& x) const {
        return score_reduced(preprocessing.transform(x));
    }

  private:
    std::vector<Eigen::LLT<MatrixXd>> llt_;
    std::vector<double> log_det_;
};

namespace detail {

// Cached Cholesky factors for one EM pass.
struct GmmFactors {
    std::vector<Eigen::LLT<MatrixXd>> llt;
    std::vector<double> log_det;

    void compute(const std::vector<MatrixXd>& covs) {
        llt.resize(covs.size());
        log_det.assign(covs.size(), 0.0);
        for (std::size_t j = 0; j < covs.size(); ++j) {
            llt[j].compute(covs[j]);
            if (llt[j].info() != Eigen::Success)
                throw NumericError("gmm: covariance not positive definite");
            for (int i = 0; i < covs[j].rows(); ++i)
                log_det[j] += 2.0 * std::log(llt[j].matrixL()(i, i));
        }
    }
};

inline std::vector<int> kmeanspp_centers(const MatrixXd& Z, int K, Rng& rng) {
    const auto n = Z.rows();
    std::vector<int> centers;
    centers.push_back(static_cast<int>(rng.uniform_index(n)));
    VectorXd d2 = (Z.rowwise() - Z.row(centers[0])).rowwise().squaredNorm();
    while (static_cast<int>(centers.size()) < K) {
        const double total = d2.sum();
        int pick;
        if (total <= 0) {
            pick = static_cast<int>(rng.uniform_index(n));
        } else {
            double r = rng.uniform() * total;
            pick = static_cast<int>(n) - 1;
            for (int i = 0; i < n; ++i) {
                r -= d2(i);
                if (r <= 0) { pick = i; break; }
            }
        }
        centers.push_back(pick);
        VectorXd nd = (Z.rowwise() - Z.row(pick)).rowwise().squaredNorm();
        d2 = d2.cwiseMin(nd);
    }
    return centers;
}

}  // namespace detail

// EM to convergence: stop when relative mean log-lik improvement < 1e-6 or
// after 500 iterations. Data is assumed already in the model's feature space;
// attach preprocessing on the returned model for raw scoring.
inline GmmModel fit_gmm(const MatrixXd& Z, int K, std::uint64_t seed,
                        int max_iter = 500, double tol = 1e-6) {
    const auto n = Z.rows();
    const auto d = Z.cols();
    if (K < 1) throw NumericError("fit_gmm: K must be >= 1");
    if (n < K) throw NumericError("fit_gmm: fewer points than components");
    if (!Z.allFinite()) throw NumericError("fit_gmm: non-finite input");

    GmmModel m;
    m.preprocessing = PcaTransform::identity(static_cast<int>(d));
    m.weights.assign(K, 1.0 / K);
    m.means.resize(K);
    m.covariances.resize(K);

    auto ridge = [&](MatrixXd& cov) {
        double t = cov.trace();
        if (t <= 0) t = 1.0;
        cov += (1e-6 * t / double(d)) * MatrixXd::Identity(d, d);
    };

    // init: k-means++ centers, hard-assignment moments
    Rng rng(seed);
    const auto centers = detail::kmeanspp_centers(Z, K, rng);
    double global_trace = 1.0;
    {
        MatrixXd dist(n, K);
        for (int j = 0; j < K; ++j)
            dist.col(j) = (Z.rowwise() - Z.row(centers[j])).rowwise().squaredNorm();
        std::vector<int> assign(n);
        std::vector<int> count(K, 0);
        for (int i = 0; i < n; ++i) {
            int best = 0;
            dist.row(i).minCoeff(&best);
            assign[i] = best;
            ++count[best];
        }
        MatrixXd global_cov =
            (Z.rowwise() - Z.colwise().mean()).transpose() *
            (Z.rowwise() - Z.colwise().mean()) / double(n - 1);
        ridge(global_cov);
        global_trace = std::max(global_cov.trace(), 1e-300);
        for (int j = 0; j < K; ++j) {
            if (count[j] < 2) {
                m.means[j] = Z.row(centers[j]).transpose();
                m.covariances[j] = global_cov;
                m.weights[j] = 1.0 / double(n);
                continue;
            }
            VectorXd mu = VectorXd::Zero(d);
            for (int i = 0; i < n; ++i)
                if (assign[i] == j) mu += Z.row(i).transpose();
            mu /= double(count[j]);
            MatrixXd cov = MatrixXd::Zero(d, d);
            for (int i = 0; i < n; ++i) {
                if (assign[i] != j) continue;
                const VectorXd diff = Z.row(i).transpose() - mu;
                cov += diff * diff.transpose();
            }
            cov /= double(count[j]);
            ridge(cov);
            m.means[j] = mu;
            m.covariances[j] = cov;
            m.weights[j] = double(count[j]) / double(n);
        }
        double wsum = 0;
        for (double w : m.weights) wsum += w;
        for (double& w : m.weights) w /= wsum;
    }

    detail::GmmFactors fac;
    MatrixXd log_resp(n, K);
    double prev_ll = -std::numeric_limits<double>::infinity();

    for (int iter = 0; iter < max_iter; ++iter) {
        fac.compute(m.covariances);

        // E-step
        double ll = 0.0;
        for (int i = 0; i < n; ++i) {
            const VectorXd z = Z.row(i).transpose();
            double best = -std::numeric_limits<double>::infinity();
            for (int j = 0; j < K; ++j) {
                log_resp(i, j) = std::log(m.weights[j]) +
                                 GmmModel::log_gaussian(z, m.means[j], fac.llt[j],
                                                        fac.log_det[j]);
                best = std::max(best, log_resp(i, j));
            }
            double acc = 0.0;
            for (int j = 0; j < K; ++j) acc += std::exp(log_resp(i, j) - best);
            const double norm = best + std::log(acc);
            for (int j = 0; j < K; ++j) log_resp(i, j) -= norm;
            ll += norm;
        }
        ll /= double(n);
        m.loglik_trace.push_back(ll);

        // M-step; keep the pre-step parameters so a degenerate step can be
        // rejected below
        const auto prev_weights = m.weights;
        const auto prev_means = m.means;
        const auto prev_covs = m.covariances;
        for (int j = 0; j < K; ++j) {
            VectorXd resp(n);
            for (int i = 0; i < n; ++i) resp(i) = std::exp(log_resp(i, j));
            const double nj = resp.sum();
            if (nj < 1e-12) {
                // vanishing component: freeze its parameters and let its
                // weight decay; reseeding would break EM monotonicity
                m.weights[j] = nj / double(n);
                continue;
            }
            VectorXd mu = Z.transpose() * resp / nj;
            MatrixXd cov = MatrixXd::Zero(d, d);
            for (int i = 0; i < n; ++i) {
                const VectorXd diff = Z.row(i).transpose() - mu;
                cov += resp(i) * (diff * diff.transpose());
            }
            cov /= nj;
            ridge(cov);
            m.means[j] = mu;
            m.covariances[j] = cov;
            m.weights[j] = nj / double(n);
        }
        double wsum = 0;
        for (double w : m.weights) wsum += w;
        for (double& w : m.weights) w /= wsum;

        // degeneracy safeguard: a component collapsing onto a single point
        // drives its covariance toward zero, where finite precision (and the
        // eventual trace underflow) would break the likelihood ascent. Reject
        // the step and stop at the last healthy iterate.
        bool collapsed = false;
        for (const auto& cov : m.covariances)
            if (cov.trace() < 1e-9 * global_trace) collapsed = true;
        if (collapsed) {
            m.weights = prev_weights;
            m.means = prev_means;
            m.covariances = prev_covs;
            break;
        }

        if (iter > 0) {
            const double rel = (ll - prev_ll) / (std::abs(prev_ll) + 1e-12);
            if (rel < tol && ll >= prev_ll - 1e-12) break;
        }
        prev_ll = ll;
    }
    m.prepare();
    return m;
}

}  // namespace ctxguard
