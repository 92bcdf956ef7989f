#pragma once

#include <cmath>
#include <numbers>
#include <optional>

#include <Eigen/Dense>
#include <json.hpp>

#include "truncgauss/errors.hpp"
#include "truncgauss/rng.hpp"

namespace truncgauss {

// Sample batches are row-per-point matrices (n x d).
using Batch = Eigen::MatrixXd;

constexpr double kLogTwoPi = 1.8378770664093454836;

// Log-space arguments above this are clamped before exponentiation wherever
// density ratios are formed; clamp events surface as diagnostics.
constexpr double kLogWeightClamp = 700.0;

// Mean and full-rank symmetric covariance of a d-dimensional Gaussian.
// Validates symmetry and positive definiteness on construction and caches
// the Cholesky factor for density evaluation and sampling.
class GaussianParams {
public:
    GaussianParams(Eigen::VectorXd mean, Eigen::MatrixXd covariance)
        : mean_(std::move(mean)), cov_(std::move(covariance)) {
        const Eigen::Index d = mean_.size();
        if (cov_.rows() != d || cov_.cols() != d)
            throw validation_error("GaussianParams: covariance shape does not match mean");
        if (!mean_.allFinite() || !cov_.allFinite())
            throw validation_error("GaussianParams: non-finite parameter entries");
        const double scale = std::max(1.0, cov_.cwiseAbs().maxCoeff());
        if (((cov_ - cov_.transpose()).cwiseAbs().maxCoeff()) > 1e-12 * scale)
            throw validation_error("GaussianParams: covariance is not symmetric");
        cov_ = 0.5 * (cov_ + cov_.transpose());
        llt_.compute(cov_);
        if (llt_.info() != Eigen::Success)
            throw numerical_error("GaussianParams: covariance is not positive definite");
        log_det_ = 2.0 * llt_.matrixL().toDenseMatrix().diagonal().array().log().sum();
    }

    static GaussianParams standard(int d) {
        return GaussianParams(Eigen::VectorXd::Zero(d), Eigen::MatrixXd::Identity(d, d));
    }

    int dim() const { return static_cast<int>(mean_.size()); }
    const Eigen::VectorXd& mean() const { return mean_; }
    const Eigen::MatrixXd& covariance() const { return cov_; }
    double log_det_covariance() const { return log_det_; }

    double log_density(const Eigen::VectorXd& x) const {
        if (x.size() != mean_.size())
            throw dimension_mismatch_error("log_density: point dimension mismatch");
        if (!x.allFinite()) throw validation_error("log_density: non-finite input");
        const Eigen::VectorXd centered = x - mean_;
        const Eigen::VectorXd half = llt_.matrixL().solve(centered);
        return -0.5 * (dim() * kLogTwoPi + log_det_ + half.squaredNorm());
    }

    // n i.i.d. draws, one row per point. Chunked so a fixed seed yields the
    // same batch independent of how callers split the work.
    Batch sample(Rng& rng, Eigen::Index n) const {
        if (n < 1) throw validation_error("sample: n must be >= 1");
        const Eigen::Index d = mean_.size();
        Batch out(n, d);
        const Eigen::MatrixXd L = llt_.matrixL();
        Eigen::VectorXd z(d);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < d; ++j) z[j] = rng.normal();
            out.row(i) = (mean_ + L * z).transpose();
        }
        return out;
    }

    Eigen::VectorXd sample_one(Rng& rng) const {
        const Eigen::Index d = mean_.size();
        Eigen::VectorXd z(d);
        for (Eigen::Index j = 0; j < d; ++j) z[j] = rng.normal();
        return mean_ + llt_.matrixL() * z;
    }

    nlohmann::json to_json() const {
        nlohmann::json cov = nlohmann::json::array();
        for (Eigen::Index i = 0; i < cov_.rows(); ++i) {
            nlohmann::json row = nlohmann::json::array();
            for (Eigen::Index j = 0; j < cov_.cols(); ++j) row.push_back(cov_(i, j));
            cov.push_back(row);
        }
        nlohmann::json mean = nlohmann::json::array();
        for (Eigen::Index i = 0; i < mean_.size(); ++i) mean.push_back(mean_[i]);
        return {{"mean", mean}, {"covariance", cov}};
    }

    static GaussianParams from_json(const nlohmann::json& j) {
        const auto mean_vals = j.at("mean").get<std::vector<double>>();
        Eigen::VectorXd mean = Eigen::Map<const Eigen::VectorXd>(mean_vals.data(),
                                                                 static_cast<Eigen::Index>(mean_vals.size()));
        const auto& cov_json = j.at("covariance");
        const Eigen::Index d = mean.size();
        Eigen::MatrixXd cov(d, d);
        for (Eigen::Index i = 0; i < d; ++i) {
            const auto row = cov_json.at(static_cast<std::size_t>(i)).get<std::vector<double>>();
            if (static_cast<Eigen::Index>(row.size()) != d)
                throw validation_error("GaussianParams::from_json: ragged covariance");
            for (Eigen::Index k = 0; k < d; ++k) cov(i, k) = row[static_cast<std::size_t>(k)];
        }
        return GaussianParams(std::move(mean), std::move(cov));
    }

private:
    Eigen::VectorXd mean_;
    Eigen::MatrixXd cov_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
    double log_det_ = 0.0;
};

// Empirical mean and covariance (n-1 normalization) of a batch.
inline std::pair<Eigen::VectorXd, Eigen::MatrixXd> conditional_moments(const Batch& samples) {
    const Eigen::Index n = samples.rows();
    const Eigen::Index d = samples.cols();
    if (n < d + 1)
        throw insufficient_data_error("conditional_moments: need at least d+1 samples");
    const Eigen::VectorXd mean = samples.colwise().mean();
    const Batch centered = samples.rowwise() - mean.transpose();
    const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n - 1);
    return {mean, cov};
}

// Affine map y = A x + b together with its inverse.
struct AffineMap {
    Eigen::MatrixXd A;
    Eigen::VectorXd b;

    Eigen::VectorXd apply(const Eigen::VectorXd& x) const { return A * x + b; }

    Batch apply_batch(const Batch& samples) const {
        Batch out = samples * A.transpose();
        out.rowwise() += b.transpose();
        return out;
    }
};

struct WhiteningMaps {
    AffineMap forward;   // x -> Sigma^{-1/2} (x - mu)
    AffineMap inverse;   // y -> Sigma^{1/2} y + mu
};

// Whitening by the symmetric inverse square root of sigma_s, computed by
// eigendecomposition so the map stays symmetric.
inline WhiteningMaps whitening_transform(const Eigen::VectorXd& mu_s,
                                         const Eigen::MatrixXd& sigma_s) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma_s);
    if (es.info() != Eigen::Success)
        throw numerical_error("whitening_transform: eigendecomposition failed");
    if (es.eigenvalues().minCoeff() <= 0.0)
        throw numerical_error("whitening_transform: covariance is not positive definite");
    const Eigen::VectorXd inv_sqrt = es.eigenvalues().array().rsqrt();
    const Eigen::VectorXd sqrt = es.eigenvalues().array().sqrt();
    const Eigen::MatrixXd root_inv =
        es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().transpose();
    const Eigen::MatrixXd root =
        es.eigenvectors() * sqrt.asDiagonal() * es.eigenvectors().transpose();
    return {{root_inv, -(root_inv * mu_s)}, {root, mu_s}};
}

// Parameter-distance upper bound on TV between the untruncated Gaussians:
// (1/2) |Sigma1^{-1/2}(mu1 - mu2)|_2 + sqrt(2) |I - Sigma1^{-1/2} Sigma2 Sigma1^{-1/2}|_F.
inline double tv_parameter_bound(const GaussianParams& p1, const GaussianParams& p2) {
    if (p1.dim() != p2.dim())
        throw dimension_mismatch_error("tv_parameter_bound: dimension mismatch");
    const WhiteningMaps maps = whitening_transform(Eigen::VectorXd::Zero(p1.dim()), p1.covariance());
    const Eigen::MatrixXd& root_inv = maps.forward.A;
    const double mean_term = 0.5 * (root_inv * (p1.mean() - p2.mean())).norm();
    const Eigen::MatrixXd m =
        Eigen::MatrixXd::Identity(p1.dim(), p1.dim()) - root_inv * p2.covariance() * root_inv;
    return mean_term + std::numbers::sqrt2 * m.norm();
}

// Radii of a near-isotropic position certificate.
struct IsotropicCert {
    double a;
    double b;

    IsotropicCert(double a_, double b_) : a(a_), b(b_) {
        if (a < 0.0) throw validation_error("IsotropicCert: a must be >= 0");
        if (b < 0.0 || b >= 1.0) throw validation_error("IsotropicCert: b must lie in [0, 1)");
    }
};

// True iff |mu|^2 <= a, |Sigma - I|_F^2 <= a and every eigenvalue of Sigma
// lies in [1-b, 1/(1-b)].
inline bool isotropic_check(const GaussianParams& params, const IsotropicCert& cert) {
    if (params.mean().squaredNorm() > cert.a) return false;
    const Eigen::Index d = params.dim();
    const Eigen::MatrixXd deviation = params.covariance() - Eigen::MatrixXd::Identity(d, d);
    if (deviation.squaredNorm() > cert.a) return false;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(params.covariance());
    const double lo = 1.0 - cert.b;
    const double hi = 1.0 / (1.0 - cert.b);
    return es.eigenvalues().minCoeff() >= lo && es.eigenvalues().maxCoeff() <= hi;
}

}  // namespace truncgauss
