#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "truncgauss/errors.hpp"
#include "truncgauss/hermite.hpp"
#include "truncgauss/truncation.hpp"

namespace truncgauss {

// Ground truth for the weighted characteristic function
//   psi(x) = 1_S(x) N(mu*, Sigma*; x) / (alpha* N_0(x)).
// Test and diagnostics support; the estimator itself never needs it.
struct PsiTarget {
    GaussianParams true_params;
    SetOracle set;
    double alpha_star;

    PsiTarget(GaussianParams params, SetOracle s, double alpha)
        : true_params(std::move(params)), set(std::move(s)), alpha_star(alpha) {
        if (alpha_star <= 0.0 || alpha_star > 1.0)
            throw validation_error("PsiTarget: alpha_star must lie in (0, 1]");
    }

    double value(const Eigen::VectorXd& x) const {
        if (!set.contains(x)) return 0.0;
        const GaussianParams standard = GaussianParams::standard(true_params.dim());
        return std::exp(true_params.log_density(x) - standard.log_density(x) -
                        std::log(alpha_star));
    }
};

// Hermite coefficients of psi from truncated samples: c_V is the sample mean
// of H_V over the batch. Accumulated in fixed-size chunks with a second-level
// sum, so the reduction order (and hence the result) is independent of how
// the batch would be split across workers.
inline HermiteExpansion estimate_coefficients(const Batch& samples, int k) {
    if (samples.rows() < 1) throw validation_error("estimate_coefficients: empty batch");
    if (k < 0) throw validation_error("estimate_coefficients: k must be >= 0");
    const int d = static_cast<int>(samples.cols());
    HermiteExpansion expansion(d, k);
    const auto& indices = expansion.indices();
    const std::size_t m = indices.size();

    constexpr Eigen::Index kChunk = 4096;
    Eigen::VectorXd total = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
    Eigen::VectorXd chunk_sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
    std::vector<double> table(static_cast<std::size_t>(d) * (k + 1));
    for (Eigen::Index i = 0; i < samples.rows(); ++i) {
        for (int c = 0; c < d; ++c)
            hermite_1d_all(k, samples(i, c), table.data() + static_cast<std::size_t>(c) * (k + 1));
        for (std::size_t j = 0; j < m; ++j) {
            double prod = 1.0;
            const MultiIndex& V = indices[j];
            for (int c = 0; c < d; ++c) prod *= table[static_cast<std::size_t>(c) * (k + 1) + V[c]];
            chunk_sum[static_cast<Eigen::Index>(j)] += prod;
        }
        if ((i + 1) % kChunk == 0) {
            total += chunk_sum;
            chunk_sum.setZero();
        }
    }
    total += chunk_sum;
    const Eigen::VectorXd coeffs = total / static_cast<double>(samples.rows());
    return HermiteExpansion(d, k, coeffs);
}

// psi_k(x) = max(0, sum c_V H_V(x)).
inline double eval_psi_k(const HermiteExpansion& expansion, const Eigen::VectorXd& x) {
    return std::max(0.0, expansion.evaluate(x));
}

// Monte Carlo estimate of E_{x ~ N_0}[(psi_k(x) - psi(x))^2].
inline MonteCarloEstimate psi_l2_error(const HermiteExpansion& expansion, const PsiTarget& target,
                                       Rng& rng, Eigen::Index n, bool clamp = true) {
    const GaussianParams standard = GaussianParams::standard(expansion.dim());
    double sum = 0.0, sum_sq = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::VectorXd x = standard.sample_one(rng);
        const double approx = clamp ? eval_psi_k(expansion, x) : expansion.evaluate(x);
        const double diff = approx - target.value(x);
        sum += diff * diff;
        sum_sq += diff * diff * diff * diff;
    }
    const double mean = sum / static_cast<double>(n);
    const double var = std::max(0.0, sum_sq / static_cast<double>(n) - mean * mean);
    return {mean, std::sqrt(var / static_cast<double>(n))};
}

// Empirical variance of the coefficient estimate c_V across independent
// trials of size n.
inline double coefficient_variance_probe(const PsiTarget& target, const MultiIndex& V, Rng& rng,
                                         Eigen::Index n, int trials) {
    if (trials < 30) throw validation_error("coefficient_variance_probe: need >= 30 trials");
    const TruncatedGaussian tg(target.true_params, target.set, target.alpha_star);
    std::vector<double> estimates(static_cast<std::size_t>(trials));
    for (int t = 0; t < trials; ++t) {
        const TruncatedBatch batch = truncated_sample(tg, rng, n, 100000);
        double sum = 0.0;
        for (Eigen::Index i = 0; i < n; ++i)
            sum += hermite_multi(V, batch.points.row(i).transpose());
        estimates[static_cast<std::size_t>(t)] = sum / static_cast<double>(n);
    }
    double mean = 0.0;
    for (double e : estimates) mean += e;
    mean /= trials;
    double var = 0.0;
    for (double e : estimates) var += (e - mean) * (e - mean);
    return var / (trials - 1);
}

// Suggested expansion degree from the theoretical schedule
// k = poly(1/alpha) Gamma^2 / eps^4 with every polynomial constant set to 1.
inline int suggested_degree(double alpha, double gsa, double eps) {
    if (alpha <= 0.0 || alpha > 1.0) throw validation_error("suggested_degree: bad alpha");
    if (eps <= 0.0) throw validation_error("suggested_degree: bad eps");
    return static_cast<int>(std::ceil((1.0 / alpha) * gsa * gsa / (eps * eps * eps * eps)));
}

}  // namespace truncgauss
