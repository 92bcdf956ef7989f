#pragma once

#include <cmath>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "truncgauss/errors.hpp"
#include "truncgauss/gaussian.hpp"
#include "truncgauss/rng.hpp"
#include "truncgauss/sets.hpp"

namespace truncgauss {

// Gaussian conditioned on a truncation set. alpha_hat, when present, is an
// estimate of the set mass N(mu, Sigma; S).
struct TruncatedGaussian {
    GaussianParams params;
    SetOracle set;
    std::optional<double> alpha_hat;

    TruncatedGaussian(GaussianParams p, SetOracle s, std::optional<double> alpha = std::nullopt)
        : params(std::move(p)), set(std::move(s)), alpha_hat(alpha) {
        if (alpha_hat && (*alpha_hat <= 0.0 || *alpha_hat > 1.0))
            throw validation_error("TruncatedGaussian: alpha_hat must lie in (0, 1]");
        if (set.dim() != 0 && set.dim() != params.dim())
            throw dimension_mismatch_error("TruncatedGaussian: set/params dimension mismatch");
    }

    // Log of the truncated density; requires alpha_hat. -inf outside S.
    double log_density(const Eigen::VectorXd& x) const {
        if (!alpha_hat) throw validation_error("TruncatedGaussian::log_density: alpha_hat unknown");
        if (!set.contains(x)) return -std::numeric_limits<double>::infinity();
        return params.log_density(x) - std::log(*alpha_hat);
    }
};

struct TruncatedBatch {
    Batch points;
    double acceptance_rate = 0.0;
};

inline Eigen::VectorXd truncated_sample_one(const GaussianParams& params, const SetOracle& set,
                                            Rng& rng, Eigen::Index max_attempts,
                                            Eigen::Index* attempts_out = nullptr) {
    for (Eigen::Index attempt = 1; attempt <= max_attempts; ++attempt) {
        Eigen::VectorXd x = params.sample_one(rng);
        if (set.contains(x)) {
            if (attempts_out) *attempts_out = attempt;
            return x;
        }
    }
    throw low_mass_error("truncated_sample: attempt budget exhausted", 0.0);
}

// n i.i.d. draws from N(mu, Sigma, S) by rejection against the set oracle.
// The observed acceptance rate doubles as an estimate of the set mass.
inline TruncatedBatch truncated_sample(const TruncatedGaussian& tg, Rng& rng, Eigen::Index n,
                                       Eigen::Index max_attempts_per_sample = 1000) {
    if (n < 1) throw validation_error("truncated_sample: n must be >= 1");
    if (max_attempts_per_sample < 1)
        throw validation_error("truncated_sample: max_attempts_per_sample must be >= 1");
    Batch out(n, tg.params.dim());
    Eigen::Index total_attempts = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::Index attempts = 0;
        bool found = false;
        while (attempts < max_attempts_per_sample) {
            Eigen::VectorXd x = tg.params.sample_one(rng);
            ++attempts;
            if (tg.set.contains(x)) {
                out.row(i) = x.transpose();
                found = true;
                break;
            }
        }
        total_attempts += attempts;
        if (!found) {
            const double running = static_cast<double>(i) / static_cast<double>(total_attempts);
            throw low_mass_error("truncated_sample: no accepted point within " +
                                     std::to_string(max_attempts_per_sample) + " attempts",
                                 running);
        }
    }
    return {std::move(out), static_cast<double>(n) / static_cast<double>(total_attempts)};
}

struct MonteCarloEstimate {
    double estimate = 0.0;
    double std_error = 0.0;
};

// Monte Carlo estimate of N(mu, Sigma; S).
inline MonteCarloEstimate mass_estimate(const GaussianParams& params, const SetOracle& set,
                                        Rng& rng, Eigen::Index n) {
    if (n < 1) throw validation_error("mass_estimate: n must be >= 1");
    Eigen::Index inside = 0;
    for (Eigen::Index i = 0; i < n; ++i)
        if (set.contains(params.sample_one(rng))) ++inside;
    const double p = static_cast<double>(inside) / static_cast<double>(n);
    return {p, std::sqrt(p * (1.0 - p) / static_cast<double>(n))};
}

// Monte Carlo TV distance between two truncated Gaussians, sampling from the
// equal-weight mixture m = (f1 + f2)/2 and averaging |f1 - f2| / (f1 + f2).
// Missing alpha_hat values are estimated with n mass draws first.
inline MonteCarloEstimate tv_monte_carlo(TruncatedGaussian tg1, TruncatedGaussian tg2, Rng& rng,
                                         Eigen::Index n) {
    if (!tg1.alpha_hat) tg1.alpha_hat = std::max(mass_estimate(tg1.params, tg1.set, rng, n).estimate,
                                                 1.0 / static_cast<double>(n));
    if (!tg2.alpha_hat) tg2.alpha_hat = std::max(mass_estimate(tg2.params, tg2.set, rng, n).estimate,
                                                 1.0 / static_cast<double>(n));
    double sum = 0.0, sum_sq = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const TruncatedGaussian& component = (rng.uniform() < 0.5) ? tg1 : tg2;
        const Eigen::VectorXd x = truncated_sample_one(component.params, component.set, rng, 100000);
        const double l1 = tg1.log_density(x);
        const double l2 = tg2.log_density(x);
        // |f1 - f2| / (f1 + f2) computed stably from log densities.
        double ratio;
        if (std::isinf(l1) || std::isinf(l2)) {
            ratio = 1.0;
        } else {
            const double m = std::max(l1, l2);
            const double a = std::exp(l1 - m);
            const double b = std::exp(l2 - m);
            ratio = std::abs(a - b) / (a + b);
        }
        sum += ratio;
        sum_sq += ratio * ratio;
    }
    const double mean = sum / static_cast<double>(n);
    const double var = std::max(0.0, sum_sq / static_cast<double>(n) - mean * mean);
    return {mean, std::sqrt(var / static_cast<double>(n))};
}

}  // namespace truncgauss
