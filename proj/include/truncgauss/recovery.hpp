#pragma once

#include <cmath>

#include <Eigen/Dense>

#include "truncgauss/gaussian.hpp"
#include "truncgauss/hermite.hpp"
#include "truncgauss/psi.hpp"
#include "truncgauss/truncation.hpp"

namespace truncgauss {

// Almost-indicator value N_0(x)/N_hat(x) * psi_value, overflow-guarded.
inline double weighted_indicator_value(const GaussianParams& est_params, double psi_value,
                                       const Eigen::VectorXd& x) {
    if (psi_value <= 0.0) return 0.0;
    const GaussianParams standard = GaussianParams::standard(est_params.dim());
    double log_ratio = standard.log_density(x) - est_params.log_density(x);
    if (log_ratio > kLogWeightClamp) log_ratio = kLogWeightClamp;
    return std::exp(log_ratio) * psi_value;
}

// Recovered truncation set: the raw stage-1 expansion psi_k together with
// the recovered parameters, classified by thresholding the weighted
// indicator at 1/2. The expansion is never rescaled after estimation.
class RecoveredSet {
public:
    RecoveredSet(HermiteExpansion psi_k, GaussianParams est_params)
        : psi_k_(std::move(psi_k)), est_params_(std::move(est_params)) {
        if (psi_k_.dim() != est_params_.dim())
            throw dimension_mismatch_error("RecoveredSet: expansion/params dimension mismatch");
    }

    const HermiteExpansion& psi_k() const { return psi_k_; }
    const GaussianParams& est_params() const { return est_params_; }

    double weighted_indicator(const Eigen::VectorXd& x) const {
        return weighted_indicator_value(est_params_, eval_psi_k(psi_k_, x), x);
    }

    // Strict threshold: the boundary value exactly 1/2 classifies as outside.
    bool classify(const Eigen::VectorXd& x) const { return weighted_indicator(x) > 0.5; }

    // Same predicate interface as SetOracle so recovered sets can feed
    // mass_estimate and downstream experiments.
    bool contains(const Eigen::VectorXd& x) const { return classify(x); }

    nlohmann::json to_json() const {
        return {{"psi_k", psi_k_.to_json()}, {"est_params", est_params_.to_json()}};
    }

    static RecoveredSet from_json(const nlohmann::json& j) {
        return RecoveredSet(HermiteExpansion::from_json(j.at("psi_k")),
                            GaussianParams::from_json(j.at("est_params")));
    }

private:
    HermiteExpansion psi_k_;
    GaussianParams est_params_;
};

// Monte Carlo disagreement mass P_{x ~ N(mu*, Sigma*)}[classify(x) != 1_S(x)].
// `to_classifier_coords` maps a point from the truth's coordinates into the
// coordinates the recovered set classifies in (identity when they agree).
template <class Classifier>
MonteCarloEstimate symdiff_mass(const Classifier& recovered, const SetOracle& truth,
                                const GaussianParams& true_params, Rng& rng, Eigen::Index n,
                                const AffineMap* to_classifier_coords = nullptr) {
    if (n < 1) throw validation_error("symdiff_mass: n must be >= 1");
    Eigen::Index disagree = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::VectorXd x = true_params.sample_one(rng);
        const Eigen::VectorXd mapped = to_classifier_coords ? to_classifier_coords->apply(x) : x;
        if (recovered.contains(mapped) != truth.contains(x)) ++disagree;
    }
    const double p = static_cast<double>(disagree) / static_cast<double>(n);
    return {p, std::sqrt(p * (1.0 - p) / static_cast<double>(n))};
}

}  // namespace truncgauss
