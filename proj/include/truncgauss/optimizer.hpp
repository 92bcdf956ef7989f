#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "truncgauss/errors.hpp"
#include "truncgauss/gaussian.hpp"
#include "truncgauss/hermite.hpp"
#include "truncgauss/psi.hpp"
#include "truncgauss/rng.hpp"

namespace truncgauss {

// SGD iterate in the convex reparameterization (u, B) = (Sigma^{-1} mu, Sigma^{-1}).
struct ReparamPoint {
    Eigen::VectorXd u;
    Eigen::MatrixXd B;

    int dim() const { return static_cast<int>(u.size()); }

    static ReparamPoint from_moments(const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma) {
        const Eigen::MatrixXd precision = sigma.llt().solve(Eigen::MatrixXd::Identity(sigma.rows(), sigma.cols()));
        return {precision * mu, 0.5 * (precision + precision.transpose())};
    }

    // Implied (mu, Sigma) = (B^{-1} u, B^{-1}); requires B positive definite.
    GaussianParams to_gaussian() const {
        Eigen::LLT<Eigen::MatrixXd> llt(B);
        if (llt.info() != Eigen::Success)
            throw numerical_error("ReparamPoint: B is not positive definite");
        const Eigen::MatrixXd sigma = llt.solve(Eigen::MatrixXd::Identity(B.rows(), B.cols()));
        return GaussianParams(sigma * u, 0.5 * (sigma + sigma.transpose()));
    }

    // Stacked vector (B^flat; u) of length d^2 + d.
    Eigen::VectorXd stacked() const {
        const Eigen::Index d = u.size();
        Eigen::VectorXd w(d * d + d);
        w.head(d * d) = Eigen::Map<const Eigen::VectorXd>(B.data(), d * d);
        w.tail(d) = u;
        return w;
    }

    static ReparamPoint from_stacked(const Eigen::VectorXd& w, Eigen::Index d) {
        ReparamPoint p;
        p.B = Eigen::Map<const Eigen::MatrixXd>(w.data(), d, d);
        p.B = 0.5 * (p.B + p.B.transpose()).eval();
        p.u = w.tail(d);
        return p;
    }
};

// Near-isotropic projection region: (u, B) belongs iff (B^{-1} u, B^{-1})
// passes isotropic_check with radii (a, b).
struct ProjectionSet {
    double a;
    double b;

    ProjectionSet(double a_, double b_) : a(a_), b(b_) {
        if (a < 0.0 || b < 0.0 || b >= 1.0) throw validation_error("ProjectionSet: bad radii");
    }

    // a = max(a_min, c log(1/alpha)); the floor keeps the region non-degenerate
    // when the observed acceptance rate is 1 (untruncated data).
    static ProjectionSet from_alpha(double alpha, double c = 4.0, double b = 1.0 / 16.0,
                                    double a_min = 1.0) {
        if (alpha <= 0.0 || alpha > 1.0) throw validation_error("ProjectionSet: bad alpha");
        return ProjectionSet(std::max(a_min, c * std::log(1.0 / alpha)), b);
    }

    bool member(const ReparamPoint& p) const {
        Eigen::LLT<Eigen::MatrixXd> llt(p.B);
        if (llt.info() != Eigen::Success) return false;
        return isotropic_check(p.to_gaussian(), IsotropicCert(a, b));
    }
};

struct SgdConfig {
    Eigen::Index T = 10000;
    double lambda = 0.0;  // 0 selects the default 0.1 * alpha_hat^3
    int K = 1;
    std::uint64_t seed = 0;

    void validate() const {
        if (T < 1) throw validation_error("SgdConfig: T must be >= 1");
        if (K < 1 || K % 2 == 0) throw validation_error("SgdConfig: K must be odd and >= 1");
        if (lambda < 0.0) throw validation_error("SgdConfig: lambda must be > 0 (or 0 for default)");
    }

    double effective_lambda(double alpha_hat) const {
        return lambda > 0.0 ? lambda : 0.1 * alpha_hat * alpha_hat * alpha_hat;
    }
};

// h(u, B; x) = x^T B x / 2 - tr((B - I)(Sigma_S + mu_S mu_S^T)) / 2
//            - u^T (x - mu_S) + (d/2) log 2 pi.
inline double h_value(const ReparamPoint& p, const Eigen::VectorXd& x, const Eigen::VectorXd& mu_s,
                      const Eigen::MatrixXd& sigma_s) {
    const Eigen::Index d = x.size();
    const Eigen::MatrixXd shifted = p.B - Eigen::MatrixXd::Identity(d, d);
    const Eigen::MatrixXd second_moment = sigma_s + mu_s * mu_s.transpose();
    return 0.5 * x.dot(p.B * x) - 0.5 * (shifted * second_moment).trace() - p.u.dot(x - mu_s) +
           0.5 * static_cast<double>(d) * kLogTwoPi;
}

// log(e^h N_0(x)): the (d/2) log 2 pi terms cancel, leaving
//   x^T (B - I) x / 2 - tr((B - I)(Sigma_S + mu_S mu_S^T)) / 2 - u^T (x - mu_S).
inline double log_weight(const ReparamPoint& p, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& mu_s, const Eigen::MatrixXd& sigma_s) {
    const Eigen::Index d = x.size();
    const Eigen::MatrixXd shifted = p.B - Eigen::MatrixXd::Identity(d, d);
    const Eigen::MatrixXd second_moment = sigma_s + mu_s * mu_s.transpose();
    return 0.5 * x.dot(shifted * x) - 0.5 * (shifted * second_moment).trace() - p.u.dot(x - mu_s);
}

// Sample mean of e^{h + log N_0} psi_k over the batch; log arguments above
// kLogWeightClamp are clamped and reported through clamp_count.
inline double objective_estimate(const ReparamPoint& p, const Batch& samples,
                                 const HermiteExpansion& psi_k, const Eigen::VectorXd& mu_s,
                                 const Eigen::MatrixXd& sigma_s, Eigen::Index* clamp_count = nullptr) {
    if (samples.rows() < 1) throw validation_error("objective_estimate: empty batch");
    Eigen::Index clamped = 0;
    double sum = 0.0;
    for (Eigen::Index i = 0; i < samples.rows(); ++i) {
        const Eigen::VectorXd x = samples.row(i).transpose();
        double lw = log_weight(p, x, mu_s, sigma_s);
        if (lw > kLogWeightClamp) {
            lw = kLogWeightClamp;
            ++clamped;
        }
        sum += std::exp(lw) * eval_psi_k(psi_k, x);
    }
    if (clamp_count) *clamp_count = clamped;
    if (clamped == samples.rows())
        throw numerical_error("objective_estimate: every term overflowed the log-weight clamp");
    return sum / static_cast<double>(samples.rows());
}

// Single-sample stochastic gradient
//   v = (1/2 (x x^T - Sigma_S - mu_S mu_S^T)^flat ; mu_S - x) e^h N_0(x) psi_k(x),
// stacked as (B-block; u-block).
inline Eigen::VectorXd gradient_sample(const ReparamPoint& p, const Eigen::VectorXd& x,
                                       const HermiteExpansion& psi_k, const Eigen::VectorXd& mu_s,
                                       const Eigen::MatrixXd& sigma_s,
                                       bool* clamped_out = nullptr) {
    const Eigen::Index d = x.size();
    double lw = log_weight(p, x, mu_s, sigma_s);
    bool clamped = false;
    if (lw > kLogWeightClamp) {
        lw = kLogWeightClamp;
        clamped = true;
    }
    if (clamped_out) *clamped_out = clamped;
    const double weight = std::exp(lw) * eval_psi_k(psi_k, x);
    Eigen::VectorXd v(d * d + d);
    const Eigen::MatrixXd b_block =
        0.5 * (x * x.transpose() - sigma_s - mu_s * mu_s.transpose()) * weight;
    v.head(d * d) = Eigen::Map<const Eigen::VectorXd>(b_block.data(), d * d);
    v.tail(d) = (mu_s - x) * weight;
    return v;
}

// Projection onto D. Members are returned unchanged (exact idempotence);
// otherwise: map to Sigma-space, clip eigenvalues into [1-b, 1/(1-b)],
// shrink toward I until |Sigma - I|_F^2 <= a, rescale mu onto the a-ball,
// and map back. Eigenvalue clipping works on B's spectrum directly, which
// equals clipping Sigma's spectrum (the band is closed under reciprocals)
// and stays defined when a raw SGD step makes B indefinite.
inline ReparamPoint project_to_D(const ReparamPoint& p, const ProjectionSet& dset) {
    if (dset.member(p)) return p;
    const Eigen::Index d = p.u.size();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(p.B);
    if (es.info() != Eigen::Success) throw numerical_error("project_to_D: eigendecomposition failed");
    if (es.eigenvalues().cwiseAbs().minCoeff() < 1e-300)
        throw numerical_error("project_to_D: B is singular");
    // Corrections aim a hair inside the region so the exact membership test
    // still passes after the Sigma -> B -> Sigma round trip.
    constexpr double kInterior = 1.0 - 1e-9;
    const double lo = dset.b > 0.0 ? (1.0 - dset.b) / kInterior : 1.0;
    const double hi = dset.b > 0.0 ? (1.0 / (1.0 - dset.b)) * kInterior : 1.0;
    // mu = B^{-1} u from the raw spectrum; Sigma starts as the eigen-clipped
    // inverse of B (clipping B's spectrum into the band equals clipping
    // Sigma's, the band being closed under reciprocals).
    const Eigen::VectorXd lambda = es.eigenvalues().cwiseMax(lo).cwiseMin(hi);
    Eigen::MatrixXd sigma =
        es.eigenvectors() * lambda.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
    Eigen::VectorXd mu =
        es.eigenvectors() *
        (es.eigenvalues().cwiseInverse().asDiagonal() * (es.eigenvectors().transpose() * p.u));
    const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(d, d);
    for (int round = 0; round < 10; ++round) {
        bool ok = true;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> step(sigma);
        Eigen::VectorXd ev = step.eigenvalues();
        if (ev.minCoeff() < lo || ev.maxCoeff() > hi) {
            ev = ev.cwiseMax(lo).cwiseMin(hi);
            sigma = step.eigenvectors() * ev.asDiagonal() * step.eigenvectors().transpose();
            ok = false;
        }
        const double frob_sq = (sigma - identity).squaredNorm();
        if (frob_sq > dset.a) {
            const double scale = kInterior * std::sqrt(dset.a / frob_sq);
            sigma = identity + scale * (sigma - identity);
            ok = false;
        }
        if (ok) break;
    }
    if (mu.squaredNorm() > dset.a) mu *= kInterior * std::sqrt(dset.a / mu.squaredNorm());
    sigma = 0.5 * (sigma + sigma.transpose()).eval();
    const Eigen::MatrixXd precision =
        sigma.llt().solve(Eigen::MatrixXd::Identity(d, d));
    ReparamPoint out;
    out.B = 0.5 * (precision + precision.transpose());
    out.u = out.B * mu;
    return out;
}

struct TracePoint {
    Eigen::Index iteration = 0;
    double objective = 0.0;
    Eigen::Index clamp_count = 0;
};

struct SgdRunResult {
    GaussianParams params;
    std::vector<TracePoint> trace;
    Eigen::Index clamp_events = 0;

    SgdRunResult(GaussianParams p, std::vector<TracePoint> t, Eigen::Index clamps)
        : params(std::move(p)), trace(std::move(t)), clamp_events(clamps) {}
};

// Projected stochastic gradient descent. Initializes at
// w0 = ((Sigma_S^{-1})^flat, Sigma_S^{-1} mu_S), takes one fresh sample per
// step with eta_i = 1/(lambda i), projects every iterate onto D, and returns
// the iterate average mapped back through (mu, Sigma) = (B^{-1} u, B^{-1}).
// The objective trace is recorded every T/100 iterations on trace_batch.
template <class Sampler>
SgdRunResult sgd_run(const SgdConfig& config, double alpha_hat, Sampler&& sampler,
                     const HermiteExpansion& psi_k, const Eigen::VectorXd& mu_s,
                     const Eigen::MatrixXd& sigma_s, const ProjectionSet& dset,
                     const Batch* trace_batch = nullptr) {
    config.validate();
    const Eigen::Index d = mu_s.size();
    const double lambda = config.effective_lambda(alpha_hat);

    ReparamPoint w = project_to_D(ReparamPoint::from_moments(mu_s, sigma_s), dset);
    Eigen::VectorXd u_sum = Eigen::VectorXd::Zero(d);
    Eigen::MatrixXd b_sum = Eigen::MatrixXd::Zero(d, d);
    Eigen::Index clamp_events = 0;
    std::vector<TracePoint> trace;
    const Eigen::Index stride = std::max<Eigen::Index>(1, config.T / 100);

    for (Eigen::Index i = 1; i <= config.T; ++i) {
        const Eigen::VectorXd x = sampler();
        const double eta = 1.0 / (lambda * static_cast<double>(i));
        bool clamped = false;
        const Eigen::VectorXd v = gradient_sample(w, x, psi_k, mu_s, sigma_s, &clamped);
        if (clamped) ++clamp_events;
        ReparamPoint r;
        r.B = w.B - eta * Eigen::Map<const Eigen::MatrixXd>(v.data(), d, d);
        r.B = 0.5 * (r.B + r.B.transpose()).eval();
        r.u = w.u - eta * v.tail(d);
        w = project_to_D(r, dset);
        u_sum += w.u;
        b_sum += w.B;
        if (trace_batch && (i % stride == 0 || i == config.T)) {
            Eigen::Index trace_clamps = 0;
            const double obj = objective_estimate(w, *trace_batch, psi_k, mu_s, sigma_s, &trace_clamps);
            trace.push_back({i, obj, trace_clamps});
        }
    }

    ReparamPoint average;
    average.u = u_sum / static_cast<double>(config.T);
    average.B = b_sum / static_cast<double>(config.T);
    return SgdRunResult(average.to_gaussian(), std::move(trace), clamp_events);
}

// Medoid of K runs: the run whose vectorized (mu, Sigma) minimizes the median
// distance to the others. Deterministic; ties pick the lowest index.
inline const GaussianParams& median_of_runs(const std::vector<GaussianParams>& runs) {
    if (runs.empty()) throw validation_error("median_of_runs: empty run list");
    if (runs.size() == 1) return runs.front();
    const Eigen::Index d = runs.front().dim();
    std::vector<Eigen::VectorXd> flat;
    flat.reserve(runs.size());
    for (const auto& run : runs) {
        Eigen::VectorXd v(d + d * d);
        v.head(d) = run.mean();
        v.tail(d * d) = Eigen::Map<const Eigen::VectorXd>(run.covariance().data(), d * d);
        flat.push_back(std::move(v));
    }
    std::size_t best = 0;
    double best_score = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < runs.size(); ++i) {
        std::vector<double> dists;
        dists.reserve(runs.size() - 1);
        for (std::size_t j = 0; j < runs.size(); ++j)
            if (j != i) dists.push_back((flat[i] - flat[j]).norm());
        std::nth_element(dists.begin(), dists.begin() + dists.size() / 2, dists.end());
        const double median = dists[dists.size() / 2];
        if (median < best_score) {
            best_score = median;
            best = i;
        }
    }
    return runs[best];
}

// Central second difference (f(p + eps z) - 2 f(p) + f(p - eps z)) / eps^2
// along a unit direction z in stacked (B; u) coordinates.
template <class Objective>
double second_difference(Objective&& f, const ReparamPoint& p, const Eigen::VectorXd& direction,
                         double eps) {
    if (eps <= 0.0) throw validation_error("second_difference: eps must be > 0");
    if (std::abs(direction.norm() - 1.0) > 1e-8)
        throw validation_error("second_difference: direction must be unit length");
    const Eigen::Index d = p.u.size();
    const Eigen::VectorXd w = p.stacked();
    const ReparamPoint plus = ReparamPoint::from_stacked(w + eps * direction, d);
    const ReparamPoint minus = ReparamPoint::from_stacked(w - eps * direction, d);
    return (f(plus) - 2.0 * f(p) + f(minus)) / (eps * eps);
}

// Finite-difference curvature of the empirical objective on a fixed batch.
inline double hessian_probe(const ReparamPoint& p, const Eigen::VectorXd& direction,
                            const Batch& samples, const HermiteExpansion& psi_k,
                            const Eigen::VectorXd& mu_s, const Eigen::MatrixXd& sigma_s,
                            double eps) {
    return second_difference(
        [&](const ReparamPoint& q) { return objective_estimate(q, samples, psi_k, mu_s, sigma_s); },
        p, direction, eps);
}

// Random unit direction whose B-block is symmetric, as the strong-convexity
// statement requires.
inline Eigen::VectorXd random_symmetric_direction(int d, Rng& rng) {
    Eigen::MatrixXd m(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) m(i, j) = rng.normal();
    m = 0.5 * (m + m.transpose()).eval();
    Eigen::VectorXd z(d * d + d);
    z.head(d * d) = Eigen::Map<const Eigen::VectorXd>(m.data(), d * d);
    for (int i = 0; i < d; ++i) z[d * d + i] = rng.normal();
    return z / z.norm();
}

}  // namespace truncgauss
