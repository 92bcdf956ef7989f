#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "truncgauss/errors.hpp"
#include "truncgauss/gaussian.hpp"
#include "truncgauss/multi_index.hpp"
#include "truncgauss/rng.hpp"
#include "truncgauss/sets.hpp"
#include "truncgauss/truncation.hpp"

namespace truncgauss {

// Candidate truncated Gaussian with a pointwise-evaluable density.
struct Hypothesis {
    GaussianParams params;
    SetOracle set;
    double alpha_hat;

    Hypothesis(GaussianParams p, SetOracle s, double alpha)
        : params(std::move(p)), set(std::move(s)), alpha_hat(alpha) {
        if (alpha_hat <= 0.0 || alpha_hat > 1.0)
            throw validation_error("Hypothesis: alpha_hat must lie in (0, 1]");
    }

    double log_density(const Eigen::VectorXd& x) const {
        if (!set.contains(x)) return -std::numeric_limits<double>::infinity();
        return params.log_density(x) - std::log(alpha_hat);
    }
};

// Min-mass ERM over axis-aligned boxes: the componentwise bounding box of
// the samples. Every box consistent with the samples contains it, so it
// minimizes N(guess; S) among consistent boxes for any parameter guess.
inline SetOracle erm_min_mass_box(const Batch& samples, const GaussianParams& /*guess*/) {
    if (samples.rows() < 1) throw validation_error("erm_min_mass_box: empty batch");
    return SetOracle::axis_box(samples.colwise().minCoeff().transpose(),
                               samples.colwise().maxCoeff().transpose());
}

// Exact set mass under the hypothesis Gaussian where a closed form exists
// (full space; halfspace; axis box with diagonal covariance).
inline std::optional<double> exact_mass(const GaussianParams& params, const SetOracle& set) {
    if (std::holds_alternative<FullSpaceSet>(set.body())) return 1.0;
    if (const auto* h = std::get_if<HalfspaceSet>(&set.body())) {
        const double scale = std::sqrt(h->normal.dot(params.covariance() * h->normal));
        return 1.0 - normal_cdf((h->offset - h->normal.dot(params.mean())) / scale);
    }
    if (const auto* box = std::get_if<AxisBoxSet>(&set.body())) {
        const Eigen::MatrixXd& cov = params.covariance();
        const Eigen::Index d = cov.rows();
        Eigen::MatrixXd off_diag = cov;
        off_diag.diagonal().setZero();
        if (off_diag.cwiseAbs().maxCoeff() > 0.0) return std::nullopt;
        double mass = 1.0;
        for (Eigen::Index i = 0; i < d; ++i) {
            const double sd = std::sqrt(cov(i, i));
            mass *= normal_cdf((box->hi[i] - params.mean()[i]) / sd) -
                    normal_cdf((box->lo[i] - params.mean()[i]) / sd);
        }
        return mass;
    }
    return std::nullopt;
}

struct TournamentConfig {
    double eps = 0.1;
    double delta = 0.05;
    double budget_constant = 8.0;  // c_t in ceil(c_t log(3 N^2 / delta) / eps^2)

    Eigen::Index draws_per_pair(std::size_t n_hypotheses) const {
        const double n = static_cast<double>(std::max<std::size_t>(n_hypotheses, 2));
        return static_cast<Eigen::Index>(
            std::ceil(budget_constant * std::log(3.0 * n * n / delta) / (eps * eps)));
    }
};

struct TournamentReport {
    std::optional<std::size_t> winner;
    Eigen::MatrixXi wins;           // wins(i, j) == 1 iff i beat j
    std::vector<int> win_counts;

    nlohmann::json to_json() const {
        nlohmann::json matrix = nlohmann::json::array();
        for (Eigen::Index i = 0; i < wins.rows(); ++i) {
            nlohmann::json row = nlohmann::json::array();
            for (Eigen::Index j = 0; j < wins.cols(); ++j) row.push_back(wins(i, j));
            matrix.push_back(row);
        }
        nlohmann::json j = {{"win_matrix", matrix}, {"win_counts", win_counts}};
        if (winner) j["winner"] = *winner;
        else j["winner"] = nullptr;
        return j;
    }
};

// Pairwise Scheffe tournament. For each pair (i, j) the set {h_i > h_j} gets
// its X-mass from the data batch and its H_i-/H_j-masses from fresh draws;
// the hypothesis whose predicted mass is closer to the empirical one wins
// the match. Returns a hypothesis winning at least half its matches, or
// declares failure (winner == nullopt) when none does.
inline TournamentReport tournament(const Batch& data, const std::vector<Hypothesis>& hypotheses,
                                   const TournamentConfig& config, Rng& rng) {
    if (hypotheses.empty()) throw validation_error("tournament: need at least one hypothesis");
    const std::size_t n = hypotheses.size();
    const Eigen::Index draws = config.draws_per_pair(n);
    TournamentReport report;
    report.wins = Eigen::MatrixXi::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    report.win_counts.assign(n, 0);

    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const Hypothesis& hi = hypotheses[i];
            const Hypothesis& hj = hypotheses[j];
            auto in_w = [&](const Eigen::VectorXd& x) {
                return hi.log_density(x) > hj.log_density(x);
            };
            Eigen::Index data_hits = 0;
            for (Eigen::Index r = 0; r < data.rows(); ++r)
                if (in_w(data.row(r).transpose())) ++data_hits;
            const double tau = static_cast<double>(data_hits) / static_cast<double>(data.rows());

            Eigen::Index hits_i = 0, hits_j = 0;
            for (Eigen::Index r = 0; r < draws; ++r) {
                if (in_w(truncated_sample_one(hi.params, hi.set, rng, 100000))) ++hits_i;
                if (in_w(truncated_sample_one(hj.params, hj.set, rng, 100000))) ++hits_j;
            }
            const double pi = static_cast<double>(hits_i) / static_cast<double>(draws);
            const double pj = static_cast<double>(hits_j) / static_cast<double>(draws);

            const std::size_t match_winner = (std::abs(pi - tau) <= std::abs(pj - tau)) ? i : j;
            const std::size_t match_loser = match_winner == i ? j : i;
            report.wins(static_cast<Eigen::Index>(match_winner), static_cast<Eigen::Index>(match_loser)) = 1;
            ++report.win_counts[match_winner];
        }
    }

    const int needed = static_cast<int>(n / 2);  // ceil((n-1)/2)
    int best_wins = -1;
    std::size_t best = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (report.win_counts[i] > best_wins) {
            best_wins = report.win_counts[i];
            best = i;
        }
    }
    if (best_wins >= needed) report.winner = best;
    return report;
}

// Cartesian hypothesis grid for d <= 2: symmetric mean grid {0, ±step, ...}
// clipped to [-box_radius, box_radius] per coordinate, crossed with diagonal
// covariance entries from sigma_grid and with the candidate sets. alpha uses
// the closed form where available, Monte Carlo otherwise.
inline std::vector<Hypothesis> grid_hypotheses(int d, double box_radius, double step,
                                               const std::vector<double>& sigma_grid,
                                               const std::vector<SetOracle>& set_candidates,
                                               Rng& rng, Eigen::Index mass_draws = 20000) {
    if (d < 1 || d > 2) throw validation_error("grid_hypotheses: d must be 1 or 2");
    if (step <= 0.0 || box_radius < 0.0) throw validation_error("grid_hypotheses: bad grid spec");
    if (sigma_grid.empty() || set_candidates.empty())
        throw validation_error("grid_hypotheses: empty sigma grid or set candidates");
    std::vector<double> mean_values{0.0};
    for (double v = step; v <= box_radius + 1e-12; v += step) {
        mean_values.push_back(-v);
        mean_values.push_back(v);
    }
    std::sort(mean_values.begin(), mean_values.end());

    const std::size_t mean_points = static_cast<std::size_t>(std::pow(mean_values.size(), d));
    const std::size_t sigma_points = static_cast<std::size_t>(std::pow(sigma_grid.size(), d));
    const std::size_t total = mean_points * sigma_points * set_candidates.size();
    if (total > 1000000) throw size_error("grid_hypotheses: grid larger than 10^6");

    std::vector<Hypothesis> out;
    out.reserve(total);
    for (std::size_t mi = 0; mi < mean_points; ++mi) {
        Eigen::VectorXd mean(d);
        std::size_t rest = mi;
        for (int c = 0; c < d; ++c) {
            mean[c] = mean_values[rest % mean_values.size()];
            rest /= mean_values.size();
        }
        for (std::size_t si = 0; si < sigma_points; ++si) {
            Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
            rest = si;
            for (int c = 0; c < d; ++c) {
                cov(c, c) = sigma_grid[rest % sigma_grid.size()];
                rest /= sigma_grid.size();
            }
            GaussianParams params(mean, cov);
            for (const auto& set : set_candidates) {
                double alpha;
                if (const auto exact = exact_mass(params, set)) {
                    alpha = *exact;
                } else {
                    alpha = mass_estimate(params, set, rng, mass_draws).estimate;
                }
                if (alpha <= 0.0) alpha = 1.0 / static_cast<double>(mass_draws);
                if (alpha > 1.0) alpha = 1.0;
                out.emplace_back(params, set, alpha);
            }
        }
    }
    return out;
}

// Raw moment vector m_V = E[x^V] for all |V| <= k, stored densely in the
// graded-lex enumeration order; m_0 is always 1.
struct MomentVector {
    int dim = 0;
    int max_degree = 0;
    std::vector<MultiIndex> indices;
    Eigen::VectorXd values;
};

inline MomentVector empirical_moments(const Batch& samples, int k) {
    if (k < 0) throw validation_error("empirical_moments: k must be >= 0");
    if (samples.rows() < 1) throw validation_error("empirical_moments: empty batch");
    const int d = static_cast<int>(samples.cols());
    MomentVector mv;
    mv.dim = d;
    mv.max_degree = k;
    mv.indices = enumerate_multi_indices(d, k);
    mv.values = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mv.indices.size()));
    // Per-point power table x_c^p for p <= k.
    std::vector<double> powers(static_cast<std::size_t>(d) * (k + 1));
    for (Eigen::Index i = 0; i < samples.rows(); ++i) {
        for (int c = 0; c < d; ++c) {
            double* col = powers.data() + static_cast<std::size_t>(c) * (k + 1);
            col[0] = 1.0;
            for (int p = 1; p <= k; ++p) col[p] = col[p - 1] * samples(i, c);
        }
        for (std::size_t j = 0; j < mv.indices.size(); ++j) {
            double prod = 1.0;
            for (int c = 0; c < d; ++c)
                prod *= powers[static_cast<std::size_t>(c) * (k + 1) + mv.indices[j][c]];
            mv.values[static_cast<Eigen::Index>(j)] += prod;
        }
    }
    mv.values /= static_cast<double>(samples.rows());
    return mv;
}

// max over |V| <= k of |a_V - b_V|.
inline double moment_distance(const MomentVector& a, const MomentVector& b) {
    if (a.dim != b.dim || a.max_degree != b.max_degree)
        throw validation_error("moment_distance: mismatched degree or dimension");
    return (a.values - b.values).cwiseAbs().maxCoeff();
}

}  // namespace truncgauss
