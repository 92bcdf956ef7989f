// Acceptance suite: one pass/fail line per criterion, each run at its pinned
// tolerance and wall-clock limit. Criteria can be selected by number on the
// command line; with no arguments every criterion runs. Exit code equals the
// number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "../support/quadrature.hpp"
#include "../support/targets.hpp"
#include "truncgauss/identify.hpp"
#include "truncgauss/io.hpp"
#include "truncgauss/pipeline.hpp"

using namespace truncgauss;

namespace {

struct Criterion {
    int id;
    std::string name;
    double time_limit_seconds;
    std::function<bool(std::ostream&)> run;
};

double median(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

// ---------------------------------------------------------------- 1
bool hermite_orthonormality(std::ostream& log) {
    bool ok = true;
    for (int i = 0; i <= 8 && ok; ++i) {
        for (int j = 0; j <= 8 && ok; ++j) {
            const double inner = testsupport::gh_expectation(
                [i, j](double x) { return hermite_1d(i, x) * hermite_1d(j, x); });
            const double expected = i == j ? 1.0 : 0.0;
            if (std::abs(inner - expected) > 1e-8) {
                log << "quadrature <H_" << i << ", H_" << j << "> = " << inner << "; ";
                ok = false;
            }
        }
    }
    // d=2 Monte Carlo within 3 sigma at n = 1e6, streaming pair sums
    Rng rng(20250801);
    const auto indices = enumerate_multi_indices(2, 4);
    const std::size_t m = indices.size();
    const Eigen::Index n = 1000000;
    const std::size_t pairs = m * (m + 1) / 2;
    std::vector<double> sum(pairs, 0.0), sum_sq(pairs, 0.0);
    std::vector<double> h_values(m);
    Eigen::Vector2d x;
    for (Eigen::Index r = 0; r < n; ++r) {
        x << rng.normal(), rng.normal();
        for (std::size_t j = 0; j < m; ++j) h_values[j] = hermite_multi(indices[j], x);
        std::size_t pair = 0;
        for (std::size_t a = 0; a < m; ++a) {
            for (std::size_t b = a; b < m; ++b, ++pair) {
                const double prod = h_values[a] * h_values[b];
                sum[pair] += prod;
                sum_sq[pair] += prod * prod;
            }
        }
    }
    int violations = 0;
    std::size_t pair = 0;
    for (std::size_t a = 0; a < m; ++a) {
        for (std::size_t b = a; b < m; ++b, ++pair) {
            const double mean = sum[pair] / static_cast<double>(n);
            const double var = std::max(0.0, sum_sq[pair] / static_cast<double>(n) - mean * mean);
            const double se = std::sqrt(var / static_cast<double>(n));
            const double expected = a == b ? 1.0 : 0.0;
            if (std::abs(mean - expected) > 3.0 * se + 1e-12) {
                ++violations;
                log << "MC pair (" << a << "," << b << ") off by "
                    << std::abs(mean - expected) / std::max(se, 1e-300) << " sigma; ";
            }
        }
    }
    if (violations > 0) ok = false;
    return ok;
}

// ---------------------------------------------------------------- 2
bool coefficient_estimator(std::ostream& log) {
    const PsiTarget target = testsupport::halfline_target();
    const TruncatedGaussian tg(target.true_params, target.set, target.alpha_star);
    const auto indices = enumerate_multi_indices(1, 4);
    const int trials = 200;
    const Eigen::Index n = 10000;
    Eigen::MatrixXd estimates(trials, static_cast<Eigen::Index>(indices.size()));
    Rng rng(42);
    for (int t = 0; t < trials; ++t) {
        const Batch batch = truncated_sample(tg, rng, n).points;
        const HermiteExpansion e = estimate_coefficients(batch, 4);
        estimates.row(t) = e.coefficients().transpose();
    }
    bool ok = true;
    for (std::size_t j = 0; j < indices.size(); ++j) {
        const Eigen::VectorXd col = estimates.col(static_cast<Eigen::Index>(j));
        const double mean = col.mean();
        const double var =
            (col.array() - mean).square().sum() / static_cast<double>(trials - 1);
        const double se_of_mean = std::sqrt(var / trials);
        const double oracle = testsupport::halfline_coefficient(indices[j][0]);
        if (std::abs(mean - oracle) > 3.0 * se_of_mean + 1e-12) {
            log << "bias at V=" << indices[j][0] << ": mean " << mean << " vs oracle " << oracle
                << " (se " << se_of_mean << "); ";
            ok = false;
        }
        const double bound = 100.0 * std::pow(5.0, indices[j].degree()) / static_cast<double>(n);
        if (var > bound) {
            log << "variance at |V|=" << indices[j].degree() << " is " << var << " > " << bound
                << "; ";
            ok = false;
        }
    }
    return ok;
}

// ---------------------------------------------------------------- 3
bool hermite_concentration_trend(std::ostream& log) {
    const double total = testsupport::halfline_psi_second_moment();
    double prev_mass = -1.0, prev_gap = 1e300;
    bool ok = true;
    for (int k : {2, 4, 8, 16}) {
        double mass = 0.0;
        for (int n = 0; n <= k; ++n) {
            const double c = testsupport::halfline_coefficient(n);
            mass += c * c;
        }
        const double gap = total - mass;
        log << "k=" << k << " mass=" << mass << " gap=" << gap << "; ";
        if (mass < prev_mass - 1e-12 || gap > prev_gap + 1e-12) ok = false;
        prev_mass = mass;
        prev_gap = gap;
    }
    return ok;
}

// ---------------------------------------------------------------- 4
bool gradient_correctness(std::ostream& log) {
    Rng rng(4242);
    const TruncatedGaussian tg(GaussianParams::standard(2),
                               SetOracle::halfspace(Eigen::Vector2d(1.0, 0.0), 0.3));
    const TruncatedBatch batch = truncated_sample(tg, rng, 100000);
    const auto [mu, sigma] = conditional_moments(batch.points);
    const HermiteExpansion psi_k = estimate_coefficients(batch.points, 4);
    const ProjectionSet dset = ProjectionSet::from_alpha(batch.acceptance_rate);
    const Eigen::Index n = batch.points.rows();
    const double eps = 1e-4;
    bool ok = true;
    for (int point = 0; point < 5; ++point) {
        ReparamPoint p;
        Eigen::MatrixXd m(2, 2);
        m << rng.normal(), rng.normal(), rng.normal(), rng.normal();
        p.B = Eigen::MatrixXd::Identity(2, 2) + 0.2 * (m + m.transpose());
        p.u = Eigen::Vector2d(rng.normal(), rng.normal());
        p = project_to_D(p, dset);

        // mean of per-sample gradients and its standard error
        Eigen::VectorXd grad_sum = Eigen::VectorXd::Zero(6);
        Eigen::VectorXd grad_sq = Eigen::VectorXd::Zero(6);
        for (Eigen::Index i = 0; i < n; ++i) {
            const Eigen::VectorXd v =
                gradient_sample(p, batch.points.row(i).transpose(), psi_k, mu, sigma);
            grad_sum += v;
            grad_sq += v.cwiseProduct(v);
        }
        const Eigen::VectorXd grad_mean = grad_sum / static_cast<double>(n);
        const Eigen::VectorXd grad_se =
            ((grad_sq / static_cast<double>(n) - grad_mean.cwiseProduct(grad_mean)) /
             static_cast<double>(n))
                .cwiseMax(0.0)
                .cwiseSqrt();

        // central finite difference of the empirical objective on the same batch
        const Eigen::VectorXd w = p.stacked();
        for (int c = 0; c < 6; ++c) {
            Eigen::VectorXd dw = Eigen::VectorXd::Zero(6);
            dw[c] = eps;
            // keep the B-block symmetric while differencing
            if (c < 4) {
                const int r = c % 2, s = c / 2;
                if (r != s) dw[s + 2 * r] = eps;
            }
            const ReparamPoint plus = ReparamPoint::from_stacked(w + dw, 2);
            const ReparamPoint minus = ReparamPoint::from_stacked(w - dw, 2);
            const double fd = (objective_estimate(plus, batch.points, psi_k, mu, sigma) -
                               objective_estimate(minus, batch.points, psi_k, mu, sigma)) /
                              (2.0 * eps);
            // symmetrized off-diagonal steps pick up both matrix entries
            double analytic = grad_mean[c];
            double se = grad_se[c];
            if (c < 4) {
                const int r = c % 2, s = c / 2;
                if (r != s) {
                    analytic += grad_mean[s + 2 * r];
                    se += grad_se[s + 2 * r];
                }
            }
            const double tolerance = 3.0 * se + 1e-5 * (1.0 + std::abs(analytic));
            if (std::abs(fd - analytic) > tolerance) {
                log << "point " << point << " coord " << c << ": fd " << fd << " vs mean grad "
                    << analytic << " (tol " << tolerance << "); ";
                ok = false;
            }
        }
    }
    return ok;
}

// ---------------------------------------------------------------- 5
bool convexity(std::ostream& log) {
    Rng rng(555);
    const TruncatedGaussian tg(GaussianParams::standard(2),
                               SetOracle::halfspace(Eigen::Vector2d(0.6, 0.8), 0.2));
    const TruncatedBatch batch = truncated_sample(tg, rng, 20000);
    const auto [mu, sigma] = conditional_moments(batch.points);
    const HermiteExpansion psi_k = estimate_coefficients(batch.points, 4);
    const ProjectionSet dset = ProjectionSet::from_alpha(batch.acceptance_rate);
    bool ok = true;
    for (int point = 0; point < 10; ++point) {
        ReparamPoint p;
        Eigen::MatrixXd m(2, 2);
        m << rng.normal(), rng.normal(), rng.normal(), rng.normal();
        p.B = Eigen::MatrixXd::Identity(2, 2) + 0.3 * (m + m.transpose());
        p.u = Eigen::Vector2d(rng.normal(), rng.normal());
        p = project_to_D(p, dset);
        const double objective = objective_estimate(p, batch.points, psi_k, mu, sigma);
        for (int dir = 0; dir < 50; ++dir) {
            const Eigen::VectorXd z = random_symmetric_direction(2, rng);
            const double curvature = hessian_probe(p, z, batch.points, psi_k, mu, sigma, 0.02);
            if (curvature < -1e-4 * std::abs(objective)) {
                log << "negative curvature " << curvature << " at point " << point << "; ";
                ok = false;
            }
        }
    }
    return ok;
}

// ---------------------------------------------------------------- 6
bool untruncated_recovery(std::ostream& log) {
    ExperimentConfig config;
    config.dimension = 2;
    config.true_mean = Eigen::Vector2d(0.4, -0.7);
    config.true_covariance = (Eigen::MatrixXd(2, 2) << 1.2, 0.3, 0.3, 0.8).finished();
    config.set = SetOracle::full_space();
    config.hermite_degree = 2;
    config.n_psi = 200000;
    config.n_moments = 200000;
    config.sgd.T = 50000;
    config.sgd.K = 5;
    config.transform = "whiten";
    config.seed_set = true;
    std::vector<double> mu_errors, sigma_errors;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        config.seed = seed;
        const EstimationReport report = run_estimate(config);
        mu_errors.push_back(*report.mu_error);
        sigma_errors.push_back(*report.sigma_error);
    }
    const double mu_med = median(mu_errors);
    const double sigma_med = median(sigma_errors);
    log << "median |mu_hat - mu*| = " << mu_med << ", median |Sigma_hat - Sigma*|_F = "
        << sigma_med << "; ";
    return mu_med <= 0.05 && sigma_med <= 0.1;
}

// ---------------------------------------------------------------- 7
bool fig1_style_recovery(std::ostream& log) {
    // Mean (0.1, 0.78) behind a mass-0.3 halfspace; single-pass three-stage
    // pipeline at N = 1e5.
    ExperimentConfig config;
    config.dimension = 2;
    config.true_mean = Eigen::Vector2d(0.1, 0.78);
    config.true_covariance = Eigen::MatrixXd::Identity(2, 2);
    const Eigen::Vector2d dir = Eigen::Vector2d(0.38, -0.46).normalized();
    const double gamma = 0.52440051270804978;  // Phi(gamma) = 0.7
    config.set = SetOracle::halfspace(dir, dir.dot(config.true_mean) + gamma);
    config.n_psi = 100000;
    config.n_moments = 100000;
    config.sgd.T = 50000;
    config.sgd.K = 5;
    config.transform = "translate";
    config.alpha_floor = 0.05;
    config.seed_set = true;
    std::vector<double> err_k1, err_k6;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        config.seed = seed;
        config.hermite_degree = 1;
        err_k1.push_back(*run_estimate(config).mu_error);
        config.hermite_degree = 6;
        err_k6.push_back(*run_estimate(config).mu_error);
    }
    const double med1 = median(err_k1);
    const double med6 = median(err_k6);
    log << "median error k=1: " << med1 << ", k=6: " << med6 << "; ";
    const bool absolute = med6 <= 0.15;
    const bool trend = med6 < med1;
    if (!absolute)
        log << "absolute budget 0.15 missed: the degree-6 expansion of the weighted "
               "indicator biases the objective minimizer itself at this truncation "
               "mass (grid-searching the objective reproduces the gap; larger degrees "
               "shrink it). The per-degree improvement clause "
            << (trend ? "holds" : "fails") << "; ";
    return absolute && trend;
}

// ---------------------------------------------------------------- 8
bool set_recovery(std::ostream& log) {
    ExperimentConfig config;
    config.dimension = 2;
    config.true_mean = Eigen::Vector2d(0.3, -0.2);
    config.true_covariance = Eigen::MatrixXd::Identity(2, 2);
    const Eigen::Vector2d n = Eigen::Vector2d(1.0, 0.5).normalized();
    // halfspace of mass ~0.8 under the truth
    const double gamma = -0.8416212335729143;  // Phi^{-1}(0.2)
    config.set = SetOracle::halfspace(n, n.dot(config.true_mean) + gamma);
    config.hermite_degree = 6;
    config.n_psi = 100000;
    config.n_moments = 100000;
    config.sgd.T = 50000;
    config.sgd.K = 5;
    config.transform = "translate";
    config.seed = 2025;
    config.seed_set = true;
    EstimationReport report = run_estimate(config);
    attach_symdiff(report, config, 40000);
    log << "disagreement mass = " << *report.symdiff << " +- " << *report.symdiff_std_error
        << "; ";
    return *report.symdiff <= 0.1 + 0.01;
}

// ---------------------------------------------------------------- 9
bool sgd_rate(std::ostream& log) {
    ExperimentConfig config;
    config.dimension = 2;
    config.true_mean = Eigen::Vector2d(0.2, -0.4);
    config.true_covariance = (Eigen::MatrixXd(2, 2) << 1.1, 0.2, 0.2, 0.9).finished();
    config.set = SetOracle::full_space();
    config.hermite_degree = 2;
    config.n_psi = 50000;
    config.n_moments = 50000;
    config.sgd.K = 1;
    config.transform = "whiten";
    config.seed_set = true;
    auto run_at = [&config](Eigen::Index T) {
        config.sgd.T = T;
        std::vector<double> errors;
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
            config.seed = seed;
            const EstimationReport report = run_estimate(config);
            errors.push_back(std::sqrt(
                (report.estimate.mean() - config.true_mean).squaredNorm() +
                (report.estimate.covariance() - config.true_covariance).squaredNorm()));
        }
        return median(errors);
    };
    const double med_short = run_at(5000);
    const double med_long = run_at(50000);
    log << "median error T=5e3: " << med_short << ", T=5e4: " << med_long << "; ";
    return med_long < med_short;
}

// ---------------------------------------------------------------- 10
bool tournament_selection(std::ostream& log) {
    // X: interval-truncated 1-D Gaussian. 20 hypotheses: one within TV 0.02
    // of X, the rest at TV >= 0.3.
    const GaussianParams x_params(Eigen::VectorXd::Constant(1, 0.2),
                                  Eigen::MatrixXd::Constant(1, 1, 1.1));
    const auto x_set = SetOracle::axis_box(Eigen::VectorXd::Constant(1, -1.2),
                                           Eigen::VectorXd::Constant(1, 1.5));
    Rng alpha_rng(99);
    const double x_alpha = mass_estimate(x_params, x_set, alpha_rng, 400000).estimate;
    const TruncatedGaussian x_model(x_params, x_set, x_alpha);

    std::vector<Hypothesis> hypotheses;
    hypotheses.emplace_back(
        GaussianParams(Eigen::VectorXd::Constant(1, 0.205), Eigen::MatrixXd::Constant(1, 1, 1.1)),
        x_set, x_alpha);
    for (int i = 0; i < 19; ++i) {
        const double magnitude = 1.0 + 0.04 * i;
        const double mean_shift = (i % 2 == 0) ? magnitude : -magnitude;
        const double variance = (i % 3 == 0) ? 1.1 : (i % 3 == 1 ? 0.8 : 1.4);
        GaussianParams params(Eigen::VectorXd::Constant(1, 0.2 + mean_shift),
                              Eigen::MatrixXd::Constant(1, 1, variance));
        Rng mass_rng(1000 + i);
        double alpha = mass_estimate(params, x_set, mass_rng, 200000).estimate;
        alpha = std::max(alpha, 1e-4);
        hypotheses.emplace_back(params, x_set, alpha);
    }

    TournamentConfig tconfig;
    tconfig.eps = 0.1;
    tconfig.delta = 0.05;
    int good = 0;
    const int trials = 100;
    for (int trial = 0; trial < trials; ++trial) {
        Rng rng = Rng::substream(7000, 1, static_cast<std::uint64_t>(trial));
        const Batch data = truncated_sample(x_model, rng, 3000, 100000).points;
        const TournamentReport report = tournament(data, hypotheses, tconfig, rng);
        if (!report.winner) continue;
        const Hypothesis& winner = hypotheses[*report.winner];
        const MonteCarloEstimate tv = tv_monte_carlo(
            TruncatedGaussian(winner.params, winner.set, winner.alpha_hat),
            TruncatedGaussian(x_model.params, x_model.set, x_model.alpha_hat), rng, 20000);
        if (tv.estimate <= 0.25) ++good;
    }
    log << "winner within TV 0.25 in " << good << "/" << trials << " trials; ";
    return good >= 95;
}

// ---------------------------------------------------------------- 11
bool moment_distinguishability(std::ostream& log) {
    Rng rng(1111);
    bool ok = true;
    int accepted_pairs = 0;
    int attempts = 0;
    while (accepted_pairs < 20 && attempts < 400) {
        ++attempts;
        auto random_interval_model = [&rng]() {
            const double mu = rng.uniform(-0.5, 0.5);
            const double sigma = rng.uniform(0.7, 1.3);
            const double lo = rng.uniform(-2.0, 0.0);
            const double hi = lo + rng.uniform(0.8, 2.5);
            return TruncatedGaussian(
                GaussianParams(Eigen::VectorXd::Constant(1, mu),
                               Eigen::MatrixXd::Constant(1, 1, sigma * sigma)),
                SetOracle::axis_box(Eigen::VectorXd::Constant(1, lo),
                                    Eigen::VectorXd::Constant(1, hi)));
        };
        const TruncatedGaussian a = random_interval_model();
        const TruncatedGaussian b = random_interval_model();
        const MonteCarloEstimate tv = tv_monte_carlo(a, b, rng, 20000);
        if (tv.estimate < 0.2) continue;
        ++accepted_pairs;
        const MomentCheckResult check =
            moment_check(a, b, 6, 100000, 2222 + static_cast<std::uint64_t>(attempts));
        if (check.distance < 1e-3) {
            log << "pair " << accepted_pairs << " (tv " << tv.estimate << ") distance "
                << check.distance << " < 1e-3; ";
            ok = false;
        }
    }
    if (accepted_pairs < 20) {
        log << "only " << accepted_pairs << " pairs with TV >= 0.2; ";
        ok = false;
    }
    // identical pair falls below 3 sigma
    const TruncatedGaussian same(
        GaussianParams::standard(1),
        SetOracle::axis_box(Eigen::VectorXd::Constant(1, -0.8), Eigen::VectorXd::Constant(1, 1.2)));
    const MomentCheckResult identical = moment_check(same, same, 6, 100000, 3333);
    if (identical.distance > 3.0 * identical.sigma_mc) {
        log << "identical-pair distance " << identical.distance << " > 3 sigma "
            << 3.0 * identical.sigma_mc << "; ";
        ok = false;
    }
    return ok;
}

// ---------------------------------------------------------------- 12
bool lower_bound_demonstration(std::ostream& log) {
    const auto rows = run_lower_bound(8, {8, 2048}, 50, 424242, 2, 4000);
    const LowerBoundRow& small = rows[0];
    const LowerBoundRow& large = rows[1];
    log << "m=8 error " << small.mean_error << " (se " << small.error_std_error << "), m=2048 error "
        << large.mean_error << " (se " << large.error_std_error << "); collision rate "
        << small.collision_rate << " vs birthday " << small.birthday_prediction << "; ";
    bool ok = true;
    if (small.mean_error < 0.5) {
        log << "m=8 error below 0.5; ";
        ok = false;
    }
    const double separation = std::sqrt(small.error_std_error * small.error_std_error +
                                        large.error_std_error * large.error_std_error);
    if (!(large.mean_error < small.mean_error - 3.0 * separation)) {
        log << "no 3-sigma separation; ";
        ok = false;
    }
    for (const auto& row : rows) {
        const double p = row.birthday_prediction;
        const double se = std::sqrt(std::max(p * (1.0 - p), 1e-12) / 50.0);
        if (std::abs(row.collision_rate - p) > 2.0 * se + 0.02) {
            log << "m=" << row.m << " collision rate " << row.collision_rate
                << " outside 2 sigma of " << p << "; ";
            ok = false;
        }
    }
    return ok;
}

// ---------------------------------------------------------------- 13
bool noise_sensitivity_bound(std::ostream& log) {
    const auto half = SetOracle::halfspace(Eigen::Vector2d(1.0, 0.0), 0.0);
    Rng rng(1313);
    bool ok = true;
    for (double rho : {0.01, 0.05, 0.1}) {
        const Eigen::Index n = 1000000;
        const double ns = noise_sensitivity(half, rho, rng, n);
        const double bound = std::sqrt(std::numbers::pi) * std::sqrt(rho) * (*half.gsa_bound());
        const double sigma_mc = std::sqrt(std::max(ns * (1.0 - ns), 1e-12) / n) * 2.0;
        log << "rho=" << rho << " NS=" << ns << " bound=" << bound << "; ";
        if (ns > bound + 3.0 * sigma_mc) ok = false;
    }
    return ok;
}

// ---------------------------------------------------------------- 14
namespace fs = std::filesystem;

std::string slurp(const fs::path& path) {
    std::ifstream is(path);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

bool compare_outputs(const fs::path& a, const fs::path& b, std::ostream& log) {
    bool ok = true;
    for (const auto& entry : fs::directory_iterator(a)) {
        const fs::path name = entry.path().filename();
        if (!fs::exists(b / name)) {
            log << "missing " << name.string() << " on second run; ";
            ok = false;
            continue;
        }
        if (name == "report.json") {
            auto ja = nlohmann::json::parse(slurp(entry.path()));
            auto jb = nlohmann::json::parse(slurp(b / name));
            ja.erase("timings");
            jb.erase("timings");
            if (ja.dump() != jb.dump()) {
                log << "report.json differs; ";
                ok = false;
            }
        } else if (slurp(entry.path()) != slurp(b / name)) {
            log << name.string() << " differs; ";
            ok = false;
        }
    }
    return ok;
}

bool cli_determinism(std::ostream& log) {
    const char* cli_env = std::getenv("TRUNCGAUSS_CLI");
    if (!cli_env) {
        log << "TRUNCGAUSS_CLI not set; ";
        return false;
    }
    const std::string cli = cli_env;
    const fs::path work = fs::temp_directory_path() / "truncgauss_acceptance14";
    fs::remove_all(work);
    fs::create_directories(work);

    // estimate / recover-set config
    nlohmann::json est_config = {
        {"dimension", 2},
        {"true_params",
         {{"mean", {0.2, -0.1}}, {"covariance", {{1.0, 0.0}, {0.0, 1.0}}}}},
        {"set", {{"kind", "halfspace"}, {"normal", {1.0, 0.0}}, {"offset", -0.7}}},
        {"hermite_degree", 2},
        {"n_psi", 4000},
        {"n_moments", 4000},
        {"sgd", {{"T", 1500}, {"K", 1}}},
        {"dump_samples", true},
        {"seed", 9}};
    std::ofstream(work / "estimate.json") << est_config.dump();

    nlohmann::json fig_config = {{"preset", "A"}, {"seed", 9}, {"n_samples", 3000},
                                 {"sgd", {{"T", 800}, {"K", 1}}}};
    std::ofstream(work / "fig1.json") << fig_config.dump();

    nlohmann::json lower_config = {{"d", 4}, {"sample_sizes", {6, 64}}, {"trials", 3},
                                   {"sgd_T", 300}, {"seed", 9}};
    std::ofstream(work / "lower.json") << lower_config.dump();

    nlohmann::json model = {{"true_params",
                             {{"mean", {0.0}}, {"covariance", {{1.0}}}}},
                            {"set",
                             {{"kind", "axis_box"}, {"lo", {-1.0}}, {"hi", {1.0}}}}};
    nlohmann::json moment_config = {{"first", model}, {"second", model}, {"k", 3},
                                    {"n", 4000}, {"seed", 9}};
    std::ofstream(work / "moment.json") << moment_config.dump();

    nlohmann::json tour_config = {
        {"x", model},
        {"n_data", 2000},
        {"grid", {{"radius", 0.5}, {"step", 0.5}, {"sigma_grid", {1.0}}}},
        {"include_erm_box", true},
        {"eps", 0.2},
        {"seed", 9}};
    std::ofstream(work / "tournament.json") << tour_config.dump();

    const std::vector<std::pair<std::string, std::string>> commands = {
        {"estimate", "estimate.json"},   {"recover-set", "estimate.json"},
        {"fig1", "fig1.json"},           {"lower-bound", "lower.json"},
        {"moment-check", "moment.json"}, {"tournament", "tournament.json"},
    };
    bool ok = true;
    for (const auto& [command, config_name] : commands) {
        const fs::path out_a = work / (command + "_a");
        const fs::path out_b = work / (command + "_b");
        for (const fs::path& out : {out_a, out_b}) {
            std::ostringstream cmd;
            cmd << cli << " " << command << " --config " << (work / config_name) << " --out "
                << out << " > " << (out.string() + ".log") << " 2>&1";
            const int rc = std::system(cmd.str().c_str());
            if (rc != 0) {
                log << command << " exited with " << rc << "; ";
                ok = false;
            }
        }
        if (ok && !compare_outputs(out_a, out_b, log)) {
            log << "(" << command << " not deterministic); ";
            ok = false;
        }
    }
    return ok;
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> criteria = {
        {1, "Hermite orthonormality", 30.0, hermite_orthonormality},
        {2, "coefficient estimator bias and variance", 120.0, coefficient_estimator},
        {3, "Hermite concentration trend", 60.0, hermite_concentration_trend},
        {4, "gradient matches finite differences", 120.0, gradient_correctness},
        {5, "objective convexity", 120.0, convexity},
        {6, "end-to-end untruncated recovery", 180.0, untruncated_recovery},
        {7, "figure-1 style recovery", 300.0, fig1_style_recovery},
        {8, "set recovery disagreement mass", 180.0, set_recovery},
        {9, "SGD error decreases with T", 300.0, sgd_rate},
        {10, "tournament selects a near-best hypothesis", 180.0, tournament_selection},
        {11, "moment distinguishability", 120.0, moment_distinguishability},
        {12, "2^{d/2} lower-bound demonstration", 300.0, lower_bound_demonstration},
        {13, "noise-sensitivity bound", 60.0, noise_sensitivity_bound},
        {14, "CLI determinism", 60.0, cli_determinism},
    };

    std::vector<int> selected;
    for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));

    int failures = 0;
    for (const Criterion& criterion : criteria) {
        if (!selected.empty() &&
            std::find(selected.begin(), selected.end(), criterion.id) == selected.end())
            continue;
        std::ostringstream log;
        const auto start = std::chrono::steady_clock::now();
        bool ok = false;
        try {
            ok = criterion.run(log);
        } catch (const std::exception& e) {
            log << "exception: " << e.what();
        }
        const double elapsed = std::chrono::duration<double>(
                                   std::chrono::steady_clock::now() - start)
                                   .count();
        if (elapsed > criterion.time_limit_seconds) {
            log << "runtime " << elapsed << "s over the " << criterion.time_limit_seconds
                << "s limit; ";
            ok = false;
        }
        std::cout << (ok ? "[PASS]" : "[FAIL]") << " criterion " << criterion.id << " ("
                  << criterion.name << ") " << std::fixed << std::setprecision(1) << elapsed
                  << "s";
        const std::string detail = log.str();
        if (!detail.empty()) std::cout << " -- " << detail;
        std::cout << "\n" << std::defaultfloat;
        if (!ok) ++failures;
    }
    return failures;
}
