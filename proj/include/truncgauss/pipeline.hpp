#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "truncgauss/errors.hpp"
#include "truncgauss/gaussian.hpp"
#include "truncgauss/hermite.hpp"
#include "truncgauss/identify.hpp"
#include "truncgauss/io.hpp"
#include "truncgauss/optimizer.hpp"
#include "truncgauss/psi.hpp"
#include "truncgauss/recovery.hpp"
#include "truncgauss/rng.hpp"
#include "truncgauss/sets.hpp"
#include "truncgauss/truncation.hpp"

namespace truncgauss {

// Substream stage tags; every random draw in a command is keyed by
// (master seed, stage, stream index).
enum class Stage : std::uint64_t {
    Moments = 1,
    Psi = 2,
    Sgd = 3,
    Recovery = 4,
    Eval = 5,
    LowerBound = 6,
    Tournament = 7,
    MomentCheck = 8,
};

struct SgdSettings {
    Eigen::Index T = 10000;
    double lambda = 0.0;      // 0 selects 0.1 * alpha_hat^3
    int K = 1;
    double proj_c = 4.0;      // a = max(a_min, proj_c * log(1/alpha_hat))
    double proj_b = 1.0 / 16.0;
    double a_min = 1.0;

    nlohmann::json to_json() const {
        return {{"T", T},      {"lambda", lambda}, {"K", K},
                {"proj_c", proj_c}, {"proj_b", proj_b}, {"a_min", a_min}};
    }

    static SgdSettings from_json(const nlohmann::json& j) {
        SgdSettings s;
        s.T = j.value("T", s.T);
        s.lambda = j.value("lambda", s.lambda);
        s.K = j.value("K", s.K);
        s.proj_c = j.value("proj_c", s.proj_c);
        s.proj_b = j.value("proj_b", s.proj_b);
        s.a_min = j.value("a_min", s.a_min);
        return s;
    }
};

struct ExperimentConfig {
    int dimension = 1;
    Eigen::VectorXd true_mean;
    Eigen::MatrixXd true_covariance;
    SetOracle set;
    int hermite_degree = 2;
    Eigen::Index n_psi = 10000;
    Eigen::Index n_moments = 10000;
    SgdSettings sgd;
    std::string transform = "whiten";  // or "translate"
    double alpha_floor = 0.05;         // rejection cap is max(1000, 10/alpha_floor)
    bool dump_samples = false;         // write the psi batch as samples.csv / samples.bin
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string out_dir;

    void validate() const {
        if (dimension < 1) throw validation_error("config: dimension must be >= 1");
        if (true_mean.size() != dimension || true_covariance.rows() != dimension)
            throw validation_error("config: true_params dimension mismatch");
        if (hermite_degree < 0) throw validation_error("config: hermite_degree must be >= 0");
        if (n_psi < 1) throw validation_error("config: n_psi must be >= 1");
        if (n_moments < 1) throw validation_error("config: n_moments must be >= 1");
        if (transform != "whiten" && transform != "translate")
            throw validation_error("config: transform must be 'whiten' or 'translate'");
        if (alpha_floor <= 0.0 || alpha_floor > 1.0)
            throw validation_error("config: alpha_floor must lie in (0, 1]");
        if (!seed_set) throw validation_error("config: seed is mandatory");
        SgdConfig probe{sgd.T, sgd.lambda, sgd.K, 0};
        probe.validate();
    }

    Eigen::Index max_attempts() const {
        return std::max<Eigen::Index>(1000, static_cast<Eigen::Index>(std::ceil(10.0 / alpha_floor)));
    }

    GaussianParams truth() const { return GaussianParams(true_mean, true_covariance); }

    nlohmann::json to_json() const {
        return {{"dimension", dimension},
                {"true_params", truth().to_json()},
                {"set", set.to_json()},
                {"hermite_degree", hermite_degree},
                {"n_psi", n_psi},
                {"n_moments", n_moments},
                {"sgd", sgd.to_json()},
                {"transform", transform},
                {"alpha_floor", alpha_floor},
                {"dump_samples", dump_samples},
                {"seed", seed},
                {"out_dir", out_dir}};
    }

    static ExperimentConfig from_json(const nlohmann::json& j) {
        ExperimentConfig c;
        c.dimension = j.at("dimension").get<int>();
        const GaussianParams truth = GaussianParams::from_json(j.at("true_params"));
        c.true_mean = truth.mean();
        c.true_covariance = truth.covariance();
        c.set = SetOracle::from_json(j.at("set"));
        c.hermite_degree = j.value("hermite_degree", c.hermite_degree);
        c.n_psi = j.value("n_psi", c.n_psi);
        c.n_moments = j.value("n_moments", c.n_moments);
        if (j.contains("sgd")) c.sgd = SgdSettings::from_json(j.at("sgd"));
        c.transform = j.value("transform", c.transform);
        c.alpha_floor = j.value("alpha_floor", c.alpha_floor);
        c.dump_samples = j.value("dump_samples", c.dump_samples);
        if (j.contains("seed")) {
            c.seed = j.at("seed").get<std::uint64_t>();
            c.seed_set = true;
        }
        c.out_dir = j.value("out_dir", c.out_dir);
        return c;
    }
};

struct StageTimings {
    double sampling = 0.0;
    double moments = 0.0;
    double psi = 0.0;
    double sgd = 0.0;
    double recovery = 0.0;
    double total = 0.0;

    nlohmann::json to_json() const {
        return {{"sampling", sampling}, {"moments", moments}, {"psi", psi},
                {"sgd", sgd},           {"recovery", recovery}, {"total", total}};
    }
};

struct EstimationReport {
    GaussianParams estimate;            // original coordinates
    GaussianParams mapped_estimate;     // coordinates psi_k lives in
    HermiteExpansion psi_k;
    AffineMap forward;                  // original -> mapped
    AffineMap inverse;
    double alpha_hat = 0.0;
    Eigen::VectorXd mu_tilde;
    Eigen::MatrixXd sigma_tilde;
    std::vector<std::pair<int, double>> per_degree;  // degree -> captured coefficient mass
    std::vector<std::vector<TracePoint>> traces;     // one per SGD run
    Eigen::Index clamp_events = 0;
    std::optional<double> mu_error;
    std::optional<double> sigma_error;
    std::optional<double> symdiff;
    std::optional<double> symdiff_std_error;
    Batch psi_samples;  // original-coordinate stage-1 batch (kept for dumps)
    StageTimings timings;

    EstimationReport(GaussianParams est, GaussianParams mapped, HermiteExpansion psi,
                     AffineMap fwd, AffineMap inv)
        : estimate(std::move(est)),
          mapped_estimate(std::move(mapped)),
          psi_k(std::move(psi)),
          forward(std::move(fwd)),
          inverse(std::move(inv)) {}

    RecoveredSet recovered_set() const { return RecoveredSet(psi_k, mapped_estimate); }

    // Classifies a point given in original coordinates.
    bool classify_original(const Eigen::VectorXd& x) const {
        return recovered_set().classify(forward.apply(x));
    }

    nlohmann::json to_json() const {
        nlohmann::json per_degree_json = nlohmann::json::array();
        for (const auto& [degree, mass] : per_degree)
            per_degree_json.push_back({{"degree", degree}, {"coeff_mass", mass}});
        auto vec = [](const Eigen::VectorXd& v) {
            return std::vector<double>(v.data(), v.data() + v.size());
        };
        auto mat = [](const Eigen::MatrixXd& m) {
            nlohmann::json rows = nlohmann::json::array();
            for (Eigen::Index i = 0; i < m.rows(); ++i) {
                nlohmann::json row = nlohmann::json::array();
                for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
                rows.push_back(row);
            }
            return rows;
        };
        nlohmann::json j = {{"mu_hat", vec(estimate.mean())},
                            {"sigma_hat", mat(estimate.covariance())},
                            {"alpha_hat", alpha_hat},
                            {"mu_tilde", vec(mu_tilde)},
                            {"sigma_tilde", mat(sigma_tilde)},
                            {"per_degree", per_degree_json},
                            {"psi_k", psi_k.to_json()},
                            {"mapped_params", mapped_estimate.to_json()},
                            {"transform", {{"forward_A", mat(forward.A)},
                                           {"forward_b", vec(forward.b)},
                                           {"inverse_A", mat(inverse.A)},
                                           {"inverse_b", vec(inverse.b)}}},
                            {"clamp_events", clamp_events},
                            {"timings", timings.to_json()}};
        if (mu_error) j["mu_error"] = *mu_error;
        if (sigma_error) j["sigma_error"] = *sigma_error;
        if (symdiff) j["symdiff_mass"] = *symdiff;
        if (symdiff_std_error) j["symdiff_std_error"] = *symdiff_std_error;
        return j;
    }

    // Rebuilds a report from its JSON form (traces live in the referenced
    // CSV, timings are measurements; both are restored as written).
    static EstimationReport from_json(const nlohmann::json& j) {
        auto vec = [](const nlohmann::json& a) {
            const auto v = a.get<std::vector<double>>();
            return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()))
                .eval();
        };
        auto mat = [&vec](const nlohmann::json& rows) {
            const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
            Eigen::MatrixXd m(n, static_cast<Eigen::Index>(rows.at(0).size()));
            for (Eigen::Index i = 0; i < n; ++i)
                m.row(i) = vec(rows.at(static_cast<std::size_t>(i))).transpose();
            return m;
        };
        const auto& t = j.at("transform");
        EstimationReport report(
            GaussianParams(vec(j.at("mu_hat")), mat(j.at("sigma_hat"))),
            GaussianParams::from_json(j.at("mapped_params")),
            HermiteExpansion::from_json(j.at("psi_k")),
            AffineMap{mat(t.at("forward_A")), vec(t.at("forward_b"))},
            AffineMap{mat(t.at("inverse_A")), vec(t.at("inverse_b"))});
        report.alpha_hat = j.at("alpha_hat").get<double>();
        report.mu_tilde = vec(j.at("mu_tilde"));
        report.sigma_tilde = mat(j.at("sigma_tilde"));
        for (const auto& entry : j.at("per_degree"))
            report.per_degree.emplace_back(entry.at("degree").get<int>(),
                                           entry.at("coeff_mass").get<double>());
        report.clamp_events = j.at("clamp_events").get<Eigen::Index>();
        if (j.contains("mu_error")) report.mu_error = j.at("mu_error").get<double>();
        if (j.contains("sigma_error")) report.sigma_error = j.at("sigma_error").get<double>();
        if (j.contains("symdiff_mass")) report.symdiff = j.at("symdiff_mass").get<double>();
        if (j.contains("symdiff_std_error"))
            report.symdiff_std_error = j.at("symdiff_std_error").get<double>();
        const auto& timings = j.at("timings");
        report.timings.sampling = timings.at("sampling").get<double>();
        report.timings.moments = timings.at("moments").get<double>();
        report.timings.psi = timings.at("psi").get<double>();
        report.timings.sgd = timings.at("sgd").get<double>();
        report.timings.recovery = timings.at("recovery").get<double>();
        report.timings.total = timings.at("total").get<double>();
        return report;
    }
};

namespace detail {

inline double seconds_since(const std::chrono::steady_clock::time_point& start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace detail

// The three-stage estimation pipeline: conditional moments, whitening (or a
// pure translation for spherical experiments), Hermite estimation of psi,
// projected SGD with median-of-runs selection, and un-mapping back to the
// original coordinates.
inline EstimationReport run_estimate(const ExperimentConfig& config) {
    config.validate();
    const auto t_start = std::chrono::steady_clock::now();
    const TruncatedGaussian truth(config.truth(), config.set);
    const Eigen::Index cap = config.max_attempts();

    // Conditional moments.
    auto t0 = std::chrono::steady_clock::now();
    Rng rng_moments = Rng::substream(config.seed, static_cast<std::uint64_t>(Stage::Moments));
    const TruncatedBatch moments_batch = truncated_sample(truth, rng_moments, config.n_moments, cap);
    const double alpha_hat = moments_batch.acceptance_rate;
    double t_sampling = detail::seconds_since(t0);

    t0 = std::chrono::steady_clock::now();
    const auto [mu_tilde, sigma_tilde] = conditional_moments(moments_batch.points);
    AffineMap forward, inverse;
    if (config.transform == "whiten") {
        const WhiteningMaps maps = whitening_transform(mu_tilde, sigma_tilde);
        forward = maps.forward;
        inverse = maps.inverse;
    } else {
        const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(config.dimension, config.dimension);
        forward = {identity, -mu_tilde};
        inverse = {identity, mu_tilde};
    }
    const Eigen::VectorXd mapped_mu_tilde = forward.apply(mu_tilde);
    const Eigen::MatrixXd mapped_sigma_tilde = forward.A * sigma_tilde * forward.A.transpose();
    const double t_moments = detail::seconds_since(t0);

    // Stage 1: Hermite coefficients of psi in mapped coordinates.
    t0 = std::chrono::steady_clock::now();
    Rng rng_psi = Rng::substream(config.seed, static_cast<std::uint64_t>(Stage::Psi));
    const TruncatedBatch psi_batch = truncated_sample(truth, rng_psi, config.n_psi, cap);
    const Batch mapped_psi_batch = forward.apply_batch(psi_batch.points);
    const HermiteExpansion psi_k = estimate_coefficients(mapped_psi_batch, config.hermite_degree);
    const double t_psi = detail::seconds_since(t0);

    // Stage 2: projected SGD, K independent runs, medoid selection.
    t0 = std::chrono::steady_clock::now();
    const ProjectionSet dset =
        ProjectionSet::from_alpha(alpha_hat, config.sgd.proj_c, config.sgd.proj_b, config.sgd.a_min);
    const Eigen::Index trace_rows = std::min<Eigen::Index>(mapped_psi_batch.rows(), 512);
    const Batch trace_batch = mapped_psi_batch.topRows(trace_rows);
    SgdConfig sgd_config{config.sgd.T, config.sgd.lambda, 1, 0};

    std::vector<GaussianParams> runs;
    std::vector<std::vector<TracePoint>> traces;
    Eigen::Index clamp_events = 0;
    for (int run = 0; run < config.sgd.K; ++run) {
        Rng rng_run = Rng::substream(config.seed, static_cast<std::uint64_t>(Stage::Sgd),
                                     static_cast<std::uint64_t>(run));
        auto sampler = [&]() {
            return forward.apply(truncated_sample_one(truth.params, truth.set, rng_run, cap));
        };
        SgdRunResult result = sgd_run(sgd_config, alpha_hat, sampler, psi_k, mapped_mu_tilde,
                                      mapped_sigma_tilde, dset, &trace_batch);
        clamp_events += result.clamp_events;
        traces.push_back(std::move(result.trace));
        runs.push_back(std::move(result.params));
    }
    const GaussianParams mapped_estimate = median_of_runs(runs);
    const double t_sgd = detail::seconds_since(t0);

    // Back to original coordinates.
    t0 = std::chrono::steady_clock::now();
    const Eigen::VectorXd mu_hat = inverse.apply(mapped_estimate.mean());
    const Eigen::MatrixXd sigma_hat =
        inverse.A * mapped_estimate.covariance() * inverse.A.transpose();
    EstimationReport report(GaussianParams(mu_hat, sigma_hat), mapped_estimate, psi_k, forward,
                            inverse);
    report.alpha_hat = alpha_hat;
    report.mu_tilde = mu_tilde;
    report.sigma_tilde = sigma_tilde;
    for (int degree = 0; degree <= config.hermite_degree; ++degree)
        report.per_degree.emplace_back(degree, psi_k.coefficient_mass_at_degree(degree));
    report.traces = std::move(traces);
    report.clamp_events = clamp_events;
    report.psi_samples = psi_batch.points;
    report.mu_error = (mu_hat - config.true_mean).norm();
    report.sigma_error = (sigma_hat - config.true_covariance).norm();
    report.timings.recovery = detail::seconds_since(t0);
    report.timings.sampling = t_sampling;
    report.timings.moments = t_moments;
    report.timings.psi = t_psi;
    report.timings.sgd = t_sgd;
    report.timings.total = detail::seconds_since(t_start);
    return report;
}

// Disagreement mass of the recovered set against the generative truth.
inline void attach_symdiff(EstimationReport& report, const ExperimentConfig& config,
                           Eigen::Index n_eval = 10000) {
    Rng rng = Rng::substream(config.seed, static_cast<std::uint64_t>(Stage::Eval));
    const RecoveredSet recovered = report.recovered_set();
    const MonteCarloEstimate result =
        symdiff_mass(recovered, config.set, config.truth(), rng, n_eval, &report.forward);
    report.symdiff = result.estimate;
    report.symdiff_std_error = result.std_error;
}

// Runs are concatenated in order; the iteration column restarting marks a
// run boundary.
inline void write_trace_csv(const std::vector<std::vector<TracePoint>>& traces,
                            const std::string& path) {
    std::ofstream os(path);
    if (!os) throw validation_error("write_trace_csv: cannot open " + path);
    os << "iteration,objective,clamp_count\n";
    for (const auto& trace : traces)
        for (const TracePoint& point : trace)
            os << point.iteration << "," << format_double(point.objective) << ","
               << point.clamp_count << "\n";
}

// --- Figure-1 style experiment -------------------------------------------

// Hazard function of the standard normal: lambda(gamma) = phi(gamma)/(1 - Phi(gamma)),
// the conditional mean shift of a unit Gaussian truncated to {x >= gamma}.
inline double normal_hazard(double gamma) {
    const double log_phi = -0.5 * gamma * gamma - 0.5 * kLogTwoPi;
    const double tail = normal_cdf(-gamma);
    return std::exp(log_phi) / tail;
}

// Halfspace {n.x >= c} through direction `dir` whose conditional mean under
// N(mu, I) sits at mu + shift. Solves hazard(gamma) = |shift| by bisection.
inline SetOracle halfspace_for_conditional_shift(const Eigen::VectorXd& mu,
                                                 const Eigen::VectorXd& shift) {
    const double target = shift.norm();
    if (target <= 0.0) throw validation_error("halfspace_for_conditional_shift: zero shift");
    const Eigen::VectorXd dir = shift / target;
    double lo = -8.0, hi = 8.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (normal_hazard(mid) < target) lo = mid; else hi = mid;
    }
    const double gamma = 0.5 * (lo + hi);
    return SetOracle::halfspace(dir, dir.dot(mu) + gamma);
}

struct Fig1Preset {
    Eigen::VectorXd true_mean;
    Eigen::VectorXd conditional_mean;  // calibration target for the halfspace
};

inline Fig1Preset fig1_preset(const std::string& name) {
    if (name == "A")
        return {Eigen::Vector2d(0.1, 0.78), Eigen::Vector2d(0.48, 0.32)};
    if (name == "B")
        return {Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(0.47, 0.27)};
    throw validation_error("fig1_preset: unknown preset '" + name + "'");
}

struct Fig1Result {
    std::vector<int> degrees;
    std::vector<GaussianParams> estimates;
    std::vector<double> errors;
    Eigen::VectorXd true_mean;
    Eigen::VectorXd conditional_mean;
    Batch samples;
    double alpha_hat = 0.0;
};

// Runs the pipeline at degrees {1, 2, 3, 4, 6} on an isotropic Gaussian cut
// by a halfspace calibrated so the conditional mean matches the preset.
inline Fig1Result run_fig1(const std::string& preset_name, std::uint64_t seed,
                           Eigen::Index n_samples = 100000, const SgdSettings& sgd = SgdSettings{}) {
    const Fig1Preset preset = fig1_preset(preset_name);
    ExperimentConfig config;
    config.dimension = 2;
    config.true_mean = preset.true_mean;
    config.true_covariance = Eigen::MatrixXd::Identity(2, 2);
    config.set = halfspace_for_conditional_shift(preset.true_mean,
                                                 preset.conditional_mean - preset.true_mean);
    config.n_psi = n_samples;
    config.n_moments = n_samples;
    config.sgd = sgd;
    config.transform = "translate";
    config.seed = seed;
    config.seed_set = true;

    Fig1Result result;
    result.true_mean = preset.true_mean;
    result.conditional_mean = preset.conditional_mean;
    for (int k : {1, 2, 3, 4, 6}) {
        config.hermite_degree = k;
        EstimationReport report = run_estimate(config);
        result.degrees.push_back(k);
        result.errors.push_back((report.estimate.mean() - preset.true_mean).norm());
        result.estimates.push_back(std::move(report.estimate));
        result.alpha_hat = report.alpha_hat;
    }
    Rng rng_points = Rng::substream(seed, static_cast<std::uint64_t>(Stage::Eval));
    const TruncatedGaussian truth(config.truth(), config.set);
    result.samples = truncated_sample(truth, rng_points, 2000, config.max_attempts()).points;
    return result;
}

// --- Lower-bound experiment ------------------------------------------------

struct LowerBoundRow {
    Eigen::Index m = 0;
    double mean_error = 0.0;
    double error_std_error = 0.0;
    double mean_collisions = 0.0;
    double collision_rate = 0.0;   // fraction of trials with at least one collision
    double birthday_prediction = 0.0;
};

// Probability of at least one collision when m points land uniformly in
// 2^d bins.
inline double birthday_collision_probability(Eigen::Index m, int d) {
    const double bins = std::pow(2.0, d);
    if (static_cast<double>(m) > bins) return 1.0;
    double no_collision = 1.0;
    for (Eigen::Index i = 1; i < m; ++i) no_collision *= 1.0 - static_cast<double>(i) / bins;
    return 1.0 - no_collision;
}

// Number of samples beyond the first in each occupied orthant bin.
inline Eigen::Index count_subcube_collisions(const Batch& samples, int d) {
    std::vector<Eigen::Index> counts(std::size_t{1} << d, 0);
    Eigen::Index collisions = 0;
    for (Eigen::Index i = 0; i < samples.rows(); ++i) {
        std::size_t pattern = 0;
        for (int c = 0; c < d; ++c)
            if (samples(i, c + 1) >= 0.0) pattern |= (std::size_t{1} << c);
        if (counts[pattern] > 0) ++collisions;
        ++counts[pattern];
    }
    return collisions;
}

// Batch-only pipeline estimate used by the lower-bound experiment: moments,
// whitening, psi at degree k, then SGD resampling the batch uniformly. The
// estimator must be a function of the m observed points alone, so the SGD
// never draws fresh samples here.
inline Eigen::VectorXd estimate_mean_from_batch(const TruncatedBatch& batch, int k,
                                                Eigen::Index sgd_T, Rng& rng) {
    const auto [mu_tilde, sigma_tilde] = conditional_moments(batch.points);
    const WhiteningMaps maps = whitening_transform(mu_tilde, sigma_tilde);
    const Batch mapped = maps.forward.apply_batch(batch.points);
    const HermiteExpansion psi_k = estimate_coefficients(mapped, k);
    const auto [mapped_mu, mapped_sigma] = conditional_moments(mapped);
    const double alpha = std::max(batch.acceptance_rate, 1e-6);
    const ProjectionSet dset = ProjectionSet::from_alpha(alpha);
    SgdConfig config{sgd_T, 0.0, 1, 0};
    auto sampler = [&]() {
        const Eigen::Index row = static_cast<Eigen::Index>(rng.uniform() * static_cast<double>(mapped.rows()));
        return mapped.row(std::min(row, mapped.rows() - 1)).transpose().eval();
    };
    const SgdRunResult result =
        sgd_run(config, alpha, sampler, psi_k, mapped_mu, mapped_sigma, dset);
    return maps.inverse.apply(result.params.mean());
}

// One trial per (m, t): draw S_+/S_- with fresh thresholds, then estimate
// the mean from exactly m samples. Tiny batches fall back to the empirical
// mean (the covariance estimate is rank-deficient below d+2 points).
inline std::vector<LowerBoundRow> run_lower_bound(int d, const std::vector<Eigen::Index>& sample_sizes,
                                                  int trials, std::uint64_t seed, int small_k = 2,
                                                  Eigen::Index sgd_T = 4000) {
    if (d > 14) throw size_error("run_lower_bound: d must be <= 14");
    if (trials < 1) throw validation_error("run_lower_bound: trials must be >= 1");
    std::vector<LowerBoundRow> rows;
    for (Eigen::Index m : sample_sizes) {
        double error_sum = 0.0, error_sq_sum = 0.0, collision_sum = 0.0;
        int trials_with_collision = 0;
        for (int t = 0; t < trials; ++t) {
            Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(Stage::LowerBound),
                                     static_cast<std::uint64_t>(t) * 1000003ULL + static_cast<std::uint64_t>(m));
            const int sign = (t % 2 == 0) ? 1 : -1;
            const SetOracle set = build_lower_bound_set(d, rng, sign);
            Eigen::VectorXd mean = Eigen::VectorXd::Zero(d + 1);
            mean[0] = sign;
            const TruncatedGaussian truth(GaussianParams(mean, Eigen::MatrixXd::Identity(d + 1, d + 1)), set);
            const TruncatedBatch batch = truncated_sample(truth, rng, m, 100000);

            const Eigen::Index collisions = count_subcube_collisions(batch.points, d);
            collision_sum += static_cast<double>(collisions);
            if (collisions > 0) ++trials_with_collision;

            Eigen::VectorXd mu_hat;
            if (m < d + 3) {
                mu_hat = batch.points.colwise().mean();
            } else {
                mu_hat = estimate_mean_from_batch(batch, small_k, sgd_T, rng);
            }
            const double error = (mu_hat - mean).norm();
            error_sum += error;
            error_sq_sum += error * error;
        }
        LowerBoundRow row;
        row.m = m;
        row.mean_error = error_sum / trials;
        const double var =
            std::max(0.0, error_sq_sum / trials - row.mean_error * row.mean_error);
        row.error_std_error = std::sqrt(var / trials);
        row.mean_collisions = collision_sum / trials;
        row.collision_rate = static_cast<double>(trials_with_collision) / trials;
        row.birthday_prediction = birthday_collision_probability(m, d);
        rows.push_back(row);
    }
    return rows;
}

// --- Moment matching check -------------------------------------------------

struct MomentCheckResult {
    double distance = 0.0;
    double sigma_mc = 0.0;      // largest combined standard error across moments
    double tv_estimate = 0.0;
    double tv_std_error = 0.0;
    std::string verdict;        // "same", "different" or "inconclusive"

    nlohmann::json to_json() const {
        return {{"moment_distance", distance}, {"sigma_mc", sigma_mc},
                {"tv_estimate", tv_estimate},  {"tv_std_error", tv_std_error},
                {"verdict", verdict}};
    }
};

inline MomentCheckResult moment_check(const TruncatedGaussian& tg1, const TruncatedGaussian& tg2,
                                      int k, Eigen::Index n, std::uint64_t seed,
                                      double threshold = 1e-3) {
    Rng rng1 = Rng::substream(seed, static_cast<std::uint64_t>(Stage::MomentCheck), 1);
    Rng rng2 = Rng::substream(seed, static_cast<std::uint64_t>(Stage::MomentCheck), 2);
    const Batch b1 = truncated_sample(tg1, rng1, n, 100000).points;
    const Batch b2 = truncated_sample(tg2, rng2, n, 100000).points;
    const MomentVector m1 = empirical_moments(b1, k);
    const MomentVector m2 = empirical_moments(b2, k);

    MomentCheckResult result;
    result.distance = moment_distance(m1, m2);
    // Combined standard error per moment from second empirical moments.
    const MomentVector sq1 = empirical_moments(b1, 2 * k);
    const MomentVector sq2 = empirical_moments(b2, 2 * k);
    double worst = 0.0;
    const auto indices = enumerate_multi_indices(m1.dim, k);
    for (std::size_t j = 0; j < indices.size(); ++j) {
        MultiIndex doubled = indices[j];
        for (int c = 0; c < m1.dim; ++c) doubled.entries[static_cast<std::size_t>(c)] *= 2;
        double second1 = 0.0, second2 = 0.0;
        for (std::size_t p = 0; p < sq1.indices.size(); ++p) {
            if (sq1.indices[p] == doubled) {
                second1 = sq1.values[static_cast<Eigen::Index>(p)];
                second2 = sq2.values[static_cast<Eigen::Index>(p)];
                break;
            }
        }
        const double var1 = std::max(0.0, second1 - m1.values[static_cast<Eigen::Index>(j)] *
                                                        m1.values[static_cast<Eigen::Index>(j)]);
        const double var2 = std::max(0.0, second2 - m2.values[static_cast<Eigen::Index>(j)] *
                                                        m2.values[static_cast<Eigen::Index>(j)]);
        worst = std::max(worst, std::sqrt((var1 + var2) / static_cast<double>(n)));
    }
    result.sigma_mc = worst;

    Rng rng_tv = Rng::substream(seed, static_cast<std::uint64_t>(Stage::MomentCheck), 3);
    const MonteCarloEstimate tv =
        tv_monte_carlo(tg1, tg2, rng_tv, std::min<Eigen::Index>(n, 20000));
    result.tv_estimate = tv.estimate;
    result.tv_std_error = tv.std_error;

    // The verdict threshold never drops below the Monte Carlo noise floor:
    // identical models must read "same" at any sample size.
    if (k == 0) result.verdict = "inconclusive";
    else result.verdict =
        result.distance > std::max(threshold, 3.0 * result.sigma_mc) ? "different" : "same";
    return result;
}

}  // namespace truncgauss
