// Command-line driver for the truncated-Gaussian estimation experiments.
//
// Subcommands: estimate, recover-set, fig1, lower-bound, moment-check,
// tournament. Every command takes --config <json>, an optional --seed
// override and an --out directory; remaining --path.to.leaf value pairs
// override individual config fields. Exit codes: 0 success, 2 validation
// error, 3 numerical failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "truncgauss/identify.hpp"
#include "truncgauss/io.hpp"
#include "truncgauss/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw truncgauss::validation_error("cannot open config file: " + path);
    json j;
    try {
        is >> j;
    } catch (const json::parse_error& e) {
        throw truncgauss::validation_error(std::string("config parse error: ") + e.what());
    }
    return j;
}

// Applies dotted-path overrides onto the config document; accepts both
// "--a.b.c value" and "--a.b.c=value".
void apply_overrides(json& config, const std::vector<std::string>& extras) {
    std::vector<std::pair<std::string, std::string>> overrides;
    for (std::size_t i = 0; i < extras.size(); ++i) {
        std::string path = extras[i];
        if (path.rfind("--", 0) != 0)
            throw truncgauss::validation_error("expected --path.to.field, got: " + path);
        path = path.substr(2);
        std::string value;
        const std::size_t equals = path.find('=');
        if (equals != std::string::npos) {
            value = path.substr(equals + 1);
            path = path.substr(0, equals);
        } else {
            if (i + 1 >= extras.size())
                throw truncgauss::validation_error("missing value for override --" + path);
            value = extras[++i];
        }
        overrides.emplace_back(std::move(path), std::move(value));
    }
    for (const auto& [path, raw] : overrides) {
        json* node = &config;
        std::size_t start = 0;
        while (true) {
            const std::size_t dot = path.find('.', start);
            const std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
            if (dot == std::string::npos) {
                json value;
                try {
                    value = json::parse(raw);
                } catch (const json::parse_error&) {
                    value = raw;
                }
                (*node)[key] = value;
                break;
            }
            node = &(*node)[key];
            start = dot + 1;
        }
    }
}

void write_json(const json& j, const fs::path& path) {
    std::ofstream os(path);
    if (!os) throw truncgauss::validation_error("cannot open output file: " + path.string());
    os << j.dump(2) << "\n";
}

fs::path prepare_out_dir(const std::string& out) {
    const fs::path dir = out.empty() ? fs::path(".") : fs::path(out);
    fs::create_directories(dir);
    return dir;
}

int cmd_estimate(const json& config_json, const std::string& out, bool with_set_recovery) {
    truncgauss::ExperimentConfig config = truncgauss::ExperimentConfig::from_json(config_json);
    truncgauss::EstimationReport report = truncgauss::run_estimate(config);
    if (with_set_recovery)
        truncgauss::attach_symdiff(report, config, config_json.value("n_symdiff", 10000));

    const fs::path dir = prepare_out_dir(out);
    json out_json = report.to_json();
    out_json["config"] = config.to_json();
    out_json["trace_file"] = "trace.csv";
    if (with_set_recovery) out_json["recovered_set"] = report.recovered_set().to_json();
    write_json(out_json, dir / "report.json");
    truncgauss::write_trace_csv(report.traces, (dir / "trace.csv").string());
    if (config.dump_samples) {
        truncgauss::write_batch_csv(report.psi_samples, (dir / "samples.csv").string());
        truncgauss::write_batch_binary(report.psi_samples, (dir / "samples.bin").string());
    }

    if (with_set_recovery) {
        // Labeled point grid for external plotting.
        const double radius = config_json.value("grid_radius", 3.0);
        const int steps = config_json.value("grid_steps", 61);
        std::ofstream os(dir / "points.csv");
        os << "x0,x1,label\n";
        if (config.dimension == 2) {
            const truncgauss::RecoveredSet recovered = report.recovered_set();
            for (int i = 0; i < steps; ++i) {
                for (int j = 0; j < steps; ++j) {
                    Eigen::Vector2d x(-radius + 2.0 * radius * i / (steps - 1),
                                      -radius + 2.0 * radius * j / (steps - 1));
                    const bool inside = recovered.classify(report.forward.apply(x));
                    os << truncgauss::format_double(x[0]) << "," << truncgauss::format_double(x[1])
                       << "," << (inside ? 1 : 0) << "\n";
                }
            }
        }
    }
    std::cout << "mu_hat = [" << report.estimate.mean().transpose() << "], alpha_hat = "
              << report.alpha_hat << "\n";
    return 0;
}

int cmd_fig1(const json& config_json, const std::string& out) {
    const std::string preset = config_json.value("preset", "A");
    if (!config_json.contains("seed")) throw truncgauss::validation_error("fig1: seed is mandatory");
    const std::uint64_t seed = config_json.at("seed").get<std::uint64_t>();
    const Eigen::Index n = config_json.value("n_samples", 100000);
    truncgauss::SgdSettings sgd;
    if (config_json.contains("sgd")) sgd = truncgauss::SgdSettings::from_json(config_json.at("sgd"));

    const truncgauss::Fig1Result result = truncgauss::run_fig1(preset, seed, n, sgd);

    const fs::path dir = prepare_out_dir(out);
    json degrees = json::array();
    for (std::size_t i = 0; i < result.degrees.size(); ++i) {
        degrees.push_back({{"k", result.degrees[i]},
                           {"mu_hat", {result.estimates[i].mean()[0], result.estimates[i].mean()[1]}},
                           {"error", result.errors[i]}});
    }
    write_json({{"preset", preset},
                {"true_mean", {result.true_mean[0], result.true_mean[1]}},
                {"conditional_mean", {result.conditional_mean[0], result.conditional_mean[1]}},
                {"alpha_hat", result.alpha_hat},
                {"per_degree", degrees},
                {"seed", seed}},
               dir / "report.json");

    std::ofstream summary(dir / "summary.csv");
    summary << "k,mu_hat_0,mu_hat_1,error\n";
    for (std::size_t i = 0; i < result.degrees.size(); ++i)
        summary << result.degrees[i] << "," << truncgauss::format_double(result.estimates[i].mean()[0])
                << "," << truncgauss::format_double(result.estimates[i].mean()[1]) << ","
                << truncgauss::format_double(result.errors[i]) << "\n";

    std::ofstream points(dir / "points.csv");
    points << "x0,x1,kind\n";
    for (Eigen::Index i = 0; i < result.samples.rows(); ++i)
        points << truncgauss::format_double(result.samples(i, 0)) << ","
               << truncgauss::format_double(result.samples(i, 1)) << ",sample\n";
    points << truncgauss::format_double(result.true_mean[0]) << ","
           << truncgauss::format_double(result.true_mean[1]) << ",true_mean\n";
    points << truncgauss::format_double(result.conditional_mean[0]) << ","
           << truncgauss::format_double(result.conditional_mean[1]) << ",conditional_mean\n";
    for (std::size_t i = 0; i < result.degrees.size(); ++i)
        points << truncgauss::format_double(result.estimates[i].mean()[0]) << ","
               << truncgauss::format_double(result.estimates[i].mean()[1]) << ",estimate_k"
               << result.degrees[i] << "\n";

    std::cout << "fig1 preset " << preset << ": error at k=6 " << result.errors.back() << "\n";
    return 0;
}

int cmd_lower_bound(const json& config_json, const std::string& out) {
    if (!config_json.contains("seed"))
        throw truncgauss::validation_error("lower-bound: seed is mandatory");
    const int d = config_json.value("d", 8);
    const auto sizes_in = config_json.value("sample_sizes", std::vector<std::int64_t>{8, 2048});
    std::vector<Eigen::Index> sizes(sizes_in.begin(), sizes_in.end());
    const int trials = config_json.value("trials", 50);
    const int small_k = config_json.value("small_k", 2);
    const Eigen::Index sgd_T = config_json.value("sgd_T", 4000);
    const std::uint64_t seed = config_json.at("seed").get<std::uint64_t>();

    const auto rows = truncgauss::run_lower_bound(d, sizes, trials, seed, small_k, sgd_T);

    const fs::path dir = prepare_out_dir(out);
    std::ofstream summary(dir / "summary.csv");
    summary << "m,mean_error,error_std_error,mean_collisions,collision_rate,birthday_prediction\n";
    json rows_json = json::array();
    for (const auto& row : rows) {
        summary << row.m << "," << truncgauss::format_double(row.mean_error) << ","
                << truncgauss::format_double(row.error_std_error) << ","
                << truncgauss::format_double(row.mean_collisions) << ","
                << truncgauss::format_double(row.collision_rate) << ","
                << truncgauss::format_double(row.birthday_prediction) << "\n";
        rows_json.push_back({{"m", row.m},
                             {"mean_error", row.mean_error},
                             {"error_std_error", row.error_std_error},
                             {"mean_collisions", row.mean_collisions},
                             {"collision_rate", row.collision_rate},
                             {"birthday_prediction", row.birthday_prediction}});
    }
    write_json({{"d", d}, {"trials", trials}, {"small_k", small_k}, {"seed", seed}, {"rows", rows_json}},
               dir / "report.json");
    for (const auto& row : rows)
        std::cout << "m=" << row.m << " mean_error=" << row.mean_error
                  << " collision_rate=" << row.collision_rate << "\n";
    return 0;
}

truncgauss::TruncatedGaussian truncated_from_json(const json& j) {
    return truncgauss::TruncatedGaussian(truncgauss::GaussianParams::from_json(j.at("true_params")),
                                         truncgauss::SetOracle::from_json(j.at("set")));
}

int cmd_moment_check(const json& config_json, const std::string& out) {
    if (!config_json.contains("seed"))
        throw truncgauss::validation_error("moment-check: seed is mandatory");
    const auto tg1 = truncated_from_json(config_json.at("first"));
    const auto tg2 = truncated_from_json(config_json.at("second"));
    const int k = config_json.value("k", 6);
    const Eigen::Index n = config_json.value("n", 100000);
    const double threshold = config_json.value("threshold", 1e-3);
    const std::uint64_t seed = config_json.at("seed").get<std::uint64_t>();

    const truncgauss::MomentCheckResult result =
        truncgauss::moment_check(tg1, tg2, k, n, seed, threshold);

    const fs::path dir = prepare_out_dir(out);
    json j = result.to_json();
    j["k"] = k;
    j["n"] = n;
    j["threshold"] = threshold;
    j["seed"] = seed;
    write_json(j, dir / "report.json");
    std::cout << "moment distance " << result.distance << " -> " << result.verdict << "\n";
    return 0;
}

int cmd_tournament(const json& config_json, const std::string& out) {
    if (!config_json.contains("seed"))
        throw truncgauss::validation_error("tournament: seed is mandatory");
    const std::uint64_t seed = config_json.at("seed").get<std::uint64_t>();
    const auto x = truncated_from_json(config_json.at("x"));
    const Eigen::Index n_data = config_json.value("n_data", 20000);

    truncgauss::Rng rng =
        truncgauss::Rng::substream(seed, static_cast<std::uint64_t>(truncgauss::Stage::Tournament));
    const truncgauss::Batch data = truncgauss::truncated_sample(x, rng, n_data, 100000).points;

    std::vector<truncgauss::SetOracle> sets;
    if (config_json.contains("sets"))
        for (const auto& s : config_json.at("sets")) sets.push_back(truncgauss::SetOracle::from_json(s));
    if (config_json.value("include_erm_box", false))
        sets.push_back(truncgauss::erm_min_mass_box(data, x.params));
    if (sets.empty()) sets.push_back(truncgauss::SetOracle::full_space());

    const auto& grid = config_json.at("grid");
    std::vector<truncgauss::Hypothesis> hypotheses = truncgauss::grid_hypotheses(
        x.params.dim(), grid.at("radius").get<double>(), grid.at("step").get<double>(),
        grid.at("sigma_grid").get<std::vector<double>>(), sets, rng);

    truncgauss::TournamentConfig tconfig;
    tconfig.eps = config_json.value("eps", 0.1);
    tconfig.delta = config_json.value("delta", 0.05);
    tconfig.budget_constant = config_json.value("budget_constant", 8.0);
    const truncgauss::TournamentReport report = truncgauss::tournament(data, hypotheses, tconfig, rng);

    const fs::path dir = prepare_out_dir(out);
    json hyp_json = json::array();
    for (const auto& h : hypotheses)
        hyp_json.push_back({{"params", h.params.to_json()}, {"set", h.set.to_json()},
                            {"alpha_hat", h.alpha_hat}});
    json j = report.to_json();
    j["hypotheses"] = hyp_json;
    j["seed"] = seed;
    write_json(j, dir / "report.json");
    if (report.winner)
        std::cout << "winner: hypothesis " << *report.winner << "\n";
    else
        std::cout << "tournament declared failure\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Truncated Gaussian estimation with unknown truncation set"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    std::uint64_t seed_override = 0;
    bool seed_given = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON config file")->required();
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option_function<std::uint64_t>(
            "--seed", [&](std::uint64_t s) { seed_override = s; seed_given = true; },
            "master seed override");
        sub->allow_extras();
    };

    CLI::App* estimate = app.add_subcommand("estimate", "run the three-stage estimation pipeline");
    CLI::App* recover = app.add_subcommand("recover-set", "estimate, then recover the truncation set");
    CLI::App* fig1 = app.add_subcommand("fig1", "per-degree mean recovery on the halfspace presets");
    CLI::App* lower = app.add_subcommand("lower-bound", "2^{d/2} sample-complexity demonstration");
    CLI::App* moment = app.add_subcommand("moment-check", "moment-distance verdict for two models");
    CLI::App* tour = app.add_subcommand("tournament", "pairwise density tournament over a grid");
    for (CLI::App* sub : {estimate, recover, fig1, lower, moment, tour}) add_common(sub);

    CLI11_PARSE(app, argc, argv);

    try {
        CLI::App* sub = app.get_subcommands().front();
        json config = load_config(config_path);
        apply_overrides(config, sub->remaining());
        if (seed_given) config["seed"] = seed_override;

        if (sub == estimate) return cmd_estimate(config, out_dir, false);
        if (sub == recover) return cmd_estimate(config, out_dir, true);
        if (sub == fig1) return cmd_fig1(config, out_dir);
        if (sub == lower) return cmd_lower_bound(config, out_dir);
        if (sub == moment) return cmd_moment_check(config, out_dir);
        if (sub == tour) return cmd_tournament(config, out_dir);
        return 2;
    } catch (const truncgauss::validation_error& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const truncgauss::numerical_error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
