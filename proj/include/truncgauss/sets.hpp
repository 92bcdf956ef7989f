#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "truncgauss/errors.hpp"
#include "truncgauss/multi_index.hpp"
#include "truncgauss/rng.hpp"

namespace truncgauss {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// Gaussian surface area of a single halfspace.
constexpr double kHalfspaceGsa = 0.7978845608028654;  // sqrt(2/pi)

struct FullSpaceSet {};

// {x : normal . x >= offset}
struct HalfspaceSet {
    Eigen::VectorXd normal;
    double offset = 0.0;
};

struct HalfspaceIntersectionSet {
    std::vector<HalfspaceSet> parts;
};

struct AxisBoxSet {
    Eigen::VectorXd lo;
    Eigen::VectorXd hi;
};

// {x : sign * p(x) >= 0} for a sparse polynomial p of degree <= 6.
struct PolynomialThresholdSet {
    int dim = 0;
    std::vector<std::pair<MultiIndex, double>> coeffs;
    int sign = 1;
};

// The cube-with-thresholds family in R^{d+1}:
//   S_+ = [-1+delta, 0] x [-1,1]^d  union_V  [0, t_V] x G_V
// where G_V is the orthant slice of [-1,1]^d with sign pattern V over the
// last d coordinates. thresholds[pattern] stores t_V with bit i of pattern
// set iff y_i >= 0. sign=-1 mirrors the set in the first coordinate.
struct LowerBoundFamilySet {
    int d = 1;
    std::vector<double> thresholds;
    double delta = 0.0;
    int sign = 1;

    std::size_t pattern_of(const Eigen::VectorXd& y) const {
        std::size_t pattern = 0;
        for (int i = 0; i < d; ++i)
            if (y[i] >= 0.0) pattern |= (std::size_t{1} << i);
        return pattern;
    }
};

class SetOracle {
public:
    using Body = std::variant<FullSpaceSet, HalfspaceSet, HalfspaceIntersectionSet, AxisBoxSet,
                              PolynomialThresholdSet, LowerBoundFamilySet>;

    SetOracle() : body_(FullSpaceSet{}) {}

    explicit SetOracle(Body body, std::optional<double> gsa_bound = std::nullopt)
        : body_(std::move(body)), gsa_bound_(gsa_bound) {
        validate();
    }

    static SetOracle full_space() { return SetOracle(FullSpaceSet{}); }

    static SetOracle halfspace(Eigen::VectorXd normal, double offset) {
        return SetOracle(HalfspaceSet{std::move(normal), offset}, kHalfspaceGsa);
    }

    static SetOracle halfspace_intersection(std::vector<HalfspaceSet> parts) {
        return SetOracle(HalfspaceIntersectionSet{std::move(parts)});
    }

    static SetOracle axis_box(Eigen::VectorXd lo, Eigen::VectorXd hi) {
        return SetOracle(AxisBoxSet{std::move(lo), std::move(hi)});
    }

    static SetOracle polynomial_threshold(int dim, std::vector<std::pair<MultiIndex, double>> coeffs,
                                          int sign) {
        return SetOracle(PolynomialThresholdSet{dim, std::move(coeffs), sign});
    }

    static SetOracle lower_bound_family(int d, std::vector<double> thresholds, double delta,
                                        int sign = 1) {
        return SetOracle(LowerBoundFamilySet{d, std::move(thresholds), delta, sign});
    }

    const Body& body() const { return body_; }
    std::optional<double> gsa_bound() const { return gsa_bound_; }

    // 0 means any dimension (full space).
    int dim() const {
        return std::visit(
            [](const auto& s) -> int {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, FullSpaceSet>) return 0;
                else if constexpr (std::is_same_v<T, HalfspaceSet>) return static_cast<int>(s.normal.size());
                else if constexpr (std::is_same_v<T, HalfspaceIntersectionSet>)
                    return s.parts.empty() ? 0 : static_cast<int>(s.parts.front().normal.size());
                else if constexpr (std::is_same_v<T, AxisBoxSet>) return static_cast<int>(s.lo.size());
                else if constexpr (std::is_same_v<T, PolynomialThresholdSet>) return s.dim;
                else return s.d + 1;
            },
            body_);
    }

    bool contains(const Eigen::VectorXd& x) const {
        const int d = dim();
        if (d != 0 && x.size() != d)
            throw dimension_mismatch_error("SetOracle::contains: point dimension mismatch");
        return std::visit([&x](const auto& s) { return contains_impl(s, x); }, body_);
    }

    nlohmann::json to_json() const;
    static SetOracle from_json(const nlohmann::json& j);

private:
    static bool contains_impl(const FullSpaceSet&, const Eigen::VectorXd&) { return true; }

    static bool contains_impl(const HalfspaceSet& s, const Eigen::VectorXd& x) {
        return s.normal.dot(x) >= s.offset;
    }

    static bool contains_impl(const HalfspaceIntersectionSet& s, const Eigen::VectorXd& x) {
        for (const auto& part : s.parts)
            if (part.normal.dot(x) < part.offset) return false;
        return true;
    }

    static bool contains_impl(const AxisBoxSet& s, const Eigen::VectorXd& x) {
        for (Eigen::Index i = 0; i < x.size(); ++i)
            if (x[i] < s.lo[i] || x[i] > s.hi[i]) return false;
        return true;
    }

    static bool contains_impl(const PolynomialThresholdSet& s, const Eigen::VectorXd& x) {
        double value = 0.0;
        for (const auto& [V, c] : s.coeffs) {
            double term = c;
            for (int i = 0; i < s.dim; ++i)
                for (int p = 0; p < V[i]; ++p) term *= x[i];
            value += term;
        }
        return s.sign * value >= 0.0;
    }

    static bool contains_impl(const LowerBoundFamilySet& s, const Eigen::VectorXd& x) {
        const double x1 = s.sign > 0 ? x[0] : -x[0];
        for (int i = 0; i < s.d; ++i)
            if (x[i + 1] < -1.0 || x[i + 1] > 1.0) return false;
        if (x1 >= -1.0 + s.delta && x1 <= 0.0) return true;
        if (x1 < 0.0) return false;
        return x1 <= s.thresholds[s.pattern_of(x.tail(s.d))];
    }

    void validate() const {
        if (const auto* box = std::get_if<AxisBoxSet>(&body_)) {
            if (box->lo.size() != box->hi.size() || (box->lo.array() > box->hi.array()).any())
                throw validation_error("AxisBox: lo must be componentwise <= hi");
        }
        if (const auto* p = std::get_if<PolynomialThresholdSet>(&body_)) {
            if (p->sign != 1 && p->sign != -1)
                throw validation_error("PolynomialThreshold: sign must be +1 or -1");
            for (const auto& [V, c] : p->coeffs) {
                if (V.dim() != p->dim)
                    throw validation_error("PolynomialThreshold: index dimension mismatch");
                if (V.degree() > 6)
                    throw validation_error("PolynomialThreshold: degree must be <= 6");
            }
        }
        if (const auto* f = std::get_if<LowerBoundFamilySet>(&body_)) {
            if (f->d < 1 || f->d > 20)
                throw size_error("LowerBoundFamily: d must lie in [1, 20]");
            if (f->thresholds.size() != (std::size_t{1} << f->d))
                throw validation_error("LowerBoundFamily: need 2^d thresholds");
            for (double t : f->thresholds)
                if (t < 0.0 || t > 1.0)
                    throw validation_error("LowerBoundFamily: thresholds must lie in [0, 1]");
            if (f->delta < -1.0 || f->delta > 1.0)
                throw validation_error("LowerBoundFamily: delta must lie in [-1, 1]");
            if (f->sign != 1 && f->sign != -1)
                throw validation_error("LowerBoundFamily: sign must be +1 or -1");
        }
    }

    Body body_;
    std::optional<double> gsa_bound_;
};

inline nlohmann::json SetOracle::to_json() const {
    nlohmann::json j = std::visit(
        [](const auto& s) -> nlohmann::json {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, FullSpaceSet>) {
                return {{"kind", "full_space"}};
            } else if constexpr (std::is_same_v<T, HalfspaceSet>) {
                return {{"kind", "halfspace"},
                        {"normal", std::vector<double>(s.normal.data(), s.normal.data() + s.normal.size())},
                        {"offset", s.offset}};
            } else if constexpr (std::is_same_v<T, HalfspaceIntersectionSet>) {
                nlohmann::json parts = nlohmann::json::array();
                for (const auto& part : s.parts)
                    parts.push_back(
                        {{"normal", std::vector<double>(part.normal.data(), part.normal.data() + part.normal.size())},
                         {"offset", part.offset}});
                return {{"kind", "halfspace_intersection"}, {"parts", parts}};
            } else if constexpr (std::is_same_v<T, AxisBoxSet>) {
                return {{"kind", "axis_box"},
                        {"lo", std::vector<double>(s.lo.data(), s.lo.data() + s.lo.size())},
                        {"hi", std::vector<double>(s.hi.data(), s.hi.data() + s.hi.size())}};
            } else if constexpr (std::is_same_v<T, PolynomialThresholdSet>) {
                nlohmann::json coeffs = nlohmann::json::array();
                for (const auto& [V, c] : s.coeffs) coeffs.push_back({V.entries, c});
                return {{"kind", "polynomial_threshold"}, {"dim", s.dim}, {"sign", s.sign}, {"coeffs", coeffs}};
            } else {
                return {{"kind", "lower_bound_family"},
                        {"d", s.d},
                        {"thresholds", s.thresholds},
                        {"delta", s.delta},
                        {"sign", s.sign}};
            }
        },
        body_);
    if (gsa_bound_) j["gsa_bound"] = *gsa_bound_;
    return j;
}

inline SetOracle SetOracle::from_json(const nlohmann::json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    std::optional<double> gsa;
    if (j.contains("gsa_bound")) gsa = j.at("gsa_bound").get<double>();
    auto to_vec = [](const nlohmann::json& a) {
        const auto vals = a.get<std::vector<double>>();
        return Eigen::Map<const Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size())).eval();
    };
    if (kind == "full_space") return SetOracle(FullSpaceSet{}, gsa);
    if (kind == "halfspace")
        return SetOracle(HalfspaceSet{to_vec(j.at("normal")), j.at("offset").get<double>()},
                         gsa ? gsa : std::optional<double>(kHalfspaceGsa));
    if (kind == "halfspace_intersection") {
        std::vector<HalfspaceSet> parts;
        for (const auto& p : j.at("parts"))
            parts.push_back({to_vec(p.at("normal")), p.at("offset").get<double>()});
        return SetOracle(HalfspaceIntersectionSet{std::move(parts)}, gsa);
    }
    if (kind == "axis_box")
        return SetOracle(AxisBoxSet{to_vec(j.at("lo")), to_vec(j.at("hi"))}, gsa);
    if (kind == "polynomial_threshold") {
        PolynomialThresholdSet s;
        s.dim = j.at("dim").get<int>();
        s.sign = j.at("sign").get<int>();
        for (const auto& c : j.at("coeffs"))
            s.coeffs.emplace_back(MultiIndex(c[0].get<std::vector<int>>()), c[1].get<double>());
        return SetOracle(std::move(s), gsa);
    }
    if (kind == "lower_bound_family")
        return SetOracle(LowerBoundFamilySet{j.at("d").get<int>(), j.at("thresholds").get<std::vector<double>>(),
                                             j.at("delta").get<double>(), j.value("sign", 1)},
                         gsa);
    throw validation_error("SetOracle::from_json: unknown kind '" + kind + "'");
}

// rho-correlated standard normal pair: z = (1-rho) x + sqrt(1-(1-rho)^2) y
// with independent y, so Cov(x, z) = (1-rho) I and both marginals are N(0, I).
struct CorrelatedPair {
    Eigen::VectorXd x;
    Eigen::VectorXd z;
    double rho;
};

inline CorrelatedPair draw_correlated_pair(int d, double rho, Rng& rng) {
    if (rho <= 0.0 || rho >= 1.0)
        throw validation_error("draw_correlated_pair: rho must lie in (0, 1)");
    Eigen::VectorXd x(d), y(d);
    for (int i = 0; i < d; ++i) x[i] = rng.normal();
    for (int i = 0; i < d; ++i) y[i] = rng.normal();
    const double keep = 1.0 - rho;
    const double fresh = std::sqrt(1.0 - keep * keep);
    return {x, keep * x + fresh * y, rho};
}

// Monte Carlo noise sensitivity 2 E[1_S(x) 1_{S^c}(z)] over correlated pairs.
inline double noise_sensitivity(const SetOracle& set, double rho, Rng& rng, Eigen::Index n, int dim = 0) {
    int d = set.dim();
    if (d == 0) d = dim;
    if (d <= 0) throw validation_error("noise_sensitivity: ambient dimension required");
    Eigen::Index straddles = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const CorrelatedPair pair = draw_correlated_pair(d, rho, rng);
        if (set.contains(pair.x) && !set.contains(pair.z)) ++straddles;
    }
    return 2.0 * static_cast<double>(straddles) / static_cast<double>(n);
}

// Inverse-CDF draw from F(t) = 1 - e^{-2t} on [0, 1) with an atom at 1.
inline double draw_lower_bound_threshold(Rng& rng) {
    const double u = rng.uniform();
    if (u >= 1.0 - std::exp(-2.0)) return 1.0;
    return -std::log1p(-u) / 2.0;
}

// Target mass of S_+ under the sampling Gaussian N(e_1, I_{d+1}): the
// left-slab mass at delta = 0 equals the expected right-sliver mass, so
//   c(d) = 2 (Phi(-1) - Phi(-2)) (2 Phi(1) - 1)^d.
inline double lower_bound_target_mass(int d) {
    const double slab = normal_cdf(-1.0) - normal_cdf(-2.0);
    const double cube_side = 2.0 * normal_cdf(1.0) - 1.0;
    return 2.0 * slab * std::pow(cube_side, d);
}

// Draws the 2^d thresholds, then calibrates delta by bisection on the mass
// of S_+ over a fixed-seed Monte Carlo pool until the realized mass matches
// lower_bound_target_mass(d) within 1e-3.
inline SetOracle build_lower_bound_set(int d, Rng& rng, int sign = 1,
                                       Eigen::Index calibration_n = 200000) {
    if (d < 1) throw validation_error("build_lower_bound_set: d must be >= 1");
    if (d > 20) throw size_error("build_lower_bound_set: d must be <= 20 (2^d thresholds)");
    std::vector<double> thresholds(std::size_t{1} << d);
    for (double& t : thresholds) t = draw_lower_bound_threshold(rng);

    // Pool from N(sign * e_1, I_{d+1}) under a fixed calibration seed; the
    // mass is then a deterministic monotone function of delta.
    Rng cal_rng(0x7bc1ba11u + static_cast<std::uint64_t>(d));
    Eigen::MatrixXd pool(calibration_n, d + 1);
    for (Eigen::Index i = 0; i < calibration_n; ++i) {
        for (int j = 0; j <= d; ++j) pool(i, j) = cal_rng.normal();
        pool(i, 0) += sign;
    }
    const double target = lower_bound_target_mass(d);
    auto mass_at = [&](double delta) {
        const SetOracle candidate(LowerBoundFamilySet{d, thresholds, delta, sign});
        Eigen::Index inside = 0;
        for (Eigen::Index i = 0; i < calibration_n; ++i) {
            if (candidate.contains(pool.row(i).transpose())) ++inside;
        }
        return static_cast<double>(inside) / static_cast<double>(calibration_n);
    };
    double lo = -1.0, hi = 1.0;
    double delta = 0.0;
    for (int iter = 0; iter < 60; ++iter) {
        delta = 0.5 * (lo + hi);
        const double mass = mass_at(delta);
        if (std::abs(mass - target) <= 1e-3) break;
        if (mass > target) lo = delta; else hi = delta;
    }
    return SetOracle::lower_bound_family(d, std::move(thresholds), delta, sign);
}

}  // namespace truncgauss
