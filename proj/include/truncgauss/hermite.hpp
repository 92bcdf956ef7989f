#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "truncgauss/errors.hpp"
#include "truncgauss/multi_index.hpp"

namespace truncgauss {

// Normalized probabilists' Hermite polynomial He_n(x)/sqrt(n!), evaluated by
// the stable normalized recurrence
//   H_{n+1}(x) = (x H_n(x) - sqrt(n) H_{n-1}(x)) / sqrt(n+1).
inline double hermite_1d(int n, double x) {
    if (n < 0) throw validation_error("hermite_1d: degree must be >= 0");
    double prev = 0.0;  // H_{-1}
    double cur = 1.0;   // H_0
    for (int i = 0; i < n; ++i) {
        const double next = (x * cur - std::sqrt(static_cast<double>(i)) * prev) /
                            std::sqrt(static_cast<double>(i + 1));
        prev = cur;
        cur = next;
    }
    return cur;
}

// H_0(x) .. H_k(x) in one sweep.
inline void hermite_1d_all(int k, double x, double* out) {
    out[0] = 1.0;
    if (k == 0) return;
    out[1] = x;
    for (int i = 1; i < k; ++i) {
        out[i + 1] = (x * out[i] - std::sqrt(static_cast<double>(i)) * out[i - 1]) /
                     std::sqrt(static_cast<double>(i + 1));
    }
}

// d-variate normalized Hermite polynomial H_V(x) = prod_i H_{v_i}(x_i).
inline double hermite_multi(const MultiIndex& V, const Eigen::VectorXd& x) {
    if (V.dim() != x.size())
        throw dimension_mismatch_error("hermite_multi: index/point dimension mismatch");
    double prod = 1.0;
    for (int i = 0; i < V.dim(); ++i) prod *= hermite_1d(V[i], x[i]);
    return prod;
}

// Degree-k expansion sum_{|V|<=k} c_V H_V in the graded-lex coefficient
// order of enumerate_multi_indices. Coefficients are stored densely; the
// non-negativity clamp used when an expansion acts as psi_k is applied by
// the caller (psi.hpp), not here.
class HermiteExpansion {
public:
    HermiteExpansion(int dim, int max_degree)
        : dim_(dim),
          max_degree_(max_degree),
          indices_(enumerate_multi_indices(dim, max_degree)),
          coeffs_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(indices_.size()))) {}

    HermiteExpansion(int dim, int max_degree, Eigen::VectorXd coeffs)
        : HermiteExpansion(dim, max_degree) {
        if (coeffs.size() != coeffs_.size())
            throw validation_error("HermiteExpansion: coefficient count mismatch");
        coeffs_ = std::move(coeffs);
    }

    int dim() const { return dim_; }
    int max_degree() const { return max_degree_; }
    const std::vector<MultiIndex>& indices() const { return indices_; }
    const Eigen::VectorXd& coefficients() const { return coeffs_; }

    double coefficient(const MultiIndex& V) const {
        for (std::size_t i = 0; i < indices_.size(); ++i)
            if (indices_[i] == V) return coeffs_[static_cast<Eigen::Index>(i)];
        throw validation_error("HermiteExpansion: index not in expansion");
    }

    void set_coefficient(std::size_t pos, double value) {
        coeffs_[static_cast<Eigen::Index>(pos)] = value;
    }

    // Plain (unclamped) value sum c_V H_V(x).
    double evaluate(const Eigen::VectorXd& x) const {
        if (x.size() != dim_)
            throw dimension_mismatch_error("HermiteExpansion::evaluate: dimension mismatch");
        // Per-coordinate 1-D values H_0..H_k, then per-index products.
        table_.resize(static_cast<std::size_t>(dim_) * (max_degree_ + 1));
        for (int i = 0; i < dim_; ++i)
            hermite_1d_all(max_degree_, x[i], table_.data() + static_cast<std::size_t>(i) * (max_degree_ + 1));
        double sum = 0.0;
        for (std::size_t j = 0; j < indices_.size(); ++j) {
            double prod = coeffs_[static_cast<Eigen::Index>(j)];
            if (prod == 0.0) continue;
            const MultiIndex& V = indices_[j];
            for (int i = 0; i < dim_; ++i)
                prod *= table_[static_cast<std::size_t>(i) * (max_degree_ + 1) + V[i]];
            sum += prod;
        }
        return sum;
    }

    // Mass sum of squared coefficients at exactly the given total degree.
    double coefficient_mass_at_degree(int degree) const {
        double mass = 0.0;
        for (std::size_t j = 0; j < indices_.size(); ++j)
            if (indices_[j].degree() == degree)
                mass += coeffs_[static_cast<Eigen::Index>(j)] * coeffs_[static_cast<Eigen::Index>(j)];
        return mass;
    }

    nlohmann::json to_json() const {
        nlohmann::json coeffs = nlohmann::json::array();
        for (std::size_t j = 0; j < indices_.size(); ++j)
            coeffs.push_back({indices_[j].entries, coeffs_[static_cast<Eigen::Index>(j)]});
        return {{"dim", dim_}, {"max_degree", max_degree_}, {"coeffs", coeffs}};
    }

    static HermiteExpansion from_json(const nlohmann::json& j) {
        HermiteExpansion e(j.at("dim").get<int>(), j.at("max_degree").get<int>());
        const auto& coeffs = j.at("coeffs");
        if (coeffs.size() != e.indices_.size())
            throw validation_error("HermiteExpansion::from_json: coefficient count mismatch");
        for (std::size_t p = 0; p < coeffs.size(); ++p) {
            const MultiIndex V(coeffs[p][0].get<std::vector<int>>());
            if (!(V == e.indices_[p]))
                throw validation_error("HermiteExpansion::from_json: indices out of order");
            e.coeffs_[static_cast<Eigen::Index>(p)] = coeffs[p][1].get<double>();
        }
        return e;
    }

private:
    int dim_;
    int max_degree_;
    std::vector<MultiIndex> indices_;
    Eigen::VectorXd coeffs_;
    mutable std::vector<double> table_;
};

// Gaussian noise operator T_rho on an expansion: scales c_V by rho^|V|.
inline HermiteExpansion noise_operator_apply(const HermiteExpansion& expansion, double rho) {
    if (rho < 0.0 || rho > 1.0)
        throw validation_error("noise_operator_apply: rho must lie in [0, 1]");
    Eigen::VectorXd scaled = expansion.coefficients();
    const auto& indices = expansion.indices();
    for (std::size_t j = 0; j < indices.size(); ++j)
        scaled[static_cast<Eigen::Index>(j)] *= std::pow(rho, indices[j].degree());
    return HermiteExpansion(expansion.dim(), expansion.max_degree(), std::move(scaled));
}

}  // namespace truncgauss
