#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qre/core/error.hpp"
#include "qre/model.hpp"

namespace qre {

class CatalogError : public Error {
public:
    enum class Kind { unknown_model, invalid_param };
    CatalogError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

struct CatalogParams {
    double lambda = 1.0;
    double mu = 1.0;
    double nu = 1.0;     // replenishment rate
    double gamma = 1.0;  // ageing rate; on->off rate for the on-off models
    double eta = 1.0;    // off->on rate for the on-off models
    int b = 1;           // base stock level
    // Replaces the constant (lambda, mu) pair when set.
    std::optional<RateFamily> rates;
};

inline const std::vector<std::string>& catalog_names() {
    static const std::vector<std::string> names = {"mm1_plain",    "base_stock",       "onoff_a",
                                                   "onoff_b",      "perishable_o",     "perishable_minus",
                                                   "perishable_plus"};
    return names;
}

namespace detail {

inline void require(bool ok, const std::string& msg) {
    if (!ok) throw CatalogError(CatalogError::Kind::invalid_param, msg);
}

inline std::vector<std::string> inventory_labels(int b) {
    std::vector<std::string> out;
    for (int k = 0; k <= b; ++k) out.push_back(std::to_string(k));
    return out;
}

// Inventory generator with replenishment nu (k -> k+1) and a perishing rate
// loss(k) (k -> k-1).
template <class Loss>
Matrix inventory_generator(int b, double nu, Loss loss) {
    const std::size_t m = static_cast<std::size_t>(b) + 1;
    Matrix v(m, m);
    for (std::size_t k = 0; k < m; ++k) {
        if (k + 1 < m) v(k, k + 1) = nu;
        if (k >= 1) v(k, k - 1) = loss(static_cast<int>(k));
        v(k, k) = -v.off_diagonal_sum(k);
    }
    return v;
}

// Base stock jumps: each service consumes one item, R(0,0) = R(k,k-1) = 1.
inline Matrix consume_one(int b) {
    const std::size_t m = static_cast<std::size_t>(b) + 1;
    Matrix r(m, m);
    r(0, 0) = 1.0;
    for (std::size_t k = 1; k < m; ++k) r(k, k - 1) = 1.0;
    return r;
}

inline std::vector<bool> stockout_blocked(int b) {
    std::vector<bool> blocked(static_cast<std::size_t>(b) + 1, false);
    blocked[0] = true;
    return blocked;
}

inline RateFamily constant_rates(const CatalogParams& p) {
    if (p.rates) return *p.rates;
    require(p.lambda > 0.0, "lambda must be positive");
    require(p.mu > 0.0, "mu must be positive");
    return RateFamily::constant(p.lambda, p.mu);
}

}  // namespace detail

/// The example systems: plain M/M/1, the base stock queueing-inventory model,
/// the two on-off availability models, and the perishable inventory family
/// with its three ageing regimes.
inline JointModel catalog(std::string_view name, const CatalogParams& p = {}) {
    using detail::require;
    const std::string key(name);

    if (key == "mm1_plain") {
        EnvironmentSpec env{{"0"}, {false}, TailSequence<Matrix>::constant(Matrix(1, 1)),
                            TailSequence<Matrix>::constant(Matrix::identity(1))};
        return JointModel(detail::constant_rates(p), std::move(env), key);
    }

    if (key == "onoff_a" || key == "onoff_b") {
        require(p.eta > 0.0, "eta must be positive");
        require(p.gamma > 0.0, "gamma must be positive");
        // v_n(0,1) = eta (n+1), v_n(1,0) = gamma (n+1)
        const Matrix v{{-p.eta, p.eta}, {p.gamma, -p.gamma}};
        Matrix r = Matrix::identity(2);
        RateFamily rates;
        if (key == "onoff_a") {
            rates = detail::constant_rates(p);
        } else {
            r = Matrix{{1.0, 0.0}, {1.0, 0.0}};
            if (p.rates) {
                rates = *p.rates;
            } else {
                require(p.lambda > 0.0, "lambda must be positive");
                require(p.mu > 0.0, "mu must be positive");
                // lambda(n) = lambda (n+1); mu(n) = mu n keeps lambda(n)/mu(n+1) = lambda/mu.
                rates.arrival = TailSequence<double>({}, {p.lambda}, 1.0);
                rates.service = TailSequence<double>({0.0}, {p.mu}, 1.0);
            }
        }
        EnvironmentSpec env{{"off", "on"}, {true, false}, TailSequence<Matrix>({}, {v}, 1.0),
                            TailSequence<Matrix>::constant(r)};
        return JointModel(std::move(rates), std::move(env), key);
    }

    if (key == "base_stock" || key == "perishable_o" || key == "perishable_minus" || key == "perishable_plus") {
        require(p.b >= 1, "base stock level b must be >= 1");
        require(p.nu > 0.0, "nu must be positive");
        const double g = key == "base_stock" ? 0.0 : p.gamma;
        require(g >= 0.0, "gamma must be non-negative");
        const int b = p.b;
        TailSequence<Matrix> gens;
        if (key == "base_stock") {
            gens = TailSequence<Matrix>::constant(detail::inventory_generator(b, p.nu, [](int) { return 0.0; }));
        } else if (key == "perishable_minus") {
            gens = TailSequence<Matrix>::constant(
                detail::inventory_generator(b, p.nu, [g](int k) { return g * k; }));
        } else if (key == "perishable_plus") {
            gens = TailSequence<Matrix>::constant(
                detail::inventory_generator(b, p.nu, [g](int k) { return g * std::max(k - 1, 0); }));
        } else {
            // Idle server: every item ages. Busy server: the item in production does not.
            gens = TailSequence<Matrix>(
                {detail::inventory_generator(b, p.nu, [g](int k) { return g * k; })},
                {detail::inventory_generator(b, p.nu, [g](int k) { return g * (k - 1); })});
        }
        EnvironmentSpec env{detail::inventory_labels(b), detail::stockout_blocked(b), std::move(gens),
                            TailSequence<Matrix>::constant(detail::consume_one(b))};
        return JointModel(detail::constant_rates(p), std::move(env), key);
    }

    throw CatalogError(CatalogError::Kind::unknown_model, "unknown catalog model '" + key + "'");
}

}  // namespace qre
