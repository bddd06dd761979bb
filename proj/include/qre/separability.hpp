#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "qre/core/gth.hpp"
#include "qre/core/matrix.hpp"
#include "qre/core/series.hpp"
#include "qre/model.hpp"

namespace qre {

inline constexpr double kDefaultTolerance = 1e-10;
inline constexpr double kSummabilityMargin = 1e-12;
inline constexpr double kNearCriticalBand = 1e-9;

/// Environment generator combining arrival-triggered jumps with V_n:
///   q(k,m) = lambda(n) R_{n+1}(k,m) 1{k in K_W} + v_n(k,m),  k != m.
struct ReducedGenerator {
    Level n = 0;
    Matrix matrix;
};

inline ReducedGenerator reduced_generator(const JointModel& model, Level n) {
    const auto& env = model.env();
    const std::size_t m = env.size();
    ReducedGenerator out{n, Matrix(m, m)};
    const double lam = model.lambda(n);
    for (std::size_t k = 0; k < m; ++k) {
        for (std::size_t l = 0; l < m; ++l) {
            if (l == k) continue;
            double q = env.v(n, k, l);
            if (env.is_working(k)) q += lam * env.r(n + 1, k, l);
            out.matrix(k, l) = q;
        }
        out.matrix(k, k) = -out.matrix.off_diagonal_sum(k);
    }
    return out;
}

/// Levels whose reduced generators decide the condition for all n. With a
/// periodic tail one period past N0* suffices; with growing tails every class
/// ray is affine in n and two periods are needed.
inline Level theta_check_levels(const JointModel& model) {
    return model.tail_start() + (model.has_growth() ? 2 : 1) * model.period();
}

// ||theta Q|| relative to the magnitude of Q.
inline double stationary_residual(const std::vector<double>& theta, const Matrix& q) {
    return max_abs(left_multiply(theta, q)) / std::max(1.0, q.max_abs());
}

struct ThetaResult {
    bool found = false;
    std::vector<double> theta;           // best candidate (the common solution when found)
    double residual = 0.0;               // worst residual of `theta` over the checked levels
    Level worst_level = 0;               // level attaining `residual`
    std::vector<double> level_residuals; // per checked level, for `theta`
    std::size_t candidates = 0;          // extreme stationary vectors of Q_red^(0)
};

/// Find a probability vector theta with theta Q_red^(n) = 0 for every level.
/// Each extreme stationary vector of Q_red^(0) is tried in turn.
inline ThetaResult solve_theta(const JointModel& model, double tol = kDefaultTolerance) {
    const Level levels = theta_check_levels(model);
    std::vector<Matrix> reduced;
    reduced.reserve(levels);
    for (Level n = 0; n < levels; ++n) reduced.push_back(reduced_generator(model, n).matrix);

    ThetaResult best;
    best.residual = std::numeric_limits<double>::infinity();
    const auto candidates = extreme_stationary_vectors(reduced[0]);
    best.candidates = candidates.size();
    for (const auto& theta : candidates) {
        ThetaResult cur;
        cur.theta = theta;
        cur.candidates = candidates.size();
        for (Level n = 0; n < levels; ++n) {
            const double r = stationary_residual(theta, reduced[n]);
            cur.level_residuals.push_back(r);
            if (n == 0 || r > cur.residual) {
                cur.residual = r;
                cur.worst_level = n;
            }
        }
        cur.found = cur.residual <= tol;
        if (cur.found) return cur;
        if (cur.residual < best.residual) best = std::move(cur);
    }
    return best;
}

/// Stationary law xi of the isolated birth-death queue,
///   xi(n) = C^{-1} prod_{i<n} lambda(i) / mu(i+1).
class QueueMarginal {
public:
    QueueMarginal(const JointModel& model) : rates_(model.rates()), start_(model.tail_start()), period_(model.period()) {
        const auto ratio = [this](Level n) { return rates_.lambda(n) / rates_.mu(n + 1); };
        const auto s = sum_ratio_series(ratio, start_, period_, model.has_growth(), 1e-16, kSummabilityMargin);
        summable_ = s.converges;
        tail_ratio_ = s.tail_ratio;
        normalization_ = s.sum;
        error_bound_ = s.error_bound;
        growing_ = model.has_growth();
    }

    bool summable() const { return summable_; }
    /// Product of lambda(n)/mu(n+1) over one tail period (its limit for growing tails).
    double tail_ratio() const { return tail_ratio_; }
    bool near_critical() const { return std::abs(tail_ratio_ - 1.0) < kNearCriticalBand; }
    /// C; infinite when not summable.
    double normalization() const { return normalization_; }
    double normalization_error() const { return error_bound_; }

    /// Unnormalised weight prod_{i<n} lambda(i)/mu(i+1).
    double weight(Level n) const {
        const auto ratio = [this](Level i) { return rates_.lambda(i) / rates_.mu(i + 1); };
        if (growing_ || n <= start_ + period_) {
            double w = 1.0;
            for (Level i = 0; i < n && w != 0.0; ++i) w *= ratio(i);
            return w;
        }
        double w = 1.0;
        for (Level i = 0; i < start_; ++i) w *= ratio(i);
        double rho = 1.0;
        for (std::size_t j = 0; j < period_; ++j) rho *= ratio(start_ + j);
        const Level blocks = (n - start_) / period_;
        w *= std::pow(rho, static_cast<double>(blocks));
        for (Level i = start_ + blocks * period_; i < n; ++i) w *= ratio(i);
        return w;
    }

    double xi(Level n) const { return summable_ ? weight(n) / normalization_ : 0.0; }

    /// sum_n xi(n) lambda(n), which equals sum_{n>=1} xi(n) mu(n).
    double arrival_rate() const {
        if (!summable_) return std::numeric_limits<double>::quiet_NaN();
        const auto ratio = [this](Level n) { return rates_.lambda(n + 1) / rates_.mu(n + 1); };
        const auto s = sum_ratio_series(ratio, start_, period_, growing_, 1e-16, 0.0);
        return rates_.lambda(0) * s.sum / normalization_;
    }

private:
    RateFamily rates_;
    Level start_;
    std::size_t period_;
    bool summable_ = false;
    bool growing_ = false;
    double tail_ratio_ = 0.0;
    double normalization_ = 0.0;
    double error_bound_ = 0.0;
};

inline QueueMarginal queue_marginal(const JointModel& model) { return QueueMarginal(model); }

enum class NotSeparableReason { none, not_summable, no_common_solution, balance_residual };

inline const char* to_string(NotSeparableReason r) {
    switch (r) {
        case NotSeparableReason::none: return "none";
        case NotSeparableReason::not_summable: return "NotSummable";
        case NotSeparableReason::no_common_solution: return "NoCommonSolution";
        case NotSeparableReason::balance_residual: return "BalanceResidual";
    }
    return "?";
}

/// pi(n,k) = xi(n) theta(k) with its certificates.
struct ProductFormResult {
    std::vector<double> theta;
    QueueMarginal marginal;
    double theta_residual = 0.0;
    double balance_residual = 0.0;
    Level balance_horizon = 0;
    std::vector<bool> blocked;

    double normalization() const { return marginal.normalization(); }
    double tail_ratio() const { return marginal.tail_ratio(); }
    double xi(Level n) const { return marginal.xi(n); }
    double pi(Level n, std::size_t k) const { return marginal.xi(n) * theta[k]; }

    double blocked_probability() const {
        double s = 0.0;
        for (std::size_t k = 0; k < theta.size(); ++k)
            if (blocked[k]) s += theta[k];
        return s;
    }
    /// Long-run departure rate sum_{n>0, k in K_W} pi(n,k) mu(n).
    double throughput() const { return (1.0 - blocked_probability()) * marginal.arrival_rate(); }
};

struct SeparabilityReport {
    bool separable = false;
    NotSeparableReason reason = NotSeparableReason::none;
    ThetaResult theta;
    double tail_ratio = 0.0;
    bool near_critical = false;
    std::optional<ProductFormResult> result;
};

/// Largest global balance defect of pi = xi x theta over levels 0..horizon,
/// measured relative to xi(n) and the rate magnitude at that level.
inline double balance_residual(const JointModel& model, const QueueMarginal& marginal,
                               const std::vector<double>& theta, Level horizon) {
    const auto& env = model.env();
    const std::size_t m = env.size();
    auto pi = [&](Level n, std::size_t k) { return marginal.weight(n) * theta[k]; };
    double worst = 0.0;
    for (Level n = 0; n <= horizon; ++n) {
        const double w = marginal.weight(n);
        if (w == 0.0) continue;
        double rate_scale = 1.0;
        for (std::size_t k = 0; k < m; ++k) {
            const bool working = env.is_working(k);
            double out_rate = 0.0;
            if (working) out_rate += model.lambda(n) + (n > 0 ? model.mu(n) : 0.0);
            for (std::size_t l = 0; l < m; ++l)
                if (l != k) out_rate += env.v(n, k, l);
            rate_scale = std::max(rate_scale, out_rate);

            const double outflow = pi(n, k) * out_rate;
            double inflow = 0.0;
            if (working && n > 0) inflow += pi(n - 1, k) * model.lambda(n - 1);
            for (std::size_t l = 0; l < m; ++l) {
                if (env.is_working(l)) inflow += pi(n + 1, l) * env.r(n + 1, l, k) * model.mu(n + 1);
                if (l != k) inflow += pi(n, l) * env.v(n, l, k);
            }
            worst = std::max(worst, std::abs(outflow - inflow) / w / rate_scale);
        }
    }
    return worst;
}

/// Decide separability and, when it holds, return the product-form law.
inline SeparabilityReport product_form(const JointModel& model, double tol = kDefaultTolerance) {
    SeparabilityReport rep;
    QueueMarginal marginal(model);
    rep.tail_ratio = marginal.tail_ratio();
    rep.near_critical = marginal.near_critical();
    rep.theta = solve_theta(model, tol);
    if (!marginal.summable()) {
        rep.reason = NotSeparableReason::not_summable;
        return rep;
    }
    if (!rep.theta.found) {
        rep.reason = NotSeparableReason::no_common_solution;
        return rep;
    }
    const Level horizon = model.tail_start() + model.period() + 2;
    ProductFormResult res{rep.theta.theta, marginal, rep.theta.residual, 0.0, horizon, model.env().blocked};
    res.balance_residual = balance_residual(model, marginal, rep.theta.theta, horizon);
    if (res.balance_residual > tol) {
        rep.reason = NotSeparableReason::balance_residual;
        rep.result = std::move(res);
        return rep;
    }
    rep.separable = true;
    rep.result = std::move(res);
    return rep;
}

}  // namespace qre
