#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "qre/core/error.hpp"
#include "qre/core/graph.hpp"
#include "qre/model.hpp"
#include "qre/separability.hpp"

namespace qre {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();
inline constexpr double kDriftSlack = 1e-12;

struct NecessaryCheck {
    bool passes = false;
    double tail_ratio = 0.0;
    bool near_critical = false;
};

/// Summability of prod lambda(m-1)/mu(m): without it no environment can make
/// the joint process ergodic.
inline NecessaryCheck check_necessary(const JointModel& model) {
    const QueueMarginal q(model);
    return {q.summable(), q.tail_ratio(), q.near_critical()};
}

// ---------------------------------------------------------------------------
// Mean first-entrance times of the frozen environment into K_W

class SingularSystem : public Error {
public:
    SingularSystem(const std::string& what, std::vector<std::size_t> states)
        : Error(what), states_(std::move(states)) {}
    /// Blocked states with no path into K_W.
    const std::vector<std::size_t>& states() const { return states_; }

private:
    std::vector<std::size_t> states_;
};

struct AbsorptionTable {
    Level n = 0;
    std::vector<double> tau;  // 0 on K_W
    double residual = 0.0;    // worst defect of the first-entrance equations on K_B
};

/// tau_n(k): mean time for the environment, frozen at level n and driven by
/// V_n, to enter K_W from k in K_B.
///
/// Solved by state elimination on the absorbing chain; every pivot is a sum
/// of exit rates, so the solve never subtracts.
inline AbsorptionTable solve_tau(const JointModel& model, Level n) {
    const auto& env = model.env();
    const std::size_t m = env.size();
    AbsorptionTable out{n, std::vector<double>(m, 0.0), 0.0};
    const auto blocked = env.blocked_states();
    if (blocked.empty()) return out;

    Adjacency adj(m);
    for (std::size_t k = 0; k < m; ++k)
        for (std::size_t l = 0; l < m; ++l)
            if (l != k && env.v(n, k, l) > 0.0) adj[k].push_back(l);
    std::vector<bool> working(m);
    for (std::size_t k = 0; k < m; ++k) working[k] = env.is_working(k);
    const auto reach = can_reach(adj, working);
    std::vector<std::size_t> stuck;
    for (std::size_t k : blocked)
        if (!reach[k]) stuck.push_back(k);
    if (!stuck.empty()) {
        throw SingularSystem("solve_tau: blocked states at level " + std::to_string(n) +
                                 " cannot reach K_W under V_n",
                             std::move(stuck));
    }

    // Local system over K_B: rates between blocked states, exit rates into K_W,
    // and the accumulated holding-time reward.
    const std::size_t b = blocked.size();
    Matrix rate(b, b);
    std::vector<double> exit(b, 0.0), reward(b, 1.0), pivot(b, 0.0);
    for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t l = 0; l < m; ++l) {
            if (l == blocked[i]) continue;
            const double v = env.v(n, blocked[i], l);
            if (env.is_working(l)) exit[i] += v;
        }
        for (std::size_t j = 0; j < b; ++j)
            if (j != i) rate(i, j) = env.v(n, blocked[i], blocked[j]);
    }
    for (std::size_t s = b; s-- > 0;) {
        double d = exit[s];
        for (std::size_t j = 0; j < s; ++j) d += rate(s, j);
        pivot[s] = d;
        for (std::size_t i = 0; i < s; ++i) {
            const double w = rate(i, s);
            if (w == 0.0) continue;
            const double f = w / d;
            reward[i] += f * reward[s];
            exit[i] += f * exit[s];
            for (std::size_t j = 0; j < s; ++j)
                if (j != i) rate(i, j) += f * rate(s, j);
        }
    }
    std::vector<double> local(b, 0.0);
    for (std::size_t s = 0; s < b; ++s) {
        double acc = reward[s];
        for (std::size_t j = 0; j < s; ++j) acc += rate(s, j) * local[j];
        local[s] = acc / pivot[s];
    }
    for (std::size_t i = 0; i < b; ++i) out.tau[blocked[i]] = local[i];

    for (std::size_t k : blocked) {
        double lhs = 0.0;
        for (std::size_t l = 0; l < m; ++l) {
            if (l == k) continue;
            const double v = env.v(n, k, l);
            if (env.is_blocked(l)) lhs += v * (out.tau[l] - out.tau[k]);
            else lhs -= v * out.tau[k];
        }
        out.residual = std::max(out.residual, std::abs(lhs + 1.0));
    }
    return out;
}

// ---------------------------------------------------------------------------
// c-hat constants

class BothBranchesZero : public Error {
public:
    using Error::Error;
};

struct CHat {
    Level n = 0;
    double service_branch = kInfinity;      // 1 / max_k mu(n+1) sum_l R_{n+1}(k,l) tau_n(l)
    double environment_branch = kInfinity;  // 1 / max_k sum_l v_n(k,l) tau_n(l)
    double value = kInfinity;
};

inline CHat c_hat(const JointModel& model, Level n, const AbsorptionTable& tau) {
    const auto& env = model.env();
    CHat out;
    out.n = n;
    const auto blocked = env.blocked_states();
    if (blocked.empty()) return out;
    double max_service = 0.0, max_env = 0.0;
    for (std::size_t k : env.working_states()) {
        double s = 0.0, e = 0.0;
        for (std::size_t l : blocked) {
            s += env.r(n + 1, k, l) * tau.tau[l];
            e += env.v(n, k, l) * tau.tau[l];
        }
        max_service = std::max(max_service, model.mu(n + 1) * s);
        max_env = std::max(max_env, e);
    }
    if (max_service == 0.0 && max_env == 0.0) {
        throw BothBranchesZero("c_hat: no transition from K_W into K_B at level " + std::to_string(n) +
                               " (neither R_{n+1} nor V_n); the model is not irreducible");
    }
    if (max_service > 0.0) out.service_branch = 1.0 / max_service;
    if (max_env > 0.0) out.environment_branch = 1.0 / max_env;
    out.value = std::min(out.service_branch, out.environment_branch);
    return out;
}

inline CHat c_hat(const JointModel& model, Level n) { return c_hat(model, n, solve_tau(model, n)); }

/// inf over all n of c_hat(n), decided from the prefix and one tail period.
/// For growing tails the service branch on a class ray scales with
/// s_V(n) / s_mu(n+1), a monotone quotient of affine functions.
inline double c_hat_infimum(const JointModel& model, const std::vector<CHat>& representatives) {
    double inf = kInfinity;
    const Level start = model.tail_start();
    const auto& gens = model.env().generators;
    const auto& service = model.rates().service;
    for (const auto& c : representatives) {
        double value = c.value;
        if (model.has_growth() && c.n >= start && std::isfinite(c.service_branch)) {
            auto ratio = [&](double n) {
                const auto lvl = static_cast<Level>(n);
                return gens.scale(lvl) / service.scale(lvl + 1);
            };
            const double here = ratio(static_cast<double>(c.n));
            const double far = ratio(static_cast<double>(c.n) + static_cast<double>(model.period()) * 1073741824.0);
            const double shrink = std::min(1.0, far / here);
            value = std::min(c.environment_branch, c.service_branch * shrink);
        }
        inf = std::min(inf, value);
    }
    return inf;
}

// ---------------------------------------------------------------------------
// Lyapunov functions for the isolated queue

enum class LyapunovKind { linear_drift, hitting_time };

inline const char* to_string(LyapunovKind k) {
    return k == LyapunovKind::linear_drift ? "linear_drift" : "hitting_time";
}

/// L(n) given by explicit values for small n and a linear continuation.
class QueueLyapunov {
public:
    QueueLyapunov() = default;
    QueueLyapunov(std::vector<double> head, double slope) : head_(std::move(head)), slope_(slope) {}

    double operator()(Level n) const {
        if (n < head_.size()) return head_[n];
        return head_.back() + slope_ * static_cast<double>(n - (head_.size() - 1));
    }

private:
    std::vector<double> head_{0.0};
    double slope_ = 1.0;
};

struct MM1Lyapunov {
    LyapunovKind kind = LyapunovKind::linear_drift;
    QueueLyapunov function;
    Level exception_end = 1;  // exception set {0, ..., exception_end - 1}
    double epsilon_tilde = 0.0;
};

struct MM1LyapunovResult {
    std::optional<MM1Lyapunov> lyapunov;
    std::string failure;  // set when no function could be built
};

namespace detail {

// mu(n) - lambda(n) on the class ray {n, n + p, n + 2p, ...} is affine in n.
struct DriftRay {
    double at_start;
    double slope;  // per period step
};

inline DriftRay drift_ray(const JointModel& model, Level n) {
    const double d0 = model.mu(n) - model.lambda(n);
    const double d1 = model.mu(n + model.period()) - model.lambda(n + model.period());
    return {d0, d1 - d0};
}

inline MM1LyapunovResult linear_drift(const JointModel& model) {
    const Level start = std::max<Level>(model.tail_start(), 1);
    const std::size_t p = model.period();
    Level last_bad = 0;  // level 0 always belongs to the exception set
    for (Level n = 1; n < start; ++n)
        if (!(model.mu(n) - model.lambda(n) > 0.0)) last_bad = n;

    // First positive level on every tail class ray.
    std::vector<Level> first_good(p);
    for (std::size_t j = 0; j < p; ++j) {
        const Level n0 = start + j;
        const auto ray = drift_ray(model, n0);
        if (ray.slope < 0.0 || (ray.slope == 0.0 && !(ray.at_start > 0.0))) {
            return {std::nullopt, "mu(n) - lambda(n) is not eventually positive on the tail"};
        }
        Level steps = 0;
        if (!(ray.at_start > 0.0)) steps = static_cast<Level>(std::floor(-ray.at_start / ray.slope)) + 1;
        first_good[j] = n0 + steps * p;
        if (steps > 0) last_bad = std::max(last_bad, first_good[j] - p);
    }
    const Level threshold = last_bad + 1;

    double eps = kInfinity;
    for (Level n = threshold; n < start; ++n) eps = std::min(eps, model.mu(n) - model.lambda(n));
    for (std::size_t j = 0; j < p; ++j) {
        Level n = std::max(first_good[j], start + j);
        while (n < threshold) n += p;
        eps = std::min(eps, model.mu(n) - model.lambda(n));  // non-decreasing along the ray
    }
    MM1Lyapunov out;
    out.kind = LyapunovKind::linear_drift;
    out.function = QueueLyapunov({0.0}, 1.0);
    out.exception_end = threshold;
    out.epsilon_tilde = eps;
    return {out, {}};
}

inline MM1LyapunovResult hitting_time(const JointModel& model) {
    if (model.period() != 1 || model.has_growth()) {
        return {std::nullopt, "hitting_time needs an eventually constant tail (p* = 1, no growth)"};
    }
    const Level start = std::max<Level>(model.tail_start(), 1);
    const double lam = model.lambda(start), mu = model.mu(start);
    if (!(mu > lam)) return {std::nullopt, "hitting_time needs lambda < mu on the tail"};
    // h(i): mean time to go from i down to i-1.
    std::vector<double> h(start + 1, 0.0);
    h[start] = 1.0 / (mu - lam);
    for (Level i = start - 1; i >= 1; --i) h[i] = (1.0 + model.lambda(i) * h[i + 1]) / model.mu(i);
    std::vector<double> head(start + 1, 0.0);
    for (Level n = 1; n <= start; ++n) head[n] = head[n - 1] + h[n];
    MM1Lyapunov out;
    out.kind = LyapunovKind::hitting_time;
    out.function = QueueLyapunov(std::move(head), h[start]);
    out.exception_end = 1;
    out.epsilon_tilde = 1.0;
    return {out, {}};
}

}  // namespace detail

inline MM1LyapunovResult build_mm1_lyapunov(const JointModel& model, LyapunovKind kind) {
    return kind == LyapunovKind::linear_drift ? detail::linear_drift(model) : detail::hitting_time(model);
}

// ---------------------------------------------------------------------------
// Certification

struct LyapunovCertificate {
    LyapunovKind kind = LyapunovKind::linear_drift;
    MM1Lyapunov queue_function;
    double epsilon_tilde = 0.0;
    double epsilon = 0.0;
    std::vector<Level> exception_levels;     // F~; F = F~ x K
    std::vector<CHat> c_hat_table;           // representatives 0 .. N0*+p*-1
    std::vector<double> c_table;             // (eps~/4) c_hat on the representatives
    std::vector<AbsorptionTable> tau_tables; // representatives
    double c_hat_infimum = kInfinity;
    Level check_horizon = 0;
    double worst_drift = -kInfinity;  // max (Q L)(n,k) over checked states off F
    double worst_margin = kInfinity;  // min of -eps - (Q L)(n,k) over checked states off F
    State worst_state;

    /// Composite function L(n,k) = L~(n) + 1{k in K_B} c_n tau_n(k), with the
    /// per-level constants recomputed on demand.
    double value(const JointModel& model, State z) const {
        double v = queue_function.function(z.n);
        if (model.env().is_blocked(z.k)) {
            const auto tau = solve_tau(model, z.n);
            v += 0.25 * epsilon_tilde * c_hat(model, z.n, tau).value * tau.tau[z.k];
        }
        return v;
    }
};

enum class NotCertifiedReason { none, necessary_fails, no_lyapunov, c_hat_infimum_zero, drift_check_fails };

inline const char* to_string(NotCertifiedReason r) {
    switch (r) {
        case NotCertifiedReason::none: return "none";
        case NotCertifiedReason::necessary_fails: return "NecessaryFails";
        case NotCertifiedReason::no_lyapunov: return "NoLyapunov";
        case NotCertifiedReason::c_hat_infimum_zero: return "CHatInfimumZero";
        case NotCertifiedReason::drift_check_fails: return "DriftCheckFails";
    }
    return "?";
}

struct CertifyOutcome {
    bool certified = false;
    NotCertifiedReason reason = NotCertifiedReason::none;
    std::string detail;
    NecessaryCheck necessary;
    std::optional<State> violating_state;
    std::optional<LyapunovCertificate> certificate;  // also present on drift failure
};

/// Drift (Q L)(z) of a function on the joint space.
template <class F>
double drift(const JointModel& model, State z, F&& value) {
    const auto row = model.row(z);
    const double here = value(z);
    double acc = 0.0;
    for (const auto& t : row.transitions) acc += t.rate * (value(t.target) - here);
    return acc;
}

/// Build the composite Lyapunov function and verify the Foster drift
/// condition on levels 0 .. N0* + 2p* + 2.
inline CertifyOutcome certify(const JointModel& model, LyapunovKind kind = LyapunovKind::linear_drift) {
    CertifyOutcome out;
    out.necessary = check_necessary(model);
    if (!out.necessary.passes) {
        out.reason = NotCertifiedReason::necessary_fails;
        out.detail = "sum of prod lambda(m-1)/mu(m) diverges (tail ratio " + std::to_string(out.necessary.tail_ratio) + ")";
        return out;
    }
    auto built = build_mm1_lyapunov(model, kind);
    if (!built.lyapunov) {
        out.reason = NotCertifiedReason::no_lyapunov;
        out.detail = built.failure;
        return out;
    }

    LyapunovCertificate cert;
    cert.kind = kind;
    cert.queue_function = *built.lyapunov;
    cert.epsilon_tilde = built.lyapunov->epsilon_tilde;
    for (Level n = 0; n < built.lyapunov->exception_end; ++n) cert.exception_levels.push_back(n);

    const Level reps = model.tail_start() + model.period();
    for (Level n = 0; n < reps; ++n) {
        cert.tau_tables.push_back(solve_tau(model, n));
        cert.c_hat_table.push_back(c_hat(model, n, cert.tau_tables.back()));
        cert.c_table.push_back(0.25 * cert.epsilon_tilde * cert.c_hat_table.back().value);
    }
    cert.c_hat_infimum = c_hat_infimum(model, cert.c_hat_table);
    if (!(cert.c_hat_infimum > 0.0)) {
        out.reason = NotCertifiedReason::c_hat_infimum_zero;
        out.detail = "inf_n c_hat(n) = 0";
        return out;
    }
    cert.epsilon = std::min(0.5 * cert.epsilon_tilde, 0.25 * cert.epsilon_tilde * cert.c_hat_infimum);

    cert.check_horizon = model.tail_start() + 2 * model.period() + 2;
    const Level top = cert.check_horizon + 1;
    std::vector<AbsorptionTable> taus;
    std::vector<double> cs;
    for (Level n = 0; n <= top; ++n) {
        taus.push_back(solve_tau(model, n));
        cs.push_back(0.25 * cert.epsilon_tilde * c_hat(model, n, taus.back()).value);
    }
    const auto& env = model.env();
    auto value = [&](State z) {
        double v = cert.queue_function.function(z.n);
        if (env.is_blocked(z.k)) v += cs[z.n] * taus[z.n].tau[z.k];
        return v;
    };

    std::optional<State> violation;
    for (Level n = 0; n <= cert.check_horizon; ++n) {
        const bool in_exception = n < cert.queue_function.exception_end;
        for (std::size_t k = 0; k < env.size(); ++k) {
            const State z{n, k};
            const double d = drift(model, z, value);
            if (in_exception) {
                if (!std::isfinite(d) && !violation) violation = z;
                continue;
            }
            if (d > cert.worst_drift) {
                cert.worst_drift = d;
                cert.worst_state = z;
            }
            cert.worst_margin = std::min(cert.worst_margin, -cert.epsilon - d);
            if (d > -cert.epsilon + kDriftSlack && !violation) violation = z;
        }
    }
    out.certificate = std::move(cert);
    if (violation) {
        out.reason = NotCertifiedReason::drift_check_fails;
        out.violating_state = violation;
        out.detail = "drift condition violated at (" + std::to_string(violation->n) + "," +
                     std::to_string(violation->k) + ")";
        return out;
    }
    out.certified = true;
    return out;
}

}  // namespace qre
