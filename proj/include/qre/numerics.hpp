#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "qre/core/error.hpp"
#include "qre/core/matrix.hpp"
#include "qre/ergodicity.hpp"
#include "qre/model.hpp"

namespace qre {

class NotConvergent : public Error {
public:
    using Error::Error;
};

class NotIrreducibleTruncation : public Error {
public:
    using Error::Error;
};

class Diverging : public Error {
public:
    using Error::Error;
};

enum class SolveMethod { elimination, power };

/// Stationary vector of the chain truncated at level N (no arrivals at N),
/// stored level-major.
struct TruncatedSolution {
    Level cap = 0;
    std::size_t env_size = 0;
    std::vector<double> pi;
    double residual = 0.0;             // max |(pi Q_N)(z)|
    double truncation_estimate = 0.0;  // mass on levels N - ceil(N/10) .. N
    std::size_t iterations = 0;        // power method only

    double operator()(Level n, std::size_t k) const { return n > cap ? 0.0 : pi[n * env_size + k]; }
    double level_mass(Level n) const {
        double s = 0.0;
        for (std::size_t k = 0; k < env_size; ++k) s += (*this)(n, k);
        return s;
    }
    std::vector<double> env_marginal() const {
        std::vector<double> out(env_size, 0.0);
        for (std::size_t i = 0; i < pi.size(); ++i) out[i % env_size] += pi[i];
        return out;
    }
};

namespace detail {

inline std::size_t boundary_width(Level cap) { return (cap + 9) / 10; }

inline double truncated_residual(const JointModel& model, Level cap, const std::vector<double>& pi) {
    std::vector<double> flow(pi.size(), 0.0);
    for (std::size_t i = 0; i < pi.size(); ++i) {
        const auto row = model.row(model.state_at(i), cap);
        flow[i] += pi[i] * row.diagonal;
        for (const auto& t : row.transitions) flow[model.index(t.target)] += pi[i] * t.rate;
    }
    return max_abs(flow);
}

inline void finish(const JointModel& model, TruncatedSolution& sol) {
    sol.residual = truncated_residual(model, sol.cap, sol.pi);
    const Level from = sol.cap - std::min<Level>(sol.cap, boundary_width(sol.cap));
    double tail = 0.0;
    for (Level n = from; n <= sol.cap; ++n) tail += sol.level_mass(n);
    sol.truncation_estimate = tail;
}

// Off-diagonal rates of the truncated chain between levels: within level n,
// up from n, down from n.
struct LevelBlocks {
    Matrix within, up, down;
};

inline LevelBlocks level_blocks(const JointModel& model, Level n, Level cap) {
    const std::size_t m = model.env_size();
    LevelBlocks b{Matrix(m, m), Matrix(m, m), Matrix(m, m)};
    for (std::size_t k = 0; k < m; ++k) {
        const auto row = model.row({n, k}, cap);
        for (const auto& t : row.transitions) {
            if (t.target.n == n) b.within(k, t.target.k) += t.rate;
            else if (t.target.n > n) b.up(k, t.target.k) += t.rate;
            else b.down(k, t.target.k) += t.rate;
        }
    }
    return b;
}

// GTH elimination exploiting the block-tridiagonal (level-major) structure:
// levels are censored from the top, each step touching only the window of
// the two adjacent levels.
inline std::vector<double> block_gth(const JointModel& model, Level cap) {
    const std::size_t m = model.env_size();
    const std::size_t w = 2 * m;
    std::vector<Matrix> columns(cap + 1);  // scaled pivot columns per level
    Matrix current = level_blocks(model, cap, cap).within;

    // Eliminate window states last-1 down to `stop`; column index is relative to `first`.
    auto eliminate = [&](Matrix& win, std::size_t first, std::size_t stop, std::size_t last, Matrix& store, Level n) {
        for (std::size_t s = last; s-- > stop;) {
            double total = 0.0;
            for (std::size_t j = 0; j < s; ++j) total += win(s, j);
            if (!(total > 0.0)) {
                throw NotIrreducibleTruncation("solve_truncated: state (" + std::to_string(n) + "," +
                                               std::to_string(s - first) + ") cannot reach lower states");
            }
            for (std::size_t i = 0; i < s; ++i) {
                win(i, s) /= total;
                store(i, s - first) = win(i, s);
            }
            for (std::size_t i = 0; i < s; ++i) {
                const double f = win(i, s);
                if (f == 0.0) continue;
                for (std::size_t j = 0; j < s; ++j)
                    if (j != i) win(i, j) += f * win(s, j);
            }
        }
    };

    LevelBlocks upper = level_blocks(model, cap, cap);
    for (Level n = cap; n >= 1; --n) {
        const LevelBlocks lower = level_blocks(model, n - 1, cap);
        Matrix win(w, w);
        for (std::size_t a = 0; a < m; ++a) {
            for (std::size_t b = 0; b < m; ++b) {
                win(a, b) = a == b ? 0.0 : lower.within(a, b);
                win(a, m + b) = lower.up(a, b);
                win(m + a, b) = upper.down(a, b);
                win(m + a, m + b) = a == b ? 0.0 : current(a, b);
            }
        }
        columns[n] = Matrix(w, m);
        eliminate(win, m, m, w, columns[n], n);
        current = Matrix(m, m);
        for (std::size_t a = 0; a < m; ++a)
            for (std::size_t b = 0; b < m; ++b) current(a, b) = win(a, b);
        upper = lower;
    }
    {
        Matrix win = current;
        for (std::size_t a = 0; a < m; ++a) win(a, a) = 0.0;
        columns[0] = Matrix(m, m);
        eliminate(win, 0, 1, m, columns[0], 0);  // state (0,0) is the anchor
    }

    std::vector<double> pi((cap + 1) * m, 0.0);
    pi[0] = 1.0;
    for (std::size_t s = 1; s < m; ++s) {
        double acc = 0.0;
        for (std::size_t i = 0; i < s; ++i) acc += pi[i] * columns[0](i, s);
        pi[s] = acc;
    }
    for (Level n = 1; n <= cap; ++n) {
        const std::size_t base = (n - 1) * m;
        for (std::size_t s = 0; s < m; ++s) {
            double acc = 0.0;
            for (std::size_t i = 0; i < m + s; ++i) acc += pi[base + i] * columns[n](i, s);
            pi[n * m + s] = acc;
        }
    }
    double total = 0.0;
    for (double x : pi) total += x;
    for (double& x : pi) x /= total;
    return pi;
}

inline std::vector<double> uniformized_power(const JointModel& model, Level cap, double tol, std::size_t max_iter,
                                             std::size_t& iterations) {
    const std::size_t states = (cap + 1) * model.env_size();
    struct Entry {
        std::size_t target;
        double prob;
    };
    std::vector<std::vector<Entry>> rows(states);
    std::vector<double> stay(states, 0.0);
    double max_exit = 0.0;
    std::vector<GeneratorRow> gen;
    gen.reserve(states);
    for (std::size_t i = 0; i < states; ++i) {
        gen.push_back(model.row(model.state_at(i), cap));
        max_exit = std::max(max_exit, -gen.back().diagonal);
    }
    const double unif = 1.05 * max_exit;
    for (std::size_t i = 0; i < states; ++i) {
        for (const auto& t : gen[i].transitions) rows[i].push_back({model.index(t.target), t.rate / unif});
        stay[i] = 1.0 + gen[i].diagonal / unif;
    }
    std::vector<double> x(states, 1.0 / static_cast<double>(states)), y(states);
    for (iterations = 1; iterations <= max_iter; ++iterations) {
        for (std::size_t i = 0; i < states; ++i) y[i] = x[i] * stay[i];
        for (std::size_t i = 0; i < states; ++i)
            for (const auto& e : rows[i]) y[e.target] += x[i] * e.prob;
        double diff = 0.0, total = 0.0;
        for (std::size_t i = 0; i < states; ++i) total += y[i];
        for (std::size_t i = 0; i < states; ++i) {
            y[i] /= total;
            diff += std::abs(y[i] - x[i]);
        }
        x.swap(y);
        if (diff < tol) return x;
    }
    throw NotConvergent("solve_truncated: power iteration did not converge in " + std::to_string(max_iter) +
                        " iterations");
}

}  // namespace detail

struct SolveOptions {
    SolveMethod method = SolveMethod::elimination;
    double power_tol = 1e-15;
    std::size_t power_max_iter = 5'000'000;
};

inline TruncatedSolution solve_truncated(const JointModel& model, Level cap, SolveOptions opts = {}) {
    if (cap < model.tail_start() + model.period() + 2) {
        throw InvalidArgument("solve_truncated: cap must be >= N0* + p* + 2");
    }
    TruncatedSolution sol;
    sol.cap = cap;
    sol.env_size = model.env_size();
    if (opts.method == SolveMethod::elimination) {
        sol.pi = detail::block_gth(model, cap);
    } else {
        sol.pi = detail::uniformized_power(model, cap, opts.power_tol, opts.power_max_iter, sol.iterations);
    }
    detail::finish(model, sol);
    return sol;
}

inline TruncatedSolution solve_truncated(const JointModel& model, Level cap, SolveMethod method) {
    SolveOptions opts;
    opts.method = method;
    return solve_truncated(model, cap, opts);
}

struct Metrics {
    double throughput = 0.0;
    double mean_queue_length = 0.0;
    double blocked_probability = 0.0;
    double loss_rate = 0.0;  // arrivals refused while blocked
};

inline Metrics metrics(const TruncatedSolution& sol, const JointModel& model) {
    Metrics out;
    const auto& env = model.env();
    for (Level n = 0; n <= sol.cap; ++n) {
        for (std::size_t k = 0; k < sol.env_size; ++k) {
            const double p = sol(n, k);
            out.mean_queue_length += static_cast<double>(n) * p;
            if (env.is_blocked(k)) {
                out.blocked_probability += p;
                out.loss_rate += p * model.lambda(n);
            } else if (n > 0) {
                out.throughput += p * model.mu(n);
            }
        }
    }
    return out;
}

struct CutReport {
    bool holds = false;
    double worst_relative = 0.0;
    Level worst_level = 0;
    Level checked_up_to = 0;  // last n whose cut (n | n+1) was compared
};

/// Compare lambda(n) sum_{K_W} pi(n,.) with mu(n+1) sum_{K_W} pi(n+1,.).
/// Interior levels only unless `include_boundary` is set.
inline CutReport check_cut_structure(const TruncatedSolution& sol, const JointModel& model, double tol = 1e-8,
                                     bool include_boundary = false) {
    CutReport rep;
    const auto& env = model.env();
    auto working_mass = [&](Level n) {
        double s = 0.0;
        for (std::size_t k = 0; k < sol.env_size; ++k)
            if (env.is_working(k)) s += sol(n, k);
        return s;
    };
    const Level last = include_boundary ? sol.cap : sol.cap - detail::boundary_width(sol.cap) - 1;
    rep.checked_up_to = last;
    for (Level n = 0; n <= last; ++n) {
        const double lhs = model.lambda(n) * working_mass(n);
        const double rhs = model.mu(n + 1) * working_mass(n + 1);
        const double scale = std::max(lhs, rhs);
        const double dev = scale > 0.0 ? std::abs(lhs - rhs) / scale : 0.0;
        if (dev > rep.worst_relative) {
            rep.worst_relative = dev;
            rep.worst_level = n;
        }
    }
    rep.holds = rep.worst_relative <= tol;
    return rep;
}

struct TruncationStep {
    Level cap = 0;
    double throughput = 0.0;
    double blocked_probability = 0.0;
    double truncation_estimate = 0.0;
};

struct AutoTruncation {
    TruncatedSolution solution;
    Metrics metrics;
    std::vector<TruncationStep> history;
    bool near_critical = false;
};

inline constexpr std::size_t kAutoTruncateStateCap = std::size_t{1} << 16;

/// Double the cap until throughput, blocked probability and the mass near
/// the cap all settle below `tol`. A heuristic; no error bound is claimed.
inline AutoTruncation auto_truncate(const JointModel& model, double tol = 1e-9) {
    const auto nec = check_necessary(model);
    if (!nec.passes) {
        throw Diverging("auto_truncate: queue marginal is not summable (tail ratio " +
                        std::to_string(nec.tail_ratio) + "); the model is not ergodic");
    }
    AutoTruncation out;
    out.near_critical = nec.near_critical;
    Level cap = std::max<Level>(64, 4 * (model.tail_start() + model.period()));
    while ((cap + 1) * model.env_size() <= kAutoTruncateStateCap) {
        auto sol = solve_truncated(model, cap);
        const auto met = metrics(sol, model);
        out.history.push_back({cap, met.throughput, met.blocked_probability, sol.truncation_estimate});
        const std::size_t h = out.history.size();
        if (h >= 2) {
            const auto& prev = out.history[h - 2];
            if (std::abs(prev.throughput - met.throughput) < tol &&
                std::abs(prev.blocked_probability - met.blocked_probability) < tol && sol.truncation_estimate < tol) {
                out.solution = std::move(sol);
                out.metrics = met;
                return out;
            }
        }
        cap *= 2;
    }
    throw Diverging("auto_truncate: metrics did not settle within " + std::to_string(kAutoTruncateStateCap) +
                    " states");
}

}  // namespace qre
