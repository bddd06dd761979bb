#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "qre/core/error.hpp"
#include "qre/model.hpp"
#include "qre/numerics.hpp"

namespace qre {

class ZeroExitRate : public Error {
public:
    ZeroExitRate(State z)
        : Error("simulate: state (" + std::to_string(z.n) + "," + std::to_string(z.k) + ") has no exit"), state_(z) {}
    State state() const { return state_; }

private:
    State state_;
};

enum class HorizonKind { time, jumps };

struct SimConfig {
    std::uint64_t seed = 1;
    double horizon = 1e5;  // time units, or jump count with HorizonKind::jumps
    HorizonKind horizon_kind = HorizonKind::time;
    std::size_t replications = 20;
    double warmup = 0.1;  // fraction of the horizon discarded
    State initial{0, 0};
    std::ostream* event_log = nullptr;  // CSV of replication 0, if set
};

struct ReplicationSummary {
    double throughput = 0.0;
    std::uint64_t departures = 0;  // after warmup
    std::uint64_t jumps = 0;
    double elapsed = 0.0;  // after warmup
    State final_state;
};

struct ThroughputEstimate {
    double mean = 0.0;
    double half_width = 0.0;  // 95% Student t; infinite for a single replication
    std::vector<double> values;
    std::vector<ReplicationSummary> replications;

    bool covers(double x) const { return std::abs(x - mean) <= half_width; }
};

namespace detail {

// Replication r draws from its own stream seeded by (seed, r).
inline std::mt19937_64 replication_engine(std::uint64_t seed, std::uint64_t r) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(r >> 32)};
    return std::mt19937_64(seq);
}

// Rows of the untruncated chain, built on first visit.
class RowCache {
public:
    explicit RowCache(const JointModel& model) : model_(model) {}
    const GeneratorRow& operator()(State z) {
        const std::size_t i = model_.index(z);
        if (i >= rows_.size()) rows_.resize(2 * i + 1);
        if (!rows_[i]) rows_[i] = model_.row(z);
        return *rows_[i];
    }

private:
    const JointModel& model_;
    std::vector<std::optional<GeneratorRow>> rows_;
};

inline ReplicationSummary run_replication(const SimConfig& cfg, std::uint64_t r,
                                          RowCache& rows) {
    auto rng = replication_engine(cfg.seed, r);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::ostream* log = r == 0 ? cfg.event_log : nullptr;
    if (log) *log << "time,n,k,event\n";

    const bool by_time = cfg.horizon_kind == HorizonKind::time;
    const double warm = cfg.warmup * cfg.horizon;
    ReplicationSummary out;
    State z = cfg.initial;
    double t = 0.0;
    double t_warm = by_time ? warm : 0.0;
    for (std::uint64_t jump = 0;; ++jump) {
        if (!by_time) {
            if (static_cast<double>(jump) >= cfg.horizon) break;
            if (static_cast<double>(jump) == std::ceil(warm)) t_warm = t;
        }
        const auto& row = rows(z);
        const double exit = -row.diagonal;
        if (!(exit > 0.0)) throw ZeroExitRate(z);
        const double hold = -std::log1p(-unit(rng)) / exit;
        if (by_time && t + hold >= cfg.horizon) break;
        t += hold;
        double u = unit(rng) * exit;
        const Transition* pick = &row.transitions.back();
        for (const auto& tr : row.transitions) {
            if (u < tr.rate) {
                pick = &tr;
                break;
            }
            u -= tr.rate;
        }
        const bool counted = by_time ? t >= warm : static_cast<double>(jump) >= std::ceil(warm);
        if (pick->kind == EventKind::departure && counted) ++out.departures;
        z = pick->target;
        ++out.jumps;
        if (log) *log << t << ',' << z.n << ',' << z.k << ',' << to_string(pick->kind) << '\n';
    }
    out.elapsed = (by_time ? cfg.horizon : t) - t_warm;
    out.throughput = out.elapsed > 0.0 ? static_cast<double>(out.departures) / out.elapsed : 0.0;
    out.final_state = z;
    return out;
}

}  // namespace detail

/// Monte Carlo estimate of the long-run departure rate.
inline ThroughputEstimate simulate(const JointModel& model, const SimConfig& cfg) {
    if (cfg.replications < 1) throw InvalidArgument("simulate: replications must be >= 1");
    if (!(cfg.warmup >= 0.0 && cfg.warmup < 1.0)) throw InvalidArgument("simulate: warmup must lie in [0,1)");
    if (!(cfg.horizon > 0.0)) throw InvalidArgument("simulate: horizon must be positive");
    if (cfg.initial.k >= model.env_size()) throw InvalidArgument("simulate: initial state outside K");

    ThroughputEstimate est;
    detail::RowCache rows(model);
    for (std::size_t r = 0; r < cfg.replications; ++r) {
        est.replications.push_back(detail::run_replication(cfg, r, rows));
        est.values.push_back(est.replications.back().throughput);
    }
    const double reps = static_cast<double>(cfg.replications);
    double sum = 0.0;
    for (double v : est.values) sum += v;
    est.mean = sum / reps;
    if (cfg.replications == 1) {
        est.half_width = std::numeric_limits<double>::infinity();
        return est;
    }
    double ss = 0.0;
    for (double v : est.values) ss += (v - est.mean) * (v - est.mean);
    const double sd = std::sqrt(ss / (reps - 1.0));
    const boost::math::students_t dist(reps - 1.0);
    est.half_width = boost::math::quantile(boost::math::complement(dist, 0.025)) * sd / std::sqrt(reps);
    return est;
}

/// Expected departure counts over the first n jumps of the truncated model's
/// embedded jump chain, v_n(m,k).
struct DepartureValueTable {
    std::size_t horizon = 0;
    Level cap = 0;
    std::size_t env_size = 0;
    std::vector<double> values;  // level-major

    double operator()(Level m, std::size_t k) const { return values[m * env_size + k]; }
    /// States within `horizon` jumps of the cap feel the truncation.
    bool boundary_affected(Level m) const { return m + horizon > cap; }
};

inline DepartureValueTable departure_values(const JointModel& model, Level cap, std::size_t horizon) {
    const std::size_t m = model.env_size();
    const std::size_t states = (cap + 1) * m;
    struct Step {
        std::size_t target;
        double prob;
        bool departure;
    };
    std::vector<std::vector<Step>> steps(states);
    for (std::size_t i = 0; i < states; ++i) {
        const auto row = model.row(model.state_at(i), cap);
        const double exit = -row.diagonal;
        if (exit > 0.0) {
            for (const auto& t : row.transitions)
                steps[i].push_back({model.index(t.target), t.rate / exit, t.kind == EventKind::departure});
        } else {
            steps[i].push_back({i, 1.0, false});
        }
    }
    DepartureValueTable table{horizon, cap, m, std::vector<double>(states, 0.0)};
    std::vector<double> next(states);
    for (std::size_t j = 0; j < horizon; ++j) {
        for (std::size_t i = 0; i < states; ++i) {
            double v = 0.0;
            for (const auto& s : steps[i]) v += s.prob * ((s.departure ? 1.0 : 0.0) + table.values[s.target]);
            next[i] = v;
        }
        table.values.swap(next);
    }
    return table;
}

struct IsotoneViolation {
    State lower, upper;  // a covering pair lower <= upper
    double margin = 0.0;  // v(lower) - v(upper) > 0
    bool boundary_affected = false;
};

struct IsotoneReport {
    bool isotone = true;  // no violation away from the cap
    std::vector<IsotoneViolation> violations;
    std::size_t interior_violations = 0;
};

/// Product-order monotonicity of v_n over the covering pairs
/// (m,k) <= (m+1,k) and (m,k) <= (m,k+1).
inline IsotoneReport isotone_check(const DepartureValueTable& table, double tol = 1e-12) {
    IsotoneReport rep;
    auto compare = [&](State lo, State hi) {
        const double a = table(lo.n, lo.k), b = table(hi.n, hi.k);
        if (a - b > tol * std::max(1.0, std::abs(a))) {
            const bool boundary = table.boundary_affected(hi.n);
            rep.violations.push_back({lo, hi, a - b, boundary});
            if (!boundary) ++rep.interior_violations;
        }
    };
    for (Level n = 0; n <= table.cap; ++n) {
        for (std::size_t k = 0; k < table.env_size; ++k) {
            if (n + 1 <= table.cap) compare({n, k}, {n + 1, k});
            if (k + 1 < table.env_size) compare({n, k}, {n, k + 1});
        }
    }
    rep.isotone = rep.interior_violations == 0;
    return rep;
}

/// Long-run jumps per unit time, sum_z pi(z) q(z).
inline double mean_jump_rate(const TruncatedSolution& sol, const JointModel& model) {
    double rate = 0.0;
    for (std::size_t i = 0; i < sol.pi.size(); ++i) rate += sol.pi[i] * -model.row(model.state_at(i), sol.cap).diagonal;
    return rate;
}

inline void write_estimate_csv(std::ostream& os, const ThroughputEstimate& est) {
    os << "replication,throughput,departures,jumps,elapsed\n";
    os.precision(17);
    for (std::size_t r = 0; r < est.replications.size(); ++r) {
        const auto& s = est.replications[r];
        os << r << ',' << s.throughput << ',' << s.departures << ',' << s.jumps << ',' << s.elapsed << '\n';
    }
}

}  // namespace qre
