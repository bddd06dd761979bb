#pragma once

#include <algorithm>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "qre/catalog.hpp"
#include "qre/core/error.hpp"
#include "qre/model.hpp"
#include "qre/numerics.hpp"
#include "qre/separability.hpp"
#include "qre/simulate.hpp"

namespace qre {

class InvalidParams : public Error {
public:
    using Error::Error;
};

class NotSeparableBoundSystem : public Error {
public:
    using Error::Error;
};

struct PerishableParams {
    double lambda = 1.0;
    double mu = 2.0;
    double nu = 1.0;
    double gamma = 1.0;
    int b = 1;

    CatalogParams catalog() const {
        CatalogParams p;
        p.lambda = lambda;
        p.mu = mu;
        p.nu = nu;
        p.gamma = gamma;
        p.b = b;
        return p;
    }
};

struct PerishableTriple {
    JointModel minus, o, plus;
    bool ageing_ordered = false;  // loss rates of -, o, + ordered on the test rectangle
};

namespace detail {

// Ageing rate d(n,k) read back from V_n(k, k-1).
inline double ageing_rate(const JointModel& model, Level n, std::size_t k) {
    return k == 0 ? 0.0 : model.env().v(n, k, k - 1);
}

}  // namespace detail

inline PerishableTriple build_triple(const PerishableParams& p) {
    if (!(p.lambda > 0.0 && p.mu > 0.0 && p.nu > 0.0 && p.gamma >= 0.0))
        throw InvalidParams("build_triple: rates must be positive (gamma non-negative)");
    if (p.b < 1) throw InvalidParams("build_triple: b must be >= 1");
    if (!(p.lambda < p.mu)) throw InvalidParams("build_triple: requires lambda < mu");
    const auto cp = p.catalog();
    PerishableTriple t{catalog("perishable_minus", cp), catalog("perishable_o", cp), catalog("perishable_plus", cp)};
    t.ageing_ordered = true;
    const Level levels = t.o.tail_start() + 2 * t.o.period() + 2;
    for (Level n = 0; n <= levels; ++n) {
        for (std::size_t k = 0; k <= static_cast<std::size_t>(p.b); ++k) {
            const double plus = detail::ageing_rate(t.plus, n, k);
            const double o = detail::ageing_rate(t.o, n, k);
            const double minus = detail::ageing_rate(t.minus, n, k);
            if (!(plus <= o && o <= minus)) t.ageing_ordered = false;
        }
    }
    return t;
}

/// Stationary law of the "o" system with b = 1 in closed form.
struct PerishableB1ClosedForm {
    double lambda, mu, nu, gamma;

    double normalization() const { return mu / (mu - lambda) * (1.0 + lambda / nu) + gamma / nu; }
    double pi(Level n, std::size_t k) const {
        const double rho_n = std::pow(lambda / mu, static_cast<double>(n));
        if (k == 1) return rho_n / normalization();
        return (n == 0 ? (lambda + gamma) / nu : rho_n * lambda / nu) / normalization();
    }
    /// mu * sum_{n>0} pi(n,1)
    double throughput() const { return lambda * mu / (mu - lambda) / normalization(); }
};

struct SystemIsotone {
    std::string system;
    IsotoneReport report;
};

struct BoundOptions {
    double tol = 1e-9;
    bool run_simulation = true;
    SimConfig sim;
    std::size_t value_horizon = 50;  // jump horizon for v_n
    Level value_cap = 60;
    bool check_isotone = true;
};

enum class BoundRegime { proved, conjecture };

struct BoundReport {
    PerishableParams params;
    double th_minus = 0.0, th_plus = 0.0;
    double balance_residual_minus = 0.0, balance_residual_plus = 0.0;
    double th_o = 0.0;  // truncated solve
    Level th_o_cap = 0;
    std::optional<ThroughputEstimate> th_o_sim;
    std::optional<double> th_o_closed;  // b = 1 only

    // Regime flags: lower bound proved when lambda <= gamma, both when mu == gamma,
    // closed forms available when b == 1.
    bool lower_proved = false;
    bool full_proved = false;
    bool closed_form = false;

    bool ordering_exact = false;  // TH- <= TH_o <= TH+ within tol on the truncated value
    bool ordering_sim = true;     // simulation CI meets [TH-, TH+]
    bool ordering_holds = false;
    double lower_margin = 0.0;  // TH_o - TH-
    double upper_margin = 0.0;  // TH+ - TH_o
    std::vector<SystemIsotone> isotone;

    BoundRegime regime() const { return full_proved || closed_form ? BoundRegime::proved : BoundRegime::conjecture; }
};

inline BoundReport bound_report(const PerishableParams& p, const BoundOptions& opts = {}) {
    const auto triple = build_triple(p);
    BoundReport rep;
    rep.params = p;

    auto exact = [&](const JointModel& model, double& residual) {
        const auto sep = product_form(model);
        if (!sep.separable) {
            throw NotSeparableBoundSystem("bound_report: " + model.name() + " is not separable (" +
                                          to_string(sep.reason) + ")");
        }
        residual = sep.result->balance_residual;
        return sep.result->throughput();
    };
    rep.th_minus = exact(triple.minus, rep.balance_residual_minus);
    rep.th_plus = exact(triple.plus, rep.balance_residual_plus);

    const auto trunc = auto_truncate(triple.o, opts.tol);
    rep.th_o = trunc.metrics.throughput;
    rep.th_o_cap = trunc.solution.cap;
    if (p.b == 1) rep.th_o_closed = PerishableB1ClosedForm{p.lambda, p.mu, p.nu, p.gamma}.throughput();

    rep.lower_proved = p.lambda <= p.gamma;
    rep.full_proved = p.mu == p.gamma;
    rep.closed_form = p.b == 1;

    rep.lower_margin = rep.th_o - rep.th_minus;
    rep.upper_margin = rep.th_plus - rep.th_o;
    rep.ordering_exact = rep.lower_margin >= -opts.tol && rep.upper_margin >= -opts.tol &&
                         rep.th_minus <= rep.th_plus + opts.tol;
    if (opts.run_simulation) {
        rep.th_o_sim = simulate(triple.o, opts.sim);
        const auto& s = *rep.th_o_sim;
        rep.ordering_sim = s.mean + s.half_width >= rep.th_minus - opts.tol &&
                           s.mean - s.half_width <= rep.th_plus + opts.tol;
    }
    rep.ordering_holds = rep.ordering_exact && rep.ordering_sim;

    if (opts.check_isotone) {
        const std::pair<const char*, const JointModel*> systems[] = {
            {"minus", &triple.minus}, {"o", &triple.o}, {"plus", &triple.plus}};
        for (const auto& [name, model] : systems) {
            rep.isotone.push_back(
                {name, isotone_check(departure_values(*model, opts.value_cap, opts.value_horizon))});
        }
    }
    return rep;
}

/// Flat key=value record.
inline void write_bound_record(std::ostream& os, const BoundReport& r) {
    os.precision(17);
    os << "lambda=" << r.params.lambda << "\nmu=" << r.params.mu << "\nnu=" << r.params.nu
       << "\ngamma=" << r.params.gamma << "\nb=" << r.params.b << "\nth_minus=" << r.th_minus
       << "\nth_o=" << r.th_o << "\nth_o_cap=" << r.th_o_cap << "\nth_plus=" << r.th_plus
       << "\nbalance_residual_minus=" << r.balance_residual_minus
       << "\nbalance_residual_plus=" << r.balance_residual_plus << '\n';
    if (r.th_o_closed) os << "th_o_closed=" << *r.th_o_closed << '\n';
    if (r.th_o_sim) os << "th_o_sim=" << r.th_o_sim->mean << "\nth_o_sim_half_width=" << r.th_o_sim->half_width << '\n';
    os << "lower_margin=" << r.lower_margin << "\nupper_margin=" << r.upper_margin
       << "\nordering_exact=" << r.ordering_exact << "\nordering_sim=" << r.ordering_sim
       << "\nordering_holds=" << r.ordering_holds
       << "\nregime=" << (r.regime() == BoundRegime::proved ? "proved" : "conjecture")
       << "\nlower_proved=" << r.lower_proved << "\nfull_proved=" << r.full_proved << '\n';
    for (const auto& s : r.isotone) {
        os << "isotone_" << s.system << '=' << s.report.isotone << '\n';
        os << "isotone_" << s.system << "_violations=" << s.report.violations.size() << '\n';
    }
}

struct SweepRow {
    double gamma, th_minus, th_o, th_plus;
};

/// TH-, TH_o, TH+ along a grid of ageing rates (truncated TH_o, no simulation).
inline std::vector<SweepRow> gamma_sweep(PerishableParams p, const std::vector<double>& gammas, double tol = 1e-9) {
    BoundOptions opts;
    opts.tol = tol;
    opts.run_simulation = false;
    opts.check_isotone = false;
    std::vector<SweepRow> rows;
    for (double g : gammas) {
        p.gamma = g;
        const auto r = bound_report(p, opts);
        rows.push_back({g, r.th_minus, r.th_o, r.th_plus});
    }
    return rows;
}

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
    os.precision(17);
    os << "gamma,th_minus,th_o,th_plus\n";
    for (const auto& r : rows) os << r.gamma << ',' << r.th_minus << ',' << r.th_o << ',' << r.th_plus << '\n';
}

}  // namespace qre
