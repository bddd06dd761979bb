#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qre/bounds.hpp"
#include "qre/catalog.hpp"
#include "qre/ergodicity.hpp"
#include "qre/model.hpp"
#include "qre/model_io.hpp"
#include "qre/numerics.hpp"
#include "qre/separability.hpp"
#include "qre/simulate.hpp"

namespace qre::cli {

inline constexpr const char* kVersion = "0.1.0";

enum Exit : int { success = 0, negative = 1, error = 2 };

struct RunSpec {
    std::string command;
    std::optional<std::string> model_file;
    std::optional<std::string> catalog_name;
    CatalogParams params;
    std::string kind = "linear_drift";
    std::string method = "elimination";
    std::optional<Level> cap;
    double tol = 1e-9;
    std::uint64_t seed = 1;
    double horizon = 1e5;
    std::size_t replications = 20;
    double warmup = 0.1;
    std::size_t value_horizon = 50;
    Level value_cap = 60;
    bool no_simulation = false;
    bool events = false;
    std::vector<double> gammas;
    std::optional<std::string> out_dir;
};

namespace detail {

inline std::string num(double x, int precision = 12) {
    std::ostringstream os;
    os << std::setprecision(precision) << x;
    return os.str();
}

// Collects output files and writes them together with the run manifest.
class Outputs {
public:
    Outputs(const RunSpec& spec) : spec_(spec) {}

    std::ostringstream& file(const std::string& name) { return files_[name]; }

    void manifest(const std::string& key, const std::string& value) { manifest_[key] = value; }

    void flush() const {
        if (!spec_.out_dir) return;
        namespace fs = std::filesystem;
        const fs::path dir(*spec_.out_dir);
        fs::create_directories(dir);
        for (const auto& [name, text] : files_) {
            std::ofstream out(dir / name, std::ios::binary);
            out << text.str();
        }
        std::ofstream out(dir / "manifest.txt", std::ios::binary);
        for (const auto& [k, v] : manifest_) out << k << '=' << v << '\n';
        out << "outputs=";
        bool first = true;
        for (const auto& [name, text] : files_) {
            out << (first ? "" : ",") << name;
            first = false;
        }
        out << '\n';
    }

private:
    const RunSpec& spec_;
    std::map<std::string, std::ostringstream> files_;
    std::map<std::string, std::string> manifest_;
};

inline void base_manifest(Outputs& o, const RunSpec& s) {
    o.manifest("tool", "qre");
    o.manifest("version", kVersion);
    o.manifest("command", s.command);
    if (s.model_file) o.manifest("model_file", *s.model_file);
    if (s.catalog_name) o.manifest("catalog", *s.catalog_name);
    o.manifest("lambda", num(s.params.lambda, 17));
    o.manifest("mu", num(s.params.mu, 17));
    o.manifest("nu", num(s.params.nu, 17));
    o.manifest("gamma", num(s.params.gamma, 17));
    o.manifest("eta", num(s.params.eta, 17));
    o.manifest("b", std::to_string(s.params.b));
    o.manifest("tol", num(s.tol, 17));
    if (s.command == "certify") o.manifest("kind", s.kind);
    if (s.command == "solve") {
        o.manifest("method", s.method);
        o.manifest("N", s.cap ? std::to_string(*s.cap) : "auto");
    }
    if (s.command == "simulate" || s.command == "bounds") {
        o.manifest("seed", std::to_string(s.seed));
        o.manifest("horizon", num(s.horizon, 17));
        o.manifest("replications", std::to_string(s.replications));
        o.manifest("warmup", num(s.warmup, 17));
    }
    if (s.command == "bounds") {
        o.manifest("value_horizon", std::to_string(s.value_horizon));
        o.manifest("value_cap", std::to_string(s.value_cap));
        o.manifest("simulation", s.no_simulation ? "off" : "on");
    }
    if (s.command == "sweep") {
        std::string g;
        for (std::size_t i = 0; i < s.gammas.size(); ++i) g += (i ? "," : "") + num(s.gammas[i], 17);
        o.manifest("gammas", g);
    }
}

inline JointModel load(const RunSpec& s) {
    if (s.model_file) return load_model(*s.model_file);
    return catalog(*s.catalog_name, s.params);
}

inline std::string state_label(const JointModel& m, State z) {
    return "(" + std::to_string(z.n) + "," + m.env().labels[z.k] + ")";
}

inline PerishableParams perishable(const RunSpec& s) {
    return {s.params.lambda, s.params.mu, s.params.nu, s.params.gamma, s.params.b};
}

// Structural defects stop the analysis; a disconnected truncation is only
// reported.
inline bool check_model(const JointModel& model, std::ostream& err) {
    const auto rep = validate_model(model, default_check_horizon(model));
    for (const auto& i : rep.issues) {
        const bool fatal = i.kind != IssueKind::not_irreducible;
        err << (fatal ? "error: " : "warning: ") << to_string(i.kind) << ": " << i.message << '\n';
    }
    return rep.structurally_valid();
}

inline int cmd_validate(const RunSpec& s, const JointModel& model, Outputs& o, std::ostream& out) {
    const Level n_check = s.cap ? *s.cap : default_check_horizon(model);
    const auto rep = validate_model(model, n_check);
    auto& csv = o.file("validation.csv");
    csv << "kind,n,k,message\n";
    for (const auto& i : rep.issues) {
        csv << to_string(i.kind) << ',' << (i.n ? std::to_string(*i.n) : "") << ','
            << (i.k ? std::to_string(*i.k) : "") << ",\"" << i.message << "\"\n";
    }
    out << "model: " << model.name() << "\nlevels checked: 0.." << n_check << "\nN0*: " << model.tail_start()
        << "\np*: " << model.period() << "\nconnected: " << (rep.connected ? "yes" : "no") << '\n';
    for (const auto& i : rep.issues) out << "  " << to_string(i.kind) << ": " << i.message << '\n';
    if (!rep.connected && !rep.offending_component.empty()) {
        out << "  smallest component:";
        for (const auto& z : rep.offending_component) out << ' ' << state_label(model, z);
        out << '\n';
    }
    out << (rep.passes() ? "PASS\n" : "FAIL\n");
    if (rep.passes()) return success;
    return rep.structurally_valid() ? negative : error;
}

inline int cmd_separability(const RunSpec& s, const JointModel& model, Outputs& o, std::ostream& out) {
    const double tol = s.tol;
    const auto rep = product_form(model, std::min(tol, kDefaultTolerance));
    const auto& env = model.env();
    out << "model: " << model.name() << "\nseparable: " << (rep.separable ? "yes" : "no") << '\n';
    if (!rep.separable) out << "reason: " << to_string(rep.reason) << '\n';
    out << "tail ratio: " << num(rep.tail_ratio) << (rep.near_critical ? " (near critical)" : "") << '\n';
    out << "theta residual: " << num(rep.theta.residual, 3) << " (worst level " << rep.theta.worst_level << ")\n";
    out << "k  label  theta  blocked\n";
    auto& theta_csv = o.file("theta.csv");
    theta_csv << std::setprecision(17) << "k,label,theta,blocked\n";
    for (std::size_t k = 0; k < env.size() && k < rep.theta.theta.size(); ++k) {
        out << k << "  " << env.labels[k] << "  " << num(rep.theta.theta[k]) << "  " << env.is_blocked(k) << '\n';
        theta_csv << k << ',' << env.labels[k] << ',' << rep.theta.theta[k] << ',' << env.is_blocked(k) << '\n';
    }
    auto& rec = o.file("separability.txt");
    rec << std::setprecision(17) << "separable=" << rep.separable << "\nreason=" << to_string(rep.reason)
        << "\ntail_ratio=" << rep.tail_ratio << "\ntheta_residual=" << rep.theta.residual
        << "\ntheta_worst_level=" << rep.theta.worst_level << '\n';
    if (rep.result) {
        const auto& r = *rep.result;
        out << "C: " << num(r.normalization()) << "\nbalance residual: " << num(r.balance_residual, 3)
            << "\nthroughput: " << num(r.throughput()) << '\n';
        rec << "C=" << r.normalization() << "\nbalance_residual=" << r.balance_residual
            << "\nbalance_horizon=" << r.balance_horizon << "\nthroughput=" << r.throughput()
            << "\nblocked_probability=" << r.blocked_probability() << '\n';
    }
    return rep.separable ? success : negative;
}

inline int cmd_certify(const RunSpec& s, const JointModel& model, Outputs& o, std::ostream& out) {
    LyapunovKind kind;
    if (s.kind == "linear_drift") kind = LyapunovKind::linear_drift;
    else if (s.kind == "hitting_time") kind = LyapunovKind::hitting_time;
    else throw CLI::ValidationError("--kind", "expected linear_drift or hitting_time");
    const auto res = certify(model, kind);
    out << "model: " << model.name() << "\ncertified: " << (res.certified ? "yes" : "no") << '\n';
    if (!res.certified) out << "reason: " << to_string(res.reason) << "\ndetail: " << res.detail << '\n';
    out << "tail ratio: " << num(res.necessary.tail_ratio) << '\n';
    auto& rec = o.file("certificate.txt");
    rec << std::setprecision(17) << "certified=" << res.certified << "\nreason=" << to_string(res.reason)
        << "\ntail_ratio=" << res.necessary.tail_ratio << '\n';
    if (res.violating_state) rec << "violating_state=" << state_label(model, *res.violating_state) << '\n';
    if (res.certificate) {
        const auto& c = *res.certificate;
        out << "kind: " << to_string(c.kind) << "\nepsilon: " << num(c.epsilon)
            << "\nepsilon_tilde: " << num(c.epsilon_tilde) << "\nc_hat infimum: " << num(c.c_hat_infimum)
            << "\ncheck horizon: " << c.check_horizon << "\nworst margin: " << num(c.worst_margin, 6) << " at "
            << state_label(model, c.worst_state) << '\n';
        rec << "kind=" << to_string(c.kind) << "\nepsilon=" << c.epsilon << "\nepsilon_tilde=" << c.epsilon_tilde
            << "\nc_hat_infimum=" << c.c_hat_infimum << "\ncheck_horizon=" << c.check_horizon
            << "\nworst_drift=" << c.worst_drift << "\nworst_margin=" << c.worst_margin
            << "\nworst_state=" << state_label(model, c.worst_state) << "\nF_levels=";
        for (std::size_t i = 0; i < c.exception_levels.size(); ++i) rec << (i ? "," : "") << c.exception_levels[i];
        rec << '\n';
        auto& ct = o.file("c_table.csv");
        ct << std::setprecision(17) << "n,service_branch,environment_branch,c_hat,c\n";
        for (std::size_t i = 0; i < c.c_hat_table.size(); ++i) {
            const auto& h = c.c_hat_table[i];
            ct << h.n << ',' << h.service_branch << ',' << h.environment_branch << ',' << h.value << ','
               << c.c_table[i] << '\n';
        }
        auto& tt = o.file("tau.csv");
        tt << std::setprecision(17) << "n,k,tau,residual\n";
        for (const auto& t : c.tau_tables)
            for (std::size_t k = 0; k < t.tau.size(); ++k) tt << t.n << ',' << k << ',' << t.tau[k] << ',' << t.residual << '\n';
    }
    return res.certified ? success : negative;
}

inline int cmd_solve(const RunSpec& s, const JointModel& model, Outputs& o, std::ostream& out) {
    TruncatedSolution sol;
    std::vector<TruncationStep> history;
    if (s.cap) {
        SolveOptions opts;
        opts.method = s.method == "power" ? SolveMethod::power : SolveMethod::elimination;
        sol = solve_truncated(model, *s.cap, opts);
    } else {
        if (s.method != "elimination") throw CLI::ValidationError("--method", "power requires --N");
        auto at = auto_truncate(model, s.tol);
        if (at.near_critical) out << "warning: NearCritical (tail ratio within 1e-9 of 1)\n";
        history = at.history;
        sol = std::move(at.solution);
    }
    const auto met = metrics(sol, model);
    const auto cut = check_cut_structure(sol, model);
    out << "model: " << model.name() << "\nN: " << sol.cap << "\nresidual: " << num(sol.residual, 3)
        << "\nmass near cap: " << num(sol.truncation_estimate, 3) << "\nthroughput: " << num(met.throughput)
        << "\nmean queue length: " << num(met.mean_queue_length)
        << "\nP(blocked): " << num(met.blocked_probability) << "\nloss rate: " << num(met.loss_rate)
        << "\ncut identity worst deviation: " << num(cut.worst_relative, 3) << " (level " << cut.worst_level << ")\n";
    if (!history.empty()) out << "truncation chosen by doubling (heuristic, no error bound)\n";
    auto& pi = o.file("pi.csv");
    pi << std::setprecision(17) << "n,k,pi\n";
    for (Level n = 0; n <= sol.cap; ++n)
        for (std::size_t k = 0; k < sol.env_size; ++k) pi << n << ',' << k << ',' << sol(n, k) << '\n';
    auto& rec = o.file("metrics.txt");
    rec << std::setprecision(17) << "N=" << sol.cap << "\nresidual=" << sol.residual
        << "\ntruncation_estimate=" << sol.truncation_estimate << "\nthroughput=" << met.throughput
        << "\nmean_queue_length=" << met.mean_queue_length << "\nblocked_probability=" << met.blocked_probability
        << "\nloss_rate=" << met.loss_rate << "\ncut_worst_relative=" << cut.worst_relative << '\n';
    if (!history.empty()) {
        auto& h = o.file("truncation_history.csv");
        h << std::setprecision(17) << "N,throughput,blocked_probability,truncation_estimate\n";
        for (const auto& e : history)
            h << e.cap << ',' << e.throughput << ',' << e.blocked_probability << ',' << e.truncation_estimate << '\n';
    }
    return success;
}

inline int cmd_simulate(const RunSpec& s, const JointModel& model, Outputs& o, std::ostream& out) {
    SimConfig cfg;
    cfg.seed = s.seed;
    cfg.horizon = s.horizon;
    cfg.replications = s.replications;
    cfg.warmup = s.warmup;
    std::ostringstream* events = s.events ? &o.file("events.csv") : nullptr;
    if (events) *events << std::setprecision(17);
    cfg.event_log = events;
    const auto est = simulate(model, cfg);
    out << "model: " << model.name() << "\nseed: " << s.seed << "\nthroughput: " << num(est.mean) << " +- "
        << num(est.half_width, 6) << " (95%, " << s.replications << " replications)\n";
    write_estimate_csv(o.file("replications.csv"), est);
    auto& rec = o.file("estimate.txt");
    rec << std::setprecision(17) << "seed=" << s.seed << "\nmean=" << est.mean << "\nhalf_width=" << est.half_width
        << '\n';
    return success;
}

inline int cmd_bounds(const RunSpec& s, Outputs& o, std::ostream& out) {
    BoundOptions opts;
    opts.tol = s.tol;
    opts.run_simulation = !s.no_simulation;
    opts.sim.seed = s.seed;
    opts.sim.horizon = s.horizon;
    opts.sim.replications = s.replications;
    opts.sim.warmup = s.warmup;
    opts.value_horizon = s.value_horizon;
    opts.value_cap = s.value_cap;
    const auto r = bound_report(perishable(s), opts);
    out << "TH-  = " << num(r.th_minus) << "\nTHo  = " << num(r.th_o) << " (truncated at N=" << r.th_o_cap << ")\n";
    if (r.th_o_closed) out << "THo closed form = " << num(*r.th_o_closed) << '\n';
    if (r.th_o_sim) out << "THo sim = " << num(r.th_o_sim->mean) << " +- " << num(r.th_o_sim->half_width, 6) << '\n';
    out << "TH+  = " << num(r.th_plus) << "\nordering TH- <= THo <= TH+: " << (r.ordering_holds ? "holds" : "VIOLATED")
        << "\nregime: " << (r.regime() == BoundRegime::proved ? "proved conditions" : "conjecture (empirical)")
        << '\n';
    for (const auto& iso : r.isotone) {
        out << "v_n isotone (" << iso.system << "): " << (iso.report.isotone ? "yes" : "no") << " ("
            << iso.report.interior_violations << " interior, " << iso.report.violations.size() << " total violations)\n";
    }
    write_bound_record(o.file("bounds.txt"), r);
    return r.ordering_holds ? success : negative;
}

inline int cmd_sweep(const RunSpec& s, Outputs& o, std::ostream& out) {
    if (s.gammas.empty()) throw CLI::ValidationError("--gammas", "at least one value required");
    const auto rows = gamma_sweep(perishable(s), s.gammas, s.tol);
    write_sweep_csv(o.file("sweep.csv"), rows);
    write_sweep_csv(out, rows);
    return success;
}

}  // namespace detail

/// Execute a parsed run. Results go to `out`, diagnostics to `err`, files
/// (with manifest.txt) to spec.out_dir when set.
inline int run(const RunSpec& s, std::ostream& out, std::ostream& err) {
    detail::Outputs o(s);
    detail::base_manifest(o, s);
    try {
        int code = error;
        if (s.command == "bounds") {
            code = detail::cmd_bounds(s, o, out);
        } else if (s.command == "sweep") {
            code = detail::cmd_sweep(s, o, out);
        } else {
            if (s.model_file.has_value() == s.catalog_name.has_value()) {
                err << "error: give exactly one of --model or --catalog\n";
                return error;
            }
            const auto model = detail::load(s);
            o.manifest("model_hash", hex(model_hash(model)));
            if (s.command == "validate") {
                code = detail::cmd_validate(s, model, o, out);
            } else {
                if (!detail::check_model(model, err)) return error;
                if (s.command == "separability") code = detail::cmd_separability(s, model, o, out);
                else if (s.command == "certify") code = detail::cmd_certify(s, model, o, out);
                else if (s.command == "solve") code = detail::cmd_solve(s, model, o, out);
                else if (s.command == "simulate") code = detail::cmd_simulate(s, model, o, out);
                else {
                    err << "error: unknown command '" << s.command << "'\n";
                    return error;
                }
            }
        }
        o.manifest("exit", std::to_string(code));
        o.flush();
        return code;
    } catch (const Diverging& e) {
        err << "not ergodic: " << e.what() << '\n';
        return negative;
    } catch (const CLI::Error& e) {
        err << "error: " << e.what() << '\n';
        return error;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return error;
    }
}

/// Parse argv with CLI11 and run.
inline int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Queues in random environments: separability, ergodicity, numerics, simulation"};
    app.require_subcommand(1);
    RunSpec s;
    std::string catalog_name, model_file;

    auto add_model = [&](CLI::App* sub) {
        auto* c = sub->add_option("--catalog", catalog_name, "catalog model name");
        auto* m = sub->add_option("--model", model_file, "JSON model file");
        c->excludes(m);
    };
    auto add_params = [&](CLI::App* sub) {
        sub->add_option("--lambda", s.params.lambda, "arrival rate");
        sub->add_option("--mu", s.params.mu, "service rate");
        sub->add_option("--nu", s.params.nu, "replenishment rate");
        sub->add_option("--gamma", s.params.gamma, "ageing rate (on->off rate for on-off models)");
        sub->add_option("--eta", s.params.eta, "off->on rate");
        sub->add_option("--b", s.params.b, "base stock level");
    };
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--tol", s.tol, "tolerance");
        sub->add_option("--out", s.out_dir, "output directory for CSV files and manifest");
    };
    auto add_sim = [&](CLI::App* sub) {
        sub->add_option("--seed", s.seed, "random seed");
        sub->add_option("--horizon", s.horizon, "simulated time per replication");
        sub->add_option("--replications", s.replications, "number of replications")->check(CLI::PositiveNumber);
        sub->add_option("--warmup", s.warmup, "discarded fraction of the horizon")->check(CLI::Range(0.0, 0.999999));
    };

    auto* validate = app.add_subcommand("validate", "check generator shapes and connectivity");
    auto* separability = app.add_subcommand("separability", "decide product form");
    auto* certify_cmd = app.add_subcommand("certify", "Lyapunov certificate of ergodicity");
    auto* solve = app.add_subcommand("solve", "stationary distribution of a truncation");
    auto* sim = app.add_subcommand("simulate", "simulate and estimate throughput");
    auto* bounds = app.add_subcommand("bounds", "throughput bounds for the perishable inventory triple");
    auto* sweep = app.add_subcommand("sweep", "bounds along a grid of ageing rates");
    for (auto* sub : {validate, separability, certify_cmd, solve, sim}) {
        add_model(sub);
        add_params(sub);
        add_common(sub);
    }
    for (auto* sub : {bounds, sweep}) {
        add_params(sub);
        add_common(sub);
    }
    std::optional<Level> n_option;
    validate->add_option("--N", n_option, "highest level checked");
    certify_cmd->add_option("--kind", s.kind, "linear_drift or hitting_time");
    solve->add_option("--N", n_option, "truncation level (default: automatic doubling)");
    solve->add_option("--method", s.method, "elimination or power")
        ->check(CLI::IsMember({"elimination", "power"}));
    add_sim(sim);
    sim->add_flag("--events", s.events, "write the event log of replication 0");
    add_sim(bounds);
    bounds->add_option("--value-horizon", s.value_horizon, "jump horizon for departure values");
    bounds->add_option("--value-cap", s.value_cap, "truncation level for departure values");
    bounds->add_flag("--no-simulation", s.no_simulation, "skip the simulation estimate");
    sweep->add_option("--gammas", s.gammas, "ageing rates")->delimiter(',')->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? success : error;
    }
    for (auto* sub : app.get_subcommands()) s.command = sub->get_name();
    if (!catalog_name.empty()) s.catalog_name = catalog_name;
    if (!model_file.empty()) s.model_file = model_file;
    s.cap = n_option;
    return run(s, out, err);
}

}  // namespace qre::cli
