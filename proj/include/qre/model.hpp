#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qre/core/error.hpp"
#include "qre/core/graph.hpp"
#include "qre/core/matrix.hpp"
#include "qre/core/tail_sequence.hpp"

namespace qre {

/// Queue-length dependent arrival and service intensities.
///
/// `arrival` holds lambda(n) for n >= 0. `service` holds mu(n); its entry at
/// n = 0 is never read because mu(0) = 0 by convention.
struct RateFamily {
    TailSequence<double> arrival;
    TailSequence<double> service;

    double lambda(Level n) const { return arrival.at(n); }
    double mu(Level n) const { return n == 0 ? 0.0 : service.at(n); }

    static RateFamily constant(double lambda, double mu) {
        return {TailSequence<double>::constant(lambda), TailSequence<double>::constant(mu)};
    }
};

/// Finite environment K = K_W + K_B together with the level-indexed
/// generators V_n (continuous moves) and stochastic matrices R_n (jumps at
/// service completions). R_0 is stored for uniform indexing but never used.
struct EnvironmentSpec {
    std::vector<std::string> labels;
    std::vector<bool> blocked;  // blocked[k] <=> k in K_B
    TailSequence<Matrix> generators;
    TailSequence<Matrix> jumps;

    std::size_t size() const { return labels.size(); }
    bool is_blocked(std::size_t k) const { return blocked[k]; }
    bool is_working(std::size_t k) const { return !blocked[k]; }

    std::vector<std::size_t> blocked_states() const {
        std::vector<std::size_t> out;
        for (std::size_t k = 0; k < size(); ++k)
            if (blocked[k]) out.push_back(k);
        return out;
    }
    std::vector<std::size_t> working_states() const {
        std::vector<std::size_t> out;
        for (std::size_t k = 0; k < size(); ++k)
            if (!blocked[k]) out.push_back(k);
        return out;
    }

    // v_n(k, l) including growth scaling.
    double v(Level n, std::size_t k, std::size_t l) const {
        return generators.base(n)(k, l) * generators.scale(n);
    }
    double r(Level n, std::size_t k, std::size_t l) const { return jumps.base(n)(k, l); }
};

struct State {
    Level n = 0;
    std::size_t k = 0;
    friend auto operator<=>(const State&, const State&) = default;
};

enum class EventKind { arrival, departure, environment };

inline const char* to_string(EventKind e) {
    switch (e) {
        case EventKind::arrival: return "arrival";
        case EventKind::departure: return "departure";
        case EventKind::environment: return "env";
    }
    return "?";
}

struct Transition {
    State target;
    double rate = 0.0;
    EventKind kind = EventKind::environment;
};

struct GeneratorRow {
    State state;
    std::vector<Transition> transitions;  // positive rates only
    double diagonal = 0.0;                // -(sum of transition rates)
};

/// A queue coupled to its environment. Immutable after construction.
class JointModel {
public:
    JointModel() = default;
    JointModel(RateFamily rates, EnvironmentSpec env, std::string name = "custom")
        : rates_(std::move(rates)), env_(std::move(env)), name_(std::move(name)) {
        tail_start_ = std::max({rates_.arrival.tail_start(), rates_.service.tail_start(),
                                env_.generators.tail_start(), env_.jumps.tail_start()});
        period_ = lcm_period(lcm_period(rates_.arrival.period(), rates_.service.period()),
                             lcm_period(env_.generators.period(), env_.jumps.period()));
    }

    const RateFamily& rates() const { return rates_; }
    const EnvironmentSpec& env() const { return env_; }
    const std::string& name() const { return name_; }

    double lambda(Level n) const { return rates_.lambda(n); }
    double mu(Level n) const { return rates_.mu(n); }
    std::size_t env_size() const { return env_.size(); }

    /// Merged tail start N0* (max of the component starts).
    Level tail_start() const { return tail_start_; }
    /// Merged period p* (lcm of the component periods).
    std::size_t period() const { return period_; }

    bool has_growth() const {
        return rates_.arrival.growth() > 0 || rates_.service.growth() > 0 ||
               env_.generators.growth() > 0 || env_.jumps.growth() > 0;
    }

    /// Outgoing transitions of (n, k). With a cap, arrivals at level cap are
    /// suppressed (the truncated generator Q_N).
    GeneratorRow row(State z, std::optional<Level> cap = std::nullopt) const {
        GeneratorRow out;
        out.state = z;
        const std::size_t m = env_.size();
        const bool working = env_.is_working(z.k);
        if (working && !(cap && z.n >= *cap)) {
            const double a = lambda(z.n);
            if (a > 0.0) out.transitions.push_back({{z.n + 1, z.k}, a, EventKind::arrival});
        }
        if (working && z.n > 0) {
            const double s = mu(z.n);
            const Matrix& r = env_.jumps.base(z.n);
            for (std::size_t l = 0; l < m; ++l) {
                const double rate = s * r(z.k, l);
                if (rate > 0.0) out.transitions.push_back({{z.n - 1, l}, rate, EventKind::departure});
            }
        }
        const Matrix& v = env_.generators.base(z.n);
        const double scale = env_.generators.scale(z.n);
        for (std::size_t l = 0; l < m; ++l) {
            if (l == z.k) continue;
            const double rate = v(z.k, l) * scale;
            if (rate > 0.0) out.transitions.push_back({{z.n, l}, rate, EventKind::environment});
        }
        double total = 0.0;
        for (const auto& t : out.transitions) total += t.rate;
        out.diagonal = -total;
        return out;
    }

    /// Level-major flat index of (n, k).
    std::size_t index(State z) const { return z.n * env_.size() + z.k; }
    State state_at(std::size_t i) const { return {i / env_.size(), i % env_.size()}; }

private:
    RateFamily rates_;
    EnvironmentSpec env_;
    std::string name_;
    Level tail_start_ = 0;
    std::size_t period_ = 1;
};

inline GeneratorRow generator_row(const JointModel& model, State z) { return model.row(z); }

// ---------------------------------------------------------------------------
// Validation

enum class IssueKind {
    malformed_matrix,
    non_conservative_row,
    negative_rate,
    non_stochastic_row,
    non_positive_rate,
    not_irreducible,
};

inline const char* to_string(IssueKind k) {
    switch (k) {
        case IssueKind::malformed_matrix: return "MalformedMatrix";
        case IssueKind::non_conservative_row: return "NonConservativeRow";
        case IssueKind::negative_rate: return "NegativeRate";
        case IssueKind::non_stochastic_row: return "NonStochasticRow";
        case IssueKind::non_positive_rate: return "NonPositiveRate";
        case IssueKind::not_irreducible: return "NotIrreducible";
    }
    return "?";
}

struct ValidationIssue {
    IssueKind kind;
    std::optional<Level> n;
    std::optional<std::size_t> k;
    std::string message;
};

struct ValidationReport {
    Level n_check = 0;
    std::vector<ValidationIssue> issues;
    bool connected = false;
    std::size_t component_count = 0;
    // States of the smallest strongly connected component when not connected.
    std::vector<State> offending_component;

    bool passes() const { return issues.empty() && connected; }
    bool has(IssueKind kind) const {
        return std::any_of(issues.begin(), issues.end(), [&](const auto& i) { return i.kind == kind; });
    }
    // Structural problems other than truncated connectivity.
    bool structurally_valid() const {
        return std::none_of(issues.begin(), issues.end(),
                            [](const auto& i) { return i.kind != IssueKind::not_irreducible; });
    }
};

namespace detail {

// Row-sum checks are relative to the row's magnitude so that growing rate
// families are judged consistently.
inline constexpr double kRowTolerance = 1e-12;

inline void check_generator(const Matrix& v, Level n, ValidationReport& rep) {
    for (std::size_t k = 0; k < v.rows(); ++k) {
        double scale = 1.0;
        for (std::size_t l = 0; l < v.cols(); ++l) {
            scale = std::max(scale, std::abs(v(k, l)));
            if (l != k && v(k, l) < 0.0) {
                rep.issues.push_back({IssueKind::negative_rate, n, k,
                                      "V_" + std::to_string(n) + " has a negative off-diagonal entry"});
            }
        }
        const double sum = v.row_sum(k);
        if (std::abs(sum) > kRowTolerance * scale) {
            rep.issues.push_back({IssueKind::non_conservative_row, n, k,
                                  "V_" + std::to_string(n) + " row sums to " + std::to_string(sum)});
        }
    }
}

inline void check_stochastic(const Matrix& r, Level n, ValidationReport& rep) {
    for (std::size_t k = 0; k < r.rows(); ++k) {
        for (std::size_t l = 0; l < r.cols(); ++l) {
            if (r(k, l) < 0.0) {
                rep.issues.push_back({IssueKind::negative_rate, n, k,
                                      "R_" + std::to_string(n) + " has a negative entry"});
            }
        }
        const double sum = r.row_sum(k);
        if (std::abs(sum - 1.0) > kRowTolerance) {
            rep.issues.push_back({IssueKind::non_stochastic_row, n, k,
                                  "R_" + std::to_string(n) + " row sums to " + std::to_string(sum)});
        }
    }
}

}  // namespace detail

/// Check the structural assumptions on levels 0..n_check and strong
/// connectivity of the state graph restricted to {0..n_check} x K.
inline ValidationReport validate_model(const JointModel& model, Level n_check) {
    if (n_check < model.tail_start() + model.period()) {
        throw InvalidArgument("validate_model: n_check must be >= N0* + p* = " +
                              std::to_string(model.tail_start() + model.period()));
    }
    ValidationReport rep;
    rep.n_check = n_check;
    const auto& env = model.env();
    const std::size_t m = env.size();

    bool shapes_ok = m >= 1 && env.blocked.size() == m;
    if (!shapes_ok) {
        rep.issues.push_back({IssueKind::malformed_matrix, std::nullopt, std::nullopt,
                              "environment needs >= 1 label and a blocked flag per label"});
    }
    auto check_shape = [&](const Matrix& mat, const char* what, std::size_t i, bool tail) {
        if (mat.rows() != m || mat.cols() != m) {
            shapes_ok = false;
            rep.issues.push_back({IssueKind::malformed_matrix, std::nullopt, std::nullopt,
                                  std::string(what) + (tail ? " tail[" : " prefix[") + std::to_string(i) +
                                      "] is not |K| x |K|"});
        }
    };
    env.generators.for_each_stored([&](std::size_t i, const Matrix& mat, bool tail) { check_shape(mat, "V", i, tail); });
    env.jumps.for_each_stored([&](std::size_t i, const Matrix& mat, bool tail) { check_shape(mat, "R", i, tail); });
    if (env.jumps.growth() != 0.0) {
        shapes_ok = false;
        rep.issues.push_back({IssueKind::malformed_matrix, std::nullopt, std::nullopt,
                              "jump matrices R_n cannot carry a growth factor"});
    }
    if (!shapes_ok) return rep;

    for (Level n = 0; n <= n_check; ++n) {
        if (!(model.lambda(n) > 0.0)) {
            rep.issues.push_back({IssueKind::non_positive_rate, n, std::nullopt,
                                  "lambda(" + std::to_string(n) + ") must be positive"});
        }
        if (n >= 1 && !(model.mu(n) > 0.0)) {
            rep.issues.push_back({IssueKind::non_positive_rate, n, std::nullopt,
                                  "mu(" + std::to_string(n) + ") must be positive"});
        }
        detail::check_generator(env.generators.at(n), n, rep);
        if (n >= 1) detail::check_stochastic(env.jumps.at(n), n, rep);
    }

    // Strong connectivity among the states of levels 0..n_check. Paths may
    // pass through levels up to 2 n_check: cutting the graph exactly at
    // n_check strands states such as (N, 0) of the base stock model, which is
    // entered only from above.
    const std::size_t states = (n_check + 1) * m;
    const Level graph_cap = 2 * n_check;
    const std::size_t graph_states = (graph_cap + 1) * m;
    Adjacency adj(graph_states);
    for (std::size_t i = 0; i < graph_states; ++i) {
        const auto row = model.row(model.state_at(i), graph_cap);
        for (const auto& t : row.transitions) adj[i].push_back(model.index(t.target));
    }
    std::size_t total = 0;
    const auto graph_comp = strong_components(adj, &total);
    // Renumber the components met by the checked states.
    std::vector<std::size_t> remap(total, total);
    std::vector<std::size_t> comp(states);
    std::size_t count = 0;
    for (std::size_t i = 0; i < states; ++i) {
        auto& id = remap[graph_comp[i]];
        if (id == total) id = count++;
        comp[i] = id;
    }
    rep.component_count = count;
    rep.connected = count == 1;
    if (!rep.connected) {
        std::vector<std::size_t> sizes(count, 0);
        for (std::size_t c : comp) ++sizes[c];
        const std::size_t smallest =
            static_cast<std::size_t>(std::min_element(sizes.begin(), sizes.end()) - sizes.begin());
        for (std::size_t i = 0; i < states; ++i)
            if (comp[i] == smallest) rep.offending_component.push_back(model.state_at(i));
        rep.issues.push_back({IssueKind::not_irreducible, std::nullopt, std::nullopt,
                              "state graph on levels 0.." + std::to_string(n_check) + " has " +
                                  std::to_string(count) + " strongly connected components"});
    }
    return rep;
}

/// Default validation horizon used by the tools: a couple of full periods
/// past the merged tail start.
inline Level default_check_horizon(const JointModel& model) {
    return std::max<Level>(8, model.tail_start() + 2 * model.period() + 2);
}

}  // namespace qre
