#include <gtest/gtest.h>

#include <map>

#include "oracle.hpp"
#include "qre/catalog.hpp"
#include "qre/model.hpp"
#include "qre/model_io.hpp"

using namespace qre;

namespace {

CatalogParams params(double lambda, double mu, double nu, double gamma, int b, double eta = 1.0) {
    CatalogParams p;
    p.lambda = lambda;
    p.mu = mu;
    p.nu = nu;
    p.gamma = gamma;
    p.b = b;
    p.eta = eta;
    return p;
}

std::map<std::pair<Level, std::size_t>, double> targets(const GeneratorRow& row) {
    std::map<std::pair<Level, std::size_t>, double> out;
    for (const auto& t : row.transitions) out[{t.target.n, t.target.k}] += t.rate;
    return out;
}

std::vector<JointModel> all_catalog_models() {
    std::vector<JointModel> out;
    for (const auto& name : catalog_names()) out.push_back(catalog(name, params(1.0, 2.0, 1.0, 0.5, 2, 1.5)));
    return out;
}

}  // namespace

TEST(Catalog, BaseStockStructure) {
    const auto m = catalog("base_stock", params(1, 1, 1, 0, 1));
    const auto& env = m.env();
    ASSERT_EQ(env.size(), 2u);
    EXPECT_TRUE(env.is_blocked(0));
    EXPECT_TRUE(env.is_working(1));
    for (Level n = 1; n < 5; ++n) {
        EXPECT_EQ(env.r(n, 1, 0), 1.0);
        EXPECT_EQ(env.r(n, 0, 0), 1.0);
        EXPECT_EQ(env.v(n, 0, 1), 1.0);
    }
}

TEST(Catalog, OnOffRatesGrowWithQueueLength) {
    const double eta = 2.0, gamma = 0.5;
    const auto m = catalog("onoff_a", params(1, 2, 1, gamma, 1, eta));
    for (Level n = 0; n < 6; ++n) {
        EXPECT_DOUBLE_EQ(m.env().v(n, 0, 1), eta * static_cast<double>(n + 1));
        EXPECT_DOUBLE_EQ(m.env().v(n, 1, 0), gamma * static_cast<double>(n + 1));
        EXPECT_EQ(m.env().jumps.at(n), Matrix::identity(2));
    }
    EXPECT_TRUE(m.has_growth());
}

TEST(Catalog, OnOffBJumpsToOffAfterService) {
    const auto m = catalog("onoff_b", params(1, 2, 1, 1, 1, 2));
    EXPECT_EQ(m.env().r(3, 1, 0), 1.0);
    EXPECT_EQ(m.env().r(3, 0, 0), 1.0);
    // lambda(n)/mu(n+1) stays lambda/mu.
    for (Level n = 0; n < 8; ++n) EXPECT_DOUBLE_EQ(m.lambda(n) / m.mu(n + 1), 0.5);
}

TEST(Catalog, PerishableAgeingRegimes) {
    const double g = 1.5;
    const int b = 3;
    const auto o = catalog("perishable_o", params(1, 2, 1, g, b));
    const auto minus = catalog("perishable_minus", params(1, 2, 1, g, b));
    const auto plus = catalog("perishable_plus", params(1, 2, 1, g, b));
    for (std::size_t k = 1; k <= 3; ++k) {
        const double kd = static_cast<double>(k);
        EXPECT_DOUBLE_EQ(o.env().v(0, k, k - 1), g * kd);
        for (Level n = 1; n < 5; ++n) EXPECT_DOUBLE_EQ(o.env().v(n, k, k - 1), g * (kd - 1.0));
        for (Level n = 0; n < 5; ++n) {
            EXPECT_DOUBLE_EQ(minus.env().v(n, k, k - 1), g * kd);
            EXPECT_DOUBLE_EQ(plus.env().v(n, k, k - 1), g * (kd - 1.0));
        }
    }
    EXPECT_EQ(o.tail_start(), 1u);
    EXPECT_EQ(o.period(), 1u);
}

TEST(Catalog, Errors) {
    try {
        catalog("nope");
        FAIL();
    } catch (const CatalogError& e) {
        EXPECT_EQ(e.kind(), CatalogError::Kind::unknown_model);
    }
    try {
        catalog("base_stock", params(1, 2, 1, 0, 0));
        FAIL();
    } catch (const CatalogError& e) {
        EXPECT_EQ(e.kind(), CatalogError::Kind::invalid_param);
    }
    EXPECT_THROW(catalog("mm1_plain", params(-1, 2, 1, 0, 1)), CatalogError);
    EXPECT_THROW(catalog("base_stock", params(1, 2, 0, 0, 1)), CatalogError);
}

TEST(GeneratorRow, BaseStockAtFullInventory) {
    const auto m = catalog("base_stock", params(1, 2, 1, 0, 2));
    const auto row = generator_row(m, {3, 2});
    const auto t = targets(row);
    ASSERT_EQ(t.size(), 2u);
    EXPECT_EQ(t.at({4, 2}), 1.0);
    EXPECT_EQ(t.at({2, 1}), 2.0);
    EXPECT_EQ(row.diagonal, -3.0);
}

TEST(GeneratorRow, PerishableOAgesEveryItemWhenIdle) {
    const auto m = catalog("perishable_o", params(1, 2, 1, 1, 2));
    const auto row = generator_row(m, {0, 2});
    const auto t = targets(row);
    ASSERT_EQ(t.size(), 2u);
    EXPECT_EQ(t.at({0, 1}), 2.0);
    EXPECT_EQ(t.at({1, 2}), 1.0);
    EXPECT_EQ(row.diagonal, -3.0);
}

TEST(GeneratorRow, BlockedStateFreezesQueue) {
    for (const auto& m : all_catalog_models()) {
        for (Level n = 0; n < 6; ++n) {
            for (std::size_t k = 0; k < m.env_size(); ++k) {
                if (!m.env().is_blocked(k)) continue;
                for (const auto& t : m.row({n, k}).transitions) {
                    EXPECT_EQ(t.target.n, n) << m.name();
                    EXPECT_EQ(t.kind, EventKind::environment);
                }
            }
        }
    }
}

TEST(GeneratorRow, ConservativeAndNonNegative) {
    for (const auto& m : all_catalog_models()) {
        for (Level n = 0; n <= default_check_horizon(m); ++n) {
            for (std::size_t k = 0; k < m.env_size(); ++k) {
                const auto row = m.row({n, k});
                double sum = 0.0;
                for (const auto& t : row.transitions) {
                    EXPECT_GT(t.rate, 0.0);
                    sum += t.rate;
                }
                EXPECT_NEAR(sum + row.diagonal, 0.0, 1e-12 * std::max(1.0, sum)) << m.name();
            }
        }
    }
}

TEST(GeneratorRow, MatchesDenseGeneratorDisplay) {
    for (const auto& m : all_catalog_models()) {
        const Level cap = 10;
        const auto q = oracle::truncated_generator(m, cap);
        for (std::size_t i = 0; i < q.rows(); ++i) {
            const auto row = m.row(m.state_at(i), cap);
            std::vector<double> dense(q.rows(), 0.0);
            for (const auto& t : row.transitions) dense[m.index(t.target)] += t.rate;
            dense[i] = row.diagonal;
            for (std::size_t j = 0; j < q.rows(); ++j) EXPECT_NEAR(dense[j], q(i, j), 1e-14) << m.name();
        }
    }
}

TEST(GeneratorRow, TailPeriodicityWithoutGrowth) {
    for (const auto& m : all_catalog_models()) {
        if (m.has_growth()) continue;
        const Level p = m.period();
        const Level start = std::max<Level>(m.tail_start(), 1);  // mu(0) = 0 breaks the shape at n = 0
        for (Level n = start; n < start + 3 * p + 2; ++n) {
            for (std::size_t k = 0; k < m.env_size(); ++k) {
                auto a = targets(m.row({n, k}));
                auto b = targets(m.row({n + p, k}));
                ASSERT_EQ(a.size(), b.size());
                for (const auto& [key, rate] : a) EXPECT_EQ(b.at({key.first + p, key.second}), rate);
            }
        }
    }
}

TEST(GeneratorRow, Deterministic) {
    const auto m = catalog("perishable_o", params(1, 2, 1, 1, 3));
    const auto a = m.row({4, 2}), b = m.row({4, 2});
    ASSERT_EQ(a.transitions.size(), b.transitions.size());
    for (std::size_t i = 0; i < a.transitions.size(); ++i) {
        EXPECT_EQ(a.transitions[i].target, b.transitions[i].target);
        EXPECT_EQ(a.transitions[i].rate, b.transitions[i].rate);
    }
}

TEST(JointModel, MM1ReducesToBirthDeath) {
    const auto m = catalog("mm1_plain", params(1, 2, 1, 0, 1));
    EXPECT_EQ(m.env_size(), 1u);
    EXPECT_TRUE(m.env().blocked_states().empty());
    const auto t = targets(m.row({3, 0}));
    EXPECT_EQ(t.size(), 2u);
    EXPECT_EQ(t.at({4, 0}), 1.0);
    EXPECT_EQ(t.at({2, 0}), 2.0);
    EXPECT_TRUE(m.row({0, 0}).transitions.size() == 1);
}

TEST(JointModel, MergedTail) {
    RateFamily rates{TailSequence<double>({1.0, 1.0, 1.0}, {1.0}), TailSequence<double>({0.0}, {3.0, 0.5})};
    EnvironmentSpec env{{"a", "b"},
                        {false, false},
                        TailSequence<Matrix>({}, {Matrix{{-1, 1}, {1, -1}}, Matrix{{-2, 2}, {1, -1}}, Matrix{{-1, 1}, {2, -2}}}),
                        TailSequence<Matrix>::constant(Matrix::identity(2))};
    const JointModel m(rates, env);
    EXPECT_EQ(m.tail_start(), 3u);
    EXPECT_EQ(m.period(), 6u);
}

TEST(Validate, BaseStockPasses) {
    const auto m = catalog("base_stock", params(1, 1, 1, 0, 2));
    const auto rep = validate_model(m, 8);
    EXPECT_TRUE(rep.passes());
    EXPECT_TRUE(rep.connected);
    EXPECT_TRUE(rep.issues.empty());
}

TEST(Validate, EveryCatalogModelPasses) {
    for (const auto& m : all_catalog_models()) {
        EXPECT_TRUE(validate_model(m, default_check_horizon(m)).passes()) << m.name();
    }
}

TEST(Validate, HorizonTooShort) {
    const auto m = catalog("perishable_o", params(1, 2, 1, 1, 2));
    EXPECT_THROW(validate_model(m, 1), InvalidArgument);
}

TEST(Validate, NonConservativeRow) {
    auto base = catalog("base_stock", params(1, 2, 1, 0, 2));
    auto env = base.env();
    Matrix v = env.generators.at(0);
    v(1, 1) += 0.1;  // row sums to 0.1
    env.generators = TailSequence<Matrix>::constant(v);
    const JointModel m(base.rates(), env);
    const auto rep = validate_model(m, 8);
    EXPECT_FALSE(rep.passes());
    EXPECT_TRUE(rep.has(IssueKind::non_conservative_row));
}

TEST(Validate, NegativeRateAndMalformedShapes) {
    auto base = catalog("base_stock", params(1, 2, 1, 0, 2));
    auto env = base.env();
    Matrix v = env.generators.at(0);
    v(1, 0) = -0.5;
    v(1, 1) = -v(1, 2) + 0.5;
    env.generators = TailSequence<Matrix>::constant(v);
    EXPECT_TRUE(validate_model(JointModel(base.rates(), env), 8).has(IssueKind::negative_rate));

    auto env2 = base.env();
    env2.jumps = TailSequence<Matrix>::constant(Matrix::identity(2));
    EXPECT_TRUE(validate_model(JointModel(base.rates(), env2), 8).has(IssueKind::malformed_matrix));

    auto env3 = base.env();
    Matrix r = env3.jumps.at(1);
    r(2, 1) = 0.5;
    env3.jumps = TailSequence<Matrix>::constant(r);
    EXPECT_TRUE(validate_model(JointModel(base.rates(), env3), 8).has(IssueKind::non_stochastic_row));
}

TEST(Validate, AllBlockedIsNotIrreducible) {
    EnvironmentSpec env{{"x", "y"},
                        {true, true},
                        TailSequence<Matrix>::constant(Matrix{{-1, 1}, {1, -1}}),
                        TailSequence<Matrix>::constant(Matrix::identity(2))};
    const JointModel m(RateFamily::constant(1, 2), env);
    const auto rep = validate_model(m, 4);
    EXPECT_FALSE(rep.connected);
    EXPECT_TRUE(rep.has(IssueKind::not_irreducible));
    EXPECT_TRUE(rep.structurally_valid());
    EXPECT_FALSE(rep.offending_component.empty());
}

TEST(ModelIo, RoundTripPreservesRowsAndHash) {
    for (const auto& m : all_catalog_models()) {
        const auto back = model_from_json(json::parse(model_to_json(m).dump()));
        EXPECT_EQ(model_hash(back), model_hash(m)) << m.name();
        for (Level n = 0; n < 8; ++n) {
            for (std::size_t k = 0; k < m.env_size(); ++k) {
                const auto a = targets(m.row({n, k})), b = targets(back.row({n, k}));
                EXPECT_EQ(a, b) << m.name();
            }
        }
    }
}

TEST(ModelIo, CatalogShortcut) {
    const auto j = json::parse(R"({"catalog": "base_stock", "params": {"lambda": 1, "mu": 2, "nu": 1, "b": 2}})");
    const auto m = model_from_json(j);
    EXPECT_EQ(m.name(), "base_stock");
    EXPECT_EQ(m.env_size(), 3u);
    EXPECT_EQ(model_hash(m), model_hash(catalog("base_stock", params(1, 2, 1, 0, 2))));
}

TEST(ModelIo, Errors) {
    EXPECT_THROW(model_from_json(json::parse(R"({"rates": {}})")), ModelFormatError);
    EXPECT_THROW(model_from_json(json::parse(
                     R"({"rates": {"arrival": {"tail": [1]}, "service": {"tail": [2]}},
                         "environment": {"labels": ["a"], "blocked": [false, true],
                                         "generators": {"tail": [[[0]]]}, "jumps": {"tail": [[[1]]]}}})")),
                 ModelFormatError);
    EXPECT_THROW(load_model("/nonexistent/model.json"), ModelFormatError);
}
