#include <gtest/gtest.h>

#include <sstream>

#include "qre/catalog.hpp"
#include "qre/numerics.hpp"
#include "qre/simulate.hpp"

using namespace qre;

namespace {

CatalogParams params(double lambda, double mu, double nu, double gamma, int b) {
    CatalogParams p;
    p.lambda = lambda;
    p.mu = mu;
    p.nu = nu;
    p.gamma = gamma;
    p.b = b;
    return p;
}

SimConfig config(std::uint64_t seed, double horizon, std::size_t reps) {
    SimConfig c;
    c.seed = seed;
    c.horizon = horizon;
    c.replications = reps;
    return c;
}

}  // namespace

TEST(Simulate, MM1CoversLambda) {
    const auto est = simulate(catalog("mm1_plain", params(1, 2, 1, 0, 1)), config(7, 1e5, 20));
    EXPECT_TRUE(est.covers(1.0)) << est.mean << " +- " << est.half_width;
    EXPECT_GT(est.half_width, 0.0);
    EXPECT_EQ(est.values.size(), 20u);
}

TEST(Simulate, BaseStockCoversAnalyticThroughput) {
    const auto est = simulate(catalog("base_stock", params(1, 2, 1, 0, 2)), config(11, 1e5, 20));
    EXPECT_TRUE(est.covers(2.0 / 3.0)) << est.mean << " +- " << est.half_width;
}

TEST(Simulate, PerishableOAgreesWithTruncation) {
    const auto m = catalog("perishable_o", params(1, 2, 1, 1, 2));
    const double th = auto_truncate(m).metrics.throughput;
    const auto est = simulate(m, config(3, 5e4, 20));
    EXPECT_TRUE(est.covers(th)) << est.mean << " +- " << est.half_width << " vs " << th;
}

TEST(Simulate, SeedReproducibility) {
    const auto m = catalog("perishable_o", params(1, 2, 1, 1, 3));
    auto run = [&](std::uint64_t seed) {
        std::ostringstream events, csv;
        auto cfg = config(seed, 2e3, 4);
        cfg.event_log = &events;
        write_estimate_csv(csv, simulate(m, cfg));
        return events.str() + csv.str();
    };
    const auto a = run(42);
    EXPECT_EQ(a, run(42));
    EXPECT_NE(a, run(43));
}

TEST(Simulate, ReplicationsUseDistinctStreams) {
    const auto est = simulate(catalog("mm1_plain", params(1, 2, 1, 0, 1)), config(5, 1e3, 5));
    for (std::size_t i = 1; i < est.values.size(); ++i) EXPECT_NE(est.values[i], est.values[0]);
}

TEST(Simulate, EventLogFormat) {
    std::ostringstream events;
    auto cfg = config(1, 50, 2);
    cfg.event_log = &events;
    const auto est = simulate(catalog("base_stock", params(1, 2, 1, 0, 2)), cfg);
    std::istringstream in(events.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "time,n,k,event");
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        const auto event = line.substr(line.rfind(',') + 1);
        EXPECT_TRUE(event == "arrival" || event == "departure" || event == "env") << line;
    }
    // Only the first replication is logged.
    EXPECT_EQ(rows, est.replications[0].jumps);
}

TEST(Simulate, JumpHorizon) {
    auto cfg = config(9, 1000, 3);
    cfg.horizon_kind = HorizonKind::jumps;
    const auto est = simulate(catalog("mm1_plain", params(1, 2, 1, 0, 1)), cfg);
    for (const auto& r : est.replications) EXPECT_EQ(r.jumps, 1000u);
}

TEST(Simulate, SingleReplicationHasInfiniteHalfWidth) {
    const auto est = simulate(catalog("mm1_plain", params(1, 2, 1, 0, 1)), config(1, 100, 1));
    EXPECT_TRUE(std::isinf(est.half_width));
}

TEST(Simulate, RejectsBadConfig) {
    const auto m = catalog("mm1_plain", params(1, 2, 1, 0, 1));
    EXPECT_THROW(simulate(m, config(1, 100, 0)), InvalidArgument);
    auto cfg = config(1, 100, 2);
    cfg.warmup = 1.0;
    EXPECT_THROW(simulate(m, cfg), InvalidArgument);
    cfg = config(1, -1, 2);
    EXPECT_THROW(simulate(m, cfg), InvalidArgument);
    cfg = config(1, 100, 2);
    cfg.initial = {0, 5};
    EXPECT_THROW(simulate(m, cfg), InvalidArgument);
}

TEST(Simulate, AbsorbingStateRaises) {
    // Environment state 1 is blocked with no exit: every (n,1) is absorbing.
    EnvironmentSpec env{{"0", "1"}, {false, true}, TailSequence<Matrix>::constant(Matrix{{-1, 1}, {0, 0}}),
                        TailSequence<Matrix>::constant(Matrix::identity(2))};
    const JointModel m(RateFamily::constant(1, 2), env);
    try {
        simulate(m, config(1, 1e3, 2));
        FAIL();
    } catch (const ZeroExitRate& e) {
        EXPECT_EQ(e.state().k, 1u);
    }
}

TEST(Simulate, CoverageOverManySeeds) {
    const auto m = catalog("mm1_plain", params(1, 2, 1, 0, 1));
    int covered = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) covered += simulate(m, config(seed, 2e3, 10)).covers(1.0);
    EXPECT_GE(covered, 85);
}

TEST(DepartureValues, ZeroHorizon) {
    const auto t = departure_values(catalog("perishable_o", params(1, 2, 1, 1, 2)), 20, 0);
    for (double v : t.values) EXPECT_EQ(v, 0.0);
    EXPECT_TRUE(isotone_check(t).isotone);
    EXPECT_TRUE(isotone_check(t).violations.empty());
}

TEST(DepartureValues, OneStepExamples) {
    const auto bs = catalog("base_stock", params(1, 1, 1, 0, 1));
    const auto t = departure_values(bs, 10, 1);
    EXPECT_DOUBLE_EQ(t(1, 1), 0.5);
    for (Level m = 0; m <= 10; ++m) EXPECT_EQ(t(m, 0), 0.0);
    EXPECT_EQ(t(0, 1), 0.0);
}

TEST(DepartureValues, MonotoneInHorizonAndBoundedByIt) {
    for (const auto& name : catalog_names()) {
        const auto m = catalog(name, params(1, 2, 1, 1, 2));
        auto prev = departure_values(m, 30, 0);
        for (std::size_t n = 1; n <= 20; ++n) {
            const auto cur = departure_values(m, 30, n);
            for (std::size_t i = 0; i < cur.values.size(); ++i) {
                EXPECT_GE(cur.values[i], prev.values[i] - 1e-14) << name;
                EXPECT_LE(cur.values[i], static_cast<double>(n) + 1e-12) << name;
            }
            prev = cur;
        }
    }
}

TEST(DepartureValues, OneStepAtMostOne) {
    for (const auto& name : catalog_names()) {
        const auto t = departure_values(catalog(name, params(0.7, 1.9, 0.5, 2.0, 3)), 25, 1);
        for (double v : t.values) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
    }
}

TEST(DepartureValues, JumpNormalizedRateMatchesThroughput) {
    const auto m = catalog("mm1_plain", params(1, 2, 1, 0, 1));
    const std::size_t n = 10000;
    const auto table = departure_values(m, 200, n);
    const auto sol = solve_truncated(m, 200);
    const double rate = mean_jump_rate(sol, m);
    auto cfg = config(21, static_cast<double>(n), 20);
    cfg.horizon_kind = HorizonKind::jumps;
    const auto est = simulate(m, cfg);
    const double th = metrics(sol, m).throughput;
    for (Level start : {0, 1, 5})
        EXPECT_LE(std::abs(table(start, 0) / static_cast<double>(n) * rate - th), 3.0 * est.half_width);
    EXPECT_LE(std::abs(est.mean - th), 3.0 * est.half_width);
}

TEST(Isotone, HandBuiltViolation) {
    DepartureValueTable t{1, 3, 2, {0, 1, 1, 2, 1, 1, 3, 3}};
    const auto rep = isotone_check(t);
    ASSERT_EQ(rep.violations.size(), 1u);
    const auto& v = rep.violations[0];
    EXPECT_EQ(v.lower.n, 1u);
    EXPECT_EQ(v.lower.k, 1u);
    EXPECT_EQ(v.upper.n, 2u);
    EXPECT_EQ(v.upper.k, 1u);
    EXPECT_DOUBLE_EQ(v.margin, 1.0);
    EXPECT_FALSE(v.boundary_affected);
    EXPECT_FALSE(rep.isotone);
}

TEST(Isotone, BoundaryViolationsDoNotCountAsInterior) {
    DepartureValueTable t{2, 3, 1, {0, 1, 2, 1}};
    const auto rep = isotone_check(t);
    ASSERT_EQ(rep.violations.size(), 1u);
    EXPECT_TRUE(rep.violations[0].boundary_affected);
    EXPECT_TRUE(rep.isotone);
}

TEST(Isotone, PerishableMinusReport) {
    const auto table = departure_values(catalog("perishable_minus", params(1, 2, 1, 1, 2)), 60, 50);
    const auto rep = isotone_check(table);
    for (const auto& v : rep.violations) EXPECT_GT(v.margin, 0.0);
    EXPECT_EQ(rep.isotone, rep.interior_violations == 0);
    RecordProperty("interior_violations", static_cast<int>(rep.interior_violations));
}
