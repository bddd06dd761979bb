#include <gtest/gtest.h>

#include <random>

#include "oracle.hpp"
#include "qre/core/error.hpp"
#include "qre/core/graph.hpp"
#include "qre/core/gth.hpp"
#include "qre/core/matrix.hpp"
#include "qre/core/series.hpp"
#include "qre/core/tail_sequence.hpp"

using namespace qre;

TEST(Matrix, BasicOperations) {
    const Matrix m{{-2.0, 2.0}, {1.0, -1.0}};
    EXPECT_EQ(m.rows(), 2u);
    EXPECT_TRUE(m.square());
    EXPECT_DOUBLE_EQ(m.row_sum(0), 0.0);
    EXPECT_DOUBLE_EQ(m.off_diagonal_sum(1), 1.0);
    EXPECT_DOUBLE_EQ(m.max_abs(), 2.0);
    EXPECT_EQ(m.scaled(2.0)(0, 1), 4.0);
    const auto x = left_multiply({1.0 / 3.0, 2.0 / 3.0}, m);
    EXPECT_NEAR(x[0], 0.0, 1e-15);
    EXPECT_NEAR(x[1], 0.0, 1e-15);
    EXPECT_EQ(Matrix::identity(2), (Matrix{{1.0, 0.0}, {0.0, 1.0}}));
    EXPECT_THROW((Matrix{{1.0}, {1.0, 2.0}}), std::invalid_argument);
}

TEST(TailSequence, PrefixThenPeriodicTail) {
    const TailSequence<double> s({5.0, 6.0}, {1.0, 2.0, 3.0});
    EXPECT_EQ(s.tail_start(), 2u);
    EXPECT_EQ(s.period(), 3u);
    const double expected[] = {5, 6, 1, 2, 3, 1, 2, 3, 1};
    for (Level n = 0; n < 9; ++n) EXPECT_EQ(s.at(n), expected[n]) << n;
    for (Level n = 2; n < 50; ++n) EXPECT_EQ(s.at(n + 3), s.at(n));
}

TEST(TailSequence, AffineGrowth) {
    const TailSequence<double> s({}, {2.0}, 1.0);
    for (Level n = 0; n < 10; ++n) EXPECT_DOUBLE_EQ(s.at(n), 2.0 * static_cast<double>(n + 1));
    const TailSequence<Matrix> m({}, {Matrix{{-1.0, 1.0}, {3.0, -3.0}}}, 0.5);
    EXPECT_DOUBLE_EQ(m.at(4)(1, 0), 3.0 * 3.0);
    EXPECT_DOUBLE_EQ(m.base(4)(1, 0), 3.0);
}

TEST(TailSequence, RejectsEmptyTailAndNegativeGrowth) {
    EXPECT_THROW(TailSequence<double>({1.0}, {}), std::invalid_argument);
    EXPECT_THROW(TailSequence<double>({}, {1.0}, -1.0), std::invalid_argument);
}

TEST(TailSequence, LcmPeriod) {
    EXPECT_EQ(lcm_period(2, 3), 6u);
    EXPECT_EQ(lcm_period(4, 6), 12u);
    EXPECT_EQ(lcm_period(1, 1), 1u);
}

TEST(Graph, StrongComponents) {
    // 0 <-> 1 -> 2 <-> 3, 4 alone
    const Adjacency adj{{1}, {0, 2}, {3}, {2}, {}};
    std::size_t count = 0;
    const auto comp = strong_components(adj, &count);
    EXPECT_EQ(count, 3u);
    EXPECT_EQ(comp[0], comp[1]);
    EXPECT_EQ(comp[2], comp[3]);
    EXPECT_NE(comp[0], comp[2]);
    EXPECT_NE(comp[4], comp[0]);
    EXPECT_NE(comp[4], comp[2]);
}

TEST(Graph, LongChainDoesNotOverflowStack) {
    const std::size_t n = 200000;
    Adjacency adj(n);
    for (std::size_t i = 0; i + 1 < n; ++i) adj[i].push_back(i + 1);
    adj[n - 1].push_back(0);
    std::size_t count = 0;
    strong_components(adj, &count);
    EXPECT_EQ(count, 1u);
}

TEST(Graph, CanReach) {
    const Adjacency adj{{1}, {}, {1}, {3}};
    const auto r = can_reach(adj, {false, true, false, false});
    EXPECT_TRUE(r[0]);
    EXPECT_TRUE(r[1]);
    EXPECT_TRUE(r[2]);
    EXPECT_FALSE(r[3]);
}

TEST(Gth, TwoStateClosedForm) {
    const double a = 0.7, b = 2.5;
    const auto pi = gth_stationary(Matrix{{-a, a}, {b, -b}});
    EXPECT_NEAR(pi[0], b / (a + b), 1e-15);
    EXPECT_NEAR(pi[1], a / (a + b), 1e-15);
}

TEST(Gth, AgreesWithDenseSolveOnRandomGenerators) {
    std::mt19937_64 rng(12345);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t n = 2 + static_cast<std::size_t>(trial % 9);
        const Matrix q = oracle::random_generator(n, rng);
        const auto pi = gth_stationary(q);
        const auto ref = oracle::dense_stationary(q);
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            EXPECT_GE(pi[i], 0.0);
            EXPECT_NEAR(pi[i], ref[i], 1e-12);
            sum += pi[i];
        }
        EXPECT_NEAR(sum, 1.0, 1e-14);
        EXPECT_LE(max_abs(left_multiply(pi, q)), 1e-13);
    }
}

TEST(Gth, StiffRatesStayAccurate) {
    // Birth-death chain with rates spanning 12 orders of magnitude: pi(k) ~ r^k.
    const std::size_t n = 6;
    const double up = 1e-6, down = 1e6;
    Matrix q(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        if (i + 1 < n) q(i, i + 1) = up;
        if (i > 0) q(i, i - 1) = down;
        q(i, i) = -q.off_diagonal_sum(i);
    }
    const auto pi = gth_stationary(q);
    for (std::size_t i = 1; i < n; ++i) EXPECT_NEAR(pi[i] / pi[i - 1], 1e-12, 1e-24);
}

TEST(Gth, SingularWhenAStateCannotLeave) {
    EXPECT_THROW(gth_stationary(Matrix{{-1.0, 1.0}, {0.0, 0.0}}), SingularSolve);
}

TEST(Gth, ExtremeVectorsOfReducibleGenerator) {
    // Closed classes {0,1} and {3}; state 2 is transient.
    const Matrix q{{-1.0, 1.0, 0.0, 0.0}, {2.0, -2.0, 0.0, 0.0}, {1.0, 0.0, -2.0, 1.0}, {0.0, 0.0, 0.0, 0.0}};
    const auto classes = closed_classes(q);
    ASSERT_EQ(classes.size(), 2u);
    const auto vecs = extreme_stationary_vectors(q);
    ASSERT_EQ(vecs.size(), 2u);
    EXPECT_NEAR(vecs[0][0], 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(vecs[0][1], 1.0 / 3.0, 1e-15);
    EXPECT_EQ(vecs[0][2], 0.0);
    EXPECT_EQ(vecs[1][3], 1.0);
}

TEST(Series, Geometric) {
    const auto s = sum_ratio_series([](Level) { return 0.25; }, 0, 1, false);
    ASSERT_TRUE(s.converges);
    EXPECT_NEAR(s.sum, 4.0 / 3.0, 1e-15);
    EXPECT_DOUBLE_EQ(s.tail_ratio, 0.25);
}

TEST(Series, AlternatingPeriodMatchesPartialSums) {
    // ratio 1/3 on even n, 2 on odd n: period product 2/3.
    auto ratio = [](Level n) { return n % 2 == 0 ? 1.0 / 3.0 : 2.0; };
    const auto s = sum_ratio_series(ratio, 0, 2, false);
    ASSERT_TRUE(s.converges);
    EXPECT_NEAR(s.tail_ratio, 2.0 / 3.0, 1e-15);
    double partial = 0.0, t = 1.0;
    for (Level n = 0; n < 400; ++n) {
        partial += t;
        t *= ratio(n);
    }
    EXPECT_NEAR(s.sum, partial, 1e-12);
    EXPECT_NEAR(s.sum, 4.0, 1e-12);
}

TEST(Series, PrefixBeforeTail) {
    // 1 + 3 + 3 * sum (1/2)^j = 1 + 3 * 2
    auto ratio = [](Level n) { return n == 0 ? 3.0 : 0.5; };
    const auto s = sum_ratio_series(ratio, 1, 1, false);
    EXPECT_NEAR(s.sum, 7.0, 1e-14);
}

TEST(Series, DivergentAndCritical) {
    EXPECT_FALSE(sum_ratio_series([](Level) { return 2.0; }, 0, 1, false).converges);
    EXPECT_FALSE(sum_ratio_series([](Level) { return 1.0; }, 0, 1, false).converges);
    EXPECT_FALSE(sum_ratio_series([](Level) { return 1.0 - 1e-13; }, 0, 1, false).converges);
}

TEST(Series, GrowingTailWithRigorousBound) {
    // t(n) = (n+1) 2^-n, sum = 1/(1-1/2)^2 = 4.
    auto ratio = [](Level n) { return 0.5 * static_cast<double>(n + 2) / static_cast<double>(n + 1); };
    const auto s = sum_ratio_series(ratio, 0, 1, true);
    ASSERT_TRUE(s.converges);
    EXPECT_NEAR(s.tail_ratio, 0.5, 1e-9);
    EXPECT_NEAR(s.sum, 4.0, 1e-14);
    EXPECT_LE(std::abs(s.sum - 4.0), s.error_bound + 1e-15);
}
