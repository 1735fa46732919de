#include "ropetrack/eval.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace ropetrack;

namespace {

Positions line(std::size_t n, double L) {
    Positions x;
    for (std::size_t i = 0; i < n; ++i) x.emplace_back(L * static_cast<double>(i), 0, 0);
    return x;
}

}  // namespace

TEST(MeanNodeError, Examples) {
    const auto a = line(5, 0.1);
    EXPECT_EQ(eval::mean_node_error(a, a), 0.0);
    auto b = a;
    for (auto& p : b) p.x() += 0.001;
    EXPECT_NEAR(eval::mean_node_error(b, a), 0.001, 1e-15);
    EXPECT_THROW(eval::mean_node_error(line(4, 0.1), a), std::invalid_argument);
}

TEST(MeanNodeError, MatchesRecomputation) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        Positions a(17), b(17);
        for (auto& p : a) p = Vec3(n(rng), n(rng), n(rng));
        for (auto& p : b) p = Vec3(n(rng), n(rng), n(rng));
        long double sum = 0;
        for (std::size_t i = 0; i < a.size(); ++i)
            sum += std::sqrt(std::pow(a[i].x() - b[i].x(), 2) + std::pow(a[i].y() - b[i].y(), 2) +
                             std::pow(a[i].z() - b[i].z(), 2));
        EXPECT_NEAR(eval::mean_node_error(a, b), static_cast<double>(sum / a.size()), 1e-12);
    }
}

TEST(TipError, Examples) {
    const auto a = line(5, 0.1);
    EXPECT_EQ(eval::tip_error(a, a, 4), 0.0);
    auto b = a;
    b[4].y() += 0.005;
    EXPECT_NEAR(eval::tip_error(b, a, 4), 0.005, 1e-15);
    EXPECT_EQ(eval::tip_error(b, a, 3), 0.0);
    EXPECT_THROW(eval::tip_error(b, a, 5), std::out_of_range);
}

TEST(LengthViolation, Examples) {
    const auto a = line(4, 0.1);
    const auto v = eval::length_violation(a, 0.1);
    EXPECT_NEAR(v.max_fraction, 0.0, 1e-14);
    EXPECT_NEAR(v.mean_fraction, 0.0, 1e-14);
    auto b = a;
    b[3].x() += 0.01;
    const auto w = eval::length_violation(b, 0.1);
    EXPECT_NEAR(w.max_fraction, 0.1, 1e-12);
    EXPECT_NEAR(w.mean_fraction, 0.1 / 3, 1e-12);
}

TEST(Report, RowsAndSummary) {
    const std::size_t T = 10;
    std::vector<double> times, losses, millis;
    std::vector<Positions> est, truth, base;
    for (std::size_t t = 0; t < T; ++t) {
        times.push_back(0.1 * t);
        losses.push_back(1.0);
        millis.push_back(t == 0 ? 0.0 : 50.0);
        truth.push_back(line(5, 0.1));
        est.push_back(truth.back());
        base.push_back(truth.back());
        for (auto& p : est.back()) p.y() += 0.001 * t;
        for (auto& p : base.back()) p.y() += 0.004 * t;
    }
    const eval::TrajectoryView fv{times, est, losses, millis};
    const eval::TrajectoryView bv{times, base, losses, millis};

    const auto plain = eval::report(fv, truth, 0.1, 4);
    ASSERT_EQ(plain.rows.size(), T);
    EXPECT_EQ(plain.summary.steps, T);
    EXPECT_NEAR(plain.summary.max_error, 0.009, 1e-12);
    EXPECT_NEAR(plain.summary.mean_error, 0.0045, 1e-12);
    EXPECT_NEAR(plain.summary.max_tip_error, 0.009, 1e-12);
    EXPECT_NEAR(plain.rows[3].mean_error, 0.003, 1e-12);
    EXPECT_NEAR(plain.summary.steps_per_second, 20.0, 1e-9);
    EXPECT_FALSE(plain.summary.error_ratio.has_value());

    const auto cmp = eval::report(fv, truth, 0.1, 4, bv);
    ASSERT_TRUE(cmp.summary.error_ratio.has_value());
    EXPECT_NEAR(*cmp.summary.baseline_mean_error, 0.018, 1e-12);
    EXPECT_NEAR(*cmp.summary.error_ratio, 0.25, 1e-12);
    EXPECT_NEAR(*cmp.summary.error_reduction, 0.75, 1e-12);
}

TEST(Report, RejectsBadInput) {
    const std::vector<double> none;
    const std::vector<Positions> empty;
    EXPECT_THROW(eval::report({none, empty, none, none}, empty, 0.1, 0), std::invalid_argument);

    const std::vector<double> times{0.0, 0.1}, losses{1, 1}, millis{1, 1};
    const std::vector<Positions> two{line(3, 0.1), line(3, 0.1)};
    const std::vector<Positions> one{line(3, 0.1)};
    EXPECT_THROW(eval::report({times, two, losses, millis}, one, 0.1, 0), std::invalid_argument);
    const std::vector<double> short_losses{1};
    EXPECT_THROW(eval::report({times, two, short_losses, millis}, two, 0.1, 0), std::invalid_argument);
}
