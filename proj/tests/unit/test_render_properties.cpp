#include "ropetrack/parallel.hpp"
#include "ropetrack/splat.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <Eigen/LU>

#include <algorithm>
#include <random>

using namespace ropetrack;
using ropetrack::testing::max_abs_diff;
using ropetrack::testing::random_camera;
using ropetrack::testing::random_splats;

TEST(RenderProperties, TiledMatchesOracleOverSeeds) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        std::mt19937_64 rng(seed);
        std::uniform_int_distribution<int> count(10, 200);
        const auto cam = random_camera(rng, 64 + 8 * static_cast<int>(seed % 5), 64, 0.5);
        const auto s = random_splats(rng, static_cast<std::size_t>(count(rng)), 0.1, 0.005 + 0.001 * (seed % 10));
        ASSERT_LT(max_abs_diff(splat::render(s, cam), splat::render_oracle(s, cam)), 1e-5) << "seed " << seed;
    }
}

TEST(RenderProperties, WeightsAndTransmittanceSumToOne) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(100 + seed);
        const auto cam = random_camera(rng, 64, 64, 0.5);
        const auto s = random_splats(rng, 150, 0.08, 0.01);
        for (const auto& d : {splat::render_detailed(s, cam), splat::render_oracle_detailed(s, cam)})
            for (std::size_t p = 0; p < d.transmittance.size(); ++p)
                ASSERT_NEAR(d.accumulated_weight[p] + d.transmittance[p], 1.0, 1e-9);
    }
}

TEST(RenderProperties, StorageOrderDoesNotMatter) {
    std::mt19937_64 rng(31);
    const auto cam = random_camera(rng, 80, 60, 0.5);
    const auto s = random_splats(rng, 120, 0.08, 0.01);
    std::vector<std::size_t> perm(s.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    splat::SplatSet t;
    t.sigma_world = s.sigma_world;
    for (std::size_t i : perm) {
        t.means.push_back(s.means[i]);
        t.colors.push_back(s.colors[i]);
        t.opacities.push_back(s.opacities[i]);
        t.attachment.push_back(s.attachment[i]);
    }
    EXPECT_EQ(splat::render(s, cam).pixels, splat::render(t, cam).pixels);
}

TEST(RenderProperties, ReattachIsAffineInNodes) {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> n(0.0, 0.1);
    Positions a(15), b(15);
    for (auto& p : a) p = Vec3(n(rng), n(rng), n(rng));
    for (auto& p : b) p = Vec3(n(rng), n(rng), n(rng));
    const NodeChain chain{a, 0.05, 0.01};
    const auto s = splat::build_splats(chain, SplatConfig{});
    const double w = 0.3;
    Positions mix(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) mix[i] = (1 - w) * a[i] + w * b[i];
    const auto sa = splat::reattach(s, a), sb = splat::reattach(s, b), sm = splat::reattach(s, mix);
    for (std::size_t j = 0; j < s.size(); ++j)
        EXPECT_NEAR((sm.means[j] - ((1 - w) * sa.means[j] + w * sb.means[j])).norm(), 0.0, 1e-14);
}

TEST(RenderProperties, CulledGaussiansDoNotContribute) {
    std::mt19937_64 rng(12);
    const auto cam = random_camera(rng, 64, 64, 0.5);
    auto s = random_splats(rng, 60, 0.06, 0.01);
    const auto base = splat::render(s, cam);
    const auto proj = splat::project_all(s, cam);
    auto pruned = s;
    pruned.means.clear();
    pruned.colors.clear();
    pruned.opacities.clear();
    pruned.attachment.clear();
    for (std::size_t j = 0; j < s.size(); ++j) {
        if (!proj[j]) continue;
        pruned.means.push_back(s.means[j]);
        pruned.colors.push_back(s.colors[j]);
        pruned.opacities.push_back(s.opacities[j]);
        pruned.attachment.push_back(s.attachment[j]);
    }
    // Extra Gaussians far behind the camera or far off to the side.
    const Vec3 eye = -cam.projection.leftCols<3>().inverse() * cam.projection.col(3);
    s.means.push_back(eye + 2.0 * (eye - Vec3::Zero()));
    s.means.push_back(Vec3(50, 50, 0));
    for (int k = 0; k < 2; ++k) {
        s.colors.emplace_back(1, 1, 1);
        s.opacities.push_back(0.9);
        s.attachment.push_back({0, 0.5});
    }
    EXPECT_FALSE(splat::project_gaussian(s.means[60], s.sigma_world, cam).has_value());
    EXPECT_FALSE(splat::project_gaussian(s.means[61], s.sigma_world, cam).has_value());
    EXPECT_EQ(splat::render(s, cam).pixels, base.pixels);
    EXPECT_EQ(splat::render(pruned, cam).pixels, base.pixels);
}

TEST(RenderProperties, FootprintContainsAllNonzeroAlpha) {
    std::mt19937_64 rng(41);
    const auto cam = random_camera(rng, 48, 40, 0.4);
    const auto s = random_splats(rng, 40, 0.08, 0.012);
    const auto proj = splat::project_all(s, cam);
    for (std::size_t j = 0; j < s.size(); ++j) {
        if (!proj[j]) continue;
        const auto& r = proj[j]->footprint;
        for (int y = 0; y < cam.height; ++y)
            for (int x = 0; x < cam.width; ++x) {
                const bool inside = x >= r.x0 && x <= r.x1 && y >= r.y0 && y <= r.y1;
                if (!inside) {
                    ASSERT_EQ(splat::alpha_at(*proj[j], s.opacities[j], Vec2(x + 0.5, y + 0.5)), 0.0);
                }
            }
    }
}

TEST(RenderProperties, ThreadCountDoesNotChangeOutput) {
    std::mt19937_64 rng(55);
    const auto cam = random_camera(rng, 96, 80, 0.5);
    const auto s = random_splats(rng, 150, 0.08, 0.01);
    const unsigned saved = thread_count();
    set_thread_count(1);
    const auto one = splat::render(s, cam);
    set_thread_count(4);
    const auto four = splat::render(s, cam);
    set_thread_count(saved);
    EXPECT_EQ(one.pixels, four.pixels);
}
