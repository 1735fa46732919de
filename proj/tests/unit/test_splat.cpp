#include "ropetrack/splat.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace ropetrack;
using ropetrack::testing::straight_chain;

namespace {

// Camera at the origin looking down +z with principal point at the image center.
CameraModel axis_camera(double focal, int w = 64, int h = 64, const Vec3& bg = Vec3(0.1, 0.2, 0.3)) {
    CameraModel c;
    c.width = w;
    c.height = h;
    c.background = bg;
    c.projection << focal, 0, 0.5 * w, 0,
                    0, focal, 0.5 * h, 0,
                    0, 0, 1, 0;
    return c;
}

splat::SplatSet single(const Vec3& mean, double sigma, const Vec3& color, double opacity) {
    splat::SplatSet s;
    s.sigma_world = sigma;
    s.means = {mean};
    s.colors = {color};
    s.opacities = {opacity};
    s.attachment = {{0, 0.5}};
    return s;
}

}  // namespace

TEST(BuildSplats, OnePerSegmentAtMidpoint) {
    const auto chain = straight_chain(2, 0.2);
    SplatConfig cfg;
    cfg.gaussians_per_segment = 1;
    const auto s = splat::build_splats(chain, cfg);
    ASSERT_EQ(s.size(), 1u);
    EXPECT_DOUBLE_EQ(s.attachment[0].s, 0.5);
    EXPECT_TRUE(s.means[0].isApprox(Vec3(0.1, 0, 0)));
    EXPECT_DOUBLE_EQ(s.sigma_world, cfg.rope_diameter / 2);
}

TEST(BuildSplats, EvenSpacingWithinSegments) {
    const auto chain = straight_chain(3, 0.2);
    SplatConfig cfg;
    cfg.gaussians_per_segment = 2;
    const auto s = splat::build_splats(chain, cfg);
    ASSERT_EQ(s.size(), 4u);
    for (std::size_t j = 0; j < 4; ++j) {
        EXPECT_EQ(s.attachment[j].segment, j / 2);
        EXPECT_DOUBLE_EQ(s.attachment[j].s, j % 2 == 0 ? 0.25 : 0.75);
    }
}

TEST(BuildSplats, CountIsSegmentsTimesDensity) {
    const auto chain = straight_chain(30, 0.02);
    SplatConfig cfg;
    cfg.gaussians_per_segment = 3;
    EXPECT_EQ(splat::build_splats(chain, cfg).size(), 87u);
}

TEST(BuildSplats, Colors) {
    const auto chain = straight_chain(4, 0.1);
    SplatConfig cfg;
    cfg.gaussians_per_segment = 1;
    cfg.colors = {Vec3(1, 0, 0)};
    auto s = splat::build_splats(chain, cfg);
    for (const auto& c : s.colors) EXPECT_EQ(c, Vec3(1, 0, 0));
    cfg.colors = {Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};
    s = splat::build_splats(chain, cfg);
    EXPECT_EQ(s.colors[2], Vec3(0, 0, 1));
}

TEST(Reattach, UnchangedAndTranslated) {
    const auto chain = straight_chain(6, 0.1);
    const auto s = splat::build_splats(chain, SplatConfig{});
    const auto same = splat::reattach(s, chain.positions);
    EXPECT_EQ(same.means, s.means);

    Positions moved = chain.positions;
    for (auto& p : moved) p += Vec3(1, 0, 0);
    const auto t = splat::reattach(s, moved);
    for (std::size_t j = 0; j < s.size(); ++j)
        EXPECT_NEAR((t.means[j] - s.means[j] - Vec3(1, 0, 0)).norm(), 0.0, 1e-14);
}

TEST(Reattach, MatchesInterpolation) {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> n(0.0, 0.1);
    Positions x(12);
    for (auto& p : x) p = Vec3(n(rng), n(rng), n(rng));
    NodeChain chain{x, 0.05, 0.01};
    SplatConfig cfg;
    cfg.gaussians_per_segment = 4;
    const auto s = splat::build_splats(chain, cfg);
    for (std::size_t j = 0; j < s.size(); ++j) {
        const auto [i, t] = s.attachment[j];
        const Vec3 expected = x[i] + t * (x[i + 1] - x[i]);
        EXPECT_NEAR((s.means[j] - expected).norm(), 0.0, 1e-14);
    }
}

TEST(ProjectGaussian, OnAxis) {
    const double f = 100.0, sigma = 0.01, z = 0.5;
    const auto cam = axis_camera(f);
    const auto g = splat::project_gaussian(Vec3(0, 0, z), sigma, cam);
    ASSERT_TRUE(g.has_value());
    EXPECT_NEAR(g->mean.x(), 32.0, 1e-12);
    EXPECT_NEAR(g->mean.y(), 32.0, 1e-12);
    const double s2 = std::pow(f * sigma / z, 2);
    EXPECT_NEAR(g->cov(0, 0), s2, 1e-12);
    EXPECT_NEAR(g->cov(1, 1), s2, 1e-12);
    EXPECT_NEAR(g->cov(0, 1), 0.0, 1e-12);
    EXPECT_NEAR(g->depth, z, 1e-12);

    const auto far = splat::project_gaussian(Vec3(0, 0, 2 * z), sigma, cam);
    ASSERT_TRUE(far.has_value());
    EXPECT_NEAR(std::sqrt(far->cov(0, 0)), 0.5 * std::sqrt(g->cov(0, 0)), 1e-12);
}

TEST(ProjectGaussian, CulledBehindAndOutside) {
    const auto cam = axis_camera(100.0);
    EXPECT_FALSE(splat::project_gaussian(Vec3(0, 0, -0.5), 0.01, cam).has_value());
    EXPECT_FALSE(splat::project_gaussian(Vec3(0, 0, 0), 0.01, cam).has_value());
    EXPECT_FALSE(splat::project_gaussian(Vec3(5, 0, 0.5), 0.01, cam).has_value());
}

TEST(ProjectGaussian, JacobianMatchesFiniteDifference) {
    std::mt19937_64 rng(8);
    const auto cam = ropetrack::testing::random_camera(rng, 64, 48, 0.6);
    const Vec3 m(0.01, -0.02, 0.03);
    const auto g = splat::project_gaussian(m, 0.005, cam);
    ASSERT_TRUE(g.has_value());
    for (int c = 0; c < 3; ++c) {
        Vec3 a = m, b = m;
        a(c) += 1e-6;
        b(c) -= 1e-6;
        const Vec3 pa = cam.project_homogeneous(a), pb = cam.project_homogeneous(b);
        const Vec2 fd = (Vec2(pa.x() / pa.z(), pa.y() / pa.z()) - Vec2(pb.x() / pb.z(), pb.y() / pb.z())) / 2e-6;
        EXPECT_NEAR((g->jacobian.col(c) - fd).norm(), 0.0, 1e-5 * (1.0 + fd.norm()));
    }
}

TEST(AlphaAt, Examples) {
    const auto cam = axis_camera(100.0);
    const auto g = splat::project_gaussian(Vec3(0, 0, 0.5), 0.01, cam);
    ASSERT_TRUE(g.has_value());
    const double sd = std::sqrt(g->cov(0, 0));
    EXPECT_DOUBLE_EQ(splat::alpha_at(*g, 0.9, g->mean), 0.9);
    EXPECT_NEAR(splat::alpha_at(*g, 0.9, g->mean + Vec2(2 * sd, 0)), 0.12180, 1e-5);
    EXPECT_NEAR(splat::alpha_at(*g, 0.9, g->mean + Vec2(2 * sd, 0)), 0.9 * std::exp(-2.0), 1e-12);
    EXPECT_EQ(splat::alpha_at(*g, 0.9, g->mean + Vec2(3.01 * sd, 0)), 0.0);
    EXPECT_EQ(splat::alpha_at(*g, 0.9, g->mean + Vec2(30 * sd, 7 * sd)), 0.0);
    EXPECT_LE(splat::alpha_at(*g, 1.0, g->mean), splat::kMaxAlpha);
}

TEST(FootprintTaper, SmoothAndBounded) {
    EXPECT_EQ(splat::footprint_taper(0.0), 1.0);
    EXPECT_EQ(splat::footprint_taper(splat::kTaperStartSq), 1.0);
    EXPECT_EQ(splat::footprint_taper(splat::kCutoffSq), 0.0);
    double prev = 1.0;
    for (double q = splat::kTaperStartSq; q <= splat::kCutoffSq; q += 0.01) {
        const double w = splat::footprint_taper(q);
        EXPECT_LE(w, prev + 1e-15);
        const double fd = (splat::footprint_taper(q + 1e-6) - splat::footprint_taper(q - 1e-6)) / 2e-6;
        EXPECT_NEAR(splat::footprint_taper_derivative(q), fd, 1e-6);
        prev = w;
    }
}

TEST(Render, ZeroGaussiansGiveBackground) {
    const auto cam = axis_camera(100.0, 40, 30, Vec3(0.3, 0.6, 0.9));
    splat::SplatSet empty;
    empty.sigma_world = 0.01;
    for (const auto& f : {splat::render(empty, cam), splat::render_oracle(empty, cam)})
        for (int y = 0; y < 30; ++y)
            for (int x = 0; x < 40; ++x) EXPECT_EQ(f.at(x, y), cam.background);
}

TEST(Render, SingleGaussianBlend) {
    // Principal point at a pixel center: 63 / 2 = 31.5.
    const auto cam = axis_camera(100.0, 63, 63);
    const Vec3 c(1.0, 0.5, 0.0);
    const auto s = single(Vec3(0, 0, 0.5), 0.01, c, 0.9);
    const Vec3 expected = 0.9 * c + 0.1 * cam.background;
    EXPECT_NEAR((splat::render(s, cam).at(31, 31) - expected).norm(), 0.0, 1e-12);
    EXPECT_NEAR((splat::render_oracle(s, cam).at(31, 31) - expected).norm(), 0.0, 1e-12);
}

TEST(Render, TwoGaussianBlend) {
    const auto cam = axis_camera(100.0, 63, 63);
    const Vec3 c1(1, 0, 0), c2(0, 1, 0);
    splat::SplatSet s;
    s.sigma_world = 0.01;
    // Storage order far first; blending follows depth.
    s.means = {Vec3(0, 0, 0.51), Vec3(0, 0, 0.5)};
    s.colors = {c2, c1};
    s.opacities = {0.5, 0.5};
    s.attachment = {{0, 0.5}, {0, 0.5}};
    const Vec3 expected = 0.5 * c1 + 0.25 * c2 + 0.25 * cam.background;
    EXPECT_NEAR((splat::render(s, cam).at(31, 31) - expected).norm(), 0.0, 1e-12);
    EXPECT_NEAR((splat::render_oracle(s, cam).at(31, 31) - expected).norm(), 0.0, 1e-12);
}

TEST(Render, MatchesOracleOnRandomScene) {
    std::mt19937_64 rng(17);
    const auto cam = ropetrack::testing::random_camera(rng, 64, 64, 0.5);
    const auto s = ropetrack::testing::random_splats(rng, 100, 0.08, 0.01);
    EXPECT_LT(ropetrack::testing::max_abs_diff(splat::render(s, cam), splat::render_oracle(s, cam)), 1e-5);
}

TEST(DepthOrder, FrontToBack) {
    const auto cam = axis_camera(100.0);
    splat::SplatSet s;
    s.sigma_world = 0.01;
    s.means = {Vec3(0, 0, 0.7), Vec3(0, 0, 0.5), Vec3(0, 0, 0.6), Vec3(0, 0, -1)};
    s.colors.assign(4, Vec3::Zero());
    s.opacities.assign(4, 0.5);
    s.attachment.assign(4, {0, 0.5});
    const auto proj = splat::project_all(s, cam);
    const auto order = splat::depth_order(s, proj);
    EXPECT_EQ(order, (std::vector<std::size_t>{1, 2, 0}));
}

TEST(RenderLoss, Examples) {
    Frame a(4, 3, Vec3(0.2, 0.4, 0.6));
    EXPECT_EQ(splat::render_loss(a, a), 0.0);
    Frame b = a;
    b.pixels[7] += 0.5;
    EXPECT_NEAR(splat::render_loss(a, b), 0.5, 1e-15);
    EXPECT_DOUBLE_EQ(splat::render_loss(a, b), splat::render_loss(b, a));
    Mask m(4, 3, 0);
    EXPECT_EQ(splat::render_loss(a, b, &m), 0.0);
    m.data[2] = 1;  // pixel 2 holds channel index 7
    EXPECT_NEAR(splat::render_loss(a, b, &m), 0.5, 1e-15);
    Frame c(5, 3, Vec3::Zero());
    EXPECT_THROW(splat::render_loss(a, c), std::invalid_argument);
}

TEST(FitColors, Examples) {
    Frame red(8, 8, Vec3(1, 0, 0));
    Mask full(8, 8, 1);
    std::vector<Frame> frames{red};
    std::vector<Mask> masks{full};
    for (const auto& c : splat::fit_colors(frames, masks, 5)) EXPECT_EQ(c, Vec3(1, 0, 0));

    Frame a(8, 8, Vec3::Constant(0.2)), b(8, 8, Vec3::Constant(0.4));
    Mask half(8, 8, 0);
    for (int i = 0; i < 32; ++i) half.data[i] = 1;
    frames = {a, b};
    masks = {half, half};
    const auto mixed = splat::fit_colors(frames, masks, 3);
    ASSERT_EQ(mixed.size(), 3u);
    EXPECT_NEAR((mixed[0] - Vec3::Constant(0.3)).norm(), 0.0, 1e-12);

    masks = {Mask(8, 8, 0), Mask(8, 8, 0)};
    EXPECT_THROW(splat::fit_colors(frames, masks, 3), std::invalid_argument);
}

TEST(Dilate, SquareElement) {
    Mask m(7, 7, 0);
    m.data[3 * 7 + 3] = 1;
    const auto d = splat::dilate(m, 1);
    EXPECT_EQ(d.count(), 9u);
    EXPECT_TRUE(d.at(2, 2));
    EXPECT_FALSE(d.at(1, 3));
    EXPECT_EQ(splat::dilate(m, 0).count(), 1u);
}
