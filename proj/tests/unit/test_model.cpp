#include "ropetrack/model.hpp"
#include "ropetrack/synth.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <limits>

using namespace ropetrack;

namespace {

bool mentions(const ValidationError& e, const std::string& needle) {
    return std::any_of(e.issues().begin(), e.issues().end(),
                       [&](const std::string& s) { return s.find(needle) != std::string::npos; });
}

CameraModel one_camera() {
    return synth::look_at_camera(Vec3(0, -1, 1), Vec3::Zero(), 300.0, 64, 48, Vec3(0.2, 0.2, 0.2));
}

}  // namespace

TEST(ValidateScene, MinimalValidInput) {
    const auto chain = ropetrack::testing::straight_chain(2, 0.1);
    const std::vector<CameraModel> cams{one_camera()};
    const auto d = validate_scene(chain, cams, PhysicsParams{});
    EXPECT_EQ(d.chain.size(), 2u);
    EXPECT_EQ(d.cameras.size(), 1u);
}

TEST(ValidateScene, NanCoordinateNamesNode) {
    auto chain = ropetrack::testing::straight_chain(4, 0.1);
    chain.positions[2].y() = std::numeric_limits<double>::quiet_NaN();
    const std::vector<CameraModel> cams{one_camera()};
    try {
        validate_scene(chain, cams, PhysicsParams{});
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        EXPECT_TRUE(mentions(e, "positions[2]"));
    }
}

TEST(ValidateScene, ZeroDtIsPhysicsError) {
    const auto chain = ropetrack::testing::straight_chain(3, 0.1);
    const std::vector<CameraModel> cams{one_camera()};
    PhysicsParams p;
    p.dt = 0.0;
    try {
        validate_scene(chain, cams, p);
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        EXPECT_TRUE(mentions(e, "PhysicsParams.dt"));
    }
}

TEST(ValidateScene, AggregatesAllViolations) {
    NodeChain chain;
    chain.positions = {Vec3::Zero()};
    chain.segment_rest_length = -1.0;
    chain.node_mass = 0.0;
    CameraModel bad = one_camera();
    bad.width = 0;
    PhysicsParams p;
    p.dt = -1.0;
    p.constraint_iterations = 0;
    const std::vector<CameraModel> cams{bad};
    try {
        validate_scene(chain, cams, p);
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        EXPECT_TRUE(mentions(e, "NodeChain.positions"));
        EXPECT_TRUE(mentions(e, "segment_rest_length"));
        EXPECT_TRUE(mentions(e, "node_mass"));
        EXPECT_TRUE(mentions(e, "CameraModel[0].width"));
        EXPECT_TRUE(mentions(e, "PhysicsParams.dt"));
        EXPECT_TRUE(mentions(e, "constraint_iterations"));
    }
}

TEST(ValidateScene, RequiresACamera) {
    const auto chain = ropetrack::testing::straight_chain(3, 0.1);
    EXPECT_THROW(validate_scene(chain, {}, PhysicsParams{}), ValidationError);
}

TEST(GripperLog, ActionIsConsecutiveDifference) {
    GripperLog log;
    log.samples = {{0.0, Vec3(0, 0, 0)}, {0.1, Vec3(0.01, 0, 0)}, {0.2, Vec3(0.03, 0.01, 0)}};
    EXPECT_TRUE(log.action(0).isZero());
    EXPECT_TRUE(log.action(1).isApprox(Vec3(0.01, 0, 0)));
    EXPECT_TRUE(log.action(2).isApprox(Vec3(0.02, 0.01, 0)));
    EXPECT_TRUE(check(log).empty());
    log.samples[2].time = 0.1;
    EXPECT_EQ(check(log).size(), 1u);
}

TEST(CameraModel, DepthIgnoresMatrixScale) {
    auto cam = one_camera();
    const Vec3 p(0.05, 0.02, 0.01);
    const double d = cam.depth(p);
    cam.projection *= 7.5;
    EXPECT_NEAR(cam.depth(p), d, 1e-12);
    EXPECT_NEAR(d, (p - Vec3(0, -1, 1)).dot(Vec3(0, 1, -1).normalized()), 1e-12);
}

TEST(Frame, ChecksAgainstCamera) {
    const auto cam = one_camera();
    Frame f(cam.width, cam.height, Vec3(0.5, 0.5, 0.5));
    EXPECT_TRUE(check(f, cam).empty());
    f.pixels[4] = 1.5;
    EXPECT_FALSE(check(f, cam).empty());
    Frame g(cam.width + 1, cam.height, Vec3::Zero());
    EXPECT_FALSE(check(g, cam).empty());
}

TEST(SegmentLengths, Basic) {
    const Positions x = {Vec3(0, 0, 0), Vec3(3, 4, 0), Vec3(3, 4, 2)};
    const auto l = segment_lengths(x);
    ASSERT_EQ(l.size(), 2u);
    EXPECT_DOUBLE_EQ(l[0], 5.0);
    EXPECT_DOUBLE_EQ(l[1], 2.0);
}
