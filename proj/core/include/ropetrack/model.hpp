#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ropetrack {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat34 = Eigen::Matrix<double, 3, 4>;

/// Node positions of a rope centerline, ordered tip to tip.
using Positions = std::vector<Vec3>;

/// Raised by validators. Carries every violation found, not only the first.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(std::vector<std::string> issues);

    const std::vector<std::string>& issues() const noexcept { return issues_; }

private:
    std::vector<std::string> issues_;
};

/// Per-rope constants shared by the dynamics and the tracker.
struct RopeProperties {
    double segment_rest_length = 0.0;  // L, meters
    double node_mass = 0.0;            // m / N, kilograms
};

/// The tracked state: N ordered 3D nodes plus the rope constants.
struct NodeChain {
    Positions positions;
    double segment_rest_length = 0.0;
    double node_mass = 0.0;

    std::size_t size() const noexcept { return positions.size(); }
    RopeProperties rope() const noexcept { return {segment_rest_length, node_mass}; }
};

struct GripperSample {
    double time = 0.0;
    Vec3 position = Vec3::Zero();
};

/// Time-stamped gripper center positions. Actions are consecutive differences.
struct GripperLog {
    std::vector<GripperSample> samples;

    std::size_t size() const noexcept { return samples.size(); }
    /// a^t = p^t - p^{t-1}; zero at t = 0.
    Vec3 action(std::size_t t) const;
};

/// Pinhole camera as a 3x4 projection to homogeneous pixel coordinates.
/// Pixel origin is the top-left corner, +x right, +y down; pixel centers sit
/// at integer + 0.5.
struct CameraModel {
    Mat34 projection = Mat34::Zero();
    int width = 0;
    int height = 0;
    Vec3 background = Vec3::Zero();

    /// Homogeneous image of a world point (u*w, v*w, w).
    Vec3 project_homogeneous(const Vec3& p) const {
        return projection.leftCols<3>() * p + projection.col(3);
    }
    /// Camera-frame depth, independent of the overall scale of the matrix.
    double depth(const Vec3& p) const;
};

/// Row-major H x W x 3 image with channels in [0, 1].
struct Frame {
    int width = 0;
    int height = 0;
    std::vector<double> pixels;
    int camera_index = 0;
    double timestamp = 0.0;

    Frame() = default;
    Frame(int w, int h, const Vec3& fill, int camera = 0, double t = 0.0);

    std::size_t pixel_count() const noexcept {
        return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    }
    Vec3 at(int x, int y) const {
        const std::size_t i = 3 * (static_cast<std::size_t>(y) * width + x);
        return {pixels[i], pixels[i + 1], pixels[i + 2]};
    }
    void set(int x, int y, const Vec3& c) {
        const std::size_t i = 3 * (static_cast<std::size_t>(y) * width + x);
        pixels[i] = c.x();
        pixels[i + 1] = c.y();
        pixels[i + 2] = c.z();
    }
};

/// K frames for one time step, indexed by camera.
using FrameSet = std::vector<Frame>;

/// Binary H x W grid (0 or 1).
struct Mask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;

    Mask() = default;
    Mask(int w, int h, std::uint8_t fill = 0)
        : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

    bool at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x] != 0; }
    std::size_t count() const;
};

struct PhysicsParams {
    double gravity = 9.81;
    double friction_coefficient = 0.5;
    double dt = 0.1;
    int constraint_iterations = 20;
    /// Scales the Verlet velocity term; 1 keeps all momentum, 0 removes it.
    double damping = 0.99;
    /// Laplacian smoothing weight applied after constraint projection.
    double smoothness = 0.1;
    /// Re-run the nearest-node grasp search every step instead of once.
    bool reselect_grasp = false;
};

struct SplatConfig {
    int gaussians_per_segment = 3;
    double rope_diameter = 0.008;
    double opacity = 0.9;
    /// Empty, a single shared color, or one color per Gaussian.
    std::vector<Vec3> colors;
};

/// Result of validate_scene: the inputs, known to satisfy every invariant.
struct SceneDescriptor {
    NodeChain chain;
    std::vector<CameraModel> cameras;
    PhysicsParams physics;
};

std::vector<std::string> check(const NodeChain& chain);
std::vector<std::string> check(const CameraModel& camera, int index = 0);
std::vector<std::string> check(const PhysicsParams& params);
std::vector<std::string> check(const SplatConfig& config);
std::vector<std::string> check(const GripperLog& log);
std::vector<std::string> check(const Frame& frame, const CameraModel& camera);

SceneDescriptor validate_scene(const NodeChain& chain, std::span<const CameraModel> cameras,
                               const PhysicsParams& params);

/// Segment lengths |x_{i+1} - x_i|.
std::vector<double> segment_lengths(std::span<const Vec3> positions);

}  // namespace ropetrack
