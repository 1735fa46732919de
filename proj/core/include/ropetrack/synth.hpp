#pragma once

#include "ropetrack/dataset.hpp"
#include "ropetrack/model.hpp"
#include "ropetrack/pbd.hpp"

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ropetrack::synth {

/// Piecewise-linear gripper trajectory.
struct MotionScript {
    std::string name;
    std::vector<GripperSample> waypoints;
    std::optional<std::size_t> grasp_node_hint;

    double duration() const { return waypoints.empty() ? 0.0 : waypoints.back().time; }
    Vec3 position_at(double t) const;
};

std::vector<std::string> check(const MotionScript& script);

struct Scene {
    NodeChain chain0;
    std::vector<CameraModel> cameras;
    PhysicsParams physics;
    SplatConfig splat;
};

/// 0.6 m rope of 30 nodes lying along y on the table, three 640x480 cameras on
/// a quarter circle looking down at the origin from 45 degrees, dt = 0.1 s.
Scene preset_scene();

/// Camera at `eye` looking at `target` with world +z up.
CameraModel look_at_camera(const Vec3& eye, const Vec3& target, double focal_px, int width,
                           int height, const Vec3& background);

/// Built-in scripts for a chain whose grasped tip is its last node:
/// "still", "drag", "lift" and "cross".
MotionScript preset_script(std::string_view name, const NodeChain& chain0);
std::vector<std::string> preset_script_names();

struct GroundTruth {
    std::vector<Positions> states;
    GripperLog gripper;
    std::size_t grasped_index = 0;
};

/// Integrates pbd::predict at dt / substeps and samples the coarse grid.
GroundTruth generate_ground_truth(const NodeChain& chain0, const MotionScript& script,
                                  const PhysicsParams& physics, int substeps = 10);

struct RenderedSequence {
    std::vector<FrameSet> frames;
    std::vector<std::vector<Mask>> masks;
};

/// Renders every state with the reference renderer, adds clamped Gaussian
/// pixel noise, and marks mask pixels where the splat weight exceeds 0.5.
RenderedSequence render_dataset(std::span<const Positions> states,
                                std::span<const CameraModel> cameras, const NodeChain& rope,
                                const SplatConfig& splat_config, double noise_std,
                                std::uint64_t seed, double dt = 0.1);

/// Generator substeps used for the preset datasets. At 10 the hanging part of
/// the lifted rope stretches past 1% of L under 20 constraint sweeps.
inline constexpr int kPresetSubsteps = 20;

/// Full synthetic dataset for a scene and script.
Dataset make_dataset(const Scene& scene, const MotionScript& script, double noise_std,
                     std::uint64_t seed, int substeps = kPresetSubsteps);

}  // namespace ropetrack::synth
