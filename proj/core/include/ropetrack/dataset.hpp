#pragma once

#include "ropetrack/model.hpp"

#include <optional>
#include <string>
#include <vector>

namespace ropetrack {

/// Everything a tracking run consumes, as loaded from or written to disk.
struct Dataset {
    NodeChain initial_chain;
    std::vector<CameraModel> cameras;
    PhysicsParams physics;
    SplatConfig splat;
    GripperLog gripper;
    std::optional<std::size_t> grasp_hint;
    /// frames[t][k]: step t, camera k.
    std::vector<FrameSet> frames;
    /// masks[t][k], same layout as frames.
    std::vector<std::vector<Mask>> masks;
    /// Ground-truth node positions per step; empty for real recordings.
    std::vector<Positions> truth;

    std::string script_name;
    double noise_std = 0.0;
    std::uint64_t seed = 0;
    int substeps = 0;

    std::size_t steps() const noexcept { return frames.size(); }
};

}  // namespace ropetrack
