#pragma once

#include "ropetrack/dataset.hpp"
#include "ropetrack/model.hpp"
#include "ropetrack/pbd.hpp"
#include "ropetrack/splat.hpp"

#include <optional>
#include <span>
#include <vector>

namespace ropetrack::filter {

struct OptimizerConfig {
    double learning_rate = 8e-5;
    int iterations = 50;
    double momentum = 0.9;
    /// Stop once an accepted step lowers the best loss by less than tol * best.
    double convergence_tol = 1e-4;
    /// Per-node cap on |dX|; nullopt means one rest length.
    std::optional<double> max_correction;
    /// On a loss increase, return to the best iterate, drop the momentum and
    /// halve the step. The loss is a norm, so its gradient does not shrink
    /// near the optimum and a fixed step keeps oscillating.
    bool backtrack = true;

    /// false gives the prediction-only baseline.
    bool enable_update = true;
    /// Restrict the loss to the dilated observation masks.
    bool mask_loss = false;
    int mask_dilation = 4;
    /// Random pixel keep probability per iteration (1 = full batch).
    double pixel_fraction = 1.0;
    std::uint64_t seed = 0;

    /// Re-project segment lengths after the update when they drift past
    /// `reproject_threshold` (fraction of L).
    bool reproject_after_update = true;
    double reproject_threshold = 0.02;
};

struct FilterState {
    pbd::DynamicsState dynamics;
    splat::SplatSet splats;
    RopeProperties rope;
    int step_index = 0;
    OptimizerConfig config;
};

FilterState init(const NodeChain& chain0, std::span<const Frame> frames0,
                 std::span<const CameraModel> cameras, const SplatConfig& splat_config,
                 std::span<const Mask> masks, const OptimizerConfig& config = {});

struct UpdateResult {
    Positions positions;
    double initial_loss = 0.0;
    double final_loss = 0.0;
    int iterations = 0;
    double first_gradient_norm = 0.0;
};

/// Momentum gradient descent on a correction dX added to the prediction.
/// Returns the lowest-loss iterate, so final_loss <= initial_loss. A pinned
/// node (the grasped one) keeps its predicted position.
UpdateResult update(std::span<const Vec3> predicted, std::span<const Frame> frames,
                    std::span<const CameraModel> cameras, const splat::SplatSet& splats,
                    const OptimizerConfig& opt, double rest_length,
                    std::span<const Mask> masks = {},
                    std::optional<std::size_t> pinned = std::nullopt);

struct StepResult {
    Positions estimate;
    Positions predicted;
    UpdateResult update;
};

/// Predict with PBD, correct against the frames, advance the state.
StepResult step(FilterState& state, const pbd::GripperInput& gripper,
                std::span<const Frame> frames, std::span<const CameraModel> cameras,
                const PhysicsParams& physics, std::span<const Mask> masks = {});

struct TrackConfig {
    OptimizerConfig optimizer;
    /// Multiplies the dataset's friction coefficient for the tracker.
    double friction_scale = 1.0;
};

struct TrackResult {
    std::vector<double> times;
    std::vector<Positions> estimates;
    std::vector<double> losses;
    std::vector<int> iterations;
    std::vector<double> millis;
    std::size_t grasped_index = 0;
};

TrackResult track(const Dataset& dataset, const TrackConfig& config);

}  // namespace ropetrack::filter
