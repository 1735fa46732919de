#include "ropetrack/filter.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ropetrack::filter {

namespace {

constexpr int kMaxReprojectRounds = 500;

void require_frames(std::span<const Frame> frames, std::span<const CameraModel> cameras) {
    if (frames.size() < cameras.size())
        throw std::invalid_argument("missing frame for camera " + std::to_string(frames.size()));
    if (frames.size() > cameras.size())
        throw std::invalid_argument("frame " + std::to_string(cameras.size()) +
                                    " has no camera");
    for (std::size_t k = 0; k < cameras.size(); ++k) {
        if (frames[k].width != cameras[k].width || frames[k].height != cameras[k].height)
            throw std::invalid_argument("frame for camera " + std::to_string(k) +
                                        " does not match the camera resolution");
    }
}

std::vector<Mask> loss_masks(std::span<const Mask> masks, const OptimizerConfig& opt) {
    std::vector<Mask> out;
    if (!opt.mask_loss) return out;
    out.reserve(masks.size());
    for (const auto& m : masks) out.push_back(splat::dilate(m, opt.mask_dilation));
    return out;
}

double observed_loss(std::span<const Vec3> nodes, const splat::SplatSet& splats,
                     std::span<const Frame> frames, std::span<const CameraModel> cameras,
                     std::span<const Mask> masks) {
    const auto attached = splat::reattach(splats, nodes);
    double total = 0.0;
    for (std::size_t k = 0; k < cameras.size(); ++k) {
        const Mask* m = k < masks.size() ? &masks[k] : nullptr;
        total += splat::render_loss(frames[k], splat::render(attached, cameras[k]), m);
    }
    return total;
}

}  // namespace

FilterState init(const NodeChain& chain0, std::span<const Frame> frames0,
                 std::span<const CameraModel> cameras, const SplatConfig& splat_config,
                 std::span<const Mask> masks, const OptimizerConfig& config) {
    if (auto issues = check(chain0); !issues.empty()) throw ValidationError(std::move(issues));
    require_frames(frames0, cameras);

    SplatConfig resolved = splat_config;
    const std::size_t count =
        (chain0.size() - 1) * static_cast<std::size_t>(splat_config.gaussians_per_segment);
    if (!masks.empty())
        resolved.colors = splat::fit_colors(frames0, masks, count);
    else if (resolved.colors.empty())
        throw std::invalid_argument("init: masks are required to fit the rope colors");

    FilterState state;
    state.dynamics = pbd::DynamicsState::at_rest(chain0.positions);
    state.splats = splat::build_splats(chain0, resolved);
    state.rope = chain0.rope();
    state.config = config;
    return state;
}

UpdateResult update(std::span<const Vec3> predicted, std::span<const Frame> frames,
                    std::span<const CameraModel> cameras, const splat::SplatSet& splats,
                    const OptimizerConfig& opt, double rest_length, std::span<const Mask> masks,
                    std::optional<std::size_t> pinned) {
    require_frames(frames, cameras);
    const std::size_t n = predicted.size();
    const double cap = opt.max_correction.value_or(rest_length);

    UpdateResult out;
    Positions correction(n, Vec3::Zero());
    Positions velocity(n, Vec3::Zero());
    Positions current(predicted.begin(), predicted.end());
    out.positions = current;
    Positions best_correction = correction;
    Positions best_gradient;
    double rate = opt.learning_rate;

    double previous_loss = 0.0;
    for (int it = 0; it <= opt.iterations; ++it) {
        splat::LossOptions options;
        options.masks = masks;
        options.pixel_fraction = opt.pixel_fraction;
        options.seed = opt.seed + static_cast<std::uint64_t>(it);
        auto lg = splat::loss_gradient_nodes(current, splats, frames, cameras, options);
        if (pinned && *pinned < n) lg.gradient[*pinned].setZero();

        const Positions* descent = &lg.gradient;
        if (it == 0) {
            out.initial_loss = out.final_loss = lg.loss;
            double sq = 0.0;
            for (const auto& g : lg.gradient) sq += g.squaredNorm();
            out.first_gradient_norm = std::sqrt(sq);
            best_gradient = lg.gradient;
        } else {
            if (lg.loss < out.final_loss) {
                // Converged once an accepted step barely improves on the best.
                const bool converged = out.final_loss - lg.loss < opt.convergence_tol * out.final_loss;
                out.final_loss = lg.loss;
                out.positions = current;
                best_correction = correction;
                best_gradient = lg.gradient;
                if (converged) break;
            } else if (!opt.backtrack) {
                if (std::abs(previous_loss - lg.loss) < opt.convergence_tol * previous_loss) break;
            } else {
                rate *= 0.5;
                correction = best_correction;
                std::fill(velocity.begin(), velocity.end(), Vec3::Zero());
                descent = &best_gradient;
            }
        }
        previous_loss = lg.loss;
        if (it == opt.iterations || lg.loss == 0.0) break;

        for (std::size_t i = 0; i < n; ++i) {
            velocity[i] = opt.momentum * velocity[i] - rate * (*descent)[i];
            correction[i] += velocity[i];
            const double norm = correction[i].norm();
            if (norm > cap) correction[i] *= cap / norm;
            current[i] = predicted[i] + correction[i];
        }
        ++out.iterations;
    }
    return out;
}

StepResult step(FilterState& state, const pbd::GripperInput& gripper,
                std::span<const Frame> frames, std::span<const CameraModel> cameras,
                const PhysicsParams& physics, std::span<const Mask> masks) {
    require_frames(frames, cameras);
    const OptimizerConfig& opt = state.config;

    auto prediction = pbd::predict(state.dynamics, gripper, physics, state.rope);
    const auto grasped = prediction.state.grasped_index;
    const auto used_masks = loss_masks(masks, opt);

    StepResult out;
    out.predicted = prediction.positions;
    if (opt.enable_update) {
        OptimizerConfig seeded = opt;
        seeded.seed = opt.seed + 0x9e37ULL * static_cast<std::uint64_t>(state.step_index + 1);
        out.update = update(prediction.positions, frames, cameras, state.splats, seeded,
                            state.rope.segment_rest_length, used_masks, grasped);
    } else {
        out.update.positions = prediction.positions;
        out.update.initial_loss = out.update.final_loss =
            observed_loss(prediction.positions, state.splats, frames, cameras, used_masks);
    }

    Positions estimate = out.update.positions;
    const double L = state.rope.segment_rest_length;
    if (opt.reproject_after_update && opt.enable_update &&
        pbd::max_length_violation(estimate, L) > opt.reproject_threshold * L) {
        // Project well inside the threshold so the next update starts with
        // margin; a long free tail can need many sweeps.
        const auto fallback = pbd::segment_directions(prediction.positions);
        for (int round = 0; round < kMaxReprojectRounds; ++round) {
            estimate = pbd::project_length_constraints(std::move(estimate), L,
                                                       physics.constraint_iterations, grasped,
                                                       fallback);
            if (pbd::max_length_violation(estimate, L) <= 0.5 * opt.reproject_threshold * L)
                break;
        }
    }

    state.dynamics = std::move(prediction.state);
    state.dynamics.current = estimate;
    ++state.step_index;
    out.estimate = std::move(estimate);
    return out;
}

TrackResult track(const Dataset& dataset, const TrackConfig& config) {
    const std::size_t steps = dataset.steps();
    if (steps == 0) throw std::invalid_argument("track: dataset has no frames");
    if (dataset.gripper.size() != steps)
        throw std::invalid_argument("track: " + std::to_string(steps) + " frame steps but " +
                                    std::to_string(dataset.gripper.size()) + " gripper rows");

    PhysicsParams physics = dataset.physics;
    physics.friction_coefficient *= config.friction_scale;

    const auto masks0 = dataset.masks.empty() ? std::span<const Mask>{}
                                               : std::span<const Mask>(dataset.masks[0]);
    FilterState state = init(dataset.initial_chain, dataset.frames[0], dataset.cameras,
                             dataset.splat, masks0, config.optimizer);
    state.dynamics.grasped_index =
        dataset.grasp_hint.value_or(pbd::find_grasped_node(dataset.initial_chain.positions,
                                                           dataset.gripper.samples[0].position));

    TrackResult out;
    out.grasped_index = *state.dynamics.grasped_index;
    out.times.push_back(dataset.gripper.samples[0].time);
    out.estimates.push_back(dataset.initial_chain.positions);
    {
        const auto used = loss_masks(masks0, config.optimizer);
        out.losses.push_back(observed_loss(dataset.initial_chain.positions, state.splats,
                                           dataset.frames[0], dataset.cameras, used));
    }
    out.iterations.push_back(0);
    out.millis.push_back(0.0);

    for (std::size_t t = 1; t < steps; ++t) {
        const pbd::GripperInput gripper{dataset.gripper.samples[t].position,
                                        dataset.gripper.action(t)};
        const auto masks = dataset.masks.size() > t ? std::span<const Mask>(dataset.masks[t])
                                                    : std::span<const Mask>{};
        const auto start = std::chrono::steady_clock::now();
        auto result = step(state, gripper, dataset.frames[t], dataset.cameras, physics, masks);
        const auto stop = std::chrono::steady_clock::now();

        out.times.push_back(dataset.gripper.samples[t].time);
        out.estimates.push_back(std::move(result.estimate));
        out.losses.push_back(result.update.final_loss);
        out.iterations.push_back(result.update.iterations);
        out.millis.push_back(std::chrono::duration<double, std::milli>(stop - start).count());
    }
    return out;
}

}  // namespace ropetrack::filter
