#include "ropetrack/synth.hpp"

#include "ropetrack/splat.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace ropetrack::synth {

Vec3 MotionScript::position_at(double t) const {
    if (waypoints.empty()) throw std::logic_error("MotionScript: no waypoints");
    if (t <= waypoints.front().time) return waypoints.front().position;
    if (t >= waypoints.back().time) return waypoints.back().position;
    const auto it = std::upper_bound(waypoints.begin(), waypoints.end(), t,
                                     [](double v, const GripperSample& w) { return v < w.time; });
    const auto& b = *it;
    const auto& a = *(it - 1);
    const double s = (t - a.time) / (b.time - a.time);
    return (1.0 - s) * a.position + s * b.position;
}

std::vector<std::string> check(const MotionScript& script) {
    std::vector<std::string> issues;
    if (script.waypoints.empty()) issues.push_back("MotionScript.waypoints: empty");
    else if (script.waypoints.front().time != 0.0)
        issues.push_back("MotionScript.waypoints: first time must be 0");
    for (std::size_t i = 1; i < script.waypoints.size(); ++i)
        if (!(script.waypoints[i].time > script.waypoints[i - 1].time))
            issues.push_back("MotionScript.waypoints[" + std::to_string(i) +
                             "]: times must be strictly increasing");
    return issues;
}

CameraModel look_at_camera(const Vec3& eye, const Vec3& target, double focal_px, int width,
                           int height, const Vec3& background) {
    const Vec3 forward = (target - eye).normalized();
    const Vec3 right = forward.cross(Vec3::UnitZ()).normalized();
    const Vec3 down = forward.cross(right);

    Eigen::Matrix3d rotation;
    rotation.row(0) = right.transpose();
    rotation.row(1) = down.transpose();
    rotation.row(2) = forward.transpose();
    Eigen::Matrix3d intrinsics;
    intrinsics << focal_px, 0.0, 0.5 * width, 0.0, focal_px, 0.5 * height, 0.0, 0.0, 1.0;

    Mat34 extrinsics;
    extrinsics.leftCols<3>() = rotation;
    extrinsics.col(3) = -rotation * eye;

    CameraModel cam;
    cam.projection = intrinsics * extrinsics;
    cam.width = width;
    cam.height = height;
    cam.background = background;
    return cam;
}

Scene preset_scene() {
    constexpr int nodes = 30;
    constexpr double rope_length = 0.6;
    constexpr double rope_mass = 0.05;

    Scene scene;
    scene.chain0.segment_rest_length = rope_length / (nodes - 1);
    scene.chain0.node_mass = rope_mass / nodes;
    for (int i = 0; i < nodes; ++i)
        scene.chain0.positions.emplace_back(0.0, -0.5 * rope_length + i * scene.chain0.segment_rest_length,
                                            0.0);

    const double distance = 1.2;
    const double elevation = std::numbers::pi / 4.0;
    const std::array<double, 3> azimuths = {-std::numbers::pi / 4.0, 0.0, std::numbers::pi / 4.0};
    const std::array<Vec3, 3> backgrounds = {Vec3(0.25, 0.25, 0.28), Vec3(0.30, 0.28, 0.25),
                                             Vec3(0.22, 0.26, 0.22)};
    for (std::size_t k = 0; k < azimuths.size(); ++k) {
        const Vec3 eye = distance * Vec3(std::cos(elevation) * std::cos(azimuths[k]),
                                         std::cos(elevation) * std::sin(azimuths[k]),
                                         std::sin(elevation));
        scene.cameras.push_back(look_at_camera(eye, Vec3::Zero(), 554.0, 640, 480, backgrounds[k]));
    }

    scene.physics = PhysicsParams{};
    scene.splat.gaussians_per_segment = 3;
    scene.splat.rope_diameter = 0.008;
    scene.splat.opacity = 0.9;
    scene.splat.colors = {Vec3(0.85, 0.35, 0.10)};
    return scene;
}

std::vector<std::string> preset_script_names() { return {"still", "drag", "lift", "cross"}; }

MotionScript preset_script(std::string_view name, const NodeChain& chain0) {
    if (chain0.size() < 2) throw std::invalid_argument("preset_script: chain too short");
    const std::size_t tip_index = chain0.size() - 1;
    const Vec3 tip = chain0.positions[tip_index];

    MotionScript script;
    script.name = std::string(name);
    script.grasp_node_hint = tip_index;
    auto add = [&](double t, const Vec3& offset) { script.waypoints.push_back({t, tip + offset}); };

    if (name == "still") {
        add(0.0, Vec3::Zero());
        add(1.0, Vec3::Zero());
    } else if (name == "drag") {
        add(0.0, Vec3::Zero());
        add(3.0, Vec3(0.3, 0.0, 0.0));
    } else if (name == "lift") {
        add(0.0, Vec3::Zero());
        add(3.0, Vec3(0.0, -0.1, 0.3));
    } else if (name == "cross") {
        // Lift the tip, swing it around to form a loop over the chain, then
        // pass it back across the loop and set it down.
        add(0.0, Vec3::Zero());
        add(1.0, Vec3(0.0, 0.0, 0.05));
        add(2.5, Vec3(0.15, -0.10, 0.05));
        add(4.0, Vec3(0.15, -0.35, 0.05));
        add(5.5, Vec3(-0.10, -0.30, 0.05));
        add(7.0, Vec3(-0.05, -0.15, 0.02));
    } else {
        throw std::invalid_argument("preset_script: unknown script '" + std::string(name) + "'");
    }
    return script;
}

GroundTruth generate_ground_truth(const NodeChain& chain0, const MotionScript& script,
                                  const PhysicsParams& physics, int substeps) {
    if (substeps < 1) throw std::invalid_argument("generate_ground_truth: substeps must be >= 1");
    if (auto issues = check(script); !issues.empty()) throw ValidationError(std::move(issues));
    if (auto issues = check(chain0); !issues.empty()) throw ValidationError(std::move(issues));

    const std::size_t steps =
        static_cast<std::size_t>(std::floor(script.duration() / physics.dt + 1e-9)) + 1;
    PhysicsParams fine = physics;
    fine.dt = physics.dt / substeps;

    GroundTruth out;
    auto state = pbd::DynamicsState::at_rest(chain0.positions);
    out.grasped_index = script.grasp_node_hint.value_or(
        pbd::find_grasped_node(chain0.positions, script.position_at(0.0)));
    state.grasped_index = out.grasped_index;

    out.states.push_back(chain0.positions);
    out.gripper.samples.push_back({0.0, script.position_at(0.0)});
    for (std::size_t k = 1; k < steps; ++k) {
        for (int s = 0; s < substeps; ++s) {
            const double t0 = static_cast<double>((k - 1) * substeps + s) * fine.dt;
            const double t1 = t0 + fine.dt;
            const Vec3 p1 = script.position_at(t1);
            const pbd::GripperInput gripper{p1, p1 - script.position_at(t0)};
            state = pbd::predict(state, gripper, fine, chain0.rope()).state;
        }
        const double t = static_cast<double>(k) * physics.dt;
        out.states.push_back(state.current);
        out.gripper.samples.push_back({t, script.position_at(t)});
    }
    return out;
}

RenderedSequence render_dataset(std::span<const Positions> states,
                                std::span<const CameraModel> cameras, const NodeChain& rope,
                                const SplatConfig& splat_config, double noise_std,
                                std::uint64_t seed, double dt) {
    RenderedSequence out;
    NodeChain chain = rope;
    for (std::size_t t = 0; t < states.size(); ++t) {
        chain.positions = states[t];
        const auto splats = splat::build_splats(chain, splat_config);
        FrameSet frames;
        std::vector<Mask> masks;
        for (std::size_t k = 0; k < cameras.size(); ++k) {
            auto detail = splat::render_oracle_detailed(splats, cameras[k]);
            Frame frame = std::move(detail.image);
            frame.camera_index = static_cast<int>(k);
            frame.timestamp = static_cast<double>(t) * dt;
            if (noise_std > 0.0) {
                std::mt19937_64 rng(seed ^ (0x9e3779b97f4a7c15ULL * (t + 1)) ^
                                    (0xc2b2ae3d27d4eb4fULL * (k + 1)));
                std::normal_distribution<double> noise(0.0, noise_std);
                for (double& v : frame.pixels) v = std::clamp(v + noise(rng), 0.0, 1.0);
            }
            Mask mask(frame.width, frame.height);
            for (std::size_t p = 0; p < mask.data.size(); ++p)
                mask.data[p] = detail.accumulated_weight[p] > 0.5;
            frames.push_back(std::move(frame));
            masks.push_back(std::move(mask));
        }
        out.frames.push_back(std::move(frames));
        out.masks.push_back(std::move(masks));
    }
    return out;
}

Dataset make_dataset(const Scene& scene, const MotionScript& script, double noise_std,
                     std::uint64_t seed, int substeps) {
    const auto truth = generate_ground_truth(scene.chain0, script, scene.physics, substeps);
    auto rendered = render_dataset(truth.states, scene.cameras, scene.chain0, scene.splat,
                                   noise_std, seed, scene.physics.dt);
    Dataset d;
    d.initial_chain = scene.chain0;
    d.cameras = scene.cameras;
    d.physics = scene.physics;
    d.splat = scene.splat;
    d.gripper = truth.gripper;
    d.grasp_hint = truth.grasped_index;
    d.frames = std::move(rendered.frames);
    d.masks = std::move(rendered.masks);
    d.truth = truth.states;
    d.script_name = script.name;
    d.noise_std = noise_std;
    d.seed = seed;
    d.substeps = substeps;
    return d;
}

}  // namespace ropetrack::synth
