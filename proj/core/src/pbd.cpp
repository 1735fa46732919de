#include "ropetrack/pbd.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ropetrack::pbd {

namespace {

constexpr double kDegenerateSegment = 1e-9;
// Nodes this close above the plane count as touching. Without it, rounding
// noise of 1e-17 m on a resting node drops it a full step under gravity.
constexpr double kContactTolerance = 1e-9;

void require_same_size(std::size_t a, std::size_t b, const char* what) {
    if (a != b)
        throw std::invalid_argument(std::string(what) + ": size mismatch (" + std::to_string(a) +
                                    " vs " + std::to_string(b) + ")");
}

// Projects segment i in place. share_a / share_b are the fractions of the
// correction applied to each end.
void project_segment(Positions& x, std::size_t i, double rest_length, double share_a,
                     double share_b, std::span<const Vec3> fallback) {
    Vec3 delta = x[i + 1] - x[i];
    const double length = delta.norm();
    Vec3 dir;
    if (length < kDegenerateSegment)
        dir = i < fallback.size() ? fallback[i] : Vec3::UnitX();
    else
        dir = delta / length;
    // lambda = (L - l) / 2 per end for the symmetric split.
    const double correction = rest_length - length;
    x[i] -= share_a * correction * dir;
    x[i + 1] += share_b * correction * dir;
}

}  // namespace

std::size_t find_grasped_node(std::span<const Vec3> nodes, const Vec3& gripper) {
    if (nodes.empty()) throw std::invalid_argument("find_grasped_node: empty node set");
    if (!gripper.allFinite()) throw std::invalid_argument("find_grasped_node: gripper not finite");
    std::size_t best = 0;
    double best_d2 = (nodes[0] - gripper).squaredNorm();
    for (std::size_t i = 1; i < nodes.size(); ++i) {
        const double d2 = (nodes[i] - gripper).squaredNorm();
        if (d2 < best_d2) {
            best = i;
            best_d2 = d2;
        }
    }
    return best;
}

Positions external_forces(std::span<const Vec3> nodes, std::span<const Vec3> velocities,
                          const PhysicsParams& params, double node_mass) {
    require_same_size(nodes.size(), velocities.size(), "external_forces");
    const double weight = node_mass * params.gravity;
    Positions forces(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        Vec3 f(0.0, 0.0, -weight);
        if (nodes[i].z() <= kContactTolerance) {
            f.z() += weight;
            const Vec3 v_xy(velocities[i].x(), velocities[i].y(), 0.0);
            Vec3 friction = -params.friction_coefficient * weight * v_xy;
            // 0.5 |f|/m dt^2 <= damping |v| dt
            const double cap = 2.0 * params.damping * node_mass * v_xy.norm() / params.dt;
            const double magnitude = friction.norm();
            if (magnitude > cap) friction *= cap / magnitude;
            f += friction;
        }
        forces[i] = f;
    }
    return forces;
}

Positions verlet_step(const DynamicsState& state, std::span<const Vec3> forces,
                      const PhysicsParams& params, double node_mass) {
    require_same_size(state.current.size(), state.previous.size(), "verlet_step");
    require_same_size(state.current.size(), forces.size(), "verlet_step");
    const double accel_scale = 0.5 * params.dt * params.dt / node_mass;
    Positions next(state.current.size());
    for (std::size_t i = 0; i < next.size(); ++i) {
        next[i] = state.current[i] + params.damping * (state.current[i] - state.previous[i]) +
                  accel_scale * forces[i];
    }
    return next;
}

Positions apply_grasp(Positions nodes, std::size_t grasped, const GripperInput& gripper,
                      const PhysicsParams& params) {
    if (grasped >= nodes.size())
        throw std::out_of_range("apply_grasp: grasped index " + std::to_string(grasped) +
                                " out of range for " + std::to_string(nodes.size()) + " nodes");
    nodes[grasped] = gripper.position + gripper.action * params.dt;
    return nodes;
}

Positions project_length_constraints(Positions nodes, double rest_length, int iterations,
                                     std::optional<std::size_t> pinned,
                                     std::span<const Vec3> fallback) {
    if (nodes.size() < 2) return nodes;
    if (pinned && *pinned >= nodes.size())
        throw std::out_of_range("project_length_constraints: pinned index out of range");
    const std::size_t segments = nodes.size() - 1;
    for (int it = 0; it < iterations; ++it) {
        if (!pinned) {
            for (std::size_t i = 0; i < segments; ++i)
                project_segment(nodes, i, rest_length, 0.5, 0.5, fallback);
            continue;
        }
        const std::size_t g = *pinned;
        for (std::size_t i = g; i < segments; ++i) {
            const bool touches = i == g;
            project_segment(nodes, i, rest_length, touches ? 0.0 : 0.5, touches ? 1.0 : 0.5,
                            fallback);
        }
        for (std::size_t i = g; i-- > 0;) {
            const bool touches = i + 1 == g;
            project_segment(nodes, i, rest_length, touches ? 1.0 : 0.5, touches ? 0.0 : 0.5,
                            fallback);
        }
    }
    return nodes;
}

Positions smooth_and_damp(Positions nodes, std::optional<std::size_t> pinned, double kappa) {
    if (nodes.size() < 3 || kappa == 0.0) return nodes;
    const Positions input = nodes;
    for (std::size_t i = 1; i + 1 < input.size(); ++i) {
        if (pinned && *pinned == i) continue;
        const Vec3 midpoint = 0.5 * (input[i - 1] + input[i + 1]);
        nodes[i] = (1.0 - kappa) * input[i] + kappa * midpoint;
    }
    return nodes;
}

Positions resolve_plane_contact(Positions nodes) {
    for (auto& x : nodes)
        if (x.z() < 0.0) x.z() = 0.0;
    return nodes;
}

Positions segment_directions(std::span<const Vec3> nodes) {
    Positions dirs;
    if (nodes.size() < 2) return dirs;
    dirs.reserve(nodes.size() - 1);
    for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
        const Vec3 d = nodes[i + 1] - nodes[i];
        const double n = d.norm();
        dirs.push_back(n < kDegenerateSegment ? Vec3::UnitX() : Vec3(d / n));
    }
    return dirs;
}

double max_length_violation(std::span<const Vec3> nodes, double rest_length) {
    double worst = 0.0;
    for (double l : segment_lengths(nodes)) worst = std::max(worst, std::abs(l - rest_length));
    return worst;
}

Prediction predict(const DynamicsState& state, const std::optional<GripperInput>& gripper,
                   const PhysicsParams& params, const RopeProperties& rope) {
    require_same_size(state.current.size(), state.previous.size(), "predict");
    if (state.grasped_index && *state.grasped_index >= state.current.size())
        throw std::out_of_range("predict: grasped index out of range");

    std::optional<std::size_t> grasped = state.grasped_index;
    if (gripper && (!grasped || params.reselect_grasp))
        grasped = find_grasped_node(state.current, gripper->position);
    if (!gripper) grasped.reset();

    Positions velocities(state.current.size());
    for (std::size_t i = 0; i < velocities.size(); ++i)
        velocities[i] = (state.current[i] - state.previous[i]) / params.dt;

    const Positions forces = external_forces(state.current, velocities, params, rope.node_mass);
    Positions x = verlet_step(state, forces, params, rope.node_mass);
    if (grasped) x = apply_grasp(std::move(x), *grasped, *gripper, params);

    const Positions fallback = segment_directions(state.current);
    x = project_length_constraints(std::move(x), rope.segment_rest_length,
                                   params.constraint_iterations, grasped, fallback);
    x = smooth_and_damp(std::move(x), grasped, params.smoothness);
    x = resolve_plane_contact(std::move(x));

    Prediction out;
    out.positions = x;
    out.state.previous = state.current;
    out.state.current = std::move(x);
    out.state.grasped_index = gripper ? grasped : state.grasped_index;
    return out;
}

}  // namespace ropetrack::pbd
