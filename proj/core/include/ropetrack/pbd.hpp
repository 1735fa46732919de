#pragma once

#include "ropetrack/model.hpp"

#include <optional>
#include <span>

namespace ropetrack::pbd {

/// Current and previous node positions; velocity is (current - previous) / dt.
struct DynamicsState {
    Positions current;
    Positions previous;
    std::optional<std::size_t> grasped_index;

    static DynamicsState at_rest(Positions x) {
        DynamicsState s;
        s.previous = x;
        s.current = std::move(x);
        return s;
    }
};

/// Gripper center at this step and its displacement since the previous step.
struct GripperInput {
    Vec3 position = Vec3::Zero();
    Vec3 action = Vec3::Zero();
};

/// Index of the node nearest to `gripper`; ties go to the lowest index.
std::size_t find_grasped_node(std::span<const Vec3> nodes, const Vec3& gripper);

/// Gravity, plane normal force and viscous in-plane friction per node.
///
/// A node is in contact when z <= 1e-9 m (rounding slack on z <= 0). Friction is -mu * m * g * v_xy, with its
/// magnitude capped so that the friction displacement over one step never
/// exceeds the damped inertial displacement, i.e. it cannot reverse the
/// in-plane motion on its own.
Positions external_forces(std::span<const Vec3> nodes, std::span<const Vec3> velocities,
                          const PhysicsParams& params, double node_mass);

/// x' = x + damping * (x - x_prev) + 0.5 * (f / m) * dt^2
Positions verlet_step(const DynamicsState& state, std::span<const Vec3> forces,
                      const PhysicsParams& params, double node_mass);

/// Places the grasped node at gripper + action * dt. Throws std::out_of_range.
Positions apply_grasp(Positions nodes, std::size_t grasped, const GripperInput& gripper,
                      const PhysicsParams& params);

/// Gauss-Seidel projection of the segment-length constraints.
///
/// Each sweep visits every segment once. With a pinned node the sweep starts at
/// the pinned node and runs outward toward both tips, so the pinned node only
/// ever pushes corrections away from itself. A segment touching the pinned node
/// moves its free end by the full correction; other segments split it evenly.
/// Segments shorter than 1e-9 m take their direction from `fallback`
/// (per segment) when supplied, else +x.
Positions project_length_constraints(Positions nodes, double rest_length, int iterations,
                                     std::optional<std::size_t> pinned = std::nullopt,
                                     std::span<const Vec3> fallback = {});

/// Moves each interior, non-pinned node toward the midpoint of its neighbors by
/// the fraction `kappa`. Jacobi update: all midpoints come from the input.
Positions smooth_and_damp(Positions nodes, std::optional<std::size_t> pinned, double kappa);

/// Clamps z to the manipulation plane z = 0.
Positions resolve_plane_contact(Positions nodes);

struct Prediction {
    Positions positions;
    DynamicsState state;
};

/// One full prediction: grasp search, forces, Verlet, grasp, projection,
/// smoothing, plane contact. Without a gripper the grasp steps are skipped.
Prediction predict(const DynamicsState& state, const std::optional<GripperInput>& gripper,
                   const PhysicsParams& params, const RopeProperties& rope);

/// Segment directions of `nodes` for use as a projection fallback; degenerate
/// segments get +x.
Positions segment_directions(std::span<const Vec3> nodes);

/// max_i | |x_{i+1} - x_i| - L |
double max_length_violation(std::span<const Vec3> nodes, double rest_length);

}  // namespace ropetrack::pbd
