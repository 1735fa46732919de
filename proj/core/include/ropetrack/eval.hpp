#pragma once

#include "ropetrack/model.hpp"

#include <optional>
#include <span>
#include <vector>

namespace ropetrack::eval {

/// Mean Euclidean distance between corresponding nodes.
double mean_node_error(std::span<const Vec3> estimate, std::span<const Vec3> truth);

/// Distance at the grasped node.
double tip_error(std::span<const Vec3> estimate, std::span<const Vec3> truth,
                 std::size_t grasped_index);

struct LengthViolation {
    double max_fraction = 0.0;
    double mean_fraction = 0.0;
};

/// Statistics of |l_i - L| / L.
LengthViolation length_violation(std::span<const Vec3> chain, double rest_length);

struct StepMetrics {
    double time = 0.0;
    double mean_error = 0.0;
    double tip_error = 0.0;
    double max_length_violation = 0.0;
    double mean_length_violation = 0.0;
    double loss = 0.0;
    double millis = 0.0;
};

struct Summary {
    std::size_t steps = 0;
    double mean_error = 0.0;
    double max_error = 0.0;
    double mean_tip_error = 0.0;
    double max_tip_error = 0.0;
    double max_length_violation = 0.0;
    double steps_per_second = 0.0;
    /// Present when a prediction-only baseline was supplied.
    std::optional<double> baseline_mean_error;
    std::optional<double> error_ratio;      // filter / baseline
    std::optional<double> error_reduction;  // 1 - ratio
};

struct Report {
    std::vector<StepMetrics> rows;
    Summary summary;
};

struct TrajectoryView {
    std::span<const double> times;
    std::span<const Positions> estimates;
    std::span<const double> losses;
    std::span<const double> millis;
};

/// Per-step and summary metrics. Throws on empty or misaligned inputs.
Report report(const TrajectoryView& trajectory, std::span<const Positions> truth,
              double rest_length, std::size_t grasped_index,
              std::optional<TrajectoryView> baseline = std::nullopt);

}  // namespace ropetrack::eval
