#include "ropetrack/eval.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ropetrack::eval {

namespace {

void require_match(std::size_t a, std::size_t b, const char* what) {
    if (a != b)
        throw std::invalid_argument(std::string(what) + ": " + std::to_string(a) + " vs " +
                                    std::to_string(b) + " nodes");
}

double sequence_mean_error(const TrajectoryView& traj, std::span<const Positions> truth) {
    double sum = 0.0;
    for (std::size_t t = 0; t < traj.estimates.size(); ++t)
        sum += mean_node_error(traj.estimates[t], truth[t]);
    return sum / static_cast<double>(traj.estimates.size());
}

}  // namespace

double mean_node_error(std::span<const Vec3> estimate, std::span<const Vec3> truth) {
    require_match(estimate.size(), truth.size(), "mean_node_error");
    if (estimate.empty()) throw std::invalid_argument("mean_node_error: empty chains");
    double sum = 0.0;
    for (std::size_t i = 0; i < estimate.size(); ++i) sum += (estimate[i] - truth[i]).norm();
    return sum / static_cast<double>(estimate.size());
}

double tip_error(std::span<const Vec3> estimate, std::span<const Vec3> truth,
                 std::size_t grasped_index) {
    require_match(estimate.size(), truth.size(), "tip_error");
    if (grasped_index >= estimate.size())
        throw std::out_of_range("tip_error: index " + std::to_string(grasped_index) +
                                " out of range");
    return (estimate[grasped_index] - truth[grasped_index]).norm();
}

LengthViolation length_violation(std::span<const Vec3> chain, double rest_length) {
    if (chain.size() < 2) throw std::invalid_argument("length_violation: need two nodes");
    LengthViolation out;
    const auto lengths = segment_lengths(chain);
    for (double l : lengths) {
        const double f = std::abs(l - rest_length) / rest_length;
        out.max_fraction = std::max(out.max_fraction, f);
        out.mean_fraction += f;
    }
    out.mean_fraction /= static_cast<double>(lengths.size());
    return out;
}

Report report(const TrajectoryView& trajectory, std::span<const Positions> truth,
              double rest_length, std::size_t grasped_index,
              std::optional<TrajectoryView> baseline) {
    const std::size_t n = trajectory.estimates.size();
    if (n == 0) throw std::invalid_argument("report: empty trajectory");
    if (truth.size() != n)
        throw std::invalid_argument("report: " + std::to_string(n) + " estimates but " +
                                    std::to_string(truth.size()) + " truth steps");
    if (trajectory.times.size() != n)
        throw std::invalid_argument("report: times misaligned with estimates");
    if (!trajectory.losses.empty() && trajectory.losses.size() != n)
        throw std::invalid_argument("report: losses misaligned with estimates");
    if (!trajectory.millis.empty() && trajectory.millis.size() != n)
        throw std::invalid_argument("report: timings misaligned with estimates");

    Report out;
    double total_millis = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        StepMetrics row;
        row.time = trajectory.times[t];
        row.mean_error = mean_node_error(trajectory.estimates[t], truth[t]);
        row.tip_error = tip_error(trajectory.estimates[t], truth[t], grasped_index);
        const auto lv = length_violation(trajectory.estimates[t], rest_length);
        row.max_length_violation = lv.max_fraction;
        row.mean_length_violation = lv.mean_fraction;
        row.loss = trajectory.losses.empty() ? 0.0 : trajectory.losses[t];
        row.millis = trajectory.millis.empty() ? 0.0 : trajectory.millis[t];
        total_millis += row.millis;
        out.rows.push_back(row);
    }

    Summary& s = out.summary;
    s.steps = n;
    for (const auto& r : out.rows) {
        s.mean_error += r.mean_error;
        s.max_error = std::max(s.max_error, r.mean_error);
        s.mean_tip_error += r.tip_error;
        s.max_tip_error = std::max(s.max_tip_error, r.tip_error);
        s.max_length_violation = std::max(s.max_length_violation, r.max_length_violation);
    }
    s.mean_error /= static_cast<double>(n);
    s.mean_tip_error /= static_cast<double>(n);
    // The first row is the initialization and carries no timing.
    if (total_millis > 0.0) s.steps_per_second = static_cast<double>(n - 1) / (total_millis / 1e3);

    if (baseline) {
        if (baseline->estimates.size() != n)
            throw std::invalid_argument("report: baseline has " +
                                        std::to_string(baseline->estimates.size()) +
                                        " steps, expected " + std::to_string(n));
        s.baseline_mean_error = sequence_mean_error(*baseline, truth);
        if (*s.baseline_mean_error > 0.0) {
            s.error_ratio = s.mean_error / *s.baseline_mean_error;
            s.error_reduction = 1.0 - *s.error_ratio;
        }
    }
    return out;
}

}  // namespace ropetrack::eval
