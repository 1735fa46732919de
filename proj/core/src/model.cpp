#include "ropetrack/model.hpp"

#include <cmath>
#include <sstream>

namespace ropetrack {

namespace {

std::string join_issues(const std::vector<std::string>& issues) {
    std::ostringstream os;
    os << "validation failed";
    for (const auto& s : issues) os << "\n  - " << s;
    return os.str();
}

bool finite(const Vec3& v) { return v.allFinite(); }

}  // namespace

ValidationError::ValidationError(std::vector<std::string> issues)
    : std::runtime_error(join_issues(issues)), issues_(std::move(issues)) {}

Vec3 GripperLog::action(std::size_t t) const {
    if (t == 0 || t >= samples.size()) return Vec3::Zero();
    return samples[t].position - samples[t - 1].position;
}

double CameraModel::depth(const Vec3& p) const {
    const double scale = projection.block<1, 3>(2, 0).norm();
    return project_homogeneous(p).z() / scale;
}

Frame::Frame(int w, int h, const Vec3& fill, int camera, double t)
    : width(w), height(h), pixels(3 * static_cast<std::size_t>(w) * h), camera_index(camera),
      timestamp(t) {
    for (std::size_t i = 0; i < pixel_count(); ++i) {
        pixels[3 * i] = fill.x();
        pixels[3 * i + 1] = fill.y();
        pixels[3 * i + 2] = fill.z();
    }
}

std::size_t Mask::count() const {
    std::size_t n = 0;
    for (auto v : data) n += v != 0;
    return n;
}

std::vector<std::string> check(const NodeChain& chain) {
    std::vector<std::string> issues;
    if (chain.size() < 2)
        issues.push_back("NodeChain.positions: need at least 2 nodes, got " +
                         std::to_string(chain.size()));
    for (std::size_t i = 0; i < chain.size(); ++i) {
        if (!finite(chain.positions[i]))
            issues.push_back("NodeChain.positions[" + std::to_string(i) +
                             "]: non-finite coordinate");
    }
    if (!(chain.segment_rest_length > 0.0) || !std::isfinite(chain.segment_rest_length))
        issues.push_back("NodeChain.segment_rest_length: must be positive");
    if (!(chain.node_mass > 0.0) || !std::isfinite(chain.node_mass))
        issues.push_back("NodeChain.node_mass: must be positive");
    return issues;
}

std::vector<std::string> check(const CameraModel& camera, int index) {
    std::vector<std::string> issues;
    const std::string tag = "CameraModel[" + std::to_string(index) + "]";
    if (camera.width < 1) issues.push_back(tag + ".width: must be >= 1");
    if (camera.height < 1) issues.push_back(tag + ".height: must be >= 1");
    if (!camera.projection.allFinite())
        issues.push_back(tag + ".projection: non-finite entry");
    else if (camera.projection.block<1, 3>(2, 0).norm() <= 0.0)
        issues.push_back(tag + ".projection: degenerate depth row");
    if (!finite(camera.background) || (camera.background.array() < 0.0).any() ||
        (camera.background.array() > 1.0).any())
        issues.push_back(tag + ".background: channels must lie in [0,1]");
    return issues;
}

std::vector<std::string> check(const PhysicsParams& params) {
    std::vector<std::string> issues;
    if (!(params.dt > 0.0)) issues.push_back("PhysicsParams.dt: must be positive");
    if (!(params.friction_coefficient >= 0.0))
        issues.push_back("PhysicsParams.friction_coefficient: must be non-negative");
    if (params.constraint_iterations < 1)
        issues.push_back("PhysicsParams.constraint_iterations: must be >= 1");
    if (!(params.damping >= 0.0 && params.damping <= 1.0))
        issues.push_back("PhysicsParams.damping: must lie in [0,1]");
    if (!(params.smoothness >= 0.0 && params.smoothness <= 1.0))
        issues.push_back("PhysicsParams.smoothness: must lie in [0,1]");
    if (!std::isfinite(params.gravity)) issues.push_back("PhysicsParams.gravity: non-finite");
    return issues;
}

std::vector<std::string> check(const SplatConfig& config) {
    std::vector<std::string> issues;
    if (config.gaussians_per_segment < 1)
        issues.push_back("SplatConfig.gaussians_per_segment: must be >= 1");
    if (!(config.rope_diameter > 0.0))
        issues.push_back("SplatConfig.rope_diameter: must be positive");
    if (!(config.opacity > 0.0 && config.opacity <= 1.0))
        issues.push_back("SplatConfig.opacity: must lie in (0,1]");
    for (std::size_t j = 0; j < config.colors.size(); ++j) {
        const auto& c = config.colors[j];
        if (!finite(c) || (c.array() < 0.0).any() || (c.array() > 1.0).any())
            issues.push_back("SplatConfig.colors[" + std::to_string(j) +
                             "]: channels must lie in [0,1]");
    }
    return issues;
}

std::vector<std::string> check(const GripperLog& log) {
    std::vector<std::string> issues;
    for (std::size_t i = 0; i < log.size(); ++i) {
        if (!finite(log.samples[i].position) || !std::isfinite(log.samples[i].time))
            issues.push_back("GripperLog.samples[" + std::to_string(i) + "]: non-finite value");
        if (i > 0 && !(log.samples[i].time > log.samples[i - 1].time))
            issues.push_back("GripperLog.samples[" + std::to_string(i) +
                             "]: timestamps must be strictly increasing");
    }
    return issues;
}

std::vector<std::string> check(const Frame& frame, const CameraModel& camera) {
    std::vector<std::string> issues;
    const std::string tag = "Frame[camera " + std::to_string(frame.camera_index) + "]";
    if (frame.width != camera.width || frame.height != camera.height)
        issues.push_back(tag + ": size " + std::to_string(frame.width) + "x" +
                         std::to_string(frame.height) + " does not match camera " +
                         std::to_string(camera.width) + "x" + std::to_string(camera.height));
    if (frame.pixels.size() != 3 * frame.pixel_count())
        issues.push_back(tag + ": pixel buffer has wrong length");
    for (double v : frame.pixels) {
        if (!(v >= 0.0 && v <= 1.0)) {
            issues.push_back(tag + ": channel value outside [0,1]");
            break;
        }
    }
    return issues;
}

SceneDescriptor validate_scene(const NodeChain& chain, std::span<const CameraModel> cameras,
                               const PhysicsParams& params) {
    std::vector<std::string> issues = check(chain);
    if (cameras.empty()) issues.push_back("cameras: at least one camera is required");
    for (std::size_t k = 0; k < cameras.size(); ++k) {
        auto c = check(cameras[k], static_cast<int>(k));
        issues.insert(issues.end(), c.begin(), c.end());
    }
    auto p = check(params);
    issues.insert(issues.end(), p.begin(), p.end());
    if (!issues.empty()) throw ValidationError(std::move(issues));
    return {chain, {cameras.begin(), cameras.end()}, params};
}

std::vector<double> segment_lengths(std::span<const Vec3> positions) {
    std::vector<double> out;
    if (positions.size() < 2) return out;
    out.reserve(positions.size() - 1);
    for (std::size_t i = 0; i + 1 < positions.size(); ++i)
        out.push_back((positions[i + 1] - positions[i]).norm());
    return out;
}

}  // namespace ropetrack
