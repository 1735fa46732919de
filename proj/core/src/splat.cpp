#include "ropetrack/splat.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <tuple>

namespace ropetrack::splat {

SplatSet build_splats(const NodeChain& chain, const SplatConfig& config) {
    if (auto issues = check(chain); !issues.empty()) throw ValidationError(std::move(issues));
    if (auto issues = check(config); !issues.empty()) throw ValidationError(std::move(issues));

    const std::size_t d = static_cast<std::size_t>(config.gaussians_per_segment);
    const std::size_t count = (chain.size() - 1) * d;
    if (!config.colors.empty() && config.colors.size() != 1 && config.colors.size() != count)
        throw ValidationError({"SplatConfig.colors: expected 0, 1 or " + std::to_string(count) +
                               " colors, got " + std::to_string(config.colors.size())});

    SplatSet out;
    out.sigma_world = 0.5 * config.rope_diameter;
    out.attachment.reserve(count);
    for (std::size_t i = 0; i + 1 < chain.size(); ++i)
        for (std::size_t q = 0; q < d; ++q)
            out.attachment.push_back({i, (static_cast<double>(q) + 0.5) / static_cast<double>(d)});

    out.opacities.assign(count, config.opacity);
    if (config.colors.empty())
        out.colors.assign(count, Vec3::Constant(0.5));
    else if (config.colors.size() == 1)
        out.colors.assign(count, config.colors.front());
    else
        out.colors = config.colors;
    out.means.resize(count);
    return reattach(std::move(out), chain.positions);
}

SplatSet reattach(SplatSet splats, std::span<const Vec3> nodes) {
    splats.means.resize(splats.attachment.size());
    for (std::size_t j = 0; j < splats.attachment.size(); ++j) {
        const auto [i, s] = splats.attachment[j];
        if (i + 1 >= nodes.size())
            throw std::out_of_range("reattach: attachment segment " + std::to_string(i) +
                                    " out of range for " + std::to_string(nodes.size()) +
                                    " nodes");
        splats.means[j] = (1.0 - s) * nodes[i] + s * nodes[i + 1];
    }
    return splats;
}

std::optional<Projected2D> project_gaussian(const Vec3& mean, double sigma_world,
                                            const CameraModel& camera) {
    const Vec3 p = camera.project_homogeneous(mean);
    const double depth = camera.depth(mean);
    if (!(depth > 1e-6)) return std::nullopt;

    Projected2D g;
    g.w = p.z();
    g.depth = depth;
    g.mean = Vec2(p.x() / p.z(), p.y() / p.z());
    const auto rows = camera.projection.leftCols<3>();
    g.jacobian.row(0) = (rows.row(0) - g.mean.x() * rows.row(2)) / p.z();
    g.jacobian.row(1) = (rows.row(1) - g.mean.y() * rows.row(2)) / p.z();
    g.cov = sigma_world * sigma_world * (g.jacobian * g.jacobian.transpose());
    g.cov(1, 0) = g.cov(0, 1);

    Eigen::SelfAdjointEigenSolver<Mat2> eig(g.cov);
    if (eig.eigenvalues().minCoeff() < kCovarianceFloor) {
        const Vec2 lambda = eig.eigenvalues().cwiseMax(kCovarianceFloor);
        g.cov = eig.eigenvectors() * lambda.asDiagonal() * eig.eigenvectors().transpose();
        g.floored = true;
    }
    g.conic = g.cov.inverse();

    // Axis-aligned box of the 3-sigma ellipse, over pixel centers at i + 0.5.
    const double pad = 1e-6;
    const double rx = 3.0 * std::sqrt(g.cov(0, 0)) + pad;
    const double ry = 3.0 * std::sqrt(g.cov(1, 1)) + pad;
    const double fx0 = std::ceil(g.mean.x() - rx - 0.5);
    const double fx1 = std::floor(g.mean.x() + rx - 0.5);
    const double fy0 = std::ceil(g.mean.y() - ry - 0.5);
    const double fy1 = std::floor(g.mean.y() + ry - 0.5);
    if (!std::isfinite(fx0) || !std::isfinite(fx1) || !std::isfinite(fy0) || !std::isfinite(fy1))
        return std::nullopt;
    if (fx1 < 0.0 || fy1 < 0.0 || fx0 > camera.width - 1 || fy0 > camera.height - 1)
        return std::nullopt;
    g.footprint.x0 = static_cast<int>(std::max(0.0, fx0));
    g.footprint.y0 = static_cast<int>(std::max(0.0, fy0));
    g.footprint.x1 = static_cast<int>(std::min<double>(camera.width - 1, fx1));
    g.footprint.y1 = static_cast<int>(std::min<double>(camera.height - 1, fy1));
    if (g.footprint.empty()) return std::nullopt;
    return g;
}

double mahalanobis_sq(const Projected2D& g, const Vec2& u) {
    const Vec2 d = u - g.mean;
    return g.conic(0, 0) * d.x() * d.x() + (g.conic(0, 1) + g.conic(1, 0)) * d.x() * d.y() +
           g.conic(1, 1) * d.y() * d.y();
}

double footprint_taper(double q) {
    if (q <= kTaperStartSq) return 1.0;
    if (q >= kCutoffSq) return 0.0;
    const double s = (q - kTaperStartSq) / (kCutoffSq - kTaperStartSq);
    return 1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
}

double footprint_taper_derivative(double q) {
    if (q <= kTaperStartSq || q >= kCutoffSq) return 0.0;
    const double span = kCutoffSq - kTaperStartSq;
    const double s = (q - kTaperStartSq) / span;
    return -30.0 * s * s * (1.0 - s) * (1.0 - s) / span;
}

double alpha_at(const Projected2D& g, double opacity, const Vec2& u) {
    const double q = mahalanobis_sq(g, u);
    if (!(q < kCutoffSq)) return 0.0;
    return std::min(opacity * std::exp(-0.5 * q) * footprint_taper(q), kMaxAlpha);
}

std::vector<std::optional<Projected2D>> project_all(const SplatSet& splats,
                                                    const CameraModel& camera) {
    std::vector<std::optional<Projected2D>> out(splats.size());
    for (std::size_t j = 0; j < splats.size(); ++j)
        out[j] = project_gaussian(splats.means[j], splats.sigma_world, camera);
    return out;
}

std::vector<std::size_t> depth_order(const SplatSet& splats,
                                     std::span<const std::optional<Projected2D>> projected) {
    std::vector<std::size_t> order;
    order.reserve(projected.size());
    for (std::size_t j = 0; j < projected.size(); ++j)
        if (projected[j]) order.push_back(j);
    auto key = [&](std::size_t j) {
        const auto& g = *projected[j];
        const auto& c = splats.colors[j];
        return std::make_tuple(g.depth, g.mean.x(), g.mean.y(), c.x(), c.y(), c.z(),
                               splats.opacities[j]);
    };
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return key(a) < key(b); });
    return order;
}

double render_loss(const Frame& observed, const Frame& rendered, const Mask* mask) {
    if (observed.width != rendered.width || observed.height != rendered.height)
        throw std::invalid_argument("render_loss: dimension mismatch (" +
                                    std::to_string(observed.width) + "x" +
                                    std::to_string(observed.height) + " vs " +
                                    std::to_string(rendered.width) + "x" +
                                    std::to_string(rendered.height) + ")");
    if (mask && (mask->width != observed.width || mask->height != observed.height))
        throw std::invalid_argument("render_loss: mask dimension mismatch");
    double sum = 0.0;
    const std::size_t n = observed.pixel_count();
    for (std::size_t p = 0; p < n; ++p) {
        if (mask && !mask->data[p]) continue;
        for (int c = 0; c < 3; ++c) {
            const double r = rendered.pixels[3 * p + c] - observed.pixels[3 * p + c];
            sum += r * r;
        }
    }
    return std::sqrt(sum);
}

double multi_view_loss(std::span<const Frame> observed, std::span<const Frame> rendered,
                       const LossOptions& options) {
    if (observed.size() != rendered.size())
        throw std::invalid_argument("multi_view_loss: camera count mismatch");
    double total = 0.0;
    for (std::size_t k = 0; k < observed.size(); ++k) {
        const Mask* mask = k < options.masks.size() ? &options.masks[k] : nullptr;
        total += render_loss(observed[k], rendered[k], mask);
    }
    return total;
}

std::vector<Vec3> fit_colors(std::span<const Frame> frames, std::span<const Mask> masks,
                             std::size_t gaussian_count) {
    if (frames.size() != masks.size())
        throw std::invalid_argument("fit_colors: " + std::to_string(frames.size()) +
                                    " frames but " + std::to_string(masks.size()) + " masks");
    Vec3 sum = Vec3::Zero();
    std::size_t count = 0;
    for (std::size_t k = 0; k < frames.size(); ++k) {
        const Frame& f = frames[k];
        const Mask& m = masks[k];
        if (m.width != f.width || m.height != f.height)
            throw std::invalid_argument("fit_colors: mask " + std::to_string(k) +
                                        " does not match its frame");
        for (std::size_t p = 0; p < f.pixel_count(); ++p) {
            if (!m.data[p]) continue;
            sum += Vec3(f.pixels[3 * p], f.pixels[3 * p + 1], f.pixels[3 * p + 2]);
            ++count;
        }
    }
    if (count == 0) throw std::invalid_argument("fit_colors: masks select no pixels");
    return std::vector<Vec3>(gaussian_count, sum / static_cast<double>(count));
}

Mask dilate(const Mask& mask, int radius) {
    if (radius <= 0) return mask;
    Mask rows(mask.width, mask.height);
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            bool any = false;
            for (int dx = std::max(0, x - radius); dx <= std::min(mask.width - 1, x + radius) && !any;
                 ++dx)
                any = mask.at(dx, y);
            rows.data[static_cast<std::size_t>(y) * mask.width + x] = any;
        }
    }
    Mask out(mask.width, mask.height);
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            bool any = false;
            for (int dy = std::max(0, y - radius);
                 dy <= std::min(mask.height - 1, y + radius) && !any; ++dy)
                any = rows.at(x, dy);
            out.data[static_cast<std::size_t>(y) * mask.width + x] = any;
        }
    }
    return out;
}

}  // namespace ropetrack::splat
