#include "raster_internal.hpp"
#include "ropetrack/parallel.hpp"

#include <cmath>
#include <stdexcept>

namespace ropetrack::splat {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

struct PixelFilter {
    const Mask* mask = nullptr;
    double fraction = 1.0;
    std::uint64_t seed = 0;

    bool keep(std::size_t p) const {
        if (mask && !mask->data[p]) return false;
        if (fraction >= 1.0) return true;
        const double r = static_cast<double>(splitmix64(seed ^ splitmix64(p)) >> 11) * 0x1.0p-53;
        return r < fraction;
    }
};

struct Contribution {
    std::size_t entry;  // offset into TileBins::ids
    double alpha;
    double transmittance;  // before this Gaussian
    double dalpha_dq;
    double q;
};

// Per list entry: dL/d(mean2d) and dL/d(conic).
struct ScreenGradient {
    Vec2 mean = Vec2::Zero();
    Mat2 conic = Mat2::Zero();
};

double camera_backward(const SplatSet& splats, const Frame& observed, const CameraModel& camera,
                       const PixelFilter& filter, std::vector<Vec3>& mean_gradient) {
    if (observed.width != camera.width || observed.height != camera.height)
        throw std::invalid_argument("loss_gradient_nodes: frame " +
                                    std::to_string(observed.camera_index) +
                                    " does not match its camera");
    const auto projected = project_all(splats, camera);
    const auto order = depth_order(splats, projected);
    const auto bins = detail::bin_tiles(order, projected, camera);

    // Forward: rendered image equals background outside every tile list.
    Frame rendered(camera.width, camera.height, camera.background);
    parallel_for(bins.tile_count(), [&](std::size_t tile) {
        const auto list = bins.list(tile);
        if (list.empty()) return;
        const int tx = static_cast<int>(tile % bins.tiles_x);
        const int ty = static_cast<int>(tile / bins.tiles_x);
        const int x_end = std::min(camera.width, (tx + 1) * kTileSize);
        const int y_end = std::min(camera.height, (ty + 1) * kTileSize);
        for (int y = ty * kTileSize; y < y_end; ++y)
            for (int x = tx * kTileSize; x < x_end; ++x)
                rendered.set(x, y,
                             detail::composite_pixel(list, projected, splats,
                                                     Vec2(x + 0.5, y + 0.5), camera.background)
                                 .color);
    });

    double sum_sq = 0.0;
    for (std::size_t p = 0; p < rendered.pixel_count(); ++p) {
        if (!filter.keep(p)) continue;
        for (int c = 0; c < 3; ++c) {
            const double r = rendered.pixels[3 * p + c] - observed.pixels[3 * p + c];
            sum_sq += r * r;
        }
    }
    const double loss = std::sqrt(sum_sq);
    if (loss == 0.0) return 0.0;
    const double inv_loss = 1.0 / loss;

    std::vector<ScreenGradient> entry_grad(bins.ids.size());
    parallel_for(bins.tile_count(), [&](std::size_t tile) {
        const auto list = bins.list(tile);
        if (list.empty()) return;
        const std::size_t base = bins.offsets[tile];
        const int tx = static_cast<int>(tile % bins.tiles_x);
        const int ty = static_cast<int>(tile / bins.tiles_x);
        const int x_end = std::min(camera.width, (tx + 1) * kTileSize);
        const int y_end = std::min(camera.height, (ty + 1) * kTileSize);
        std::vector<Contribution> stack;
        stack.reserve(list.size());
        for (int y = ty * kTileSize; y < y_end; ++y) {
            for (int x = tx * kTileSize; x < x_end; ++x) {
                const std::size_t p = static_cast<std::size_t>(y) * camera.width + x;
                if (!filter.keep(p)) continue;
                const Vec3 dl_dc =
                    inv_loss * Vec3(rendered.pixels[3 * p] - observed.pixels[3 * p],
                                    rendered.pixels[3 * p + 1] - observed.pixels[3 * p + 1],
                                    rendered.pixels[3 * p + 2] - observed.pixels[3 * p + 2]);
                if (dl_dc.isZero(0.0)) continue;
                const Vec2 u(x + 0.5, y + 0.5);

                // Replay the forward composite, recording each contribution.
                stack.clear();
                double transmittance = 1.0;
                for (std::size_t k = 0; k < list.size(); ++k) {
                    const std::size_t j = list[k];
                    const auto& g = *projected[j];
                    const double q = mahalanobis_sq(g, u);
                    if (!(q < kCutoffSq)) continue;
                    const double gauss = std::exp(-0.5 * q);
                    const double taper = footprint_taper(q);
                    const double raw = splats.opacities[j] * gauss * taper;
                    const double alpha = std::min(raw, kMaxAlpha);
                    if (alpha <= 0.0) continue;
                    const double dalpha_dq =
                        raw > kMaxAlpha ? 0.0
                                        : splats.opacities[j] * gauss *
                                              (-0.5 * taper + footprint_taper_derivative(q));
                    stack.push_back({base + k, alpha, transmittance, dalpha_dq, q});
                    transmittance *= 1.0 - alpha;
                    if (transmittance < kMinTransmittance) break;
                }

                Vec3 behind = transmittance * camera.background;
                for (auto it = stack.rbegin(); it != stack.rend(); ++it) {
                    const std::size_t j = bins.ids[it->entry];
                    const Vec3& color = splats.colors[j];
                    const Vec3 dc_dalpha =
                        it->transmittance * color - behind / (1.0 - it->alpha);
                    behind += (it->alpha * it->transmittance) * color;
                    const double dl_dq = dl_dc.dot(dc_dalpha) * it->dalpha_dq;
                    if (dl_dq == 0.0) continue;
                    const auto& g = *projected[j];
                    const Vec2 d = u - g.mean;
                    ScreenGradient& acc = entry_grad[it->entry];
                    acc.mean -= dl_dq * ((g.conic + g.conic.transpose()) * d);
                    acc.conic += dl_dq * (d * d.transpose());
                }
            }
        }
    });

    // Deterministic reduction in tile order.
    std::vector<ScreenGradient> screen(splats.size());
    for (std::size_t e = 0; e < bins.ids.size(); ++e) {
        screen[bins.ids[e]].mean += entry_grad[e].mean;
        screen[bins.ids[e]].conic += entry_grad[e].conic;
    }

    const Eigen::RowVector3d depth_row = camera.projection.block<1, 3>(2, 0);
    const double sigma_sq = splats.sigma_world * splats.sigma_world;
    for (std::size_t j : order) {
        const auto& g = *projected[j];
        Vec3 grad = g.jacobian.transpose() * screen[j].mean;
        if (!g.floored) {
            const Mat2 dl_dcov = -g.conic.transpose() * screen[j].conic * g.conic.transpose();
            const Eigen::Matrix<double, 2, 3> dl_dj =
                sigma_sq * (dl_dcov + dl_dcov.transpose()) * g.jacobian;
            // dJ_{rm}/dmu_k = -(J_{rk} B_m + J_{rm} B_k) / w
            for (int k = 0; k < 3; ++k) {
                double acc = 0.0;
                for (int r = 0; r < 2; ++r)
                    acc += g.jacobian(r, k) * dl_dj.row(r).dot(depth_row) +
                           depth_row(k) * dl_dj.row(r).dot(g.jacobian.row(r));
                grad(k) -= acc / g.w;
            }
        }
        mean_gradient[j] += grad;
    }
    return loss;
}

}  // namespace

LossGradient loss_gradient_nodes(std::span<const Vec3> nodes, const SplatSet& splats,
                                 std::span<const Frame> frames,
                                 std::span<const CameraModel> cameras,
                                 const LossOptions& options) {
    if (frames.size() != cameras.size())
        throw std::invalid_argument("loss_gradient_nodes: " + std::to_string(frames.size()) +
                                    " frames for " + std::to_string(cameras.size()) + " cameras");
    const SplatSet attached = reattach(splats, nodes);

    LossGradient out;
    out.gradient.assign(nodes.size(), Vec3::Zero());
    out.mean_gradient.assign(attached.size(), Vec3::Zero());
    for (std::size_t k = 0; k < cameras.size(); ++k) {
        PixelFilter filter;
        filter.mask = k < options.masks.size() ? &options.masks[k] : nullptr;
        filter.fraction = options.pixel_fraction;
        filter.seed = splitmix64(options.seed ^ (0x51ed2701ULL * (k + 1)));
        out.loss += camera_backward(attached, frames[k], cameras[k], filter, out.mean_gradient);
    }
    for (std::size_t j = 0; j < attached.size(); ++j) {
        const auto [i, s] = attached.attachment[j];
        out.gradient[i] += (1.0 - s) * out.mean_gradient[j];
        out.gradient[i + 1] += s * out.mean_gradient[j];
    }
    return out;
}

}  // namespace ropetrack::splat
