#include "raster_internal.hpp"
#include "ropetrack/parallel.hpp"

namespace ropetrack::splat {

namespace {

RenderDetail make_detail(const CameraModel& camera) {
    RenderDetail d;
    d.image = Frame(camera.width, camera.height, camera.background);
    d.transmittance.assign(d.image.pixel_count(), 1.0);
    d.accumulated_weight.assign(d.image.pixel_count(), 0.0);
    return d;
}

}  // namespace

RenderDetail render_detailed(const SplatSet& splats, const CameraModel& camera) {
    RenderDetail out = make_detail(camera);
    const auto projected = project_all(splats, camera);
    const auto order = depth_order(splats, projected);
    const auto bins = detail::bin_tiles(order, projected, camera);

    parallel_for(bins.tile_count(), [&](std::size_t tile) {
        const auto list = bins.list(tile);
        if (list.empty()) return;
        const int tx = static_cast<int>(tile % bins.tiles_x);
        const int ty = static_cast<int>(tile / bins.tiles_x);
        const int x_end = std::min(camera.width, (tx + 1) * kTileSize);
        const int y_end = std::min(camera.height, (ty + 1) * kTileSize);
        for (int y = ty * kTileSize; y < y_end; ++y) {
            for (int x = tx * kTileSize; x < x_end; ++x) {
                const auto r = detail::composite_pixel(list, projected, splats,
                                                       Vec2(x + 0.5, y + 0.5), camera.background);
                const std::size_t p = static_cast<std::size_t>(y) * camera.width + x;
                out.image.set(x, y, r.color);
                out.transmittance[p] = r.transmittance;
                out.accumulated_weight[p] = r.weight;
            }
        }
    });
    return out;
}

Frame render(const SplatSet& splats, const CameraModel& camera) {
    return render_detailed(splats, camera).image;
}

RenderDetail render_oracle_detailed(const SplatSet& splats, const CameraModel& camera) {
    RenderDetail out = make_detail(camera);
    const auto projected = project_all(splats, camera);
    const auto order = depth_order(splats, projected);
    for (int y = 0; y < camera.height; ++y) {
        for (int x = 0; x < camera.width; ++x) {
            const Vec2 u(x + 0.5, y + 0.5);
            Vec3 color = Vec3::Zero();
            double transmittance = 1.0;
            double weight = 0.0;
            for (std::size_t j : order) {
                const double alpha = alpha_at(*projected[j], splats.opacities[j], u);
                if (alpha <= 0.0) continue;
                color += splats.colors[j] * (alpha * transmittance);
                weight += alpha * transmittance;
                transmittance *= 1.0 - alpha;
                if (transmittance < kMinTransmittance) break;
            }
            color += transmittance * camera.background;
            const std::size_t p = static_cast<std::size_t>(y) * camera.width + x;
            out.image.set(x, y, color.cwiseMax(0.0).cwiseMin(1.0));
            out.transmittance[p] = transmittance;
            out.accumulated_weight[p] = weight;
        }
    }
    return out;
}

Frame render_oracle(const SplatSet& splats, const CameraModel& camera) {
    return render_oracle_detailed(splats, camera).image;
}

}  // namespace ropetrack::splat
