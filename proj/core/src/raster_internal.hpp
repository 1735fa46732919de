#pragma once

#include "ropetrack/splat.hpp"

#include <algorithm>
#include <array>
#include <numeric>
#include <span>
#include <vector>

namespace ropetrack::splat::detail {

/// Gaussian ids per 16x16 tile in CSR layout, each list in depth order.
struct TileBins {
    int tiles_x = 0;
    int tiles_y = 0;
    std::vector<std::size_t> offsets;  // tiles_x * tiles_y + 1
    std::vector<std::size_t> ids;

    std::size_t tile_count() const { return static_cast<std::size_t>(tiles_x) * tiles_y; }
    std::span<const std::size_t> list(std::size_t tile) const {
        return {ids.data() + offsets[tile], offsets[tile + 1] - offsets[tile]};
    }
};

inline TileBins bin_tiles(std::span<const std::size_t> order,
                          std::span<const std::optional<Projected2D>> projected,
                          const CameraModel& camera) {
    TileBins bins;
    bins.tiles_x = (camera.width + kTileSize - 1) / kTileSize;
    bins.tiles_y = (camera.height + kTileSize - 1) / kTileSize;
    std::vector<std::size_t> counts(bins.tile_count() + 1, 0);
    auto tile_range = [](const PixelRect& r) {
        return std::array<int, 4>{r.x0 / kTileSize, r.y0 / kTileSize, r.x1 / kTileSize,
                                  r.y1 / kTileSize};
    };
    for (std::size_t j : order) {
        const auto [tx0, ty0, tx1, ty1] = tile_range(projected[j]->footprint);
        for (int ty = ty0; ty <= ty1; ++ty)
            for (int tx = tx0; tx <= tx1; ++tx)
                ++counts[static_cast<std::size_t>(ty) * bins.tiles_x + tx + 1];
    }
    bins.offsets.resize(counts.size());
    std::partial_sum(counts.begin(), counts.end(), bins.offsets.begin());
    bins.ids.resize(bins.offsets.back());
    std::vector<std::size_t> cursor(bins.offsets.begin(), bins.offsets.end() - 1);
    // Appending in global depth order keeps every tile list sorted.
    for (std::size_t j : order) {
        const auto [tx0, ty0, tx1, ty1] = tile_range(projected[j]->footprint);
        for (int ty = ty0; ty <= ty1; ++ty)
            for (int tx = tx0; tx <= tx1; ++tx)
                bins.ids[cursor[static_cast<std::size_t>(ty) * bins.tiles_x + tx]++] = j;
    }
    return bins;
}

struct PixelResult {
    Vec3 color = Vec3::Zero();
    double transmittance = 1.0;
    double weight = 0.0;
    std::size_t processed = 0;  // list entries visited before termination
};

inline PixelResult composite_pixel(std::span<const std::size_t> list,
                                   std::span<const std::optional<Projected2D>> projected,
                                   const SplatSet& splats, const Vec2& u,
                                   const Vec3& background) {
    PixelResult r;
    for (std::size_t k = 0; k < list.size(); ++k) {
        const std::size_t j = list[k];
        r.processed = k + 1;
        const double alpha = alpha_at(*projected[j], splats.opacities[j], u);
        if (alpha <= 0.0) continue;
        const double w = alpha * r.transmittance;
        r.color += w * splats.colors[j];
        r.weight += w;
        r.transmittance *= 1.0 - alpha;
        if (r.transmittance < kMinTransmittance) break;
    }
    r.color += r.transmittance * background;
    r.color = r.color.cwiseMax(0.0).cwiseMin(1.0);
    return r;
}

}  // namespace ropetrack::splat::detail
