#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace ropetrack::io::detail {

struct RasterImage {
    int width = 0;
    int height = 0;
    int channels = 3;  // 1 (gray) or 3 (RGB)
    std::vector<std::uint8_t> bytes;
};

void write_png(const std::filesystem::path& path, const RasterImage& image);
RasterImage read_png(const std::filesystem::path& path, int channels);

}  // namespace ropetrack::io::detail
