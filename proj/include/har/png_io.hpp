#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "har/matrix.hpp"

namespace har::png {

// Minimal PNG writers (stored-deflate zlib stream, no compression). Enough
// for small heatmap and preview images; output is deterministic.

// 8-bit RGB; pixels are row-major, 3 bytes per pixel.
void write_rgb8(const std::filesystem::path& path, std::size_t width, std::size_t height,
                const std::vector<std::uint8_t>& pixels);

// 8-bit grayscale.
void write_gray8(const std::filesystem::path& path, std::size_t width, std::size_t height,
                 const std::vector<std::uint8_t>& pixels);

// Min-max scales a matrix to 0..255 gray (constant matrices map to 0).
void write_gray8_scaled(const std::filesystem::path& path, const Matrix& m);

// Diverging blue -> white -> red ramp over t in [0,1].
void blue_red_color(double t, std::uint8_t& r, std::uint8_t& g, std::uint8_t& b);

// Heatmap with the blue-red ramp; values are min-max scaled per image and
// each cell is rendered as a cell_px x cell_px block.
void write_heatmap(const std::filesystem::path& path, const Matrix& m, std::size_t cell_px = 16);

} // namespace har::png
