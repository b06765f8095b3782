#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "topoforge/problem.hpp"

namespace topoforge {

/// 8-bit single-channel raster, row-major, row 0 at the top.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;
};

using Bytes = std::vector<std::uint8_t>;

Bytes encode_png(const RasterSketch& image);
Bytes encode_png(const GrayImage& image);

/// Any PNG color type, converted to RGBA.
RasterSketch decode_png_rgba(std::span<const std::uint8_t> png);
/// Any PNG color type, converted to 8-bit luminance.
GrayImage decode_png_gray(std::span<const std::uint8_t> png);
/// True when the stored color type carries chroma (RGB or RGBA or palette).
bool png_has_color(std::span<const std::uint8_t> png);

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> data);
void write_file(const std::filesystem::path& path, std::string_view text);

std::string base64_encode(std::span<const std::uint8_t> data);
Bytes base64_decode(std::string_view text);

}  // namespace topoforge
