#include "topoforge/image_io.hpp"

#include <png.h>

#include <array>
#include <cstring>
#include <fstream>
#include <iterator>

#include <fmt/format.h>

#include "topoforge/error.hpp"

namespace topoforge {

namespace {

struct PngReader {
  png_image image{};
  explicit PngReader(std::span<const std::uint8_t> png) {
    image.version = PNG_IMAGE_VERSION;
    if (png.empty() || !png_image_begin_read_from_memory(&image, png.data(), png.size())) {
      const std::string msg = image.message[0] ? image.message : "empty input";
      png_image_free(&image);
      throw Error(ErrorCode::Io, fmt::format("cannot decode PNG: {}", msg));
    }
  }
  ~PngReader() { png_image_free(&image); }
  PngReader(const PngReader&) = delete;
  PngReader& operator=(const PngReader&) = delete;

  void finish(void* buffer) {
    if (!png_image_finish_read(&image, nullptr, buffer, 0, nullptr)) {
      throw Error(ErrorCode::Io, fmt::format("cannot decode PNG: {}", image.message));
    }
  }
};

Bytes write_png(const void* buffer, int width, int height, png_uint_32 format) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = format;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, buffer, 0, nullptr)) {
    throw Error(ErrorCode::Io, fmt::format("cannot encode PNG: {}", image.message));
  }
  Bytes out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, buffer, 0, nullptr)) {
    throw Error(ErrorCode::Io, fmt::format("cannot encode PNG: {}", image.message));
  }
  out.resize(size);
  return out;
}

constexpr std::string_view kBase64Alphabet =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

}  // namespace

Bytes encode_png(const RasterSketch& image) {
  static_assert(sizeof(Rgba) == 4);
  if (image.pixels.size() != static_cast<std::size_t>(image.width) * image.height || image.pixels.empty()) {
    throw Error(ErrorCode::DimensionMismatch, "raster size does not match its dimensions");
  }
  return write_png(image.pixels.data(), image.width, image.height, PNG_FORMAT_RGBA);
}

Bytes encode_png(const GrayImage& image) {
  if (image.pixels.size() != static_cast<std::size_t>(image.width) * image.height || image.pixels.empty()) {
    throw Error(ErrorCode::DimensionMismatch, "raster size does not match its dimensions");
  }
  return write_png(image.pixels.data(), image.width, image.height, PNG_FORMAT_GRAY);
}

RasterSketch decode_png_rgba(std::span<const std::uint8_t> png) {
  PngReader reader(png);
  reader.image.format = PNG_FORMAT_RGBA;
  RasterSketch out(static_cast<int>(reader.image.width), static_cast<int>(reader.image.height));
  reader.finish(out.pixels.data());
  return out;
}

GrayImage decode_png_gray(std::span<const std::uint8_t> png) {
  PngReader reader(png);
  reader.image.format = PNG_FORMAT_GRAY;
  GrayImage out{static_cast<int>(reader.image.width), static_cast<int>(reader.image.height), {}};
  out.pixels.resize(static_cast<std::size_t>(out.width) * out.height);
  reader.finish(out.pixels.data());
  return out;
}

bool png_has_color(std::span<const std::uint8_t> png) {
  PngReader reader(png);
  return (reader.image.format & PNG_FORMAT_FLAG_COLOR) != 0;
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, fmt::format("cannot open {}", path.string()));
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, fmt::format("cannot write {}", path.string()));
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw Error(ErrorCode::Io, fmt::format("short write to {}", path.string()));
}

void write_file(const std::filesystem::path& path, std::string_view text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string base64_encode(std::span<const std::uint8_t> data) {
  std::string out;
  out.reserve((data.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < data.size(); i += 3) {
    const std::uint32_t v = (data[i] << 16) | (data[i + 1] << 8) | data[i + 2];
    out += kBase64Alphabet[(v >> 18) & 63];
    out += kBase64Alphabet[(v >> 12) & 63];
    out += kBase64Alphabet[(v >> 6) & 63];
    out += kBase64Alphabet[v & 63];
  }
  if (const std::size_t rest = data.size() - i; rest > 0) {
    std::uint32_t v = data[i] << 16;
    if (rest == 2) v |= data[i + 1] << 8;
    out += kBase64Alphabet[(v >> 18) & 63];
    out += kBase64Alphabet[(v >> 12) & 63];
    out += rest == 2 ? kBase64Alphabet[(v >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

Bytes base64_decode(std::string_view text) {
  std::array<int, 256> lookup;
  lookup.fill(-1);
  for (std::size_t k = 0; k < kBase64Alphabet.size(); ++k) {
    lookup[static_cast<unsigned char>(kBase64Alphabet[k])] = static_cast<int>(k);
  }
  Bytes out;
  out.reserve(text.size() / 4 * 3);
  std::uint32_t acc = 0;
  int bits = 0;
  std::size_t padding = 0;
  for (char ch : text) {
    if (ch == '\n' || ch == '\r' || ch == ' ') continue;
    if (ch == '=') {
      ++padding;
      continue;
    }
    const int v = lookup[static_cast<unsigned char>(ch)];
    if (v < 0 || padding > 0) throw Error(ErrorCode::InvalidArgument, "invalid base64 input");
    acc = (acc << 6) | static_cast<std::uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<std::uint8_t>((acc >> bits) & 0xFF));
    }
  }
  if (padding > 2) throw Error(ErrorCode::InvalidArgument, "invalid base64 padding");
  return out;
}

}  // namespace topoforge
