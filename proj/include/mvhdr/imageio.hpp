#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mvhdr/core.hpp"

namespace mvhdr {

// Binary PPM (P6). maxval 255 decodes to 8-bit samples, maxval 1023 to
// 10-bit samples stored as big-endian 16-bit words.
LdrImage decode_ldr(std::string_view bytes);
std::string encode_ldr(const LdrImage& img);
LdrImage read_ldr(const std::filesystem::path& path);
void write_ldr(const LdrImage& img, const std::filesystem::path& path);

// Radiance RGBE. Writing emits flat scanlines; reading accepts flat and
// new-style run-length encoded scanlines.
std::array<std::uint8_t, 4> encode_rgbe(const Rgb& rgb);
Rgb decode_rgbe(const std::array<std::uint8_t, 4>& rgbe);
HdrImage decode_hdr_rgbe(std::string_view bytes);
std::string encode_hdr_rgbe(const HdrImage& img);
HdrImage read_hdr_rgbe(const std::filesystem::path& path);
void write_hdr_rgbe(const HdrImage& img, const std::filesystem::path& path);

// Portable float map, written little-endian (negative scale) and bottom row
// first. Values are narrowed to IEEE single precision.
HdrImage decode_pfm(std::string_view bytes);
std::string encode_pfm(const HdrImage& img);
HdrImage read_pfm(const std::filesystem::path& path);
void write_pfm(const HdrImage& img, const std::filesystem::path& path);

// Single-channel PFM ("Pf") disparity maps; unknown disparities are -1.
inline constexpr float kUnknownDisparityValue = -1.0f;
DisparityMap decode_disparity_pfm(std::string_view bytes);
std::string encode_disparity_pfm(const DisparityMap& map);
DisparityMap read_disparity_pfm(const std::filesystem::path& path);
void write_disparity_pfm(const DisparityMap& map, const std::filesystem::path& path);

struct Rgb8Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  Rgb8Image() = default;
  Rgb8Image(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, 0) {}
  std::array<std::uint8_t, 3> at(int x, int y) const {
    const std::size_t o = 3 * (static_cast<std::size_t>(y) * width + x);
    return {data[o], data[o + 1], data[o + 2]};
  }
  void set(int x, int y, std::array<std::uint8_t, 3> v) {
    const std::size_t o = 3 * (static_cast<std::size_t>(y) * width + x);
    data[o] = v[0];
    data[o + 1] = v[1];
    data[o + 2] = v[2];
  }
};

std::string encode_png(const Rgb8Image& img);
void write_png(const Rgb8Image& img, const std::filesystem::path& path);

// Global logarithmic tone map on luminance, L' = ln(1 + L) / ln(1 + Lmax),
// colors scaled by L'/L and quantized to 8 bits.
Rgb8Image tone_map_preview(const HdrImage& img);
void write_png_preview(const HdrImage& img, const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace mvhdr
