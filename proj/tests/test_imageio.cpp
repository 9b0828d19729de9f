#include <doctest.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>

#include "mvhdr/imageio.hpp"

using namespace mvhdr;
namespace fs = std::filesystem;

TEST_CASE("decode 8-bit ppm") {
  const std::string bytes = std::string("P6\n2 1\n255\n") + std::string("\xff\x00\x00\x00\x00\xff", 6);
  const LdrImage img = decode_ldr(bytes);
  CHECK(img.width() == 2);
  CHECK(img.bit_depth() == 8);
  CHECK(img.rgb(0, 0) == Rgb16{255, 0, 0});
  CHECK(img.rgb(1, 0) == Rgb16{0, 0, 255});
  CHECK(encode_ldr(img) == bytes);
}

TEST_CASE("10-bit ppm round trip") {
  LdrImage img(3, 2, 10);
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 3; ++x) img.set_rgb(x, y, {static_cast<uint16_t>(1023 - x), 512, static_cast<uint16_t>(y)});
  const LdrImage back = decode_ldr(encode_ldr(img));
  CHECK(back.bit_depth() == 10);
  CHECK(back.samples().size() == img.samples().size());
  CHECK(std::equal(back.samples().begin(), back.samples().end(), img.samples().begin()));
}

TEST_CASE("ppm rejects bad input") {
  CHECK_THROWS_AS(decode_ldr("P5\n2 1\n255\nab"), Error);
  CHECK_THROWS_AS(decode_ldr("P6\n2 1\n255\nabc"), Error);
  CHECK_THROWS_AS(decode_ldr("P6\n1 1\n4095\nabcdef"), Error);
  CHECK_THROWS_AS(decode_ldr("P6\n1"), Error);
}

TEST_CASE("rgbe pixel encoding") {
  CHECK(encode_rgbe({1.0, 1.0, 1.0}) == std::array<uint8_t, 4>{128, 128, 128, 129});
  CHECK(encode_rgbe({0.5, 0.25, 0.125}) == std::array<uint8_t, 4>{128, 64, 32, 128});
  CHECK(encode_rgbe({0.0, 0.0, 0.0}) == std::array<uint8_t, 4>{0, 0, 0, 0});
  CHECK(decode_rgbe({0, 0, 0, 0}) == Rgb{0.0, 0.0, 0.0});
}

TEST_CASE("rgbe round trip bound") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> expo(-5.0, 5.0), unit(0.0, 1.0);
  HdrImage img(50, 20);
  for (int y = 0; y < 20; ++y)
    for (int x = 0; x < 50; ++x)
      img.set_rgb(x, y, {std::pow(10.0, expo(rng)), std::pow(10.0, expo(rng)), unit(rng)});
  const HdrImage back = decode_hdr_rgbe(encode_hdr_rgbe(img));
  REQUIRE(back.width() == 50);
  for (int y = 0; y < 20; ++y)
    for (int x = 0; x < 50; ++x) {
      const Rgb a = img.rgb(x, y), b = back.rgb(x, y);
      const double peak = std::max({a[0], a[1], a[2]});
      for (int c = 0; c < 3; ++c) CHECK(std::abs(a[c] - b[c]) <= peak / 256.0);
    }
}

TEST_CASE("rgbe reader accepts run-length scanlines") {
  // One 8-pixel scanline of (1,1,1): each of the four components is a
  // run of 8 identical bytes.
  std::string bytes = "#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n-Y 1 +X 8\n";
  bytes += std::string("\x02\x02\x00\x08", 4);
  for (unsigned char v : {128, 128, 128, 129}) {
    bytes.push_back(static_cast<char>(128 + 8));
    bytes.push_back(static_cast<char>(v));
  }
  const HdrImage img = decode_hdr_rgbe(bytes);
  REQUIRE(img.width() == 8);
  // Mantissas decode to the middle of their quantization step.
  const double v = 128.5 / 128.0;
  for (int x = 0; x < 8; ++x) CHECK(img.rgb(x, 0) == Rgb{v, v, v});
  CHECK_THROWS_AS(decode_hdr_rgbe("#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n-Y 1 +X 8\nab"), Error);
}

TEST_CASE("pfm is bit exact and little endian") {
  HdrImage img(4, 3);
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 4; ++x) img.set_rgb(x, y, {0.1f * x, 1e-20f * y, 3e30f});
  const std::string bytes = encode_pfm(img);
  CHECK(bytes.rfind("PF\n4 3\n-1", 0) == 0);
  const HdrImage back = decode_pfm(bytes);
  CHECK(back == img);
  CHECK(encode_pfm(back) == bytes);

  // Bottom row comes first in the payload.
  const std::size_t header = bytes.size() - 4 * 3 * 3 * sizeof(float);
  float first;
  std::memcpy(&first, bytes.data() + header + 4, sizeof first);
  CHECK(first == 1e-20f * 2);

  CHECK_THROWS_AS(decode_pfm("PF\n4 3\n-1\nxx"), Error);
}

TEST_CASE("disparity pfm keeps unknown as -1") {
  DisparityMap m(3, 2);
  m.set(0, 0, 4);
  m.set(2, 1, 0);
  const std::string bytes = encode_disparity_pfm(m);
  CHECK(bytes.rfind("Pf\n", 0) == 0);
  const DisparityMap back = decode_disparity_pfm(bytes);
  CHECK(back.at(0, 0) == 4);
  CHECK(back.at(2, 1) == 0);
  CHECK_FALSE(back.known(1, 0));
}

TEST_CASE("tone map preview") {
  HdrImage flat(3, 3);
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 3; ++x) flat.set_rgb(x, y, {7.0, 7.0, 7.0});
  const Rgb8Image a = tone_map_preview(flat);
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 3; ++x) {
      const auto p = a.at(x, y);
      CHECK(p[0] == p[1]);
      CHECK(p[1] == p[2]);
      CHECK(p == a.at(0, 0));
    }
  // The brightest pixel maps to full scale.
  CHECK(a.at(0, 0)[0] == 255);

  const Rgb8Image black = tone_map_preview(HdrImage(2, 2));
  for (auto v : black.data) CHECK(v == 0);
}

TEST_CASE("png encoder writes a valid signature and size") {
  Rgb8Image img(5, 4);
  const std::string png = encode_png(img);
  CHECK(png.rfind("\x89PNG\r\n\x1a\n", 0) == 0);
  CHECK(png.find("IHDR") == 12);
  CHECK(png.substr(png.size() - 8, 4) == "IEND");
}

TEST_CASE("file helpers") {
  const fs::path dir = fs::temp_directory_path() / "mvhdr_io_test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  HdrImage img(2, 2);
  img.set_rgb(1, 1, {2.0, 4.0, 8.0});
  write_pfm(img, dir / "a.pfm");
  CHECK(read_pfm(dir / "a.pfm") == img);
  write_hdr_rgbe(img, dir / "a.hdr");
  const HdrImage back = read_hdr_rgbe(dir / "a.hdr");
  CHECK(back.rgb(1, 1)[2] == doctest::Approx(8.0).epsilon(1.0 / 256));
  CHECK(back.rgb(0, 0) == Rgb{0.0, 0.0, 0.0});
  CHECK_THROWS_AS(read_file(dir / "missing"), Error);
  fs::remove_all(dir);
}
