#include "mvhdr/imageio.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace mvhdr {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("I/O failure writing " + path.string());
}

namespace {

// Cursor over an in-memory file with netpbm-style header tokenization.
class Reader {
 public:
  Reader(std::string_view bytes, const char* format) : bytes_(bytes), format_(format) {}

  [[noreturn]] void fail(const std::string& what) const {
    throw Error(std::string(format_) + ": " + what);
  }

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::string_view token() {
    skip_space_and_comments();
    const std::size_t start = pos_;
    while (pos_ < bytes_.size() && !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) ++pos_;
    if (start == pos_) fail("malformed header");
    return bytes_.substr(start, pos_ - start);
  }

  long integer() {
    const auto t = token();
    long v = 0;
    const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (res.ec != std::errc() || res.ptr != t.data() + t.size())
      fail("malformed header field '" + std::string(t) + "'");
    return v;
  }

  double real() {
    const auto t = token();
    double v = 0.0;
    const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (res.ec != std::errc() || res.ptr != t.data() + t.size())
      fail("malformed header field '" + std::string(t) + "'");
    return v;
  }

  // Exactly one whitespace byte separates the header from the payload.
  void end_header() {
    if (pos_ >= bytes_.size() || !std::isspace(static_cast<unsigned char>(bytes_[pos_])))
      fail("malformed header");
    ++pos_;
  }

  std::string_view payload(std::size_t expected) const {
    const std::size_t remaining = bytes_.size() - pos_;
    if (remaining < expected) fail("truncated payload");
    if (remaining > expected) fail("payload larger than header dimensions");
    return bytes_.substr(pos_, expected);
  }

  std::string_view rest() const { return bytes_.substr(pos_); }
  std::size_t pos() const { return pos_; }
  void advance(std::size_t n) { pos_ += n; }

 private:
  std::string_view bytes_;
  const char* format_;
  std::size_t pos_ = 0;
};

void check_dims(const Reader& r, long w, long h) {
  if (w <= 0 || h <= 0 || w > (1L << 20) || h > (1L << 20)) r.fail("invalid dimensions");
}

float load_float(const char* p, bool little_endian) {
  std::uint32_t bits = 0;
  std::memcpy(&bits, p, 4);
  const bool host_little = std::endian::native == std::endian::little;
  if (host_little != little_endian) bits = __builtin_bswap32(bits);
  float f = 0.0f;
  std::memcpy(&f, &bits, 4);
  return f;
}

void store_float_le(std::string& out, float f) {
  std::uint32_t bits = 0;
  std::memcpy(&bits, &f, 4);
  if constexpr (std::endian::native != std::endian::little) bits = __builtin_bswap32(bits);
  char buf[4];
  std::memcpy(buf, &bits, 4);
  out.append(buf, 4);
}

struct PfmPayload {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<float> values;  // top row first
};

PfmPayload decode_pfm_payload(std::string_view bytes) {
  Reader r(bytes, "pfm");
  const auto magic = r.token();
  PfmPayload p;
  if (magic == "PF") p.channels = 3;
  else if (magic == "Pf") p.channels = 1;
  else r.fail("unsupported magic '" + std::string(magic) + "'");
  const long w = r.integer();
  const long h = r.integer();
  check_dims(r, w, h);
  const double scale = r.real();
  if (scale == 0.0 || !std::isfinite(scale)) r.fail("invalid scale");
  r.end_header();
  const bool little = scale < 0.0;
  p.width = static_cast<int>(w);
  p.height = static_cast<int>(h);
  const std::size_t row = static_cast<std::size_t>(w) * p.channels;
  const auto data = r.payload(row * h * 4);
  p.values.resize(row * h);
  for (long y = 0; y < h; ++y) {
    const long dst_row = h - 1 - y;
    for (std::size_t i = 0; i < row; ++i)
      p.values[dst_row * row + i] = load_float(data.data() + 4 * (y * row + i), little);
  }
  return p;
}

std::string encode_pfm_payload(int width, int height, int channels,
                               const std::vector<float>& values) {
  std::string out = (channels == 3 ? "PF\n" : "Pf\n") + std::to_string(width) + " " +
                    std::to_string(height) + "\n-1.0\n";
  const std::size_t row = static_cast<std::size_t>(width) * channels;
  out.reserve(out.size() + values.size() * 4);
  for (int y = height - 1; y >= 0; --y)
    for (std::size_t i = 0; i < row; ++i) store_float_le(out, values[y * row + i]);
  return out;
}

}  // namespace

LdrImage decode_ldr(std::string_view bytes) {
  Reader r(bytes, "ppm");
  const auto magic = r.token();
  if (magic != "P6") r.fail("unsupported format '" + std::string(magic) + "' (expected P6)");
  const long w = r.integer();
  const long h = r.integer();
  check_dims(r, w, h);
  const long maxval = r.integer();
  int bits = 0;
  if (maxval == 255) bits = 8;
  else if (maxval == 1023) bits = 10;
  else r.fail("unsupported maxval " + std::to_string(maxval));
  r.end_header();
  const std::size_t bytes_per_sample = bits > 8 ? 2 : 1;
  const std::size_t count = static_cast<std::size_t>(w) * h * 3;
  const auto data = r.payload(count * bytes_per_sample);
  LdrImage img(static_cast<int>(w), static_cast<int>(h), bits);
  auto samples = img.samples();
  for (std::size_t i = 0; i < count; ++i) {
    std::uint16_t v = 0;
    if (bytes_per_sample == 1) {
      v = static_cast<std::uint8_t>(data[i]);
    } else {
      v = static_cast<std::uint16_t>((static_cast<std::uint8_t>(data[2 * i]) << 8) |
                                     static_cast<std::uint8_t>(data[2 * i + 1]));
    }
    if (v > maxval) r.fail("sample exceeds maxval");
    samples[i] = v;
  }
  return img;
}

std::string encode_ldr(const LdrImage& img) {
  std::string out = "P6\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) +
                    "\n" + std::to_string(img.z_max()) + "\n";
  const bool wide = img.bit_depth() > 8;
  for (const std::uint16_t v : img.samples()) {
    if (wide) out.push_back(static_cast<char>(v >> 8));
    out.push_back(static_cast<char>(v & 0xff));
  }
  return out;
}

LdrImage read_ldr(const std::filesystem::path& path) {
  try {
    return decode_ldr(read_file(path));
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void write_ldr(const LdrImage& img, const std::filesystem::path& path) {
  write_file(path, encode_ldr(img));
}

std::array<std::uint8_t, 4> encode_rgbe(const Rgb& rgb) {
  const double v = std::max({rgb[0], rgb[1], rgb[2]});
  if (!(v >= 1e-32)) return {0, 0, 0, 0};
  int e = 0;
  const double m = std::frexp(v, &e);
  const double scale = m * 256.0 / v;
  std::array<std::uint8_t, 4> out{};
  for (int c = 0; c < 3; ++c)
    out[c] = static_cast<std::uint8_t>(std::clamp(rgb[c] * scale, 0.0, 255.0));
  out[3] = static_cast<std::uint8_t>(std::clamp(e + 128, 0, 255));
  return out;
}

Rgb decode_rgbe(const std::array<std::uint8_t, 4>& rgbe) {
  if (rgbe[3] == 0) return {0.0, 0.0, 0.0};
  const double f = std::ldexp(1.0, static_cast<int>(rgbe[3]) - (128 + 8));
  return {(rgbe[0] + 0.5) * f, (rgbe[1] + 0.5) * f, (rgbe[2] + 0.5) * f};
}

HdrImage decode_hdr_rgbe(std::string_view bytes) {
  Reader r(bytes, "rgbe");
  // Header: text lines up to a blank line, then the resolution line.
  std::size_t pos = 0;
  auto next_line = [&]() -> std::string_view {
    const std::size_t eol = bytes.find('\n', pos);
    if (eol == std::string_view::npos) r.fail("malformed header");
    const auto line = bytes.substr(pos, eol - pos);
    pos = eol + 1;
    return line;
  };
  const auto magic = next_line();
  if (magic.rfind("#?", 0) != 0) r.fail("missing #? signature");
  while (true) {
    const auto line = next_line();
    if (line.empty()) break;
    if (line.rfind("FORMAT=", 0) == 0 && line != "FORMAT=32-bit_rle_rgbe")
      r.fail("unsupported " + std::string(line));
  }
  const std::string res(next_line());
  char ysign = 0, xsign = 0;
  long h = 0, w = 0;
  char trailing = 0;
  if (std::sscanf(res.c_str(), "%cY %ld %cX %ld%c", &ysign, &h, &xsign, &w, &trailing) != 4 ||
      ysign != '-' || xsign != '+')
    r.fail("unsupported resolution line '" + res + "'");
  check_dims(r, w, h);

  HdrImage img(static_cast<int>(w), static_cast<int>(h));
  std::vector<std::uint8_t> scan(static_cast<std::size_t>(w) * 4);
  auto byte_at = [&](std::size_t i) -> std::uint8_t {
    if (i >= bytes.size()) r.fail("truncated payload");
    return static_cast<std::uint8_t>(bytes[i]);
  };
  for (long y = 0; y < h; ++y) {
    const bool rle = w >= 8 && w < 0x8000 && pos + 4 <= bytes.size() && byte_at(pos) == 2 &&
                     byte_at(pos + 1) == 2 && (byte_at(pos + 2) & 0x80) == 0;
    if (rle) {
      const long len = (static_cast<long>(byte_at(pos + 2)) << 8) | byte_at(pos + 3);
      if (len != w) r.fail("bad scanline length");
      pos += 4;
      for (int c = 0; c < 4; ++c) {
        long x = 0;
        while (x < w) {
          std::uint8_t count = byte_at(pos++);
          if (count > 128) {
            count -= 128;
            if (x + count > w) r.fail("bad scanline length");
            const std::uint8_t value = byte_at(pos++);
            for (int k = 0; k < count; ++k) scan[4 * (x++) + c] = value;
          } else {
            if (count == 0 || x + count > w) r.fail("bad scanline length");
            for (int k = 0; k < count; ++k) scan[4 * (x++) + c] = byte_at(pos++);
          }
        }
      }
    } else {
      if (pos + scan.size() > bytes.size()) r.fail("truncated payload");
      std::memcpy(scan.data(), bytes.data() + pos, scan.size());
      pos += scan.size();
    }
    for (long x = 0; x < w; ++x)
      img.set_rgb(static_cast<int>(x), static_cast<int>(y),
                  decode_rgbe({scan[4 * x], scan[4 * x + 1], scan[4 * x + 2], scan[4 * x + 3]}));
  }
  if (pos != bytes.size()) r.fail("payload larger than header dimensions");
  return img;
}

std::string encode_hdr_rgbe(const HdrImage& img) {
  std::string out = "#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n-Y " + std::to_string(img.height()) +
                    " +X " + std::to_string(img.width()) + "\n";
  out.reserve(out.size() + img.pixel_count() * 4);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      const Rgb v = img.rgb(x, y);
      for (double c : v)
        if (!std::isfinite(c)) throw Error("rgbe: non-finite radiance");
      const auto e = encode_rgbe(v);
      out.append(reinterpret_cast<const char*>(e.data()), 4);
    }
  return out;
}

HdrImage read_hdr_rgbe(const std::filesystem::path& path) {
  try {
    return decode_hdr_rgbe(read_file(path));
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void write_hdr_rgbe(const HdrImage& img, const std::filesystem::path& path) {
  write_file(path, encode_hdr_rgbe(img));
}

HdrImage decode_pfm(std::string_view bytes) {
  const PfmPayload p = decode_pfm_payload(bytes);
  if (p.channels != 3) throw Error("pfm: expected a color (PF) image");
  HdrImage img(p.width, p.height);
  auto values = img.values();
  for (std::size_t i = 0; i < p.values.size(); ++i) values[i] = p.values[i];
  return img;
}

std::string encode_pfm(const HdrImage& img) {
  std::vector<float> values(img.values().begin(), img.values().end());
  return encode_pfm_payload(img.width(), img.height(), 3, values);
}

HdrImage read_pfm(const std::filesystem::path& path) {
  try {
    return decode_pfm(read_file(path));
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void write_pfm(const HdrImage& img, const std::filesystem::path& path) {
  write_file(path, encode_pfm(img));
}

DisparityMap decode_disparity_pfm(std::string_view bytes) {
  const PfmPayload p = decode_pfm_payload(bytes);
  if (p.channels != 1) throw Error("pfm: expected a single-channel (Pf) disparity map");
  DisparityMap map(p.width, p.height);
  for (int y = 0; y < p.height; ++y)
    for (int x = 0; x < p.width; ++x) {
      const float v = p.values[static_cast<std::size_t>(y) * p.width + x];
      if (v == kUnknownDisparityValue) continue;
      if (!std::isfinite(v) || v != std::nearbyint(v)) throw Error("pfm: non-integer disparity");
      map.set(x, y, static_cast<int>(v));
    }
  return map;
}

std::string encode_disparity_pfm(const DisparityMap& map) {
  std::vector<float> values(map.values().size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const int d = map.values()[i];
    if (d == kUnknownDisparity) {
      values[i] = kUnknownDisparityValue;
    } else {
      if (d == -1) throw Error("pfm: disparity -1 collides with the unknown marker");
      values[i] = static_cast<float>(d);
    }
  }
  return encode_pfm_payload(map.width(), map.height(), 1, values);
}

DisparityMap read_disparity_pfm(const std::filesystem::path& path) {
  try {
    return decode_disparity_pfm(read_file(path));
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void write_disparity_pfm(const DisparityMap& map, const std::filesystem::path& path) {
  write_file(path, encode_disparity_pfm(map));
}

Rgb8Image tone_map_preview(const HdrImage& img) {
  auto luminance = [](const Rgb& v) { return 0.2126 * v[0] + 0.7152 * v[1] + 0.0722 * v[2]; };
  double l_max = 0.0;
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) l_max = std::max(l_max, luminance(img.rgb(x, y)));
  Rgb8Image out(img.width(), img.height());
  if (!(l_max > 0.0)) return out;
  const double denom = std::log1p(l_max);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      const Rgb v = img.rgb(x, y);
      const double l = luminance(v);
      if (!(l > 0.0)) continue;
      const double scale = std::log1p(l) / denom / l;
      std::array<std::uint8_t, 3> px{};
      for (int c = 0; c < 3; ++c)
        px[c] = static_cast<std::uint8_t>(std::lround(std::clamp(v[c] * scale, 0.0, 1.0) * 255.0));
      out.set(x, y, px);
    }
  return out;
}

void write_png_preview(const HdrImage& img, const std::filesystem::path& path) {
  write_png(tone_map_preview(img), path);
}

}  // namespace mvhdr
