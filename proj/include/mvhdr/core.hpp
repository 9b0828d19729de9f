#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mvhdr {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Rgb = std::array<double, 3>;
using Rgb16 = std::array<std::uint16_t, 3>;

inline constexpr int kUnknownDisparity = std::numeric_limits<int>::min();

struct PixelRef {
  int view = 0;
  int x = 0;
  int y = 0;

  friend auto operator<=>(const PixelRef&, const PixelRef&) = default;
};

// Integer exposure frame, interleaved RGB, row-major.
class LdrImage {
 public:
  LdrImage() = default;
  LdrImage(int width, int height, int bit_depth, double exposure = 1.0, int view_index = 0);

  int width() const { return width_; }
  int height() const { return height_; }
  int bit_depth() const { return bit_depth_; }
  int z_max() const { return (1 << bit_depth_) - 1; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }

  double exposure() const { return exposure_; }
  void set_exposure(double exposure);
  int view_index() const { return view_index_; }
  void set_view_index(int view) { view_index_ = view; }

  std::uint16_t at(int x, int y, int c) const { return data_[offset(x, y) + c]; }
  void set(int x, int y, int c, std::uint16_t value);
  Rgb16 rgb(int x, int y) const {
    const std::size_t o = offset(x, y);
    return {data_[o], data_[o + 1], data_[o + 2]};
  }
  void set_rgb(int x, int y, Rgb16 value);

  std::span<const std::uint16_t> samples() const { return data_; }
  std::span<std::uint16_t> samples() { return data_; }

  friend bool operator==(const LdrImage&, const LdrImage&) = default;

 private:
  std::size_t offset(int x, int y) const {
    return 3 * (static_cast<std::size_t>(y) * width_ + static_cast<std::size_t>(x));
  }

  int width_ = 0;
  int height_ = 0;
  int bit_depth_ = 8;
  double exposure_ = 1.0;
  int view_index_ = 0;
  std::vector<std::uint16_t> data_;
};

// Floating-point radiance frame, interleaved RGB, row-major.
class HdrImage {
 public:
  HdrImage() = default;
  HdrImage(int width, int height, int view_index = 0);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }
  int view_index() const { return view_index_; }
  void set_view_index(int view) { view_index_ = view; }

  Rgb rgb(int x, int y) const {
    const std::size_t o = offset(x, y);
    return {data_[o], data_[o + 1], data_[o + 2]};
  }
  void set_rgb(int x, int y, const Rgb& value) {
    const std::size_t o = offset(x, y);
    data_[o] = value[0];
    data_[o + 1] = value[1];
    data_[o + 2] = value[2];
  }

  std::span<const double> values() const { return data_; }
  std::span<double> values() { return data_; }

  friend bool operator==(const HdrImage&, const HdrImage&) = default;

 private:
  std::size_t offset(int x, int y) const {
    return 3 * (static_cast<std::size_t>(y) * width_ + static_cast<std::size_t>(x));
  }

  int width_ = 0;
  int height_ = 0;
  int view_index_ = 0;
  std::vector<double> data_;
};

class DisparityMap {
 public:
  DisparityMap() = default;
  DisparityMap(int width, int height, int view_index = 0, int fill = kUnknownDisparity);

  int width() const { return width_; }
  int height() const { return height_; }
  int view_index() const { return view_index_; }
  void set_view_index(int view) { view_index_ = view; }

  int at(int x, int y) const { return values_[static_cast<std::size_t>(y) * width_ + x]; }
  void set(int x, int y, int d) { values_[static_cast<std::size_t>(y) * width_ + x] = d; }
  bool known(int x, int y) const { return at(x, y) != kUnknownDisparity; }

  std::span<const int> values() const { return values_; }

  friend bool operator==(const DisparityMap&, const DisparityMap&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int view_index_ = 0;
  std::vector<int> values_;
};

// Rectified parallel multi-view layout. A scene point seen at column x in
// view i with disparity d sits at column x + sign * (i - j) * d in view j.
struct ViewGeometry {
  int n_views = 0;
  int width = 0;
  int height = 0;
  int sign = +1;

  bool contains(const PixelRef& p) const {
    return p.view >= 0 && p.view < n_views && p.x >= 0 && p.x < width && p.y >= 0 &&
           p.y < height;
  }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }

  // std::nullopt when the projected column leaves the image.
  std::optional<PixelRef> project(const PixelRef& p, int d, int target_view) const;

  // Column the point would occupy in view 0; constant along one match.
  long ray_coordinate(const PixelRef& p, int d) const {
    return static_cast<long>(p.x) + static_cast<long>(sign) * p.view * d;
  }
};

enum class Validity { kValid, kInvalid, kCorrected };

struct Match {
  std::vector<PixelRef> pixels;
  int disparity = kUnknownDisparity;
  Validity validity = Validity::kValid;
  Rgb radiance{0.0, 0.0, 0.0};
  bool has_radiance = false;

  std::size_t cardinality() const { return pixels.size(); }

  // Confidence index: 1 valid, 0.5 corrected, 0 invalid.
  double confidence() const {
    switch (validity) {
      case Validity::kValid: return 1.0;
      case Validity::kCorrected: return 0.5;
      case Validity::kInvalid: return 0.0;
    }
    return 0.0;
  }
};

using MatchId = std::uint32_t;

// Partition of every pixel of every view into matches.
class MatchList {
 public:
  MatchList() = default;
  // Throws if the matches do not partition the pixel set or violate the
  // one-pixel-per-view / geometry rules.
  MatchList(ViewGeometry geometry, std::vector<Match> matches);

  const ViewGeometry& geometry() const { return geometry_; }
  std::size_t size() const { return matches_.size(); }
  const Match& operator[](MatchId id) const { return matches_[id]; }
  Match& operator[](MatchId id) { return matches_[id]; }
  std::span<const Match> matches() const { return matches_; }
  std::span<Match> matches() { return matches_; }

  MatchId match_of(const PixelRef& p) const {
    return index_[static_cast<std::size_t>(p.view) * geometry_.pixel_count() +
                  static_cast<std::size_t>(p.y) * geometry_.width + p.x];
  }
  std::size_t max_cardinality() const;

 private:
  ViewGeometry geometry_;
  std::vector<Match> matches_;
  std::vector<MatchId> index_;
};

// Inverse camera response per channel, stored as g(z) = ln f^-1(z).
class ResponseCurve {
 public:
  static ResponseCurve linear(int bit_depth);

  ResponseCurve() = default;
  ResponseCurve(int bit_depth, std::array<std::vector<double>, 3> log_exposure);

  bool is_linear() const { return linear_; }
  int bit_depth() const { return bit_depth_; }
  int z_max() const { return (1 << bit_depth_) - 1; }

  double log_exposure(int c, int z) const { return log_exposure_[c][z]; }
  // f^-1(z). Exact z for a linear sensor.
  double inverse(int c, int z) const { return inverse_[c][z]; }
  // Pseudo-inverse of the response: the level whose exposure is closest to
  // `exposure` in the log domain.
  int forward(int c, double exposure) const;

  std::span<const double> table(int c) const { return log_exposure_[c]; }

  bool monotone() const { return monotone_; }
  void set_monotone(bool monotone) { monotone_ = monotone; }

 private:
  int bit_depth_ = 8;
  bool linear_ = false;
  bool monotone_ = true;
  std::array<std::vector<double>, 3> log_exposure_;
  std::array<std::vector<double>, 3> inverse_;
  // Running maximum of g, used by forward() for bisection.
  std::array<std::vector<double>, 3> envelope_;
};

void save_response_csv(const ResponseCurve& curve, const std::filesystem::path& path);
ResponseCurve load_response_csv(const std::filesystem::path& path);

struct ExposureEntry {
  std::filesystem::path path;
  double shutter_s = 1.0;
  double transmittance = 1.0;

  double effective() const { return shutter_s * transmittance; }
};

struct ViewEntry : ExposureEntry {
  std::vector<ExposureEntry> reference_stack;
};

struct DatasetManifest {
  std::filesystem::path base_dir;
  std::vector<ViewEntry> views;
  int bit_depth = 8;
  bool linear = true;
  int d_min = 0;
  int d_max = 0;
  int geometry_sign = +1;

  int n_views() const { return static_cast<int>(views.size()); }
  std::filesystem::path resolve(const std::filesystem::path& p) const {
    return p.is_absolute() ? p : base_dir / p;
  }
  bool has_reference_stacks() const;
};

// Parses and validates manifest JSON. Relative paths resolve against
// `base_dir`; `check_files` enables the file-existence check.
DatasetManifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir,
                               bool check_files = true);
DatasetManifest load_manifest(const std::filesystem::path& path);
std::string manifest_to_json(const DatasetManifest& manifest);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

}  // namespace mvhdr
