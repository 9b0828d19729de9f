#include "mvhdr/core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace mvhdr {

LdrImage::LdrImage(int width, int height, int bit_depth, double exposure, int view_index)
    : width_(width), height_(height), bit_depth_(bit_depth), view_index_(view_index) {
  if (width <= 0 || height <= 0) throw Error("LdrImage: non-positive dimensions");
  if (bit_depth != 8 && bit_depth != 10)
    throw Error("LdrImage: bit depth must be 8 or 10, got " + std::to_string(bit_depth));
  set_exposure(exposure);
  data_.assign(3 * pixel_count(), 0);
}

void LdrImage::set_exposure(double exposure) {
  if (!(exposure > 0.0) || !std::isfinite(exposure))
    throw Error("LdrImage: exposure must be positive");
  exposure_ = exposure;
}

void LdrImage::set(int x, int y, int c, std::uint16_t value) {
  if (value > z_max()) throw Error("LdrImage: sample exceeds bit depth");
  data_[offset(x, y) + c] = value;
}

void LdrImage::set_rgb(int x, int y, Rgb16 value) {
  for (int c = 0; c < 3; ++c) set(x, y, c, value[c]);
}

HdrImage::HdrImage(int width, int height, int view_index)
    : width_(width), height_(height), view_index_(view_index) {
  if (width <= 0 || height <= 0) throw Error("HdrImage: non-positive dimensions");
  data_.assign(3 * pixel_count(), 0.0);
}

DisparityMap::DisparityMap(int width, int height, int view_index, int fill)
    : width_(width), height_(height), view_index_(view_index) {
  if (width <= 0 || height <= 0) throw Error("DisparityMap: non-positive dimensions");
  values_.assign(static_cast<std::size_t>(width) * height, fill);
}

std::optional<PixelRef> ViewGeometry::project(const PixelRef& p, int d, int target_view) const {
  const long x = static_cast<long>(p.x) + static_cast<long>(sign) * (p.view - target_view) * d;
  if (x < 0 || x >= width) return std::nullopt;
  return PixelRef{target_view, static_cast<int>(x), p.y};
}

MatchList::MatchList(ViewGeometry geometry, std::vector<Match> matches)
    : geometry_(geometry), matches_(std::move(matches)) {
  constexpr MatchId kUnset = std::numeric_limits<MatchId>::max();
  const std::size_t per_view = geometry_.pixel_count();
  index_.assign(per_view * geometry_.n_views, kUnset);

  for (std::size_t id = 0; id < matches_.size(); ++id) {
    const Match& m = matches_[id];
    if (m.pixels.empty()) throw Error("MatchList: empty match " + std::to_string(id));
    const PixelRef& first = m.pixels.front();
    if (m.pixels.size() > 1 && m.disparity == kUnknownDisparity)
      throw Error("MatchList: multi-pixel match without disparity");
    std::uint64_t views_seen = 0;
    for (const PixelRef& p : m.pixels) {
      if (!geometry_.contains(p)) throw Error("MatchList: pixel out of bounds");
      if (p.y != first.y) throw Error("MatchList: match spans several rows");
      if (p.view < 64) {
        if (views_seen & (std::uint64_t{1} << p.view))
          throw Error("MatchList: two pixels of one view in a match");
        views_seen |= std::uint64_t{1} << p.view;
      }
      if (m.pixels.size() > 1 &&
          geometry_.ray_coordinate(p, m.disparity) != geometry_.ray_coordinate(first, m.disparity))
        throw Error("MatchList: match violates the geometry law");
      MatchId& slot = index_[p.view * per_view + static_cast<std::size_t>(p.y) * geometry_.width + p.x];
      if (slot != kUnset) throw Error("MatchList: pixel belongs to two matches");
      slot = static_cast<MatchId>(id);
    }
  }
  if (std::find(index_.begin(), index_.end(), kUnset) != index_.end())
    throw Error("MatchList: matches do not cover every pixel");
}

std::size_t MatchList::max_cardinality() const {
  std::size_t best = 0;
  for (const Match& m : matches_) best = std::max(best, m.cardinality());
  return best;
}

ResponseCurve ResponseCurve::linear(int bit_depth) {
  ResponseCurve curve;
  curve.bit_depth_ = bit_depth;
  curve.linear_ = true;
  const int levels = curve.z_max() + 1;
  for (int c = 0; c < 3; ++c) {
    curve.log_exposure_[c].resize(levels);
    curve.inverse_[c].resize(levels);
    for (int z = 0; z < levels; ++z) {
      curve.log_exposure_[c][z] = std::log(static_cast<double>(z));
      curve.inverse_[c][z] = static_cast<double>(z);
    }
    curve.envelope_[c] = curve.log_exposure_[c];
  }
  return curve;
}

ResponseCurve::ResponseCurve(int bit_depth, std::array<std::vector<double>, 3> log_exposure)
    : bit_depth_(bit_depth), log_exposure_(std::move(log_exposure)) {
  const std::size_t levels = static_cast<std::size_t>(z_max()) + 1;
  for (int c = 0; c < 3; ++c) {
    if (log_exposure_[c].size() != levels)
      throw Error("ResponseCurve: table size does not match bit depth");
    inverse_[c].resize(levels);
    envelope_[c].resize(levels);
    double running = -std::numeric_limits<double>::infinity();
    for (std::size_t z = 0; z < levels; ++z) {
      inverse_[c][z] = std::exp(log_exposure_[c][z]);
      running = std::max(running, log_exposure_[c][z]);
      envelope_[c][z] = running;
    }
  }
}

int ResponseCurve::forward(int c, double exposure) const {
  const int top = z_max();
  if (linear_) {
    if (!(exposure > 0.0)) return 0;
    return static_cast<int>(std::clamp(std::round(exposure), 0.0, static_cast<double>(top)));
  }
  if (!(exposure > 0.0)) return 0;
  const double target = std::log(exposure);
  const auto& env = envelope_[c];
  const auto it = std::lower_bound(env.begin(), env.end(), target);
  if (it == env.begin()) return 0;
  if (it == env.end()) return top;
  const int hi = static_cast<int>(it - env.begin());
  const int lo = hi - 1;
  return (target - env[lo] <= env[hi] - target) ? lo : hi;
}

namespace {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s, const std::string& where) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw Error(where + ": not a number '" + std::string(s) + "'");
  return v;
}

}  // namespace

void save_response_csv(const ResponseCurve& curve, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write response curve " + path.string());
  if (curve.is_linear()) out << "# linear\n";
  out << "z,g_r,g_g,g_b\n";
  for (int z = 0; z <= curve.z_max(); ++z) {
    out << z;
    for (int c = 0; c < 3; ++c) out << ',' << format_double(curve.log_exposure(c, z));
    out << '\n';
  }
  if (!out) throw Error("I/O failure writing " + path.string());
}

ResponseCurve load_response_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open response curve " + path.string());
  std::string line;
  bool linear = false;
  std::array<std::vector<double>, 3> tables;
  int line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line.rfind("# linear", 0) == 0) {
      linear = true;
      continue;
    }
    if (line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    const std::string where = path.string() + ":" + std::to_string(line_no);
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (fields.size() != 4) throw Error(where + ": expected 4 columns");
    const double z = parse_double(fields[0], where);
    if (z != static_cast<double>(tables[0].size())) throw Error(where + ": levels out of order");
    for (int c = 0; c < 3; ++c) tables[c].push_back(parse_double(fields[c + 1], where));
  }
  const std::size_t levels = tables[0].size();
  int bits = 0;
  if (levels == 256) bits = 8;
  else if (levels == 1024) bits = 10;
  else throw Error(path.string() + ": response table must have 256 or 1024 levels");
  if (linear) return ResponseCurve::linear(bits);
  return ResponseCurve(bits, std::move(tables));
}

}  // namespace mvhdr
