#include "mvhdr/matching.hpp"

#include <cmath>
#include <numeric>

#include "mvhdr/parallel.hpp"

namespace mvhdr {

void MatchingConfig::validate() const {
  if (d_min > d_max) throw Error("matching: d_min exceeds d_max");
  if (window_radius < 0) throw Error("matching: negative window radius");
  if (!(exploitable_lo >= 0.0 && exploitable_lo < exploitable_hi && exploitable_hi <= 1.0))
    throw Error("matching: exploitable range must satisfy 0 <= lo < hi <= 1");
  if (min_members < 2) throw Error("matching: at least two members are needed to form a cost");
  if (geometry_sign != 1 && geometry_sign != -1) throw Error("matching: geometry sign must be +-1");
}

bool is_exploitable_level(int z, int z_max, const MatchingConfig& config) {
  return z >= config.exploitable_lo * z_max && z <= config.exploitable_hi * z_max;
}

bool is_exploitable(const Rgb16& rgb, int z_max, const MatchingConfig& config) {
  for (int c = 0; c < 3; ++c)
    if (!is_exploitable_level(rgb[c], z_max, config)) return false;
  return true;
}

MatchingView make_matching_view(const LdrImage& original, const NormalizedImage& normalized,
                                const MatchingConfig& config) {
  if (original.width() != normalized.image.width() ||
      original.height() != normalized.image.height())
    throw Error("matching: normalized image does not match its original");
  MatchingView v{normalized.image, std::vector<std::uint8_t>(original.samples().size(), 0)};
  const auto src = original.samples();
  for (std::size_t i = 0; i < src.size(); ++i)
    v.usable[i] = (!normalized.saturated[i] && is_exploitable_level(src[i], original.z_max(), config))
                      ? 1
                      : 0;
  return v;
}

std::vector<MatchingView> make_matching_views(std::span<const LdrImage> originals,
                                              std::span<const NormalizedImage> normalized,
                                              const MatchingConfig& config) {
  if (originals.size() != normalized.size()) throw Error("matching: view count mismatch");
  std::vector<MatchingView> out;
  out.reserve(originals.size());
  for (std::size_t i = 0; i < originals.size(); ++i)
    out.push_back(make_matching_view(originals[i], normalized[i], config));
  return out;
}

namespace {

void check_views(std::span<const MatchingView> views) {
  if (views.size() < 2) throw Error("matching: at least two views are required");
  const LdrImage& a = views.front().levels;
  for (const MatchingView& v : views)
    if (v.levels.width() != a.width() || v.levels.height() != a.height() ||
        v.levels.bit_depth() != a.bit_depth())
      throw Error("matching: inconsistent image dimensions across views");
}

}  // namespace

DisparityMap compute_disparity_map(int view, std::span<const MatchingView> views,
                                   const MatchingConfig& config, unsigned channels) {
  config.validate();
  check_views(views);
  if (view < 0 || view >= static_cast<int>(views.size())) throw Error("matching: bad view index");
  if ((channels & kChannelsRgb) == 0) throw Error("matching: empty channel mask");

  const int width = views.front().levels.width();
  const int height = views.front().levels.height();
  const int n_views = static_cast<int>(views.size());
  const int z_max = views.front().levels.z_max();
  std::vector<int> active;
  for (int c = 0; c < 3; ++c)
    if (channels & (1u << c)) active.push_back(c);
  const double cap = config.truncation > 0.0
                         ? config.truncation
                         : static_cast<double>(active.size()) * std::pow(0.2 * z_max, 2.0);
  constexpr double kInf = std::numeric_limits<double>::infinity();

  const std::size_t n_pixels = static_cast<std::size_t>(width) * height;
  std::vector<double> pixel_cost(n_pixels);
  std::vector<double> best_cost(n_pixels, kInf);
  DisparityMap out(width, height, view);

  for (int d = config.d_min; d <= config.d_max; ++d) {
    parallel_for(0, height, [&](int y) {
      std::array<std::array<int, 3>, 64> member{};
      std::vector<std::array<int, 3>> overflow;
      for (int x = 0; x < width; ++x) {
        int count = 0;
        overflow.clear();
        for (int j = 0; j < n_views; ++j) {
          const long xj = x + static_cast<long>(config.geometry_sign) * (view - j) * d;
          if (xj < 0 || xj >= width) continue;
          const MatchingView& mv = views[j];
          bool ok = true;
          for (int c : active) ok &= mv.usable_sample(static_cast<int>(xj), y, c);
          if (!ok) continue;
          std::array<int, 3> v{};
          for (int c : active) v[c] = mv.levels.at(static_cast<int>(xj), y, c);
          if (count < 64) member[count] = v;
          else overflow.push_back(v);
          ++count;
        }
        double cost = kInf;
        if (count >= config.min_members) {
          auto at = [&](int k) -> const std::array<int, 3>& {
            return k < 64 ? member[k] : overflow[k - 64];
          };
          double sum = 0.0;
          for (int a = 0; a < count; ++a)
            for (int b = a + 1; b < count; ++b) {
              double sq = 0.0;
              for (int c : active) {
                const double diff = at(a)[c] - at(b)[c];
                sq += diff * diff;
              }
              sum += std::sqrt(std::min(sq, cap));
            }
          cost = sum / (0.5 * count * (count - 1));
        }
        pixel_cost[static_cast<std::size_t>(y) * width + x] = cost;
      }
    });

    const int r = config.window_radius;
    parallel_for(0, height, [&](int y) {
      for (int x = 0; x < width; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * width + x;
        if (!std::isfinite(pixel_cost[i])) continue;
        double sum = 0.0;
        int n = 0;
        for (int v = std::max(0, y - r); v <= std::min(height - 1, y + r); ++v)
          for (int u = std::max(0, x - r); u <= std::min(width - 1, x + r); ++u) {
            const double c = pixel_cost[static_cast<std::size_t>(v) * width + u];
            if (std::isfinite(c)) {
              sum += c;
              ++n;
            }
          }
        const double aggregated = sum / n;
        if (aggregated < best_cost[i]) {
          best_cost[i] = aggregated;
          out.set(x, y, d);
        }
      }
    });
  }
  return out;
}

std::vector<DisparityMap> compute_disparity_maps(std::span<const MatchingView> views,
                                                 const MatchingConfig& config, unsigned channels) {
  std::vector<DisparityMap> maps;
  maps.reserve(views.size());
  for (int v = 0; v < static_cast<int>(views.size()); ++v)
    maps.push_back(compute_disparity_map(v, views, config, channels));
  return maps;
}

std::array<std::vector<DisparityMap>, 3> per_channel_disparities(
    std::span<const MatchingView> views, const MatchingConfig& config) {
  return {compute_disparity_maps(views, config, kChannelR),
          compute_disparity_maps(views, config, kChannelG),
          compute_disparity_maps(views, config, kChannelB)};
}

DisjointSet::DisjointSet(std::size_t n) : parent_(n), rank_(n, 0) {
  std::iota(parent_.begin(), parent_.end(), std::size_t{0});
}

std::size_t DisjointSet::find(std::size_t i) {
  while (parent_[i] != i) {
    parent_[i] = parent_[parent_[i]];
    i = parent_[i];
  }
  return i;
}

void DisjointSet::unite(std::size_t a, std::size_t b) {
  a = find(a);
  b = find(b);
  if (a == b) return;
  if (rank_[a] < rank_[b]) std::swap(a, b);
  parent_[b] = a;
  if (rank_[a] == rank_[b]) ++rank_[a];
}

MatchList build_match_list(std::span<const DisparityMap> maps, int geometry_sign) {
  if (maps.size() < 2) throw Error("build_match_list: at least two views are required");
  const ViewGeometry geo{static_cast<int>(maps.size()), maps.front().width(),
                         maps.front().height(), geometry_sign};
  for (const DisparityMap& m : maps)
    if (m.width() != geo.width || m.height() != geo.height)
      throw Error("build_match_list: disparity maps differ in size");

  const std::size_t per_view = geo.pixel_count();
  auto flat = [&](const PixelRef& p) {
    return static_cast<std::size_t>(p.view) * per_view + static_cast<std::size_t>(p.y) * geo.width +
           p.x;
  };
  DisjointSet sets(per_view * geo.n_views);
  for (int i = 0; i < geo.n_views; ++i)
    for (int y = 0; y < geo.height; ++y)
      for (int x = 0; x < geo.width; ++x) {
        const int d = maps[i].at(x, y);
        if (d == kUnknownDisparity) continue;
        const PixelRef p{i, x, y};
        for (int j = i + 1; j < geo.n_views; ++j) {
          const auto q = geo.project(p, d, j);
          if (q && maps[j].at(q->x, q->y) == d) sets.unite(flat(p), flat(*q));
        }
      }

  constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();
  std::vector<std::uint32_t> group_of_root(per_view * geo.n_views, kNone);
  std::vector<Match> matches;
  for (int i = 0; i < geo.n_views; ++i)
    for (int y = 0; y < geo.height; ++y)
      for (int x = 0; x < geo.width; ++x) {
        const PixelRef p{i, x, y};
        const std::size_t root = sets.find(flat(p));
        std::uint32_t& g = group_of_root[root];
        if (g == kNone) {
          g = static_cast<std::uint32_t>(matches.size());
          Match m;
          m.disparity = maps[i].at(x, y);
          matches.push_back(std::move(m));
        }
        matches[g].pixels.push_back(p);
      }
  return MatchList(geo, std::move(matches));
}

}  // namespace mvhdr
