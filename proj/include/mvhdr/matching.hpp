#pragma once

#include <array>
#include <span>
#include <vector>

#include "mvhdr/core.hpp"
#include "mvhdr/response.hpp"

namespace mvhdr {

struct MatchingConfig {
  int d_min = 0;
  int d_max = 0;
  int window_radius = 1;
  // Cap on the squared RGB distance of one pair; <= 0 selects
  // 3 * (0.2 * z_max)^2 (scaled to the channel count of the pass).
  double truncation = 0.0;
  double exploitable_lo = 0.02;
  double exploitable_hi = 0.98;
  int min_members = 2;
  int geometry_sign = +1;

  void validate() const;
};

enum ChannelMask : unsigned {
  kChannelR = 1u,
  kChannelG = 2u,
  kChannelB = 4u,
  kChannelsRgb = 7u,
};

bool is_exploitable(const Rgb16& rgb, int z_max, const MatchingConfig& config);
bool is_exploitable_level(int z, int z_max, const MatchingConfig& config);

// Matcher input for one view: exposure-normalized levels plus a per-sample
// usability flag (not saturated after normalization and exploitable in the
// original capture).
struct MatchingView {
  LdrImage levels;
  std::vector<std::uint8_t> usable;

  bool usable_sample(int x, int y, int c) const {
    return usable[3 * (static_cast<std::size_t>(y) * levels.width() + x) + c] != 0;
  }
};

MatchingView make_matching_view(const LdrImage& original, const NormalizedImage& normalized,
                                const MatchingConfig& config);
std::vector<MatchingView> make_matching_views(std::span<const LdrImage> originals,
                                              std::span<const NormalizedImage> normalized,
                                              const MatchingConfig& config);

// Window-aggregated winner-take-all over [d_min, d_max] with the candidate
// set spanning all views. Ties resolve to the smaller disparity.
DisparityMap compute_disparity_map(int view, std::span<const MatchingView> views,
                                   const MatchingConfig& config,
                                   unsigned channels = kChannelsRgb);
std::vector<DisparityMap> compute_disparity_maps(std::span<const MatchingView> views,
                                                 const MatchingConfig& config,
                                                 unsigned channels = kChannelsRgb);

// Same matcher run on the R, G and B components separately.
std::array<std::vector<DisparityMap>, 3> per_channel_disparities(
    std::span<const MatchingView> views, const MatchingConfig& config);

// Groups pixels whose projections agree on disparity. Unmatched pixels
// become singletons.
MatchList build_match_list(std::span<const DisparityMap> maps, int geometry_sign);

class DisjointSet {
 public:
  explicit DisjointSet(std::size_t n);
  std::size_t find(std::size_t i);
  void unite(std::size_t a, std::size_t b);

 private:
  std::vector<std::size_t> parent_;
  std::vector<std::uint8_t> rank_;
};

}  // namespace mvhdr
