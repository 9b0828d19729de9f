#include "mvhdr/correction.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mvhdr/fusion.hpp"
#include "mvhdr/parallel.hpp"

namespace mvhdr {

std::optional<CorrectionMethod> parse_correction_method(std::string_view name) {
  if (name == "none") return CorrectionMethod::kNone;
  if (name == "color") return CorrectionMethod::kColor;
  if (name == "heuristic") return CorrectionMethod::kHeuristicDisparity;
  if (name == "mono") return CorrectionMethod::kMonochromatic;
  return std::nullopt;
}

const char* to_string(CorrectionMethod method) {
  switch (method) {
    case CorrectionMethod::kNone: return "none";
    case CorrectionMethod::kColor: return "color";
    case CorrectionMethod::kHeuristicDisparity: return "heuristic";
    case CorrectionMethod::kMonochromatic: return "mono";
  }
  return "none";
}

ColorCorrectionResult correct_color(MatchList& list, std::span<const InvalidMatch> invalid,
                                    std::vector<HdrImage> hdr) {
  const ViewGeometry& geo = list.geometry();
  if (static_cast<int>(hdr.size()) != geo.n_views)
    throw Error("correct_color: HDR image count does not match the match list");

  ColorCorrectionResult result;
  result.alpha.assign(geo.n_views, std::vector<double>(geo.pixel_count(), 0.0));
  for (const Match& m : list.matches())
    for (const PixelRef& p : m.pixels)
      result.alpha[p.view][static_cast<std::size_t>(p.y) * geo.width + p.x] = m.confidence();
  for (const InvalidMatch& inv : invalid) {
    list[inv.id].validity = Validity::kInvalid;
    for (const PixelRef& p : list[inv.id].pixels)
      result.alpha[p.view][static_cast<std::size_t>(p.y) * geo.width + p.x] = 0.0;
  }

  std::vector<MatchId> pending;
  pending.reserve(invalid.size());
  for (const InvalidMatch& inv : invalid) pending.push_back(inv.id);

  double threshold = 8.0 * static_cast<double>(list.max_cardinality());
  result.initial_threshold = threshold;

  struct Proposal {
    bool accepted = false;
    Rgb radiance{};
  };
  std::vector<Proposal> proposals;

  while (!pending.empty() && threshold >= 0.5) {
    ++result.iterations;
    proposals.assign(pending.size(), Proposal{});
    parallel_for(0, static_cast<int>(pending.size()), [&](int k) {
      const Match& m = list[pending[k]];
      double s = 0.0;
      Rgb acc{0.0, 0.0, 0.0};
      for (const PixelRef& p : m.pixels) {
        const auto& alpha = result.alpha[p.view];
        const HdrImage& img = hdr[p.view];
        for (const auto& off : kNeighborOffsets) {
          const int x = p.x + off[0];
          const int y = p.y + off[1];
          if (x < 0 || y < 0 || x >= geo.width || y >= geo.height) continue;
          const double a = alpha[static_cast<std::size_t>(y) * geo.width + x];
          if (a == 0.0) continue;
          const Rgb e = img.rgb(x, y);
          for (int c = 0; c < 3; ++c) acc[c] += a * e[c];
          s += a;
        }
      }
      if (s > threshold) {
        proposals[k].accepted = true;
        for (int c = 0; c < 3; ++c) proposals[k].radiance[c] = acc[c] / s;
      }
    });

    std::vector<MatchId> still_pending;
    std::size_t accepted = 0;
    for (std::size_t k = 0; k < pending.size(); ++k) {
      if (!proposals[k].accepted) {
        still_pending.push_back(pending[k]);
        continue;
      }
      Match& m = list[pending[k]];
      m.radiance = proposals[k].radiance;
      m.has_radiance = true;
      m.validity = Validity::kCorrected;
      for (const PixelRef& p : m.pixels) {
        hdr[p.view].set_rgb(p.x, p.y, m.radiance);
        result.alpha[p.view][static_cast<std::size_t>(p.y) * geo.width + p.x] = 0.5;
      }
      ++accepted;
    }
    pending.swap(still_pending);
    result.corrected += accepted;
    if (accepted == 0) threshold -= 0.5;
  }

  result.final_threshold = threshold;
  result.residual = pending.size();
  result.hdr = std::move(hdr);
  return result;
}

int Neighborhood::exploitable_count() const {
  return static_cast<int>(std::count(exploitable.begin(), exploitable.end(), true));
}

std::optional<int> select_disparity_heuristic(const Neighborhood& n) {
  const auto& e = n.exploitable;
  const auto& d = n.disparity;
  const bool horizontal = e[3] && e[7];
  const bool vertical = e[1] && e[5];
  if (horizontal && d[3] == d[7]) return d[3];
  if (vertical && d[1] == d[5]) return d[1];
  if (horizontal && d[7] < d[3]) return d[7];
  if (horizontal && d[3] < d[7]) return d[3];
  if (vertical && d[1] < d[5]) return d[1];
  if (vertical && d[5] < d[1]) return d[5];

  std::vector<int> values;
  for (int j = 0; j < 8; ++j)
    if (e[j]) values.push_back(d[j]);
  if (values.empty()) return std::nullopt;
  std::sort(values.begin(), values.end());
  return values[(values.size() - 1) / 2];
}

Neighborhood gather_neighborhood(const DisparityMap& map, const LdrImage& image, int x, int y,
                                 const MatchingConfig& config) {
  Neighborhood n;
  for (int j = 0; j < 8; ++j) {
    const int u = x + kNeighborOffsets[j][0];
    const int v = y + kNeighborOffsets[j][1];
    if (u < 0 || v < 0 || u >= map.width() || v >= map.height()) continue;
    const int d = map.at(u, v);
    if (d == kUnknownDisparity) continue;
    n.exploitable[j] = is_exploitable(image.rgb(u, v), image.z_max(), config);
    n.disparity[j] = d;
  }
  return n;
}

namespace {

std::vector<PixelRef> invalid_pixels(const MatchList& list, std::span<const InvalidMatch> invalid) {
  std::vector<PixelRef> pixels;
  for (const InvalidMatch& inv : invalid)
    for (const PixelRef& p : list[inv.id].pixels) pixels.push_back(p);
  return pixels;
}

void check_maps(const MatchList& list, std::span<const DisparityMap> maps, const char* who) {
  const ViewGeometry& geo = list.geometry();
  if (static_cast<int>(maps.size()) != geo.n_views)
    throw Error(std::string(who) + ": disparity map count does not match the match list");
  for (const DisparityMap& m : maps)
    if (m.width() != geo.width || m.height() != geo.height)
      throw Error(std::string(who) + ": disparity map size does not match the match list");
}

}  // namespace

DisparityCorrectionResult correct_heuristic(const MatchList& list,
                                            std::span<const InvalidMatch> invalid,
                                            std::span<const DisparityMap> maps,
                                            std::span<const LdrImage> images,
                                            const MatchingConfig& config) {
  check_maps(list, maps, "correct_heuristic");
  DisparityCorrectionResult result;
  result.maps.assign(maps.begin(), maps.end());

  std::vector<PixelRef> pending = invalid_pixels(list, invalid);
  std::vector<std::uint8_t> rejected(pending.size(), 0);
  int threshold = 8;

  struct Proposal {
    int disparity = kUnknownDisparity;
    bool rejected = false;
  };
  std::vector<Proposal> proposals;

  while (!pending.empty() && threshold > 0) {
    ++result.passes;
    proposals.assign(pending.size(), Proposal{});
    parallel_for(0, static_cast<int>(pending.size()), [&](int k) {
      const PixelRef& p = pending[k];
      const DisparityMap& map = result.maps[p.view];
      const Neighborhood n = gather_neighborhood(map, images[p.view], p.x, p.y, config);
      if (n.exploitable_count() < threshold) return;
      const auto d = select_disparity_heuristic(n);
      if (!d) return;
      if (*d == map.at(p.x, p.y)) proposals[k].rejected = true;
      else proposals[k].disparity = *d;
    });

    std::vector<PixelRef> still_pending;
    std::vector<std::uint8_t> still_rejected;
    std::size_t accepted = 0;
    for (std::size_t k = 0; k < pending.size(); ++k) {
      if (proposals[k].disparity != kUnknownDisparity) {
        result.maps[pending[k].view].set(pending[k].x, pending[k].y, proposals[k].disparity);
        ++accepted;
        continue;
      }
      still_pending.push_back(pending[k]);
      still_rejected.push_back(rejected[k] || proposals[k].rejected);
    }
    pending.swap(still_pending);
    rejected.swap(still_rejected);
    result.changed += accepted;
    if (accepted == 0) --threshold;
  }

  result.residual = pending.size();
  result.rejected_no_change =
      static_cast<std::size_t>(std::count(rejected.begin(), rejected.end(), std::uint8_t{1}));
  return result;
}

DisparityCorrectionResult correct_monochromatic(
    const MatchList& list, std::span<const InvalidMatch> invalid,
    const std::array<std::vector<DisparityMap>, 3>& channel_maps,
    std::span<const LdrImage> images, std::span<const DisparityMap> maps) {
  check_maps(list, maps, "correct_monochromatic");
  for (const auto& set : channel_maps) check_maps(list, set, "correct_monochromatic");
  DisparityCorrectionResult result;
  result.maps.assign(maps.begin(), maps.end());
  result.passes = 1;

  for (const PixelRef& p : invalid_pixels(list, invalid)) {
    const LdrImage& img = images[p.view];
    const double mid = 0.5 * img.z_max();
    const Rgb16 z = img.rgb(p.x, p.y);
    std::array<int, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return std::abs(z[a] - mid) < std::abs(z[b] - mid);
    });
    const int current = maps[p.view].at(p.x, p.y);
    bool changed = false;
    for (int c : order) {
      const int d = channel_maps[c][p.view].at(p.x, p.y);
      if (d == kUnknownDisparity || d == current) continue;
      result.maps[p.view].set(p.x, p.y, d);
      changed = true;
      break;
    }
    if (changed) {
      ++result.changed;
    } else {
      ++result.rejected_no_change;
      ++result.residual;
    }
  }
  return result;
}

RefusionResult refuse_invalid(std::span<const DisparityMap> new_maps, const MatchList& old_list,
                              std::span<const InvalidMatch> invalid,
                              std::span<const LdrImage> images, const ResponseCurve& response,
                              std::vector<HdrImage> hdr) {
  check_maps(old_list, new_maps, "refuse_invalid");
  RefusionResult result;
  result.list = build_match_list(new_maps, old_list.geometry().sign);
  const WeightFn weight(response.z_max());

  std::vector<std::uint8_t> fused(result.list.size(), 0);
  for (const PixelRef& p : invalid_pixels(old_list, invalid)) {
    const MatchId id = result.list.match_of(p);
    Match& m = result.list[id];
    if (!fused[id]) {
      m.radiance = fuse_match(m, images, response, weight);
      m.has_radiance = true;
      fused[id] = 1;
    }
    hdr[p.view].set_rgb(p.x, p.y, m.radiance);
    ++result.refused_pixels;
  }
  result.hdr = std::move(hdr);
  return result;
}

}  // namespace mvhdr
