#pragma once

#include <array>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "mvhdr/core.hpp"
#include "mvhdr/detection.hpp"
#include "mvhdr/matching.hpp"

namespace mvhdr {

enum class CorrectionMethod { kNone, kColor, kHeuristicDisparity, kMonochromatic };

std::optional<CorrectionMethod> parse_correction_method(std::string_view name);
const char* to_string(CorrectionMethod method);

// ---- Radiance interpolation from confidence-weighted neighborhoods ----

struct ColorCorrectionResult {
  std::vector<HdrImage> hdr;
  // Per view, per pixel confidence index after correction.
  std::vector<std::vector<double>> alpha;
  std::size_t corrected = 0;
  std::size_t residual = 0;
  int iterations = 0;
  double initial_threshold = 0.0;
  double final_threshold = 0.0;
};

// Repeatedly assigns to each invalid match the alpha-weighted mean radiance
// of the 3x3 neighborhoods of its members once the neighborhood confidence
// sum exceeds the threshold. The threshold starts at 8 * max cardinality and
// drops by 0.5 after a pass that corrects nothing; the loop stops when the
// list is empty or the threshold falls below 0.5. All writes of a pass are
// committed together at its end.
ColorCorrectionResult correct_color(MatchList& list, std::span<const InvalidMatch> invalid,
                                    std::vector<HdrImage> hdr);

// ---- Disparity heuristics on the 3x3 neighborhood ----

// Neighbor order:   p0 p1 p2
//                   p7 .  p3
//                   p6 p5 p4
inline constexpr std::array<std::array<int, 2>, 8> kNeighborOffsets{{
    {-1, -1}, {0, -1}, {1, -1}, {1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}}};

struct Neighborhood {
  std::array<bool, 8> exploitable{};
  std::array<int, 8> disparity{};

  int exploitable_count() const;
};

// Horizontal equality, vertical equality, then horizontal and vertical
// minimum, then the lower median of the exploitable disparities.
// std::nullopt when no neighbor is exploitable.
std::optional<int> select_disparity_heuristic(const Neighborhood& n);

// A neighbor counts as exploitable when it is inside the image, its
// disparity is known, and every channel of its LDR value is exploitable.
Neighborhood gather_neighborhood(const DisparityMap& map, const LdrImage& image, int x, int y,
                                 const MatchingConfig& config);

struct DisparityCorrectionResult {
  std::vector<DisparityMap> maps;
  std::size_t changed = 0;
  std::size_t rejected_no_change = 0;
  std::size_t residual = 0;
  int passes = 0;
};

// Pixels of invalid matches are treated as singletons. The required count of
// exploitable neighbors starts at 8 and drops by one after a pass that
// changes nothing; stops at 0. A proposal is only accepted when it differs
// from the pixel's current disparity.
DisparityCorrectionResult correct_heuristic(const MatchList& list,
                                            std::span<const InvalidMatch> invalid,
                                            std::span<const DisparityMap> maps,
                                            std::span<const LdrImage> images,
                                            const MatchingConfig& config);

// For each pixel of an invalid match, walks the channels in order of
// |z_c - z_max / 2| and takes the first per-channel disparity that is known
// and differs from the current disparity.
DisparityCorrectionResult correct_monochromatic(
    const MatchList& list, std::span<const InvalidMatch> invalid,
    const std::array<std::vector<DisparityMap>, 3>& channel_maps,
    std::span<const LdrImage> images, std::span<const DisparityMap> maps);

struct RefusionResult {
  std::vector<HdrImage> hdr;
  MatchList list;
  std::size_t refused_pixels = 0;
};

// Rebuilds the match list from corrected maps and recomputes radiance only
// for pixels that belonged to invalid matches of `old_list`.
RefusionResult refuse_invalid(std::span<const DisparityMap> new_maps, const MatchList& old_list,
                              std::span<const InvalidMatch> invalid,
                              std::span<const LdrImage> images, const ResponseCurve& response,
                              std::vector<HdrImage> hdr);

}  // namespace mvhdr
