#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "mvhdr/core.hpp"

namespace mvhdr {

struct DetectionConfig {
  // Accepted interval for the R+G+B sum of every member pixel.
  double sum_lo = 0.0;
  double sum_hi = 0.0;

  static DetectionConfig defaults(int z_max);
  void validate(int z_max) const;
};

enum DetectionCriterion : unsigned {
  kCriterionSum = 1u,
  kCriterionCoverage = 2u,
};

struct InvalidMatch {
  MatchId id = 0;
  unsigned criteria = 0;
};

// Maps each view to the index of its effective exposure among the distinct
// exposures of the dataset (relative tolerance 1e-9).
std::vector<int> exposure_classes(std::span<const LdrImage> images);

// Flags a match invalid when a member's RGB sum leaves [sum_lo, sum_hi] or
// when its members do not cover every distinct exposure. Sets the validity
// of every match and returns the invalid ones in id order. Reads only LDR
// levels and exposures.
std::vector<InvalidMatch> detect_invalid(MatchList& list, std::span<const LdrImage> images,
                                         const DetectionConfig& config);

// CSV: view,x,y,match_id,criterion (one row per pixel of each invalid match).
void write_invalid_csv(const MatchList& list, std::span<const InvalidMatch> invalid,
                       const std::filesystem::path& path);

// Per-view masks of pixels that belong to an invalid match.
std::vector<std::vector<std::uint8_t>> invalid_pixel_masks(const MatchList& list,
                                                           std::span<const InvalidMatch> invalid);

}  // namespace mvhdr
