#pragma once

#include <span>
#include <vector>

#include "mvhdr/core.hpp"
#include "mvhdr/response.hpp"

namespace mvhdr {

struct ExposureSample {
  Rgb16 levels{0, 0, 0};
  double exposure = 1.0;
};

// Weighted average of f^-1(z_n) / exposure_n per channel. When every weight
// is zero the sample closest to mid-range is used on its own.
Rgb fuse_colocated(std::span<const ExposureSample> stack, const ResponseCurve& response,
                   const WeightFn& weight);

// Same estimator over the member pixels of a match, each read from its own
// view at its own exposure.
Rgb fuse_match(const Match& match, std::span<const LdrImage> images,
               const ResponseCurve& response, const WeightFn& weight);

// Fuses every match, stores the radiance on it, and paints one HDR image
// per view.
std::vector<HdrImage> fuse_all(MatchList& list, std::span<const LdrImage> images,
                               const ResponseCurve& response);

// Paints the stored match radiances back into per-view images.
std::vector<HdrImage> paint_radiance(const MatchList& list);

}  // namespace mvhdr
