#pragma once

#include <span>
#include <vector>

#include "mvhdr/core.hpp"

namespace mvhdr {

// Triangle weight: z for z <= z_max / 2, z_max - z above.
double weight_hat(int z, int z_max);

class WeightFn {
 public:
  explicit WeightFn(int z_max);

  double operator()(int z) const { return table_[z]; }
  int z_max() const { return static_cast<int>(table_.size()) - 1; }

 private:
  std::vector<double> table_;
};

// Co-located samples for response recovery: sites[i][j] is the RGB level of
// sample site i in exposure j.
struct ResponseSamples {
  int bit_depth = 8;
  std::vector<double> exposures;
  std::vector<std::vector<Rgb16>> sites;
};

// Picks `n_sites` locations whose mean levels in the median exposure are
// spread evenly over the sensor range.
ResponseSamples sample_colocated(std::span<const LdrImage> stack, int n_sites = 50);
// Concatenates the samples of several stacks sharing one bit depth.
ResponseSamples merge_samples(std::span<const ResponseSamples> parts);

inline constexpr double kDefaultSmoothness = 10.0;

// Least-squares recovery of g = ln f^-1 per channel with a weighted
// second-difference smoothness term, normalized so that g(mid) = 0.
// Throws when the system is underdetermined. The returned curve's
// monotone() flag is cleared when g decreases by more than
// `monotone_tolerance` anywhere.
ResponseCurve recover_response(const ResponseSamples& samples, double lambda = kDefaultSmoothness,
                               double monotone_tolerance = 1e-3);

struct NormalizedImage {
  LdrImage image;
  // One flag per sample: the input sample was at 0 or z_max, or the
  // re-encoded value fell outside [0, z_max] and was clamped.
  std::vector<std::uint8_t> saturated;

  bool is_saturated(int x, int y, int c) const {
    return saturated[3 * (static_cast<std::size_t>(y) * image.width() + x) + c] != 0;
  }
};

// Re-encodes `img` as if it had been captured with `target_exposure`.
NormalizedImage normalize_exposure(const LdrImage& img, const ResponseCurve& response,
                                   double target_exposure);

}  // namespace mvhdr
