#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "mvhdr/core.hpp"
#include "mvhdr/imageio.hpp"
#include "mvhdr/matching.hpp"

namespace mvhdr {

// Per-pixel co-located fusion of one viewpoint's exposure stack.
HdrImage fuse_stack(std::span<const LdrImage> stack, const ResponseCurve& response);
std::vector<HdrImage> build_reference(std::span<const std::vector<LdrImage>> stacks,
                                      const ResponseCurve& response);

inline constexpr double kIncorrectThreshold = 0.06;

// max - min over every channel value of the image.
double radiance_range(const HdrImage& img);

// 1 where the RGB distance to the reference exceeds `fraction` of the
// reference's radiance range.
std::vector<std::uint8_t> classify_pixels(const HdrImage& test, const HdrImage& reference,
                                          double fraction = kIncorrectThreshold);

struct ConfusionCounts {
  // Percentages in [0, 100].
  double correct_pixels = 0.0;
  double incorrect_pixels = 0.0;
  double false_positives = 0.0;
  double false_negatives = 0.0;

  std::size_t detected_correct_ref_correct = 0;
  std::size_t detected_incorrect_ref_incorrect = 0;
  std::size_t detected_incorrect_ref_correct = 0;
  std::size_t detected_correct_ref_incorrect = 0;

  enum EmptyDenominator : unsigned {
    kNoReferenceCorrect = 1u,
    kNoReferenceIncorrect = 2u,
    kNoDetectedIncorrect = 4u,
    kNoDetectedCorrect = 8u,
  };
  unsigned empty = 0;
};

// `detected` marks pixels of detected invalid matches, `error` the
// reference-based incorrect pixels.
ConfusionCounts confusion(std::span<const std::uint8_t> detected,
                          std::span<const std::uint8_t> error);

void write_confusion_csv(std::span<const ConfusionCounts> per_view,
                         const std::filesystem::path& path);

// Colors pixels by the cardinality of their match: 1 black, 2 red,
// 3 orange, 4 yellow, 5 green, 6 cyan, 7 or more gray.
std::array<std::uint8_t, 3> cardinality_color(std::size_t cardinality);
Rgb8Image cardinality_map(const MatchList& list, int view);

inline constexpr double kLogFloor = 1e-6;
double log_rmse(const HdrImage& test, const HdrImage& reference);

// Reference built from disparities computed on equal-exposure captures:
// matches come from `equal_exposure` views, radiance from fusing the
// multi-exposure `images` over those matches.
struct SameExposureReference {
  std::vector<DisparityMap> maps;
  MatchList list;
  std::vector<HdrImage> hdr;
};
SameExposureReference same_exposure_reference(std::span<const LdrImage> equal_exposure,
                                              std::span<const LdrImage> images,
                                              const ResponseCurve& response,
                                              const MatchingConfig& config);

}  // namespace mvhdr
