#include "mvhdr/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "mvhdr/fusion.hpp"
#include "mvhdr/parallel.hpp"

namespace mvhdr {

HdrImage fuse_stack(std::span<const LdrImage> stack, const ResponseCurve& response) {
  if (stack.empty()) throw Error("build_reference: missing reference stack");
  const LdrImage& first = stack.front();
  for (const LdrImage& img : stack)
    if (img.width() != first.width() || img.height() != first.height())
      throw Error("build_reference: stack images differ in size");
  const WeightFn weight(response.z_max());
  HdrImage out(first.width(), first.height(), first.view_index());
  parallel_for(0, first.height(), [&](int y) {
    std::vector<ExposureSample> samples(stack.size());
    for (int x = 0; x < first.width(); ++x) {
      for (std::size_t k = 0; k < stack.size(); ++k)
        samples[k] = {stack[k].rgb(x, y), stack[k].exposure()};
      out.set_rgb(x, y, fuse_colocated(samples, response, weight));
    }
  });
  return out;
}

std::vector<HdrImage> build_reference(std::span<const std::vector<LdrImage>> stacks,
                                      const ResponseCurve& response) {
  std::vector<HdrImage> out;
  for (std::size_t v = 0; v < stacks.size(); ++v) {
    out.push_back(fuse_stack(stacks[v], response));
    out.back().set_view_index(static_cast<int>(v));
  }
  return out;
}

double radiance_range(const HdrImage& img) {
  const auto values = img.values();
  if (values.empty()) return 0.0;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  return *hi - *lo;
}

std::vector<std::uint8_t> classify_pixels(const HdrImage& test, const HdrImage& reference,
                                          double fraction) {
  if (test.width() != reference.width() || test.height() != reference.height())
    throw Error("classify_pixels: dimension mismatch");
  const double threshold = fraction * radiance_range(reference);
  std::vector<std::uint8_t> mask(test.pixel_count(), 0);
  for (int y = 0; y < test.height(); ++y)
    for (int x = 0; x < test.width(); ++x) {
      const Rgb a = test.rgb(x, y);
      const Rgb b = reference.rgb(x, y);
      const double dist = std::sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) +
                                    (a[2] - b[2]) * (a[2] - b[2]));
      mask[static_cast<std::size_t>(y) * test.width() + x] = dist > threshold ? 1 : 0;
    }
  return mask;
}

ConfusionCounts confusion(std::span<const std::uint8_t> detected,
                          std::span<const std::uint8_t> error) {
  if (detected.size() != error.size()) throw Error("confusion: pixel domains differ");
  ConfusionCounts c;
  for (std::size_t i = 0; i < detected.size(); ++i) {
    const bool det = detected[i] != 0;
    const bool err = error[i] != 0;
    if (!det && !err) ++c.detected_correct_ref_correct;
    else if (det && err) ++c.detected_incorrect_ref_incorrect;
    else if (det && !err) ++c.detected_incorrect_ref_correct;
    else ++c.detected_correct_ref_incorrect;
  }
  auto pct = [&](std::size_t num, std::size_t den, unsigned flag) {
    if (den == 0) {
      c.empty |= flag;
      return 0.0;
    }
    return 100.0 * static_cast<double>(num) / static_cast<double>(den);
  };
  const std::size_t ref_correct = c.detected_correct_ref_correct + c.detected_incorrect_ref_correct;
  const std::size_t ref_incorrect =
      c.detected_incorrect_ref_incorrect + c.detected_correct_ref_incorrect;
  const std::size_t det_incorrect =
      c.detected_incorrect_ref_incorrect + c.detected_incorrect_ref_correct;
  const std::size_t det_correct = c.detected_correct_ref_correct + c.detected_correct_ref_incorrect;
  c.correct_pixels =
      pct(c.detected_correct_ref_correct, ref_correct, ConfusionCounts::kNoReferenceCorrect);
  c.incorrect_pixels = pct(c.detected_incorrect_ref_incorrect, ref_incorrect,
                           ConfusionCounts::kNoReferenceIncorrect);
  c.false_positives =
      pct(c.detected_incorrect_ref_correct, det_incorrect, ConfusionCounts::kNoDetectedIncorrect);
  c.false_negatives =
      pct(c.detected_correct_ref_incorrect, det_correct, ConfusionCounts::kNoDetectedCorrect);
  return c;
}

void write_confusion_csv(std::span<const ConfusionCounts> per_view,
                         const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "view,correct_pixels,incorrect_pixels,false_positives,false_negatives\n";
  char buf[256];
  for (std::size_t v = 0; v < per_view.size(); ++v) {
    const ConfusionCounts& c = per_view[v];
    std::snprintf(buf, sizeof(buf), "%zu,%.6g,%.6g,%.6g,%.6g\n", v, c.correct_pixels,
                  c.incorrect_pixels, c.false_positives, c.false_negatives);
    out << buf;
  }
  if (!out) throw Error("I/O failure writing " + path.string());
}

std::array<std::uint8_t, 3> cardinality_color(std::size_t cardinality) {
  switch (cardinality) {
    case 0:
    case 1: return {0, 0, 0};
    case 2: return {255, 0, 0};
    case 3: return {255, 165, 0};
    case 4: return {255, 255, 0};
    case 5: return {0, 255, 0};
    case 6: return {0, 255, 255};
    default: return {128, 128, 128};
  }
}

Rgb8Image cardinality_map(const MatchList& list, int view) {
  const ViewGeometry& geo = list.geometry();
  if (view < 0 || view >= geo.n_views) throw Error("cardinality_map: bad view index");
  Rgb8Image out(geo.width, geo.height);
  for (int y = 0; y < geo.height; ++y)
    for (int x = 0; x < geo.width; ++x)
      out.set(x, y, cardinality_color(list[list.match_of({view, x, y})].cardinality()));
  return out;
}

double log_rmse(const HdrImage& test, const HdrImage& reference) {
  if (test.width() != reference.width() || test.height() != reference.height())
    throw Error("log_rmse: dimension mismatch");
  const auto a = test.values();
  const auto b = reference.values();
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = std::log(std::max(a[i], 0.0) + kLogFloor) - std::log(std::max(b[i], 0.0) + kLogFloor);
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(a.size()));
}

SameExposureReference same_exposure_reference(std::span<const LdrImage> equal_exposure,
                                              std::span<const LdrImage> images,
                                              const ResponseCurve& response,
                                              const MatchingConfig& config) {
  if (equal_exposure.size() != images.size())
    throw Error("same_exposure_reference: view count mismatch");
  for (const LdrImage& img : equal_exposure)
    if (std::abs(img.exposure() - equal_exposure.front().exposure()) >
        1e-9 * equal_exposure.front().exposure())
      throw Error("same_exposure_reference: captures must share one exposure");

  // Equal exposures need no normalization; only flag clipped samples.
  std::vector<NormalizedImage> normalized;
  for (const LdrImage& img : equal_exposure)
    normalized.push_back(normalize_exposure(img, response, img.exposure()));
  const auto views = make_matching_views(equal_exposure, normalized, config);

  SameExposureReference out;
  out.maps = compute_disparity_maps(views, config);
  out.list = build_match_list(out.maps, config.geometry_sign);
  out.hdr = fuse_all(out.list, images, response);
  return out;
}

}  // namespace mvhdr
