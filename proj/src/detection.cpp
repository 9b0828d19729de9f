#include "mvhdr/detection.hpp"

#include <cmath>
#include <fstream>

#include "mvhdr/parallel.hpp"

namespace mvhdr {

DetectionConfig DetectionConfig::defaults(int z_max) {
  const double s_max = 3.0 * z_max;
  return {0.02 * s_max, 0.98 * s_max};
}

void DetectionConfig::validate(int z_max) const {
  if (!(sum_lo >= 0.0 && sum_lo < sum_hi && sum_hi <= 3.0 * z_max))
    throw Error("detection: sum interval must satisfy 0 <= a < b <= 3 * z_max");
}

std::vector<int> exposure_classes(std::span<const LdrImage> images) {
  std::vector<double> distinct;
  std::vector<int> classes;
  for (const LdrImage& img : images) {
    const double e = img.exposure();
    int found = -1;
    for (std::size_t k = 0; k < distinct.size(); ++k)
      if (std::abs(distinct[k] - e) <= 1e-9 * std::max(distinct[k], e)) {
        found = static_cast<int>(k);
        break;
      }
    if (found < 0) {
      found = static_cast<int>(distinct.size());
      distinct.push_back(e);
    }
    classes.push_back(found);
  }
  return classes;
}

std::vector<InvalidMatch> detect_invalid(MatchList& list, std::span<const LdrImage> images,
                                         const DetectionConfig& config) {
  if (static_cast<int>(images.size()) != list.geometry().n_views)
    throw Error("detect_invalid: image count does not match the match list");
  config.validate(images.front().z_max());
  const std::vector<int> classes = exposure_classes(images);
  int n_classes = 0;
  for (int c : classes) n_classes = std::max(n_classes, c + 1);
  if (n_classes > 64) throw Error("detect_invalid: more than 64 distinct exposures");
  const std::uint64_t full = n_classes == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << n_classes) - 1;

  auto matches = list.matches();
  std::vector<unsigned> hits(matches.size(), 0);
  parallel_for(0, static_cast<int>(matches.size()), [&](int i) {
    Match& m = matches[i];
    unsigned criteria = 0;
    std::uint64_t covered = 0;
    for (const PixelRef& p : m.pixels) {
      const Rgb16 v = images[p.view].rgb(p.x, p.y);
      const double sum = static_cast<double>(v[0]) + v[1] + v[2];
      if (sum < config.sum_lo || sum > config.sum_hi) criteria |= kCriterionSum;
      covered |= std::uint64_t{1} << classes[p.view];
    }
    if (covered != full) criteria |= kCriterionCoverage;
    m.validity = criteria ? Validity::kInvalid : Validity::kValid;
    hits[i] = criteria;
  });

  std::vector<InvalidMatch> invalid;
  for (std::size_t i = 0; i < hits.size(); ++i)
    if (hits[i]) invalid.push_back({static_cast<MatchId>(i), hits[i]});
  return invalid;
}

void write_invalid_csv(const MatchList& list, std::span<const InvalidMatch> invalid,
                       const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "view,x,y,match_id,criterion\n";
  for (const InvalidMatch& inv : invalid) {
    const char* criterion = inv.criteria == (kCriterionSum | kCriterionCoverage) ? "sum+coverage"
                            : inv.criteria == kCriterionSum                     ? "sum"
                                                                                : "coverage";
    for (const PixelRef& p : list[inv.id].pixels)
      out << p.view << ',' << p.x << ',' << p.y << ',' << inv.id << ',' << criterion << '\n';
  }
  if (!out) throw Error("I/O failure writing " + path.string());
}

std::vector<std::vector<std::uint8_t>> invalid_pixel_masks(const MatchList& list,
                                                           std::span<const InvalidMatch> invalid) {
  const ViewGeometry& geo = list.geometry();
  std::vector<std::vector<std::uint8_t>> masks(geo.n_views,
                                               std::vector<std::uint8_t>(geo.pixel_count(), 0));
  for (const InvalidMatch& inv : invalid)
    for (const PixelRef& p : list[inv.id].pixels)
      masks[p.view][static_cast<std::size_t>(p.y) * geo.width + p.x] = 1;
  return masks;
}

}  // namespace mvhdr
