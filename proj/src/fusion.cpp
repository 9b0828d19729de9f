#include "mvhdr/fusion.hpp"

#include <cmath>

#include "mvhdr/parallel.hpp"

namespace mvhdr {

Rgb fuse_colocated(std::span<const ExposureSample> stack, const ResponseCurve& response,
                   const WeightFn& weight) {
  if (stack.empty()) throw Error("fuse_colocated: empty stack");
  const double mid = 0.5 * response.z_max();
  Rgb out{};
  for (int c = 0; c < 3; ++c) {
    double num = 0.0;
    double den = 0.0;
    for (const ExposureSample& s : stack) {
      const int z = s.levels[c];
      const double w = weight(z);
      num += w * response.inverse(c, z) / s.exposure;
      den += w;
    }
    if (den > 0.0) {
      out[c] = num / den;
      continue;
    }
    const ExposureSample* nearest = &stack.front();
    for (const ExposureSample& s : stack)
      if (std::abs(s.levels[c] - mid) < std::abs(nearest->levels[c] - mid)) nearest = &s;
    out[c] = response.inverse(c, nearest->levels[c]) / nearest->exposure;
  }
  return out;
}

Rgb fuse_match(const Match& match, std::span<const LdrImage> images,
               const ResponseCurve& response, const WeightFn& weight) {
  if (match.pixels.empty()) throw Error("fuse_match: empty match");
  const double mid = 0.5 * response.z_max();
  Rgb out{};
  for (int c = 0; c < 3; ++c) {
    double num = 0.0;
    double den = 0.0;
    int nearest_level = -1;
    double nearest_exposure = 1.0;
    for (const PixelRef& p : match.pixels) {
      const LdrImage& img = images[p.view];
      const int z = img.at(p.x, p.y, c);
      const double w = weight(z);
      num += w * response.inverse(c, z) / img.exposure();
      den += w;
      if (nearest_level < 0 || std::abs(z - mid) < std::abs(nearest_level - mid)) {
        nearest_level = z;
        nearest_exposure = img.exposure();
      }
    }
    out[c] = den > 0.0 ? num / den : response.inverse(c, nearest_level) / nearest_exposure;
  }
  return out;
}

std::vector<HdrImage> fuse_all(MatchList& list, std::span<const LdrImage> images,
                               const ResponseCurve& response) {
  const ViewGeometry& geo = list.geometry();
  if (static_cast<int>(images.size()) != geo.n_views)
    throw Error("fuse_all: image count does not match the match list");
  for (const LdrImage& img : images)
    if (img.width() != geo.width || img.height() != geo.height)
      throw Error("fuse_all: image size does not match the match list");
  const WeightFn weight(response.z_max());
  auto matches = list.matches();
  parallel_for(0, static_cast<int>(matches.size()), [&](int i) {
    matches[i].radiance = fuse_match(matches[i], images, response, weight);
    matches[i].has_radiance = true;
  });
  return paint_radiance(list);
}

std::vector<HdrImage> paint_radiance(const MatchList& list) {
  const ViewGeometry& geo = list.geometry();
  std::vector<HdrImage> out;
  for (int v = 0; v < geo.n_views; ++v) out.emplace_back(geo.width, geo.height, v);
  for (const Match& m : list.matches())
    for (const PixelRef& p : m.pixels) out[p.view].set_rgb(p.x, p.y, m.radiance);
  return out;
}

}  // namespace mvhdr
