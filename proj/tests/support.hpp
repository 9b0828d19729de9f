#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "mvhdr/pipeline.hpp"
#include "mvhdr/synth.hpp"

namespace mvhdr::test {

// In-memory pipeline context over a rendered dataset, using the true response.
inline Context context_for(const RenderedDataset& data) {
  Context ctx;
  ctx.data.manifest = data.manifest;
  ctx.data.images = data.views;
  ctx.data.reference_stacks = data.reference_stacks;
  ctx.response = model_response(data.spec);
  ctx.matching.d_min = data.spec.d_min;
  ctx.matching.d_max = data.spec.d_max;
  ctx.matching.geometry_sign = data.spec.geometry_sign;
  ctx.detection = DetectionConfig::defaults(data.views.front().z_max());
  return ctx;
}

inline std::size_t ones(const std::vector<std::uint8_t>& mask) {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

inline LdrImage filled(int w, int h, Rgb16 value, double exposure = 1.0, int view = 0) {
  LdrImage img(w, h, 8, exposure, view);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) img.set_rgb(x, y, value);
  return img;
}

}  // namespace mvhdr::test
