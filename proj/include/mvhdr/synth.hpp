#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mvhdr/core.hpp"

namespace mvhdr {

enum class TextureKind { kNoise, kGradient };

// Radiance texture in scene coordinates (column as seen from view 0, row).
struct Texture {
  TextureKind kind = TextureKind::kNoise;
  Rgb base{100.0, 100.0, 100.0};
  // Gradient: `base` at the left edge of the layer to `end` at the right
  // edge. Both kinds are modulated by smooth value noise of relative
  // `amplitude` on a `cell`-pixel lattice plus per-pixel noise of relative
  // amplitude `fine`.
  double amplitude = 0.3;
  int cell = 5;
  double fine = 0.0;
  Rgb end{100.0, 100.0, 100.0};
  std::uint64_t seed = 1;

  Rgb sample(double u, double v, double layer_width) const;
};

struct Layer {
  int x0 = 0;  // left column in view 0
  int y0 = 0;
  int width = 0;
  int height = 0;
  int disparity = 0;
  int z = 0;  // larger is closer
  Texture texture;
};

enum class ResponseModel { kLinear, kGamma };

struct SceneSpec {
  int width = 64;
  int height = 48;
  int n_views = 2;
  int bit_depth = 8;
  int d_min = 0;
  int d_max = 0;
  int geometry_sign = +1;
  Texture background;  // sits at d_min behind every layer
  std::vector<Layer> layers;
  // Per view shutter time and neutral-density transmittance.
  std::vector<double> shutter;
  std::vector<double> transmittance;
  // Co-located exposures rendered for every viewpoint.
  std::vector<double> reference_exposures;
  ResponseModel response = ResponseModel::kLinear;
  double gamma = 2.2;
  double noise = 0.0;  // Gaussian sigma in LDR levels
  std::uint64_t seed = 1;

  void validate() const;
  double effective_exposure(int view) const { return shutter[view] * transmittance[view]; }
};

struct RenderedDataset {
  SceneSpec spec;
  std::vector<LdrImage> views;
  std::vector<DisparityMap> gt_disparity;
  std::vector<HdrImage> gt_radiance;
  std::vector<std::vector<LdrImage>> reference_stacks;
  // Manifest with file names relative to the dataset directory.
  DatasetManifest manifest;
};

RenderedDataset render(const SceneSpec& spec);

// Renders one viewpoint of the scene at an arbitrary exposure.
LdrImage render_view(const SceneSpec& spec, int view, double exposure);

struct EqualExposureViews {
  double exposure = 0.0;
  std::vector<LdrImage> views;
};
// Renders every view at one common exposure, picked among the distinct
// effective exposures of the dataset as the one leaving the most pixels
// exploitable in all channels (ties go to the larger exposure).
EqualExposureViews equal_exposure_renders(const SceneSpec& spec, double lo = 0.02, double hi = 0.98);

// The sensor's true inverse response.
ResponseCurve model_response(const SceneSpec& spec);

// flat, edges, occlusion, saturation-ladder
SceneSpec preset(std::string_view name, std::uint64_t seed = 7);
std::vector<std::string> preset_names();

SceneSpec scene_from_json(const std::string& text);
std::string scene_to_json(const SceneSpec& spec);

// Writes views, reference stacks, ground truth and manifest.json into
// `dir` (created when missing).
void write_dataset(const RenderedDataset& data, const std::filesystem::path& dir);

// Pixels with a known disparity and an 8-neighbor of different known
// disparity.
std::vector<PixelRef> edge_band(std::span<const DisparityMap> maps);

struct CorruptionResult {
  std::vector<DisparityMap> maps;
  std::vector<PixelRef> corrupted;
};

// Replaces the disparity of round(fraction * |band|) edge-band pixels with
// a value offset by 1..3 (never the original), kept inside [d_min, d_max].
CorruptionResult corrupt_disparities(std::span<const DisparityMap> maps, double fraction,
                                     std::uint64_t seed, int d_min, int d_max);

}  // namespace mvhdr
