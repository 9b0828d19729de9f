#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mvhdr/core.hpp"
#include "mvhdr/correction.hpp"
#include "mvhdr/detection.hpp"
#include "mvhdr/evaluation.hpp"
#include "mvhdr/matching.hpp"
#include "mvhdr/response.hpp"

namespace mvhdr {

struct EmitFlags {
  bool previews = false;
  bool cardinality_maps = false;
  bool confusion = true;
  bool invalid = true;
};

struct RunConfig {
  std::filesystem::path manifest;
  std::filesystem::path output_dir;
  CorrectionMethod method = CorrectionMethod::kNone;
  std::optional<int> d_min;
  std::optional<int> d_max;
  std::optional<std::pair<double, double>> sum_interval;
  std::optional<std::pair<double, double>> exploitable;
  std::optional<std::filesystem::path> response_csv;
  double lambda = kDefaultSmoothness;
  int window_radius = 1;
  int threads = 0;
  EmitFlags emit;
};

// Stage failure carrying the name of the stage that raised it.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<LdrImage> images;
  std::vector<std::vector<LdrImage>> reference_stacks;
};

// Reads every image of the manifest and attaches exposures and view indices.
Dataset load_dataset(const DatasetManifest& manifest);

// Linear sensors use the identity curve. Otherwise the curve comes from
// `csv` when given, or is recovered from the co-located reference stacks.
ResponseCurve resolve_response(const Dataset& data, const std::optional<std::filesystem::path>& csv,
                               double lambda);

MatchingConfig matching_config(const DatasetManifest& manifest, const RunConfig& config);
DetectionConfig detection_config(int z_max, const RunConfig& config);

// Normalization target for matching: the smallest effective exposure.
double matching_target_exposure(std::span<const LdrImage> images);

struct Context {
  RunConfig config;
  Dataset data;
  ResponseCurve response;
  MatchingConfig matching;
  DetectionConfig detection;
};

Context prepare(const RunConfig& config);

std::vector<MatchingView> stage_matching_views(const Context& ctx);
std::vector<DisparityMap> stage_match(const Context& ctx, std::span<const MatchingView> views);

struct FusedDataset {
  MatchList list;
  std::vector<HdrImage> hdr;
};
FusedDataset stage_fuse(const Context& ctx, std::span<const DisparityMap> maps);

std::vector<InvalidMatch> stage_detect(const Context& ctx, MatchList& list);

struct CorrectionOutcome {
  std::vector<HdrImage> hdr;
  std::vector<DisparityMap> maps;
  std::size_t changed = 0;
  std::size_t residual = 0;
  int passes = 0;
};
// `fused.list` must already carry the validity set by detection.
CorrectionOutcome stage_correct(const Context& ctx, CorrectionMethod method, FusedDataset fused,
                                std::span<const InvalidMatch> invalid,
                                std::span<const DisparityMap> maps,
                                std::span<const MatchingView> views);

struct EvaluationOutcome {
  std::vector<ConfusionCounts> confusion;
  std::vector<std::size_t> incorrect_pixels;
  std::vector<double> log_rmse;
};
EvaluationOutcome stage_evaluate(const Context& ctx, std::span<const HdrImage> hdr,
                                 const std::vector<std::vector<std::uint8_t>>& detected);

// Reads the view,x,y rows of an invalid-pixel CSV back into per-view masks.
std::vector<std::vector<std::uint8_t>> read_invalid_masks(const std::filesystem::path& path,
                                                          const ViewGeometry& geometry);

// Output file names shared by the pipeline and the stage subcommands.
std::filesystem::path disparity_file(const std::filesystem::path& dir, int view);
std::filesystem::path hdr_pfm_file(const std::filesystem::path& dir, int view);
std::filesystem::path hdr_rgbe_file(const std::filesystem::path& dir, int view);

std::vector<DisparityMap> read_disparities(const std::filesystem::path& dir, const Dataset& data);
void write_disparities(std::span<const DisparityMap> maps, const std::filesystem::path& dir);
void write_hdr_images(std::span<const HdrImage> hdr, const std::filesystem::path& dir);

// Full run: match, fuse, detect, optional correction and evaluation when
// reference stacks exist. Writes artifacts into config.output_dir and
// returns the summary JSON text (also written to summary.json).
std::string run_pipeline(const RunConfig& config);

}  // namespace mvhdr
