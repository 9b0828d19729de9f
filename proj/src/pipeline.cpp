#include "mvhdr/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mvhdr/fusion.hpp"
#include "mvhdr/imageio.hpp"
#include "mvhdr/parallel.hpp"

namespace mvhdr {

namespace {

template <class F>
auto tagged(const char* stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

}  // namespace

Dataset load_dataset(const DatasetManifest& manifest) {
  Dataset data;
  data.manifest = manifest;
  for (int v = 0; v < manifest.n_views(); ++v) {
    const ViewEntry& entry = manifest.views[v];
    LdrImage img = read_ldr(manifest.resolve(entry.path));
    if (img.bit_depth() != manifest.bit_depth)
      throw Error(entry.path.string() + ": bit depth differs from the manifest");
    img.set_exposure(entry.effective());
    img.set_view_index(v);
    if (!data.images.empty() && (img.width() != data.images[0].width() ||
                                 img.height() != data.images[0].height()))
      throw Error(entry.path.string() + ": image size differs from view 0");
    std::vector<LdrImage> stack;
    for (const ExposureEntry& ref : entry.reference_stack) {
      LdrImage r = read_ldr(manifest.resolve(ref.path));
      if (r.bit_depth() != manifest.bit_depth || r.width() != img.width() ||
          r.height() != img.height())
        throw Error(ref.path.string() + ": reference image does not match its view");
      r.set_exposure(ref.effective());
      r.set_view_index(v);
      stack.push_back(std::move(r));
    }
    data.images.push_back(std::move(img));
    data.reference_stacks.push_back(std::move(stack));
  }
  return data;
}

ResponseCurve resolve_response(const Dataset& data, const std::optional<std::filesystem::path>& csv,
                               double lambda) {
  if (csv) {
    ResponseCurve curve = load_response_csv(*csv);
    if (curve.bit_depth() != data.manifest.bit_depth)
      throw Error("response curve bit depth differs from the dataset");
    return curve;
  }
  if (data.manifest.linear) return ResponseCurve::linear(data.manifest.bit_depth);
  if (!data.manifest.has_reference_stacks())
    throw Error("non-linear sensor needs --response or co-located reference stacks");
  std::vector<ResponseSamples> parts;
  for (const auto& stack : data.reference_stacks) parts.push_back(sample_colocated(stack));
  return recover_response(merge_samples(parts), lambda);
}

MatchingConfig matching_config(const DatasetManifest& manifest, const RunConfig& config) {
  MatchingConfig m;
  m.d_min = config.d_min.value_or(manifest.d_min);
  m.d_max = config.d_max.value_or(manifest.d_max);
  m.window_radius = config.window_radius;
  m.geometry_sign = manifest.geometry_sign;
  if (config.exploitable) {
    m.exploitable_lo = config.exploitable->first;
    m.exploitable_hi = config.exploitable->second;
  }
  m.validate();
  return m;
}

DetectionConfig detection_config(int z_max, const RunConfig& config) {
  DetectionConfig d = DetectionConfig::defaults(z_max);
  if (config.sum_interval) {
    d.sum_lo = config.sum_interval->first;
    d.sum_hi = config.sum_interval->second;
  }
  d.validate(z_max);
  return d;
}

double matching_target_exposure(std::span<const LdrImage> images) {
  double target = images.front().exposure();
  for (const LdrImage& img : images) target = std::min(target, img.exposure());
  return target;
}

Context prepare(const RunConfig& config) {
  Context ctx;
  ctx.config = config;
  set_thread_count(config.threads);
  ctx.data = tagged("load", [&] { return load_dataset(load_manifest(config.manifest)); });
  ctx.response = tagged("respond", [&] {
    return resolve_response(ctx.data, config.response_csv, config.lambda);
  });
  ctx.matching = tagged("config", [&] { return matching_config(ctx.data.manifest, config); });
  ctx.detection = tagged("config", [&] {
    return detection_config(ctx.data.images.front().z_max(), config);
  });
  return ctx;
}

std::vector<MatchingView> stage_matching_views(const Context& ctx) {
  return tagged("normalize", [&] {
    const double target = matching_target_exposure(ctx.data.images);
    std::vector<NormalizedImage> normalized(ctx.data.images.size());
    parallel_for(0, static_cast<int>(normalized.size()), [&](int v) {
      normalized[v] = normalize_exposure(ctx.data.images[v], ctx.response, target);
    });
    return make_matching_views(ctx.data.images, normalized, ctx.matching);
  });
}

std::vector<DisparityMap> stage_match(const Context& ctx, std::span<const MatchingView> views) {
  return tagged("match", [&] { return compute_disparity_maps(views, ctx.matching); });
}

FusedDataset stage_fuse(const Context& ctx, std::span<const DisparityMap> maps) {
  return tagged("fuse", [&] {
    FusedDataset out;
    out.list = build_match_list(maps, ctx.matching.geometry_sign);
    out.hdr = fuse_all(out.list, ctx.data.images, ctx.response);
    return out;
  });
}

std::vector<InvalidMatch> stage_detect(const Context& ctx, MatchList& list) {
  return tagged("detect", [&] { return detect_invalid(list, ctx.data.images, ctx.detection); });
}

CorrectionOutcome stage_correct(const Context& ctx, CorrectionMethod method, FusedDataset fused,
                                std::span<const InvalidMatch> invalid,
                                std::span<const DisparityMap> maps,
                                std::span<const MatchingView> views) {
  return tagged("correct", [&] {
    CorrectionOutcome out;
    out.maps.assign(maps.begin(), maps.end());
    switch (method) {
      case CorrectionMethod::kNone:
        out.hdr = std::move(fused.hdr);
        out.residual = invalid.size();
        break;
      case CorrectionMethod::kColor: {
        ColorCorrectionResult r = correct_color(fused.list, invalid, std::move(fused.hdr));
        out.hdr = std::move(r.hdr);
        out.changed = r.corrected;
        out.residual = r.residual;
        out.passes = r.iterations;
        break;
      }
      case CorrectionMethod::kHeuristicDisparity:
      case CorrectionMethod::kMonochromatic: {
        DisparityCorrectionResult r;
        if (method == CorrectionMethod::kHeuristicDisparity) {
          r = correct_heuristic(fused.list, invalid, maps, ctx.data.images, ctx.matching);
        } else {
          const auto channel_maps = per_channel_disparities(views, ctx.matching);
          r = correct_monochromatic(fused.list, invalid, channel_maps, ctx.data.images, maps);
        }
        RefusionResult refused = refuse_invalid(r.maps, fused.list, invalid, ctx.data.images,
                                                ctx.response, std::move(fused.hdr));
        out.hdr = std::move(refused.hdr);
        out.maps = std::move(r.maps);
        out.changed = r.changed;
        out.residual = r.residual;
        out.passes = r.passes;
        break;
      }
    }
    return out;
  });
}

EvaluationOutcome stage_evaluate(const Context& ctx, std::span<const HdrImage> hdr,
                                 const std::vector<std::vector<std::uint8_t>>& detected) {
  return tagged("evaluate", [&] {
    if (!ctx.data.manifest.has_reference_stacks())
      throw Error("dataset has no co-located reference stacks");
    const auto reference = build_reference(ctx.data.reference_stacks, ctx.response);
    EvaluationOutcome out;
    for (std::size_t v = 0; v < hdr.size(); ++v) {
      const auto error = classify_pixels(hdr[v], reference[v]);
      out.incorrect_pixels.push_back(
          static_cast<std::size_t>(std::count(error.begin(), error.end(), std::uint8_t{1})));
      out.confusion.push_back(confusion(detected[v], error));
      out.log_rmse.push_back(log_rmse(hdr[v], reference[v]));
    }
    return out;
  });
}

std::vector<std::vector<std::uint8_t>> read_invalid_masks(const std::filesystem::path& path,
                                                          const ViewGeometry& geometry) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<std::vector<std::uint8_t>> masks(geometry.n_views,
                                               std::vector<std::uint8_t>(geometry.pixel_count(), 0));
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    if (++line_no == 1 || line.empty()) continue;
    PixelRef p;
    char c1 = 0, c2 = 0;
    std::istringstream row(line);
    if (!(row >> p.view >> c1 >> p.x >> c2 >> p.y) || c1 != ',' || c2 != ',' || !geometry.contains(p))
      throw Error(path.string() + ":" + std::to_string(line_no) + ": malformed row");
    masks[p.view][static_cast<std::size_t>(p.y) * geometry.width + p.x] = 1;
  }
  return masks;
}

std::filesystem::path disparity_file(const std::filesystem::path& dir, int view) {
  return dir / ("disparity_" + std::to_string(view) + ".pfm");
}
std::filesystem::path hdr_pfm_file(const std::filesystem::path& dir, int view) {
  return dir / ("hdr_" + std::to_string(view) + ".pfm");
}
std::filesystem::path hdr_rgbe_file(const std::filesystem::path& dir, int view) {
  return dir / ("hdr_" + std::to_string(view) + ".hdr");
}

std::vector<DisparityMap> read_disparities(const std::filesystem::path& dir, const Dataset& data) {
  std::vector<DisparityMap> maps;
  for (int v = 0; v < data.manifest.n_views(); ++v) {
    DisparityMap m = read_disparity_pfm(disparity_file(dir, v));
    if (m.width() != data.images[v].width() || m.height() != data.images[v].height())
      throw Error(disparity_file(dir, v).string() + ": size differs from the view");
    m.set_view_index(v);
    maps.push_back(std::move(m));
  }
  return maps;
}

void write_disparities(std::span<const DisparityMap> maps, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (std::size_t v = 0; v < maps.size(); ++v)
    write_disparity_pfm(maps[v], disparity_file(dir, static_cast<int>(v)));
}

void write_hdr_images(std::span<const HdrImage> hdr, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (std::size_t v = 0; v < hdr.size(); ++v) {
    write_hdr_rgbe(hdr[v], hdr_rgbe_file(dir, static_cast<int>(v)));
    write_pfm(hdr[v], hdr_pfm_file(dir, static_cast<int>(v)));
  }
}

std::string run_pipeline(const RunConfig& config) {
  using clock = std::chrono::steady_clock;
  using nlohmann::json;
  json summary;
  json timings;
  auto timed = [&](const char* name, auto&& f) {
    const auto start = clock::now();
    auto result = f();
    timings[name] = std::chrono::duration<double>(clock::now() - start).count();
    return result;
  };

  const std::filesystem::path& out = config.output_dir;
  std::filesystem::create_directories(out);
  const auto failed_marker = out / "FAILED";
  std::filesystem::remove(failed_marker);

  try {
    const Context ctx = timed("prepare", [&] { return prepare(config); });
    const auto views = timed("normalize", [&] { return stage_matching_views(ctx); });
    const auto maps = timed("match", [&] { return stage_match(ctx, views); });
    FusedDataset fused = timed("fuse", [&] { return stage_fuse(ctx, maps); });
    const auto invalid = timed("detect", [&] { return stage_detect(ctx, fused.list); });
    const auto detected = invalid_pixel_masks(fused.list, invalid);
    const std::size_t n_matches = fused.list.size();
    const std::size_t max_card = fused.list.max_cardinality();

    if (config.emit.invalid) write_invalid_csv(fused.list, invalid, out / "invalid.csv");
    if (config.emit.cardinality_maps)
      for (int v = 0; v < ctx.data.manifest.n_views(); ++v)
        write_png(cardinality_map(fused.list, v), out / ("cardmap_" + std::to_string(v) + ".png"));

    const CorrectionOutcome corrected = timed("correct", [&] {
      return stage_correct(ctx, config.method, std::move(fused), invalid, maps, views);
    });

    tagged("write", [&] {
      write_disparities(corrected.maps, out);
      write_hdr_images(corrected.hdr, out);
      if (!ctx.response.is_linear()) save_response_csv(ctx.response, out / "response.csv");
      if (config.emit.previews)
        for (std::size_t v = 0; v < corrected.hdr.size(); ++v)
          write_png_preview(corrected.hdr[v], out / ("preview_" + std::to_string(v) + ".png"));
      return 0;
    });

    summary["schema"] = 1;
    summary["n_views"] = ctx.data.manifest.n_views();
    summary["width"] = ctx.data.images.front().width();
    summary["height"] = ctx.data.images.front().height();
    summary["method"] = to_string(config.method);
    summary["response"] = ctx.response.is_linear() ? "linear" : "recovered";
    summary["disparity_range"] = json::array({ctx.matching.d_min, ctx.matching.d_max});
    std::size_t invalid_pixels = 0;
    for (const auto& m : detected)
      invalid_pixels += static_cast<std::size_t>(std::count(m.begin(), m.end(), std::uint8_t{1}));
    summary["counts"] = {{"matches", n_matches},
                         {"max_cardinality", max_card},
                         {"invalid_matches", invalid.size()},
                         {"invalid_pixels", invalid_pixels},
                         {"corrected", corrected.changed},
                         {"residual", corrected.residual},
                         {"correction_passes", corrected.passes}};

    if (ctx.data.manifest.has_reference_stacks()) {
      // Evaluate the images as stored on disk so that the eval subcommand
      // reproduces these numbers from the PFM files.
      std::vector<HdrImage> stored;
      for (const HdrImage& img : corrected.hdr) stored.push_back(decode_pfm(encode_pfm(img)));
      const EvaluationOutcome eval =
          timed("evaluate", [&] { return stage_evaluate(ctx, stored, detected); });
      if (config.emit.confusion) write_confusion_csv(eval.confusion, out / "confusion.csv");
      json per_view = json::array();
      for (std::size_t v = 0; v < eval.confusion.size(); ++v) {
        const ConfusionCounts& c = eval.confusion[v];
        per_view.push_back({{"view", v},
                            {"incorrect_pixels", eval.incorrect_pixels[v]},
                            {"log_rmse", eval.log_rmse[v]},
                            {"confusion",
                             {{"correct_pixels", c.correct_pixels},
                              {"incorrect_pixels", c.incorrect_pixels},
                              {"false_positives", c.false_positives},
                              {"false_negatives", c.false_negatives}}}});
      }
      summary["evaluation"] = per_view;
    } else {
      summary["evaluation"] = nullptr;
    }
    summary["timings_s"] = timings;
  } catch (const std::exception& e) {
    write_file(failed_marker, std::string(e.what()) + "\n");
    throw;
  }

  std::string text = summary.dump(2) + "\n";
  write_file(out / "summary.json", text);
  return text;
}

}  // namespace mvhdr
