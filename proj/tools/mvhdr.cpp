// Command-line front end for the multi-view HDR pipeline.

#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mvhdr/evaluation.hpp"
#include "mvhdr/imageio.hpp"
#include "mvhdr/pipeline.hpp"
#include "mvhdr/synth.hpp"

namespace {

using namespace mvhdr;
namespace fs = std::filesystem;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::pair<double, double> parse_pair(const std::string& text, const char* flag) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw UsageError(std::string(flag) + " expects a,b");
  try {
    std::size_t used_a = 0, used_b = 0;
    const std::string a = text.substr(0, comma);
    const std::string b = text.substr(comma + 1);
    const double lo = std::stod(a, &used_a);
    const double hi = std::stod(b, &used_b);
    if (used_a != a.size() || used_b != b.size()) throw std::invalid_argument(text);
    return {lo, hi};
  } catch (const std::logic_error&) {
    throw UsageError(std::string(flag) + " expects two numbers a,b");
  }
}

// Flags shared by the subcommands that read a dataset.
struct Options {
  RunConfig run;
  std::string method = "none";
  std::string sum_interval;
  std::string exploitable;
  std::string response;
  std::vector<std::string> emit;
  int d_min = 0, d_max = 0;
  bool has_d_min = false, has_d_max = false;

  void add_dataset(CLI::App* app) {
    app->add_option("--manifest", run.manifest, "Dataset manifest JSON")->required();
    app->add_option("--d-min", d_min, "Smallest disparity searched")
        ->each([this](const std::string&) { has_d_min = true; });
    app->add_option("--d-max", d_max, "Largest disparity searched")
        ->each([this](const std::string&) { has_d_max = true; });
    app->add_option("--sum-interval", sum_interval, "Accepted RGB-sum interval a,b");
    app->add_option("--exploitable", exploitable, "Exploitable level fractions lo,hi");
    app->add_option("--response", response, "Response curve CSV");
    app->add_option("--lambda", run.lambda, "Response smoothness weight");
    app->add_option("--window", run.window_radius, "Matching window radius");
    app->add_option("--threads", run.threads, "Worker threads (0 = all cores)");
  }

  void add_method(CLI::App* app) {
    app->add_option("--method", method, "Correction method: none, color, heuristic, mono");
  }

  void finish() {
    if (has_d_min) run.d_min = d_min;
    if (has_d_max) run.d_max = d_max;
    if (!sum_interval.empty()) run.sum_interval = parse_pair(sum_interval, "--sum-interval");
    if (!exploitable.empty()) run.exploitable = parse_pair(exploitable, "--exploitable");
    if (!response.empty()) run.response_csv = fs::path(response);
    const auto m = parse_correction_method(method);
    if (!m) throw UsageError("unknown --method '" + method + "'");
    run.method = *m;
    for (const std::string& e : emit) {
      if (e == "previews") run.emit.previews = true;
      else if (e == "cardmaps") run.emit.cardinality_maps = true;
      else if (e == "confusion") run.emit.confusion = true;
      else if (e == "invalid") run.emit.invalid = true;
      else if (e == "all") run.emit.previews = run.emit.cardinality_maps = true;
      else throw UsageError("unknown --emit value '" + e + "'");
    }
  }
};

HdrImage read_hdr_any(const fs::path& path) {
  const std::string bytes = read_file(path);
  if (bytes.rfind("PF", 0) == 0) return decode_pfm(bytes);
  return decode_hdr_rgbe(bytes);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-view multi-exposure HDR reconstruction"};
  app.require_subcommand(1);
  Options opt;
  fs::path out;
  fs::path disparity_dir;
  fs::path hdr_dir;
  fs::path invalid_csv;
  std::string preset_name;
  fs::path spec_path;
  std::uint64_t seed = 7;
  fs::path input;

  auto* pipeline = app.add_subcommand("pipeline", "Run the full reconstruction");
  opt.add_dataset(pipeline);
  opt.add_method(pipeline);
  pipeline->add_option("--out", out, "Output directory")->required();
  pipeline->add_option("--emit", opt.emit, "Extra artifacts: previews, cardmaps, all")
      ->delimiter(',');

  auto* synth = app.add_subcommand("synth", "Render a synthetic dataset");
  auto* preset_opt = synth->add_option("--preset", preset_name, "flat, edges, occlusion, saturation-ladder");
  auto* spec_opt = synth->add_option("--spec", spec_path, "Scene JSON file");
  preset_opt->excludes(spec_opt);
  synth->add_option("--seed", seed, "Texture and noise seed");
  synth->add_option("--out", out, "Dataset directory")->required();

  auto* respond = app.add_subcommand("respond", "Recover the inverse response curve");
  opt.add_dataset(respond);
  respond->add_option("--out", out, "Response CSV")->required();

  auto* match = app.add_subcommand("match", "Compute disparity maps");
  opt.add_dataset(match);
  match->add_option("--out", out, "Output directory")->required();

  auto* fuse = app.add_subcommand("fuse", "Fuse matches into HDR images");
  opt.add_dataset(fuse);
  fuse->add_option("--disparity", disparity_dir, "Directory of disparity maps")->required();
  fuse->add_option("--out", out, "Output directory")->required();

  auto* detect = app.add_subcommand("detect", "Detect invalid matches");
  opt.add_dataset(detect);
  detect->add_option("--disparity", disparity_dir, "Directory of disparity maps")->required();
  detect->add_option("--out", out, "Invalid-pixel CSV")->required();

  auto* correct = app.add_subcommand("correct", "Correct invalid matches");
  opt.add_dataset(correct);
  opt.add_method(correct);
  correct->add_option("--disparity", disparity_dir, "Directory of disparity maps")->required();
  correct->add_option("--out", out, "Output directory")->required();

  auto* eval = app.add_subcommand("eval", "Compare HDR images with the reference");
  opt.add_dataset(eval);
  eval->add_option("--hdr", hdr_dir, "Directory of hdr_<view>.pfm images")->required();
  eval->add_option("--invalid", invalid_csv, "Invalid-pixel CSV from detect");
  eval->add_option("--out", out, "Confusion CSV")->required();

  auto* cardmap = app.add_subcommand("cardmap", "Render match-cardinality maps");
  opt.add_dataset(cardmap);
  cardmap->add_option("--disparity", disparity_dir, "Directory of disparity maps")->required();
  cardmap->add_option("--out", out, "Output directory")->required();

  auto* preview = app.add_subcommand("preview", "Tone-map an HDR image to PNG");
  preview->add_option("--in", input, "HDR (.hdr or .pfm) image")->required();
  preview->add_option("--out", out, "PNG file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    try {
      opt.finish();
    } catch (const UsageError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 2;
    }
    RunConfig& run = opt.run;
    run.output_dir = out;

    if (*synth) {
      if (preset_name.empty() && spec_path.empty()) {
        std::cerr << "error: synth needs --preset or --spec\n";
        return 2;
      }
      SceneSpec spec;
      if (!preset_name.empty()) {
        try {
          spec = preset(preset_name, seed);
        } catch (const Error& e) {
          std::cerr << "error: " << e.what() << "\n";
          return 2;
        }
      } else {
        spec = scene_from_json(read_file(spec_path));
        if (synth->count("--seed")) spec.seed = seed;
      }
      write_dataset(render(spec), out);
      return 0;
    }
    if (*preview) {
      write_png_preview(read_hdr_any(input), out);
      return 0;
    }
    if (*pipeline) {
      std::cout << run_pipeline(run);
      return 0;
    }

    const Context ctx = prepare(run);
    if (*respond) {
      save_response_csv(ctx.response, out);
      return 0;
    }
    if (*match) {
      const auto views = stage_matching_views(ctx);
      write_disparities(stage_match(ctx, views), out);
      return 0;
    }
    if (*eval) {
      std::vector<HdrImage> hdr;
      for (int v = 0; v < ctx.data.manifest.n_views(); ++v) hdr.push_back(read_pfm(hdr_pfm_file(hdr_dir, v)));
      const ViewGeometry geo{ctx.data.manifest.n_views(), ctx.data.images[0].width(),
                             ctx.data.images[0].height(), ctx.data.manifest.geometry_sign};
      std::vector<std::vector<std::uint8_t>> detected =
          invalid_csv.empty()
              ? std::vector<std::vector<std::uint8_t>>(geo.n_views,
                                                       std::vector<std::uint8_t>(geo.pixel_count(), 0))
              : read_invalid_masks(invalid_csv, geo);
      const EvaluationOutcome e = stage_evaluate(ctx, hdr, detected);
      write_confusion_csv(e.confusion, out);
      return 0;
    }
    const auto maps = read_disparities(disparity_dir, ctx.data);
    if (*fuse) {
      write_hdr_images(stage_fuse(ctx, maps).hdr, out);
      return 0;
    }
    if (*cardmap) {
      const MatchList list = build_match_list(maps, ctx.matching.geometry_sign);
      fs::create_directories(out);
      for (int v = 0; v < ctx.data.manifest.n_views(); ++v)
        write_png(cardinality_map(list, v), out / ("cardmap_" + std::to_string(v) + ".png"));
      return 0;
    }
    if (*detect) {
      FusedDataset fused = stage_fuse(ctx, maps);
      const auto invalid = stage_detect(ctx, fused.list);
      write_invalid_csv(fused.list, invalid, out);
      return 0;
    }
    if (*correct) {
      FusedDataset fused = stage_fuse(ctx, maps);
      const auto invalid = stage_detect(ctx, fused.list);
      std::vector<MatchingView> views;
      if (run.method == CorrectionMethod::kMonochromatic) views = stage_matching_views(ctx);
      const CorrectionOutcome r = stage_correct(ctx, run.method, std::move(fused), invalid, maps, views);
      write_disparities(r.maps, out);
      write_hdr_images(r.hdr, out);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
