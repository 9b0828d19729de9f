#include "mvhdr/synth.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <random>

#include <json.hpp>

#include "mvhdr/imageio.hpp"
#include "mvhdr/parallel.hpp"

namespace mvhdr {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Deterministic value in [-1, 1] for a lattice point.
double lattice(std::uint64_t seed, long i, long j, int c) {
  std::uint64_t h = splitmix(seed);
  h = splitmix(h ^ static_cast<std::uint64_t>(i) * 0x100000001b3ull);
  h = splitmix(h ^ static_cast<std::uint64_t>(j) * 0xc2b2ae3d27d4eb4full);
  h = splitmix(h ^ static_cast<std::uint64_t>(c + 1));
  return static_cast<double>(h >> 11) * (2.0 / 9007199254740992.0) - 1.0;
}

double floor_div(double a, int b) { return std::floor(a / b); }

double value_noise(std::uint64_t seed, double u, double v, int cell, int c) {
  const double gu = u / cell;
  const double gv = v / cell;
  const long i = static_cast<long>(floor_div(u, cell));
  const long j = static_cast<long>(floor_div(v, cell));
  const double fu = gu - static_cast<double>(i);
  const double fv = gv - static_cast<double>(j);
  const double a = lattice(seed, i, j, c);
  const double b = lattice(seed, i + 1, j, c);
  const double d = lattice(seed, i, j + 1, c);
  const double e = lattice(seed, i + 1, j + 1, c);
  return (a * (1 - fu) + b * fu) * (1 - fv) + (d * (1 - fu) + e * fu) * fv;
}

// Standard normal from two uniform draws; the engine is portable, unlike
// std::normal_distribution.
double gaussian(std::mt19937_64& rng) {
  const double u1 = (static_cast<double>(rng() >> 11) + 1.0) / 9007199254740993.0;
  const double u2 = static_cast<double>(rng() >> 11) / 9007199254740992.0;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

struct Coverage {
  Rgb radiance{};
  int disparity = 0;
};

Coverage scene_point(const SceneSpec& spec, const std::vector<std::size_t>& order, int view, int x,
                     int y) {
  for (std::size_t idx : order) {
    const Layer& l = spec.layers[idx];
    const long r = static_cast<long>(x) + static_cast<long>(spec.geometry_sign) * view * l.disparity;
    if (y < l.y0 || y >= l.y0 + l.height || r < l.x0 || r >= l.x0 + l.width) continue;
    return {l.texture.sample(static_cast<double>(r - l.x0), static_cast<double>(y - l.y0), l.width),
            l.disparity};
  }
  const long r = static_cast<long>(x) + static_cast<long>(spec.geometry_sign) * view * spec.d_min;
  return {spec.background.sample(static_cast<double>(r), y, spec.width), spec.d_min};
}

// Layer indices front to back; equal z keeps the later layer in front.
std::vector<std::size_t> front_to_back(const SceneSpec& spec) {
  std::vector<std::size_t> order(spec.layers.size());
  std::iota(order.rbegin(), order.rend(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return spec.layers[a].z > spec.layers[b].z;
  });
  return order;
}

HdrImage render_radiance(const SceneSpec& spec, int view, DisparityMap* disparity) {
  const auto order = front_to_back(spec);
  HdrImage out(spec.width, spec.height, view);
  for (int y = 0; y < spec.height; ++y)
    for (int x = 0; x < spec.width; ++x) {
      const Coverage c = scene_point(spec, order, view, x, y);
      out.set_rgb(x, y, c.radiance);
      if (disparity) disparity->set(x, y, c.disparity);
    }
  return out;
}

LdrImage encode_view(const SceneSpec& spec, const HdrImage& radiance, int view, double exposure,
                     std::uint64_t stream) {
  LdrImage img(spec.width, spec.height, spec.bit_depth, exposure, view);
  const double z_max = img.z_max();
  std::mt19937_64 rng(splitmix(spec.seed ^ splitmix(stream)));
  for (int y = 0; y < spec.height; ++y)
    for (int x = 0; x < spec.width; ++x) {
      const Rgb e = radiance.rgb(x, y);
      for (int c = 0; c < 3; ++c) {
        const double linear = e[c] * exposure;
        double z = spec.response == ResponseModel::kLinear
                       ? linear
                       : z_max * std::pow(std::max(linear, 0.0) / z_max, 1.0 / spec.gamma);
        if (spec.noise > 0.0) z += spec.noise * gaussian(rng);
        img.set(x, y, c, static_cast<std::uint16_t>(std::clamp(std::round(z), 0.0, z_max)));
      }
    }
  return img;
}

std::uint64_t stream_id(int view, double exposure) {
  return splitmix(static_cast<std::uint64_t>(view) + 1) ^ std::bit_cast<std::uint64_t>(exposure);
}

}  // namespace

Rgb Texture::sample(double u, double v, double layer_width) const {
  Rgb out{};
  for (int c = 0; c < 3; ++c) {
    double value = base[c];
    if (kind == TextureKind::kGradient) {
      const double t = layer_width > 1 ? u / (layer_width - 1) : 0.0;
      value = base[c] + (end[c] - base[c]) * t;
    }
    double gain = 1.0;
    if (amplitude > 0.0) gain += amplitude * value_noise(seed, u, v, std::max(cell, 1), c);
    if (fine > 0.0)
      gain += fine * lattice(seed ^ 0x5bd1e995ull, static_cast<long>(u), static_cast<long>(v), c);
    value *= gain;
    out[c] = std::max(value, 0.0);
  }
  return out;
}

void SceneSpec::validate() const {
  if (width <= 0 || height <= 0) throw Error("scene: width and height must be positive");
  if (n_views < 2) throw Error("scene: n_views must be at least 2");
  if (bit_depth != 8 && bit_depth != 10) throw Error("scene: bit_depth must be 8 or 10");
  if (d_min > d_max) throw Error("scene: d_min exceeds d_max");
  if (geometry_sign != 1 && geometry_sign != -1) throw Error("scene: geometry_sign must be +1 or -1");
  if (static_cast<int>(shutter.size()) != n_views)
    throw Error("scene: shutter needs one entry per view");
  if (static_cast<int>(transmittance.size()) != n_views)
    throw Error("scene: transmittance needs one entry per view");
  for (int v = 0; v < n_views; ++v) {
    if (!(shutter[v] > 0.0)) throw Error("scene: shutter times must be positive");
    if (!(transmittance[v] > 0.0) || transmittance[v] > 1.0)
      throw Error("scene: transmittance must lie in (0, 1]");
  }
  for (double e : reference_exposures)
    if (!(e > 0.0)) throw Error("scene: reference exposures must be positive");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const Layer& l = layers[i];
    if (l.disparity < d_min || l.disparity > d_max)
      throw Error("scene: layer " + std::to_string(i) + " disparity outside [d_min, d_max]");
    if (l.width <= 0 || l.height <= 0)
      throw Error("scene: layer " + std::to_string(i) + " has an empty extent");
  }
  if (response == ResponseModel::kGamma && !(gamma > 0.0)) throw Error("scene: gamma must be positive");
  if (noise < 0.0) throw Error("scene: noise must be non-negative");
}

LdrImage render_view(const SceneSpec& spec, int view, double exposure) {
  spec.validate();
  if (view < 0 || view >= spec.n_views) throw Error("render_view: bad view index");
  if (!(exposure > 0.0)) throw Error("render_view: exposure must be positive");
  const HdrImage radiance = render_radiance(spec, view, nullptr);
  return encode_view(spec, radiance, view, exposure, stream_id(view, exposure));
}

EqualExposureViews equal_exposure_renders(const SceneSpec& spec, double lo, double hi) {
  spec.validate();
  std::vector<double> candidates;
  for (int v = 0; v < spec.n_views; ++v) candidates.push_back(spec.effective_exposure(v));
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  const double z_max = (1 << spec.bit_depth) - 1;
  EqualExposureViews best;
  std::size_t best_count = 0;
  for (double e : candidates) {
    std::vector<LdrImage> views;
    std::size_t count = 0;
    for (int v = 0; v < spec.n_views; ++v) {
      views.push_back(render_view(spec, v, e));
      const LdrImage& im = views.back();
      for (int y = 0; y < im.height(); ++y)
        for (int x = 0; x < im.width(); ++x) {
          bool ok = true;
          for (int c = 0; c < 3; ++c) {
            const double z = im.at(x, y, c);
            ok = ok && z >= lo * z_max && z <= hi * z_max;
          }
          count += ok;
        }
    }
    if (best.views.empty() || count >= best_count) {
      best = {e, std::move(views)};
      best_count = count;
    }
  }
  return best;
}

RenderedDataset render(const SceneSpec& spec) {
  spec.validate();
  RenderedDataset out;
  out.spec = spec;
  const int n = spec.n_views;
  out.views.resize(n);
  out.gt_radiance.resize(n);
  out.reference_stacks.resize(n);
  for (int v = 0; v < n; ++v) out.gt_disparity.emplace_back(spec.width, spec.height, v);

  parallel_for(0, n, [&](int v) {
    out.gt_radiance[v] = render_radiance(spec, v, &out.gt_disparity[v]);
    const double e = spec.effective_exposure(v);
    out.views[v] = encode_view(spec, out.gt_radiance[v], v, e, stream_id(v, e));
    for (std::size_t k = 0; k < spec.reference_exposures.size(); ++k) {
      const double r = spec.reference_exposures[k];
      out.reference_stacks[v].push_back(
          encode_view(spec, out.gt_radiance[v], v, r, stream_id(v, r) ^ (k + 1)));
    }
  });

  DatasetManifest& m = out.manifest;
  m.bit_depth = spec.bit_depth;
  m.linear = spec.response == ResponseModel::kLinear;
  m.d_min = spec.d_min;
  m.d_max = spec.d_max;
  m.geometry_sign = spec.geometry_sign;
  for (int v = 0; v < n; ++v) {
    ViewEntry entry;
    entry.path = "view_" + std::to_string(v) + ".ppm";
    entry.shutter_s = spec.shutter[v];
    entry.transmittance = spec.transmittance[v];
    for (std::size_t k = 0; k < spec.reference_exposures.size(); ++k) {
      ExposureEntry ref;
      ref.path = "ref_" + std::to_string(v) + "_" + std::to_string(k) + ".ppm";
      ref.shutter_s = spec.reference_exposures[k];
      entry.reference_stack.push_back(ref);
    }
    m.views.push_back(std::move(entry));
  }
  return out;
}

ResponseCurve model_response(const SceneSpec& spec) {
  if (spec.response == ResponseModel::kLinear) return ResponseCurve::linear(spec.bit_depth);
  const int z_max = (1 << spec.bit_depth) - 1;
  std::array<std::vector<double>, 3> g;
  for (int c = 0; c < 3; ++c) {
    g[c].resize(z_max + 1);
    for (int z = 0; z <= z_max; ++z)
      g[c][z] = std::log(static_cast<double>(z_max)) +
                spec.gamma * std::log(static_cast<double>(z) / z_max);
  }
  return ResponseCurve(spec.bit_depth, std::move(g));
}

namespace {

Texture noise_texture(Rgb base, double amplitude, int cell, std::uint64_t seed) {
  Texture t;
  t.kind = TextureKind::kNoise;
  t.base = base;
  t.amplitude = amplitude;
  t.cell = cell;
  t.fine = 0.03;
  t.seed = seed;
  return t;
}

Layer layer(int x0, int y0, int w, int h, int d, int z, Texture tex) {
  return {x0, y0, w, h, d, z, tex};
}

}  // namespace

std::vector<std::string> preset_names() { return {"flat", "edges", "occlusion", "saturation-ladder"}; }

SceneSpec preset(std::string_view name, std::uint64_t seed) {
  SceneSpec s;
  s.seed = seed;
  if (name == "flat") {
    s.width = 96;
    s.height = 64;
    s.n_views = 4;
    s.d_min = 0;
    s.d_max = 3;
    s.background = noise_texture({90, 110, 70}, 0.3, 5, seed);
    // One fronto-parallel plane wide enough to fill every view.
    s.layers.push_back(layer(-8, 0, s.width + 16, s.height, 2, 1,
                             noise_texture({120, 100, 80}, 0.35, 5, seed + 1)));
    s.shutter = {1.0, 0.5, 0.5, 0.25};
    s.reference_exposures = {0.25, 1.0};
  } else if (name == "edges") {
    s.width = 640;
    s.height = 480;
    s.n_views = 8;
    s.d_min = 0;
    s.d_max = 4;
    s.background = noise_texture({110, 95, 80}, 0.35, 5, seed);
    s.layers.push_back(layer(60, 50, 200, 160, 2, 1, noise_texture({300, 90, 200}, 0.35, 5, seed + 1)));
    s.layers.push_back(layer(330, 70, 220, 150, 3, 2, noise_texture({420, 130, 90}, 0.3, 5, seed + 2)));
    s.layers.push_back(layer(120, 260, 240, 170, 4, 3, noise_texture({80, 90, 110}, 0.3, 5, seed + 3)));
    s.layers.push_back(layer(420, 280, 170, 160, 1, 1, noise_texture({160, 200, 120}, 0.35, 5, seed + 4)));
    s.shutter = {0.125, 0.25, 0.5, 1.0, 1.0, 0.5, 0.25, 0.125};
    s.reference_exposures = {0.125, 0.5, 2.0};
  } else if (name == "occlusion") {
    s.width = 160;
    s.height = 120;
    s.n_views = 3;
    s.d_min = 0;
    s.d_max = 3;
    s.background = noise_texture({100, 120, 90}, 0.35, 5, seed);
    s.layers.push_back(layer(50, 30, 50, 60, 2, 1, noise_texture({200, 150, 60}, 0.35, 5, seed + 1)));
    s.shutter = {1.0, 0.5, 0.25};
    s.reference_exposures = {0.125, 0.5, 2.0};
  } else if (name == "saturation-ladder") {
    s.width = 128;
    s.height = 96;
    s.n_views = 4;
    s.d_min = 0;
    s.d_max = 3;
    s.background = noise_texture({80, 90, 100}, 0.3, 5, seed);
    s.layers.push_back(layer(20, 10, 80, 70, 2, 1, noise_texture({900, 800, 700}, 0.3, 5, seed + 1)));
    s.shutter = {1.0, 0.5, 0.25, 0.125};
    s.reference_exposures = {0.125, 0.5, 2.0};
  } else {
    throw Error("unknown preset '" + std::string(name) + "'");
  }
  s.transmittance.assign(s.n_views, 1.0);
  return s;
}

namespace {

using nlohmann::json;

json rgb_json(const Rgb& v) { return json::array({v[0], v[1], v[2]}); }

Rgb rgb_from(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) throw Error(where + ": expected an array of 3 numbers");
  Rgb out{};
  for (int c = 0; c < 3; ++c) {
    if (!j[c].is_number()) throw Error(where + ": expected an array of 3 numbers");
    out[c] = j[c].get<double>();
  }
  return out;
}

json texture_json(const Texture& t) {
  json j;
  j["kind"] = t.kind == TextureKind::kNoise ? "noise" : "gradient";
  j["base"] = rgb_json(t.base);
  j["end"] = rgb_json(t.end);
  j["amplitude"] = t.amplitude;
  j["cell"] = t.cell;
  j["fine"] = t.fine;
  j["seed"] = t.seed;
  return j;
}

template <class T>
T field(const json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(where + "." + key + ": wrong type");
  }
}

Texture texture_from(const json& j, const std::string& where) {
  if (!j.is_object()) throw Error(where + ": expected an object");
  Texture t;
  const std::string kind = field<std::string>(j, "kind", "noise", where);
  if (kind == "noise") t.kind = TextureKind::kNoise;
  else if (kind == "gradient") t.kind = TextureKind::kGradient;
  else throw Error(where + ".kind: expected noise or gradient");
  if (j.contains("base")) t.base = rgb_from(j["base"], where + ".base");
  t.end = j.contains("end") ? rgb_from(j["end"], where + ".end") : t.base;
  t.amplitude = field<double>(j, "amplitude", t.amplitude, where);
  t.cell = field<int>(j, "cell", t.cell, where);
  t.fine = field<double>(j, "fine", t.fine, where);
  t.seed = field<std::uint64_t>(j, "seed", t.seed, where);
  return t;
}

}  // namespace

std::string scene_to_json(const SceneSpec& s) {
  json j;
  j["width"] = s.width;
  j["height"] = s.height;
  j["n_views"] = s.n_views;
  j["bit_depth"] = s.bit_depth;
  j["disparity_range"] = json::array({s.d_min, s.d_max});
  j["geometry_sign"] = s.geometry_sign;
  j["background"] = texture_json(s.background);
  j["layers"] = json::array();
  for (const Layer& l : s.layers)
    j["layers"].push_back({{"x0", l.x0}, {"y0", l.y0}, {"width", l.width}, {"height", l.height},
                           {"disparity", l.disparity}, {"z", l.z}, {"texture", texture_json(l.texture)}});
  j["shutter_s"] = s.shutter;
  j["transmittance"] = s.transmittance;
  j["reference_exposures"] = s.reference_exposures;
  j["response"] = s.response == ResponseModel::kLinear ? "linear" : "gamma";
  j["gamma"] = s.gamma;
  j["noise"] = s.noise;
  j["seed"] = s.seed;
  return j.dump(2) + "\n";
}

SceneSpec scene_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(std::string("scene: parse error: ") + e.what());
  }
  if (!j.is_object()) throw Error("scene: top level must be an object");
  SceneSpec s;
  const std::string w = "scene";
  s.width = field<int>(j, "width", s.width, w);
  s.height = field<int>(j, "height", s.height, w);
  s.n_views = field<int>(j, "n_views", s.n_views, w);
  s.bit_depth = field<int>(j, "bit_depth", s.bit_depth, w);
  if (j.contains("disparity_range")) {
    const auto r = field<std::vector<int>>(j, "disparity_range", {}, w);
    if (r.size() != 2) throw Error("scene.disparity_range: expected [min, max]");
    s.d_min = r[0];
    s.d_max = r[1];
  }
  s.geometry_sign = field<int>(j, "geometry_sign", s.geometry_sign, w);
  if (j.contains("background")) s.background = texture_from(j["background"], "scene.background");
  if (j.contains("layers")) {
    if (!j["layers"].is_array()) throw Error("scene.layers: expected an array");
    for (std::size_t i = 0; i < j["layers"].size(); ++i) {
      const json& lj = j["layers"][i];
      const std::string lw = "scene.layers[" + std::to_string(i) + "]";
      if (!lj.is_object()) throw Error(lw + ": expected an object");
      Layer l;
      l.x0 = field<int>(lj, "x0", 0, lw);
      l.y0 = field<int>(lj, "y0", 0, lw);
      l.width = field<int>(lj, "width", 0, lw);
      l.height = field<int>(lj, "height", 0, lw);
      l.disparity = field<int>(lj, "disparity", 0, lw);
      l.z = field<int>(lj, "z", 0, lw);
      if (lj.contains("texture")) l.texture = texture_from(lj["texture"], lw + ".texture");
      s.layers.push_back(l);
    }
  }
  s.shutter = field<std::vector<double>>(j, "shutter_s", std::vector<double>(s.n_views, 1.0), w);
  s.transmittance =
      field<std::vector<double>>(j, "transmittance", std::vector<double>(s.n_views, 1.0), w);
  s.reference_exposures = field<std::vector<double>>(j, "reference_exposures", {}, w);
  const std::string response = field<std::string>(j, "response", "linear", w);
  if (response == "linear") s.response = ResponseModel::kLinear;
  else if (response == "gamma") s.response = ResponseModel::kGamma;
  else throw Error("scene.response: expected linear or gamma");
  s.gamma = field<double>(j, "gamma", s.gamma, w);
  s.noise = field<double>(j, "noise", s.noise, w);
  s.seed = field<std::uint64_t>(j, "seed", s.seed, w);
  s.validate();
  return s;
}

void write_dataset(const RenderedDataset& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const int n = static_cast<int>(data.views.size());
  for (int v = 0; v < n; ++v) {
    const ViewEntry& entry = data.manifest.views[v];
    write_ldr(data.views[v], dir / entry.path);
    for (std::size_t k = 0; k < entry.reference_stack.size(); ++k)
      write_ldr(data.reference_stacks[v][k], dir / entry.reference_stack[k].path);
    write_disparity_pfm(data.gt_disparity[v], dir / ("gt_disparity_" + std::to_string(v) + ".pfm"));
    write_pfm(data.gt_radiance[v], dir / ("gt_radiance_" + std::to_string(v) + ".pfm"));
  }
  save_manifest(data.manifest, dir / "manifest.json");
  write_file(dir / "scene.json", scene_to_json(data.spec));
}

std::vector<PixelRef> edge_band(std::span<const DisparityMap> maps) {
  std::vector<PixelRef> band;
  for (std::size_t v = 0; v < maps.size(); ++v) {
    const DisparityMap& m = maps[v];
    for (int y = 0; y < m.height(); ++y)
      for (int x = 0; x < m.width(); ++x) {
        const int d = m.at(x, y);
        if (d == kUnknownDisparity) continue;
        bool edge = false;
        for (int dy = -1; dy <= 1 && !edge; ++dy)
          for (int dx = -1; dx <= 1 && !edge; ++dx) {
            const int u = x + dx;
            const int w = y + dy;
            if (u < 0 || w < 0 || u >= m.width() || w >= m.height()) continue;
            const int e = m.at(u, w);
            edge = e != kUnknownDisparity && e != d;
          }
        if (edge) band.push_back({static_cast<int>(v), x, y});
      }
  }
  return band;
}

CorruptionResult corrupt_disparities(std::span<const DisparityMap> maps, double fraction,
                                     std::uint64_t seed, int d_min, int d_max) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw Error("corrupt_disparities: fraction must lie in [0, 1]");
  CorruptionResult out;
  out.maps.assign(maps.begin(), maps.end());
  std::vector<PixelRef> band = edge_band(maps);
  const std::size_t count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(band.size())));
  std::mt19937_64 rng(splitmix(seed));
  // Partial Fisher-Yates so the chosen set only depends on the seed.
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng() % (band.size() - i));
    std::swap(band[i], band[j]);
  }
  for (std::size_t i = 0; i < count; ++i) {
    const PixelRef p = band[i];
    const int truth = maps[p.view].at(p.x, p.y);
    std::vector<int> candidates;
    for (int k = 1; k <= 3; ++k) {
      if (truth - k >= d_min) candidates.push_back(truth - k);
      if (truth + k <= d_max) candidates.push_back(truth + k);
    }
    if (candidates.empty())
      throw Error("corrupt_disparities: disparity range admits no wrong value");
    out.maps[p.view].set(p.x, p.y, candidates[rng() % candidates.size()]);
    out.corrupted.push_back(p);
  }
  std::sort(out.corrupted.begin(), out.corrupted.end());
  return out;
}

}  // namespace mvhdr
