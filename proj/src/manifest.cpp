#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "mvhdr/core.hpp"

namespace mvhdr {

using nlohmann::json;

namespace {

[[noreturn]] void field_error(const std::string& field, const std::string& what) {
  throw Error("manifest: " + field + ": " + what);
}

double positive_number(const json& obj, const char* key, const std::string& field,
                       std::optional<double> fallback = std::nullopt) {
  const auto it = obj.find(key);
  if (it == obj.end()) {
    if (fallback) return *fallback;
    field_error(field + "." + key, "missing");
  }
  if (!it->is_number()) field_error(field + "." + key, "expected a number");
  const double v = it->get<double>();
  if (!(v > 0.0) || !std::isfinite(v)) field_error(field + "." + key, "must be positive");
  return v;
}

ExposureEntry parse_exposure(const json& obj, const std::string& field,
                             const std::filesystem::path& base, bool check_files) {
  if (!obj.is_object()) field_error(field, "expected an object");
  ExposureEntry e;
  const auto path = obj.find("path");
  if (path == obj.end() || !path->is_string()) field_error(field + ".path", "expected a string");
  e.path = path->get<std::string>();
  e.shutter_s = positive_number(obj, "shutter_s", field);
  e.transmittance = positive_number(obj, "transmittance", field, 1.0);
  if (e.transmittance > 1.0) field_error(field + ".transmittance", "must be at most 1");
  if (check_files) {
    const auto resolved = e.path.is_absolute() ? e.path : base / e.path;
    if (!std::filesystem::exists(resolved))
      throw Error("manifest: " + field + ".path: file not found: " + resolved.string());
  }
  return e;
}

json exposure_json(const ExposureEntry& e) {
  return json{{"path", e.path.generic_string()},
              {"shutter_s", e.shutter_s},
              {"transmittance", e.transmittance}};
}

}  // namespace

bool DatasetManifest::has_reference_stacks() const {
  if (views.empty()) return false;
  for (const ViewEntry& v : views)
    if (v.reference_stack.empty()) return false;
  return true;
}

DatasetManifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir,
                               bool check_files) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + upto, '\n');
    throw Error("manifest: parse error at line " + std::to_string(line) + ": " + e.what());
  }
  if (!root.is_object()) throw Error("manifest: top level must be an object");

  DatasetManifest m;
  m.base_dir = base_dir;

  const auto views = root.find("views");
  if (views == root.end() || !views->is_array()) field_error("views", "expected an array");
  for (std::size_t i = 0; i < views->size(); ++i) {
    const std::string field = "views[" + std::to_string(i) + "]";
    const json& v = (*views)[i];
    ViewEntry entry;
    static_cast<ExposureEntry&>(entry) = parse_exposure(v, field, base_dir, check_files);
    if (const auto stack = v.find("reference_stack"); stack != v.end()) {
      if (!stack->is_array()) field_error(field + ".reference_stack", "expected an array");
      for (std::size_t k = 0; k < stack->size(); ++k)
        entry.reference_stack.push_back(parse_exposure(
            (*stack)[k], field + ".reference_stack[" + std::to_string(k) + "]", base_dir,
            check_files));
    }
    m.views.push_back(std::move(entry));
  }
  if (m.views.size() < 2) field_error("views", "at least 2 views required");

  if (const auto it = root.find("bit_depth"); it != root.end()) {
    if (!it->is_number_integer()) field_error("bit_depth", "expected an integer");
    m.bit_depth = it->get<int>();
    if (m.bit_depth != 8 && m.bit_depth != 10) field_error("bit_depth", "must be 8 or 10");
  }
  if (const auto it = root.find("linear"); it != root.end()) {
    if (!it->is_boolean()) field_error("linear", "expected a boolean");
    m.linear = it->get<bool>();
  }
  const auto range = root.find("disparity_range");
  if (range == root.end() || !range->is_array() || range->size() != 2 ||
      !(*range)[0].is_number_integer() || !(*range)[1].is_number_integer())
    field_error("disparity_range", "expected [min, max] integers");
  m.d_min = (*range)[0].get<int>();
  m.d_max = (*range)[1].get<int>();
  if (m.d_min > m.d_max) field_error("disparity_range", "min exceeds max");
  if (const auto it = root.find("geometry_sign"); it != root.end()) {
    if (!it->is_number_integer()) field_error("geometry_sign", "expected +1 or -1");
    m.geometry_sign = it->get<int>();
    if (m.geometry_sign != 1 && m.geometry_sign != -1)
      field_error("geometry_sign", "expected +1 or -1");
  }
  return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("manifest: cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str(), path.parent_path(), true);
}

std::string manifest_to_json(const DatasetManifest& m) {
  json views = json::array();
  for (const ViewEntry& v : m.views) {
    json entry = exposure_json(v);
    if (!v.reference_stack.empty()) {
      json stack = json::array();
      for (const ExposureEntry& e : v.reference_stack) stack.push_back(exposure_json(e));
      entry["reference_stack"] = std::move(stack);
    }
    views.push_back(std::move(entry));
  }
  json root{{"views", std::move(views)},
            {"bit_depth", m.bit_depth},
            {"linear", m.linear},
            {"disparity_range", {m.d_min, m.d_max}},
            {"geometry_sign", m.geometry_sign}};
  return root.dump(2) + "\n";
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("manifest: cannot write " + path.string());
  out << manifest_to_json(manifest);
}

}  // namespace mvhdr
