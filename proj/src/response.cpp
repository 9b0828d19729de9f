#include "mvhdr/response.hpp"

#include <Eigen/OrderingMethods>
#include <Eigen/SparseCore>
#include <Eigen/SparseQR>
#include <algorithm>
#include <numeric>
#include <cmath>

namespace mvhdr {

double weight_hat(int z, int z_max) {
  const double mid = 0.5 * z_max;
  return z <= mid ? static_cast<double>(z) : static_cast<double>(z_max - z);
}

WeightFn::WeightFn(int z_max) : table_(static_cast<std::size_t>(z_max) + 1) {
  for (int z = 0; z <= z_max; ++z) table_[z] = weight_hat(z, z_max);
}

ResponseSamples sample_colocated(std::span<const LdrImage> stack, int n_sites) {
  if (stack.empty()) throw Error("sample_colocated: empty stack");
  if (n_sites <= 0) throw Error("sample_colocated: need at least one site");
  const LdrImage& first = stack.front();
  for (const LdrImage& img : stack)
    if (img.width() != first.width() || img.height() != first.height() ||
        img.bit_depth() != first.bit_depth())
      throw Error("sample_colocated: stack images differ in size or bit depth");

  ResponseSamples s;
  s.bit_depth = first.bit_depth();
  for (const LdrImage& img : stack) s.exposures.push_back(img.exposure());

  // Sites are stratified by the mean level they show in the median exposure
  // so the recovered curve is constrained across the whole range.
  std::vector<std::size_t> by_exposure(stack.size());
  std::iota(by_exposure.begin(), by_exposure.end(), std::size_t{0});
  std::stable_sort(by_exposure.begin(), by_exposure.end(), [&](std::size_t a, std::size_t b) {
    return stack[a].exposure() < stack[b].exposure();
  });
  const LdrImage& ref = stack[by_exposure[(stack.size() - 1) / 2]];
  const std::size_t n_pixels = ref.pixel_count();
  std::vector<std::pair<double, std::size_t>> order(n_pixels);
  for (std::size_t i = 0; i < n_pixels; ++i) {
    const Rgb16 z = ref.rgb(static_cast<int>(i % ref.width()), static_cast<int>(i / ref.width()));
    order[i] = {(static_cast<double>(z[0]) + z[1] + z[2]) / 3.0, i};
  }
  std::sort(order.begin(), order.end());
  std::vector<std::uint8_t> used(n_pixels, 0);
  const int sites = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(n_sites), n_pixels));
  for (int k = 0; k < sites; ++k) {
    const double target = (k + 0.5) / sites * ref.z_max();
    auto it = std::lower_bound(order.begin(), order.end(), std::make_pair(target, std::size_t{0}));
    // Nearest unused entry on either side of the target.
    auto hi = it;
    while (hi != order.end() && used[hi->second]) ++hi;
    auto lo = it;
    bool has_lo = false;
    while (lo != order.begin()) {
      --lo;
      if (!used[lo->second]) {
        has_lo = true;
        break;
      }
    }
    std::size_t pick;
    if (hi == order.end()) pick = lo->second;
    else if (!has_lo) pick = hi->second;
    else pick = (target - lo->first <= hi->first - target) ? lo->second : hi->second;
    used[pick] = 1;
    const int x = static_cast<int>(pick % ref.width());
    const int y = static_cast<int>(pick / ref.width());
    std::vector<Rgb16> site;
    for (const LdrImage& img : stack) site.push_back(img.rgb(x, y));
    s.sites.push_back(std::move(site));
  }
  return s;
}

ResponseSamples merge_samples(std::span<const ResponseSamples> parts) {
  if (parts.empty()) throw Error("merge_samples: nothing to merge");
  // Sites from different stacks are kept on the union of exposures; a site
  // only observes the exposures of its own stack, so each part is widened
  // with the other parts' exposures marked as level 0 (zero weight).
  ResponseSamples out;
  out.bit_depth = parts.front().bit_depth;
  for (const ResponseSamples& p : parts) {
    if (p.bit_depth != out.bit_depth) throw Error("merge_samples: bit depth mismatch");
    out.exposures.insert(out.exposures.end(), p.exposures.begin(), p.exposures.end());
  }
  std::size_t offset = 0;
  for (const ResponseSamples& p : parts) {
    for (const auto& site : p.sites) {
      std::vector<Rgb16> wide(out.exposures.size(), Rgb16{0, 0, 0});
      std::copy(site.begin(), site.end(), wide.begin() + static_cast<long>(offset));
      out.sites.push_back(std::move(wide));
    }
    offset += p.exposures.size();
  }
  return out;
}

ResponseCurve recover_response(const ResponseSamples& samples, double lambda,
                               double monotone_tolerance) {
  if (!(lambda > 0.0)) throw Error("recover_response: lambda must be positive");
  const int z_max = (1 << samples.bit_depth) - 1;
  const int levels = z_max + 1;
  const int mid = levels / 2;
  const std::size_t n_exp = samples.exposures.size();
  for (double e : samples.exposures)
    if (!(e > 0.0)) throw Error("recover_response: exposures must be positive");
  for (const auto& site : samples.sites)
    if (site.size() != n_exp) throw Error("recover_response: ragged sample table");

  std::vector<double> distinct = samples.exposures;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 2)
    throw Error("recover_response: underdetermined, at least two distinct exposures are "
                "required; add exposures or sample sites");

  const WeightFn w(z_max);
  std::array<std::vector<double>, 3> tables;
  bool monotone = true;

  for (int c = 0; c < 3; ++c) {
    // Sites observed with nonzero weight at least once.
    std::vector<std::size_t> live;
    for (std::size_t i = 0; i < samples.sites.size(); ++i) {
      bool any = false;
      for (std::size_t j = 0; j < n_exp; ++j) any |= w(samples.sites[i][j][c]) > 0.0;
      if (any) live.push_back(i);
    }
    if (live.empty())
      throw Error("recover_response: no usable samples; add more sample sites");

    const int n_unknowns = levels + static_cast<int>(live.size());
    std::vector<Eigen::Triplet<double>> entries;
    std::vector<double> rhs;
    int row = 0;
    for (std::size_t k = 0; k < live.size(); ++k)
      for (std::size_t j = 0; j < n_exp; ++j) {
        const int z = samples.sites[live[k]][j][c];
        const double wz = w(z);
        if (wz == 0.0) continue;
        entries.emplace_back(row, z, wz);
        entries.emplace_back(row, levels + static_cast<int>(k), -wz);
        rhs.push_back(wz * std::log(samples.exposures[j]));
        ++row;
      }
    entries.emplace_back(row, mid, 1.0);
    rhs.push_back(0.0);
    ++row;
    for (int z = 1; z < z_max; ++z) {
      const double s = lambda * w(z);
      entries.emplace_back(row, z - 1, s);
      entries.emplace_back(row, z, -2.0 * s);
      entries.emplace_back(row, z + 1, s);
      rhs.push_back(0.0);
      ++row;
    }

    Eigen::SparseMatrix<double> a(row, n_unknowns);
    a.setFromTriplets(entries.begin(), entries.end());
    a.makeCompressed();
    Eigen::Map<const Eigen::VectorXd> b(rhs.data(), static_cast<long>(rhs.size()));

    Eigen::SparseQR<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> qr;
    qr.setPivotThreshold(1e-10);
    qr.compute(a);
    if (qr.info() != Eigen::Success || qr.rank() < n_unknowns)
      throw Error("recover_response: singular system, sample more pixel locations spanning "
                  "the intensity range");
    const Eigen::VectorXd x = qr.solve(b);
    if (qr.info() != Eigen::Success) throw Error("recover_response: solve failed");

    tables[c].assign(x.data(), x.data() + levels);
    for (int z = 0; z < z_max; ++z)
      if (tables[c][z + 1] < tables[c][z] - monotone_tolerance) monotone = false;
  }

  ResponseCurve curve(samples.bit_depth, std::move(tables));
  curve.set_monotone(monotone);
  return curve;
}

NormalizedImage normalize_exposure(const LdrImage& img, const ResponseCurve& response,
                                   double target_exposure) {
  if (!(target_exposure > 0.0)) throw Error("normalize_exposure: target must be positive");
  if (response.bit_depth() != img.bit_depth())
    throw Error("normalize_exposure: response bit depth does not match image");
  const int z_max = img.z_max();
  const double factor = target_exposure / img.exposure();

  NormalizedImage out{LdrImage(img.width(), img.height(), img.bit_depth(), target_exposure,
                               img.view_index()),
                      std::vector<std::uint8_t>(img.samples().size(), 0)};
  const auto src = img.samples();
  auto dst = out.image.samples();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const int z = src[i];
    const int c = static_cast<int>(i % 3);
    bool clamped = false;
    int level = 0;
    if (response.is_linear()) {
      const double v = std::round(z * factor);
      clamped = v > z_max;
      level = static_cast<int>(std::min<double>(v, z_max));
    } else {
      const double log_x = response.log_exposure(c, z) + std::log(factor);
      clamped = log_x > response.log_exposure(c, z_max) || log_x < response.log_exposure(c, 0);
      level = response.forward(c, std::exp(log_x));
    }
    dst[i] = static_cast<std::uint16_t>(level);
    out.saturated[i] = (z == 0 || z == z_max || clamped) ? 1 : 0;
  }
  return out;
}

}  // namespace mvhdr
