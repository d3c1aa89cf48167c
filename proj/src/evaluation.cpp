#include "worldgan/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "worldgan/errors.hpp"

namespace worldgan {

std::size_t PatternHash::operator()(const std::vector<TokenId>& key) const noexcept {
  std::uint64_t h = 1469598103934665603ull;
  for (auto t : key) {
    h ^= t;
    h *= 1099511628211ull;
  }
  return static_cast<std::size_t>(h);
}

PatternDistribution pattern_distribution(const LevelGrid& grid, int n) {
  const auto& s = grid.shape();
  if (n < 1 || n > s.d || n > s.h || n > s.w) {
    throw ValidationError("pattern size " + std::to_string(n) + " does not fit grid " + to_string(s));
  }
  PatternDistribution dist;
  dist.size = n;
  std::vector<TokenId> key(static_cast<std::size_t>(n) * n * n);
  for (int d = 0; d + n <= s.d; ++d) {
    for (int h = 0; h + n <= s.h; ++h) {
      for (int w = 0; w + n <= s.w; ++w) {
        std::size_t i = 0;
        for (int dd = 0; dd < n; ++dd)
          for (int hh = 0; hh < n; ++hh)
            for (int ww = 0; ww < n; ++ww) key[i++] = grid.at(d + dd, h + hh, w + ww);
        ++dist.counts[key];
        ++dist.total;
      }
    }
  }
  return dist;
}

double pattern_kl(const PatternDistribution& p, const PatternDistribution& q, double epsilon) {
  std::size_t support = p.counts.size();
  for (const auto& [pattern, _] : q.counts) {
    if (!p.counts.contains(pattern)) ++support;
  }
  const double norm = 1.0 + epsilon * static_cast<double>(support);
  auto smoothed = [&](const PatternDistribution& dist, const std::vector<TokenId>& pattern) {
    auto it = dist.counts.find(pattern);
    const double f = it == dist.counts.end()
                         ? 0.0
                         : static_cast<double>(it->second) / static_cast<double>(dist.total);
    return (f + epsilon) / norm;
  };
  double kl = 0.0;
  for (const auto& [pattern, _] : p.counts) {
    const double ps = smoothed(p, pattern);
    kl += ps * std::log(ps / smoothed(q, pattern));
  }
  // Patterns only seen in Q carry P = epsilon / norm.
  for (const auto& [pattern, _] : q.counts) {
    if (p.counts.contains(pattern)) continue;
    const double ps = epsilon / norm;
    kl += ps * std::log(ps / smoothed(q, pattern));
  }
  return kl;
}

LevelGrid align_palette(const LevelGrid& grid, std::vector<std::string>& palette) {
  std::vector<TokenId> remap(grid.token_count());
  for (std::size_t t = 0; t < grid.token_count(); ++t) {
    const auto& name = grid.palette()[t];
    auto it = std::find(palette.begin(), palette.end(), name);
    if (it == palette.end()) {
      palette.push_back(name);
      it = palette.end() - 1;
    }
    remap[t] = static_cast<TokenId>(it - palette.begin());
  }
  std::vector<TokenId> voxels(grid.size());
  for (std::size_t i = 0; i < voxels.size(); ++i) voxels[i] = remap[grid.voxels()[i]];
  return LevelGrid(grid.shape(), palette, std::move(voxels));
}

double tpkl_div(const LevelGrid& original, const LevelGrid& generated, const std::vector<int>& sizes,
                double epsilon) {
  if (sizes.empty()) throw ValidationError("tpkl_div needs at least one pattern size");
  if (!(epsilon > 0.0)) throw ValidationError("tpkl_div epsilon must be positive");
  auto palette = original.palette();
  const auto gen = align_palette(generated, palette);
  double total = 0.0;
  for (int n : sizes) {
    const auto p = pattern_distribution(original, n);
    const auto q = pattern_distribution(gen, n);
    total += pattern_kl(p, q, epsilon);
  }
  return total / static_cast<double>(sizes.size());
}

SliceAxis parse_slice_axis(const std::string& name) {
  if (name == "d") return SliceAxis::d;
  if (name == "h") return SliceAxis::h;
  if (name == "w") return SliceAxis::w;
  throw ValidationError("unknown slice axis '" + name + "' (expected d, h or w)");
}

std::vector<TokenId> slice_string(const LevelGrid& grid, SliceAxis axis, int index) {
  const auto& s = grid.shape();
  const int a = static_cast<int>(axis);
  if (index < 0 || index >= s[a]) {
    throw ValidationError("slice index " + std::to_string(index) + " out of range for axis extent " +
                          std::to_string(s[a]));
  }
  std::vector<TokenId> out;
  switch (axis) {
    case SliceAxis::d:
      out.reserve(static_cast<std::size_t>(s.h) * s.w);
      for (int h = 0; h < s.h; ++h)
        for (int w = 0; w < s.w; ++w) out.push_back(grid.at(index, h, w));
      break;
    case SliceAxis::h:
      out.reserve(static_cast<std::size_t>(s.d) * s.w);
      for (int d = 0; d < s.d; ++d)
        for (int w = 0; w < s.w; ++w) out.push_back(grid.at(d, index, w));
      break;
    case SliceAxis::w:
      out.reserve(static_cast<std::size_t>(s.d) * s.h);
      for (int d = 0; d < s.d; ++d)
        for (int h = 0; h < s.h; ++h) out.push_back(grid.at(d, h, index));
      break;
  }
  return out;
}

std::vector<TokenId> level_string(const LevelGrid& grid, SliceAxis axis) {
  std::vector<TokenId> out;
  out.reserve(grid.size());
  for (int i = 0; i < grid.shape()[static_cast<int>(axis)]; ++i) {
    auto slice = slice_string(grid, axis, i);
    out.insert(out.end(), slice.begin(), slice.end());
  }
  return out;
}

std::int64_t levenshtein(std::span<const TokenId> a, std::span<const TokenId> b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::int64_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = static_cast<std::int64_t>(j);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = static_cast<std::int64_t>(i);
    const TokenId ai = a[i - 1];
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::int64_t sub = prev[j - 1] + (ai == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double pairwise_variability(const std::vector<LevelGrid>& samples, const SlicePolicy& policy) {
  if (samples.size() < 2) throw ValidationError("pairwise_variability needs at least 2 samples");
  std::vector<std::string> palette = samples.front().palette();
  std::vector<std::vector<TokenId>> strings;
  for (const auto& g : samples) {
    if (!(g.shape() == samples.front().shape())) {
      throw ValidationError("pairwise_variability: samples have different shapes");
    }
    strings.push_back(level_string(align_palette(g, palette), policy.axis));
  }
  const auto n = static_cast<std::int64_t>(samples.size());
  const std::int64_t pairs = n * (n - 1) / 2;
  std::vector<std::int64_t> distances(static_cast<std::size_t>(pairs));
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t p = 0; p < pairs; ++p) {
    // Unrank p into (i, j) with i < j.
    std::int64_t i = 0, rest = p;
    while (rest >= n - 1 - i) {
      rest -= n - 1 - i;
      ++i;
    }
    const std::int64_t j = i + 1 + rest;
    distances[static_cast<std::size_t>(p)] =
        levenshtein(strings[static_cast<std::size_t>(i)], strings[static_cast<std::size_t>(j)]);
  }
  double total = 0.0;
  for (auto d : distances) total += static_cast<double>(d);
  return total / static_cast<double>(pairs);
}

HistogramReport histogram_report(const LevelGrid& original, const std::vector<LevelGrid>& samples) {
  HistogramReport report;
  report.palette = original.palette();
  const auto k = original.token_count();
  report.reference.assign(k, 0);
  for (auto t : original.voxels()) ++report.reference[t];
  report.sample_count = samples.size();
  report.mean.assign(k, 0.0);
  report.variance.assign(k, 0.0);
  if (samples.empty()) return report;

  std::vector<std::vector<std::int64_t>> counts;
  for (const auto& g : samples) {
    std::vector<std::int64_t> c(k, 0);
    std::vector<std::size_t> remap(g.token_count());
    for (std::size_t t = 0; t < g.token_count(); ++t) {
      auto it = std::find(report.palette.begin(), report.palette.end(), g.palette()[t]);
      if (it == report.palette.end()) {
        throw ValidationError("histogram_report: sample token '" + g.palette()[t] +
                              "' is not in the original palette");
      }
      remap[t] = static_cast<std::size_t>(it - report.palette.begin());
    }
    for (auto t : g.voxels()) ++c[remap[t]];
    counts.push_back(std::move(c));
  }
  const auto n = static_cast<double>(samples.size());
  for (std::size_t t = 0; t < k; ++t) {
    double mean = 0.0;
    for (const auto& c : counts) mean += static_cast<double>(c[t]);
    mean /= n;
    double var = 0.0;
    for (const auto& c : counts) {
      const double dlt = static_cast<double>(c[t]) - mean;
      var += dlt * dlt;
    }
    report.mean[t] = mean;
    report.variance[t] = var / n;
  }
  return report;
}

}  // namespace worldgan
