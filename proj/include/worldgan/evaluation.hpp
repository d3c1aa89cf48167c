#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "worldgan/level.hpp"

namespace worldgan {

struct PatternHash {
  std::size_t operator()(const std::vector<TokenId>& key) const noexcept;
};

// Counts of every n x n x n token pattern over all overlapping windows.
struct PatternDistribution {
  int size = 1;
  std::unordered_map<std::vector<TokenId>, std::int64_t, PatternHash> counts;
  std::int64_t total = 0;
};

// Throws ValidationError if n exceeds any extent of the grid.
PatternDistribution pattern_distribution(const LevelGrid& grid, int n);

inline const std::vector<int> kDefaultPatternSizes = {5, 10};
inline constexpr double kDefaultKlEpsilon = 1e-5;

// KL(P || Q) between pattern frequencies of `original` (P) and `generated` (Q) on the union of
// observed patterns, after adding epsilon to every frequency and renormalizing.
double pattern_kl(const PatternDistribution& p, const PatternDistribution& q, double epsilon);

// Mean over `sizes` of pattern_kl. Palettes are matched by token name.
double tpkl_div(const LevelGrid& original, const LevelGrid& generated,
                const std::vector<int>& sizes = kDefaultPatternSizes,
                double epsilon = kDefaultKlEpsilon);

// Re-indexes `grid` into `palette` (by name), appending unseen names to `palette`.
LevelGrid align_palette(const LevelGrid& grid, std::vector<std::string>& palette);

enum class SliceAxis { d = 0, h = 1, w = 2 };

SliceAxis parse_slice_axis(const std::string& name);

// Tokens of the 2D slice at `index` along `axis`, flattened row-major over the remaining axes.
std::vector<TokenId> slice_string(const LevelGrid& grid, SliceAxis axis, int index);

// Concatenation of all slices along `axis` in ascending order.
std::vector<TokenId> level_string(const LevelGrid& grid, SliceAxis axis);

// Edit distance with unit-cost insertions, deletions and substitutions. Two-row dynamic
// program: O(|a| * |b|) time, O(min(|a|, |b|)) memory.
std::int64_t levenshtein(std::span<const TokenId> a, std::span<const TokenId> b);

struct SlicePolicy {
  SliceAxis axis = SliceAxis::h;
};

// Mean Levenshtein distance over all unordered pairs of level_string(sample, policy.axis).
// Needs at least 2 samples of equal shape.
double pairwise_variability(const std::vector<LevelGrid>& samples, const SlicePolicy& policy = {});

struct HistogramReport {
  std::vector<std::string> palette;      // original palette order
  std::vector<std::int64_t> reference;   // counts in the original
  std::vector<double> mean;              // per token, across samples
  std::vector<double> variance;          // population variance
  std::size_t sample_count = 0;
};

HistogramReport histogram_report(const LevelGrid& original, const std::vector<LevelGrid>& samples);

}  // namespace worldgan
