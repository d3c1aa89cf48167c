#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace worldgan {

// Spatial extent of a snippet. H is the vertical (gravity) axis.
struct Shape3 {
  int d = 1;
  int h = 1;
  int w = 1;

  [[nodiscard]] std::int64_t volume() const {
    return static_cast<std::int64_t>(d) * h * w;
  }
  [[nodiscard]] int operator[](int axis) const { return axis == 0 ? d : axis == 1 ? h : w; }
  int& operator[](int axis) { return axis == 0 ? d : axis == 1 ? h : w; }
  friend bool operator==(const Shape3&, const Shape3&) = default;
};

std::string to_string(const Shape3& s);

using TokenId = std::uint32_t;

// A D x H x W block of token indices into `palette`.
// Flat index of (d, h, w) is d*H*W + h*W + w.
class LevelGrid {
 public:
  LevelGrid() = default;
  // Throws ValidationError if any invariant is violated.
  LevelGrid(Shape3 shape, std::vector<std::string> palette, std::vector<TokenId> voxels);

  // Uniform grid filled with `fill`.
  static LevelGrid filled(Shape3 shape, std::vector<std::string> palette, TokenId fill = 0);

  [[nodiscard]] const Shape3& shape() const { return shape_; }
  [[nodiscard]] const std::vector<std::string>& palette() const { return palette_; }
  [[nodiscard]] const std::vector<TokenId>& voxels() const { return voxels_; }
  [[nodiscard]] std::size_t token_count() const { return palette_.size(); }
  [[nodiscard]] std::size_t size() const { return voxels_.size(); }

  [[nodiscard]] std::size_t flat_index(int d, int h, int w) const {
    return (static_cast<std::size_t>(d) * shape_.h + h) * shape_.w + w;
  }
  [[nodiscard]] TokenId at(int d, int h, int w) const { return voxels_[flat_index(d, h, w)]; }
  void set(int d, int h, int w, TokenId t);

  friend bool operator==(const LevelGrid&, const LevelGrid&) = default;

 private:
  Shape3 shape_{};
  std::vector<std::string> palette_;
  std::vector<TokenId> voxels_;
};

// Validates palette entries: unique and non-empty.
void validate_palette(const std::vector<std::string>& palette);

enum class LevelFormat { json, csv_flat };

LevelFormat parse_level_format(const std::string& name);
// Picks the format from the extension: .csv -> csv_flat, anything else -> json.
LevelFormat format_from_extension(const std::filesystem::path& path);

LevelGrid load_level(const std::filesystem::path& path, LevelFormat format);
LevelGrid load_level(const std::filesystem::path& path);
void save_level(const LevelGrid& grid, const std::filesystem::path& path, LevelFormat format);

// In-memory variants used by the file functions; `source` names the input in errors.
LevelGrid parse_level_json(const std::string& text, const std::string& source = "<memory>");
LevelGrid parse_level_csv(const std::string& text, const std::string& source = "<memory>");
std::string level_to_json(const LevelGrid& grid);
std::string level_to_csv(const LevelGrid& grid);

struct TokenStats {
  std::vector<std::int64_t> counts;  // indexed by token id
  std::vector<double> frequencies;   // counts / total voxels
  std::int64_t total = 0;
};

TokenStats token_stats(const LevelGrid& grid);

struct AxisRange {
  std::int64_t lo = 0;
  std::int64_t hi = 0;
};

struct BoundingBox {
  AxisRange x, y, z;
};

// Product of (hi - lo) per axis; upper bounds are exclusive.
std::int64_t bbox_volume(const BoundingBox& box);

struct MemoryFootprint {
  std::int64_t values = 0;
  std::int64_t bytes = 0;
  double megabytes = 0.0;  // bytes / 1e6

  // Megabytes with two decimals, e.g. "154.23".
  [[nodiscard]] std::string formatted() const;
};

// Storage for a tensor of `shape` (any rank) with `channels` values per cell.
MemoryFootprint memory_footprint(const std::vector<std::int64_t>& shape, std::int64_t channels,
                                 std::int64_t bytes_per_value = 4);

}  // namespace worldgan
