#include "worldgan/level.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "worldgan/errors.hpp"

namespace worldgan {

using nlohmann::ordered_json;

std::string to_string(const Shape3& s) {
  return std::to_string(s.d) + "x" + std::to_string(s.h) + "x" + std::to_string(s.w);
}

void validate_palette(const std::vector<std::string>& palette) {
  std::set<std::string> seen;
  for (std::size_t i = 0; i < palette.size(); ++i) {
    if (palette[i].empty()) {
      throw ValidationError("palette entry " + std::to_string(i) + " is empty");
    }
    if (!seen.insert(palette[i]).second) {
      throw ValidationError("duplicate palette entry '" + palette[i] + "'");
    }
  }
}

LevelGrid::LevelGrid(Shape3 shape, std::vector<std::string> palette, std::vector<TokenId> voxels)
    : shape_(shape), palette_(std::move(palette)), voxels_(std::move(voxels)) {
  if (shape_.d < 1 || shape_.h < 1 || shape_.w < 1) {
    throw ValidationError("shape must be positive, got " + to_string(shape_));
  }
  validate_palette(palette_);
  if (static_cast<std::int64_t>(voxels_.size()) != shape_.volume()) {
    throw ValidationError("voxel count " + std::to_string(voxels_.size()) +
                          " does not match shape " + to_string(shape_));
  }
  for (std::size_t i = 0; i < voxels_.size(); ++i) {
    if (voxels_[i] >= palette_.size()) {
      throw ValidationError("voxel " + std::to_string(i) + ": index out of palette range (" +
                            std::to_string(voxels_[i]) + " >= " +
                            std::to_string(palette_.size()) + ")");
    }
  }
}

LevelGrid LevelGrid::filled(Shape3 shape, std::vector<std::string> palette, TokenId fill) {
  auto n = static_cast<std::size_t>(std::max<std::int64_t>(shape.volume(), 0));
  return LevelGrid(shape, std::move(palette), std::vector<TokenId>(n, fill));
}

void LevelGrid::set(int d, int h, int w, TokenId t) {
  if (t >= palette_.size()) {
    throw ValidationError("index out of palette range");
  }
  voxels_[flat_index(d, h, w)] = t;
}

LevelFormat parse_level_format(const std::string& name) {
  if (name == "json") return LevelFormat::json;
  if (name == "csv" || name == "csv-flat" || name == "csv_flat") return LevelFormat::csv_flat;
  throw ValidationError("unknown level format '" + name + "' (expected json or csv-flat)");
}

LevelFormat format_from_extension(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? LevelFormat::csv_flat : LevelFormat::json;
}

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open '" + path.string() + "' for reading");
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open '" + path.string() + "' for writing");
  }
  out << text;
  out.flush();
  if (!out) {
    throw IoError("write to '" + path.string() + "' failed");
  }
}

const ordered_json& require(const ordered_json& obj, const char* field, const std::string& source) {
  auto it = obj.find(field);
  if (it == obj.end()) {
    throw ParseError(source + ": missing field '" + field + "'");
  }
  return *it;
}

}  // namespace

LevelGrid parse_level_json(const std::string& text, const std::string& source) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const ordered_json::parse_error& e) {
    throw ParseError(source + ": " + e.what());
  }
  if (!doc.is_object()) {
    throw ParseError(source + ": top-level value must be an object");
  }
  try {
    const auto& version = require(doc, "format_version", source);
    if (!version.is_number_integer() || version.get<int>() != 1) {
      throw ParseError(source + ": field 'format_version' must be 1");
    }
    if (auto it = doc.find("axis_order"); it != doc.end() && *it != "dhw") {
      throw ParseError(source + ": field 'axis_order' must be \"dhw\"");
    }
    if (auto it = doc.find("vertical_axis"); it != doc.end() && *it != "h") {
      throw ParseError(source + ": field 'vertical_axis' must be \"h\"");
    }
    const auto& shape_j = require(doc, "shape", source);
    if (!shape_j.is_array() || shape_j.size() != 3) {
      throw ParseError(source + ": field 'shape' must be an array [D,H,W]");
    }
    Shape3 shape;
    for (int i = 0; i < 3; ++i) {
      if (!shape_j[i].is_number_integer()) {
        throw ParseError(source + ": field 'shape[" + std::to_string(i) + "]' must be an integer");
      }
      shape[i] = shape_j[i].get<int>();
    }
    const auto& palette_j = require(doc, "palette", source);
    if (!palette_j.is_array()) {
      throw ParseError(source + ": field 'palette' must be an array of strings");
    }
    std::vector<std::string> palette;
    for (std::size_t i = 0; i < palette_j.size(); ++i) {
      if (!palette_j[i].is_string()) {
        throw ParseError(source + ": field 'palette[" + std::to_string(i) + "]' must be a string");
      }
      palette.push_back(palette_j[i].get<std::string>());
    }
    const auto& voxels_j = require(doc, "voxels", source);
    if (!voxels_j.is_array()) {
      throw ParseError(source + ": field 'voxels' must be an array of integers");
    }
    std::vector<TokenId> voxels;
    voxels.reserve(voxels_j.size());
    for (std::size_t i = 0; i < voxels_j.size(); ++i) {
      const auto& v = voxels_j[i];
      if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
        throw ParseError(source + ": field 'voxels[" + std::to_string(i) +
                         "]' must be a non-negative integer");
      }
      auto value = v.get<std::int64_t>();
      if (value > static_cast<std::int64_t>(UINT32_MAX)) {
        throw ValidationError(source + ": voxels[" + std::to_string(i) +
                              "]: index out of palette range");
      }
      voxels.push_back(static_cast<TokenId>(value));
    }
    return LevelGrid(shape, std::move(palette), std::move(voxels));
  } catch (const ValidationError& e) {
    throw ValidationError(source + ": " + e.what());
  }
}

LevelGrid parse_level_csv(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) return true;
    }
    return false;
  };
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(s);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!s.empty() && s.back() == ',') out.emplace_back();
    return out;
  };
  auto parse_int = [&](const std::string& cell, const std::string& what) -> std::int64_t {
    std::size_t pos = 0;
    std::int64_t v = 0;
    try {
      v = std::stoll(cell, &pos);
    } catch (const std::exception&) {
      pos = std::string::npos;
    }
    if (pos != cell.size() || cell.empty()) {
      throw ParseError(source + ": line " + std::to_string(line_no) + ": " + what +
                       " is not an integer: '" + cell + "'");
    }
    return v;
  };

  if (!next_line()) throw ParseError(source + ": line 1: missing header D,H,W,k");
  auto header = split(line);
  if (header.size() != 4) {
    throw ParseError(source + ": line " + std::to_string(line_no) +
                     ": header must have 4 fields D,H,W,k");
  }
  Shape3 shape{static_cast<int>(parse_int(header[0], "D")),
               static_cast<int>(parse_int(header[1], "H")),
               static_cast<int>(parse_int(header[2], "W"))};
  auto k = parse_int(header[3], "k");

  if (!next_line()) throw ParseError(source + ": missing palette line");
  auto palette = split(line);
  if (static_cast<std::int64_t>(palette.size()) != k) {
    throw ParseError(source + ": line " + std::to_string(line_no) + ": palette has " +
                     std::to_string(palette.size()) + " entries, header says k=" +
                     std::to_string(k));
  }

  std::vector<TokenId> voxels;
  if (shape.volume() > 0) voxels.reserve(static_cast<std::size_t>(shape.volume()));
  while (next_line()) {
    for (const auto& cell : split(line)) {
      auto v = parse_int(cell, "voxel index");
      if (v < 0 || v >= k) {
        throw ValidationError(source + ": line " + std::to_string(line_no) +
                              ": index out of palette range (" + cell + ")");
      }
      voxels.push_back(static_cast<TokenId>(v));
    }
  }
  try {
    return LevelGrid(shape, std::move(palette), std::move(voxels));
  } catch (const ValidationError& e) {
    throw ValidationError(source + ": " + e.what());
  }
}

std::string level_to_json(const LevelGrid& grid) {
  ordered_json doc;
  doc["format_version"] = 1;
  doc["shape"] = {grid.shape().d, grid.shape().h, grid.shape().w};
  doc["axis_order"] = "dhw";
  doc["vertical_axis"] = "h";
  doc["palette"] = grid.palette();
  doc["voxels"] = grid.voxels();
  return doc.dump() + "\n";
}

std::string level_to_csv(const LevelGrid& grid) {
  for (const auto& name : grid.palette()) {
    if (name.find_first_of(",\r\n") != std::string::npos) {
      throw ValidationError("palette entry '" + name + "' cannot be stored in csv-flat format");
    }
  }
  const auto& s = grid.shape();
  std::string out = std::to_string(s.d) + "," + std::to_string(s.h) + "," + std::to_string(s.w) +
                    "," + std::to_string(grid.token_count()) + "\n";
  for (std::size_t i = 0; i < grid.palette().size(); ++i) {
    if (i) out += ',';
    out += grid.palette()[i];
  }
  out += '\n';
  // One line per (d, h) row.
  const auto& vox = grid.voxels();
  for (std::size_t row = 0; row < vox.size(); row += static_cast<std::size_t>(s.w)) {
    for (int w = 0; w < s.w; ++w) {
      if (w) out += ',';
      out += std::to_string(vox[row + static_cast<std::size_t>(w)]);
    }
    out += '\n';
  }
  return out;
}

LevelGrid load_level(const std::filesystem::path& path, LevelFormat format) {
  auto text = read_file(path);
  return format == LevelFormat::json ? parse_level_json(text, path.string())
                                     : parse_level_csv(text, path.string());
}

LevelGrid load_level(const std::filesystem::path& path) {
  return load_level(path, format_from_extension(path));
}

void save_level(const LevelGrid& grid, const std::filesystem::path& path, LevelFormat format) {
  write_file(path, format == LevelFormat::json ? level_to_json(grid) : level_to_csv(grid));
}

TokenStats token_stats(const LevelGrid& grid) {
  TokenStats stats;
  stats.counts.assign(grid.token_count(), 0);
  for (auto t : grid.voxels()) ++stats.counts[t];
  stats.total = static_cast<std::int64_t>(grid.size());
  stats.frequencies.resize(grid.token_count());
  for (std::size_t i = 0; i < stats.counts.size(); ++i) {
    stats.frequencies[i] = static_cast<double>(stats.counts[i]) / static_cast<double>(stats.total);
  }
  return stats;
}

std::int64_t bbox_volume(const BoundingBox& box) {
  return (box.x.hi - box.x.lo) * (box.y.hi - box.y.lo) * (box.z.hi - box.z.lo);
}

std::string MemoryFootprint::formatted() const {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", megabytes);
  return buf;
}

MemoryFootprint memory_footprint(const std::vector<std::int64_t>& shape, std::int64_t channels,
                                 std::int64_t bytes_per_value) {
  if (shape.empty() || channels < 1 || bytes_per_value < 1) {
    throw ValidationError("memory_footprint needs a non-empty shape and positive channels/bytes");
  }
  MemoryFootprint fp;
  fp.values = channels;
  for (auto s : shape) {
    if (s < 1) throw ValidationError("memory_footprint: shape entries must be positive");
    fp.values *= s;
  }
  fp.bytes = fp.values * bytes_per_value;
  fp.megabytes = static_cast<double>(fp.bytes) / 1e6;
  return fp;
}

}  // namespace worldgan
