#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "worldgan/evaluation.hpp"
#include "worldgan/gan.hpp"
#include "worldgan/generation.hpp"

namespace worldgan::cli {

enum ExitCode : int { kSuccess = 0, kUsage = 2, kRuntime = 3 };

enum class EmbeddingSource { block2vec, external, onehot };
enum class Downsampling { dense, hierarchical };

struct EmbeddingSection {
  EmbeddingSource source = EmbeddingSource::block2vec;
  int dimension = 32;
  int epochs = 30;
  double learning_rate = 0.025;
  Neighborhood neighborhood = Neighborhood::axis6;
  bool subsample = true;
  std::optional<std::uint64_t> seed;
  std::filesystem::path path;  // external embeddings
};

struct PyramidSection {
  std::vector<double> factors = {1.0, 0.75, 0.5, 0.25};
  Downsampling downsampling = Downsampling::dense;
};

struct GenerateSection {
  int count = 100;
  SizeFactors size_factors = {1.0, 1.0, 1.0};
  std::optional<std::uint64_t> seed;
  std::filesystem::path style_map;
};

struct EvaluationSection {
  std::vector<int> sizes = {5, 10};
  double epsilon = 1e-5;
  int sample_count = 20;
  int histogram_samples = 100;
  SliceAxis slice_axis = SliceAxis::h;
};

struct RunConfig {
  std::filesystem::path input;
  std::optional<LevelFormat> input_format;
  std::filesystem::path output = "run";
  std::uint64_t seed = 0;
  EmbeddingSection embedding;
  PyramidSection pyramid;
  TrainConfig train;
  std::optional<std::uint64_t> train_seed;
  GenerateSection generate;
  EvaluationSection evaluation;

  [[nodiscard]] std::uint64_t embedding_seed() const { return embedding.seed.value_or(seed); }
  [[nodiscard]] std::uint64_t training_seed() const { return train_seed.value_or(seed); }
  [[nodiscard]] std::uint64_t generation_seed() const { return generate.seed.value_or(seed); }
};

// Parses a JSON run config; relative paths are resolved against `base_dir`.
RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);
// Canonical JSON of the semantic settings (the output directory is excluded).
std::string canonical_config(const RunConfig& config);
// 16 hex digits of FNV-1a over canonical_config.
std::string config_hash(const RunConfig& config);

// Run directory layout.
struct RunLayout {
  std::filesystem::path root;
  [[nodiscard]] std::filesystem::path embeddings() const { return root / "embeddings"; }
  [[nodiscard]] std::filesystem::path stack() const { return root / "stack"; }
  [[nodiscard]] std::filesystem::path samples() const { return root / "samples"; }
  [[nodiscard]] std::filesystem::path reports() const { return root / "reports"; }
  [[nodiscard]] std::filesystem::path logs() const { return root / "logs"; }
  [[nodiscard]] std::filesystem::path embedding_file() const { return embeddings() / "embeddings.json"; }
};

// Entry points. `args` excludes the program name.
int run(int argc, char** argv);
int run(const std::vector<std::string>& args);

}  // namespace worldgan::cli
