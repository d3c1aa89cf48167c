#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "worldgan/field.hpp"
#include "worldgan/level.hpp"

namespace worldgan {

// One dense vector per token; row i belongs to palette[i].
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  // Throws ValidationError on shape mismatch, non-finite entries or a bad palette.
  EmbeddingTable(int dimension, std::vector<std::string> palette, std::vector<double> vectors);

  [[nodiscard]] int dimension() const { return dimension_; }
  [[nodiscard]] std::size_t token_count() const { return palette_.size(); }
  [[nodiscard]] const std::vector<std::string>& palette() const { return palette_; }
  [[nodiscard]] const std::vector<double>& vectors() const { return vectors_; }
  [[nodiscard]] std::span<const double> row(std::size_t i) const {
    return std::span<const double>(vectors_).subspan(i * static_cast<std::size_t>(dimension_),
                                                     static_cast<std::size_t>(dimension_));
  }
  // Row index of `name`, or -1.
  [[nodiscard]] std::int64_t find(const std::string& name) const;

  friend bool operator==(const EmbeddingTable&, const EmbeddingTable&) = default;

 private:
  int dimension_ = 0;
  std::vector<std::string> palette_;
  std::vector<double> vectors_;
};

// Identity rows: the one-hot encoding used by the hierarchical baseline.
EmbeddingTable one_hot_table(const std::vector<std::string>& palette);

// Subsampling keep probability min(1, sqrt(f/0.001 + 1) * 0.001/f) for a token of frequency f.
double keep_probability(double frequency);

struct ContextPair {
  TokenId target = 0;
  TokenId context = 0;
  friend bool operator==(const ContextPair&, const ContextPair&) = default;
};

enum class Neighborhood { axis6 };

Neighborhood parse_neighborhood(const std::string& name);

// Pairs (voxel, neighbor) for each in-bounds axis neighbor of every voxel that survives an
// independent Bernoulli(keep_probability(f(voxel))) draw. With subsample == false every voxel is
// kept.
std::vector<ContextPair> build_context_dataset(const LevelGrid& grid, Neighborhood neighborhood,
                                               const TokenStats& stats, std::uint64_t seed,
                                               bool subsample = true);

// Two linear layers: input_weights is k x m (row per token), output_weights is m x k.
struct SkipGramModel {
  int tokens = 0;
  int dimension = 0;
  std::vector<double> input_weights;
  std::vector<double> output_weights;

  static SkipGramModel initialize(int tokens, int dimension, std::uint64_t seed);
};

struct SkipGramGradient {
  std::vector<double> input_weights;
  std::vector<double> output_weights;
};

// Full-softmax cross entropy of predicting `pair.context` from `pair.target`.
double skipgram_loss(const SkipGramModel& model, const ContextPair& pair);
SkipGramGradient skipgram_gradient(const SkipGramModel& model, const ContextPair& pair);

struct EmbeddingTraining {
  EmbeddingTable table;
  std::vector<double> epoch_losses;  // mean loss per epoch
};

// Plain SGD over shuffled pairs. Throws ValidationError on an empty dataset or fewer than 2 tokens.
EmbeddingTraining train_embeddings(std::span<const ContextPair> pairs,
                                   const std::vector<std::string>& palette, int dimension,
                                   int epochs, double learning_rate, std::uint64_t seed);

// m x D x H x W field whose column at each voxel is that token's row. Tokens are matched by name.
Field encode_level(const LevelGrid& grid, const EmbeddingTable& table);
// Nearest row per voxel (Euclidean, ties to the lower index); palette is the table's palette.
LevelGrid decode_level(const Field& field, const EmbeddingTable& table);

// {"dimension": m, "tokens": {"<name>": [m reals], ...}}; token order is file order.
EmbeddingTable parse_embeddings(const std::string& text, const std::string& source = "<memory>");
EmbeddingTable load_embeddings(const std::filesystem::path& path);
std::string embeddings_to_json(const EmbeddingTable& table, const std::string& metadata_json = "");
void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path,
                     const std::string& metadata_json = "");

double cosine_similarity(std::span<const double> a, std::span<const double> b);

}  // namespace worldgan
