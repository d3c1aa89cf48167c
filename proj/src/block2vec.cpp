#include "worldgan/block2vec.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "worldgan/errors.hpp"
#include "worldgan/kernels.hpp"

namespace worldgan {

using nlohmann::ordered_json;

EmbeddingTable::EmbeddingTable(int dimension, std::vector<std::string> palette,
                               std::vector<double> vectors)
    : dimension_(dimension), palette_(std::move(palette)), vectors_(std::move(vectors)) {
  if (dimension_ < 1) throw ValidationError("embedding dimension must be positive");
  validate_palette(palette_);
  if (vectors_.size() != palette_.size() * static_cast<std::size_t>(dimension_)) {
    throw ValidationError("embedding table has " + std::to_string(vectors_.size()) +
                          " values, expected " + std::to_string(palette_.size()) + " x " +
                          std::to_string(dimension_));
  }
  for (std::size_t i = 0; i < vectors_.size(); ++i) {
    if (!std::isfinite(vectors_[i])) {
      throw ValidationError("embedding for '" + palette_[i / static_cast<std::size_t>(dimension_)] +
                            "' has a non-finite entry");
    }
  }
}

std::int64_t EmbeddingTable::find(const std::string& name) const {
  auto it = std::find(palette_.begin(), palette_.end(), name);
  return it == palette_.end() ? -1 : it - palette_.begin();
}

EmbeddingTable one_hot_table(const std::vector<std::string>& palette) {
  const auto k = palette.size();
  std::vector<double> rows(k * k, 0.0);
  for (std::size_t i = 0; i < k; ++i) rows[i * k + i] = 1.0;
  return EmbeddingTable(static_cast<int>(k), palette, std::move(rows));
}

double keep_probability(double frequency) {
  if (!(frequency > 0.0)) {
    throw std::domain_error("keep_probability: frequency must be positive");
  }
  const double p = std::sqrt(frequency / 0.001 + 1.0) * (0.001 / frequency);
  return std::min(1.0, p);
}

Neighborhood parse_neighborhood(const std::string& name) {
  if (name == "axis6") return Neighborhood::axis6;
  throw ValidationError("unknown neighborhood '" + name + "' (supported: axis6)");
}

std::vector<ContextPair> build_context_dataset(const LevelGrid& grid, Neighborhood,
                                               const TokenStats& stats, std::uint64_t seed,
                                               bool subsample) {
  std::vector<double> keep(grid.token_count(), 1.0);
  if (subsample) {
    for (std::size_t t = 0; t < keep.size(); ++t) {
      if (stats.frequencies.at(t) > 0.0) keep[t] = keep_probability(stats.frequencies[t]);
    }
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  static constexpr int kOffsets[6][3] = {{-1, 0, 0}, {1, 0, 0}, {0, -1, 0},
                                         {0, 1, 0},  {0, 0, -1}, {0, 0, 1}};
  const auto& s = grid.shape();
  std::vector<ContextPair> pairs;
  pairs.reserve(grid.size() * (subsample ? 1 : 6));
  for (int d = 0; d < s.d; ++d) {
    for (int h = 0; h < s.h; ++h) {
      for (int w = 0; w < s.w; ++w) {
        const TokenId target = grid.at(d, h, w);
        if (subsample && uniform(rng) >= keep[target]) continue;
        for (const auto& o : kOffsets) {
          const int nd = d + o[0], nh = h + o[1], nw = w + o[2];
          if (nd < 0 || nd >= s.d || nh < 0 || nh >= s.h || nw < 0 || nw >= s.w) continue;
          pairs.push_back({target, grid.at(nd, nh, nw)});
        }
      }
    }
  }
  return pairs;
}

SkipGramModel SkipGramModel::initialize(int tokens, int dimension, std::uint64_t seed) {
  SkipGramModel model;
  model.tokens = tokens;
  model.dimension = dimension;
  std::mt19937_64 rng(seed);
  const double bound = 0.5 / dimension;
  std::uniform_real_distribution<double> init(-bound, bound);
  const auto n = static_cast<std::size_t>(tokens) * static_cast<std::size_t>(dimension);
  model.input_weights.resize(n);
  model.output_weights.resize(n);
  for (auto& v : model.input_weights) v = init(rng);
  for (auto& v : model.output_weights) v = init(rng);
  return model;
}

namespace {

// Softmax over the k output scores for a target token; returns log-sum-exp.
double output_probabilities(const SkipGramModel& model, TokenId target, std::vector<double>& probs) {
  const int k = model.tokens, m = model.dimension;
  const double* h = model.input_weights.data() + static_cast<std::size_t>(target) * m;
  probs.assign(static_cast<std::size_t>(k), 0.0);
  for (int j = 0; j < m; ++j) {
    const double* out_row = model.output_weights.data() + static_cast<std::size_t>(j) * k;
    for (int i = 0; i < k; ++i) probs[static_cast<std::size_t>(i)] += h[j] * out_row[i];
  }
  const double peak = *std::max_element(probs.begin(), probs.end());
  double total = 0.0;
  for (auto& p : probs) {
    p = std::exp(p - peak);
    total += p;
  }
  for (auto& p : probs) p /= total;
  return peak + std::log(total);
}

}  // namespace

double skipgram_loss(const SkipGramModel& model, const ContextPair& pair) {
  std::vector<double> probs;
  output_probabilities(model, pair.target, probs);
  return -std::log(probs[pair.context]);
}

SkipGramGradient skipgram_gradient(const SkipGramModel& model, const ContextPair& pair) {
  const int k = model.tokens, m = model.dimension;
  std::vector<double> probs;
  output_probabilities(model, pair.target, probs);
  probs[pair.context] -= 1.0;  // d loss / d score

  SkipGramGradient g;
  g.input_weights.assign(model.input_weights.size(), 0.0);
  g.output_weights.assign(model.output_weights.size(), 0.0);
  const double* h = model.input_weights.data() + static_cast<std::size_t>(pair.target) * m;
  double* gh = g.input_weights.data() + static_cast<std::size_t>(pair.target) * m;
  for (int j = 0; j < m; ++j) {
    const auto row = static_cast<std::size_t>(j) * k;
    double acc = 0.0;
    for (int i = 0; i < k; ++i) {
      g.output_weights[row + i] = h[j] * probs[static_cast<std::size_t>(i)];
      acc += model.output_weights[row + i] * probs[static_cast<std::size_t>(i)];
    }
    gh[j] = acc;
  }
  return g;
}

EmbeddingTraining train_embeddings(std::span<const ContextPair> pairs,
                                   const std::vector<std::string>& palette, int dimension,
                                   int epochs, double learning_rate, std::uint64_t seed) {
  const auto k = static_cast<int>(palette.size());
  if (k < 2) throw ValidationError("block2vec needs at least 2 distinct tokens");
  if (dimension < 1) throw ValidationError("embedding dimension must be positive");
  if (pairs.empty()) {
    throw ValidationError(
        "context dataset is empty; the snippet is too small for frequency subsampling, "
        "disable subsampling");
  }
  for (const auto& p : pairs) {
    if (p.target >= static_cast<TokenId>(k) || p.context >= static_cast<TokenId>(k)) {
      throw ValidationError("context pair references a token outside the palette");
    }
  }

  std::mt19937_64 rng(seed);
  auto model = SkipGramModel::initialize(k, dimension, rng());
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  EmbeddingTraining result;
  std::vector<double> probs;
  std::vector<double> grad_h(static_cast<std::size_t>(dimension));
  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (auto idx : order) {
      const auto& pair = pairs[idx];
      output_probabilities(model, pair.target, probs);
      total += -std::log(probs[pair.context]);
      probs[pair.context] -= 1.0;
      double* h = model.input_weights.data() + static_cast<std::size_t>(pair.target) * dimension;
      for (int j = 0; j < dimension; ++j) {
        double* out_row = model.output_weights.data() + static_cast<std::size_t>(j) * k;
        double acc = 0.0;
        for (int i = 0; i < k; ++i) acc += out_row[i] * probs[static_cast<std::size_t>(i)];
        grad_h[static_cast<std::size_t>(j)] = acc;
        for (int i = 0; i < k; ++i) out_row[i] -= learning_rate * h[j] * probs[static_cast<std::size_t>(i)];
      }
      for (int j = 0; j < dimension; ++j) h[j] -= learning_rate * grad_h[static_cast<std::size_t>(j)];
    }
    const double mean = total / static_cast<double>(pairs.size());
    if (!std::isfinite(mean)) {
      throw TrainingError("block2vec loss became non-finite at epoch " + std::to_string(epoch));
    }
    result.epoch_losses.push_back(mean);
  }
  result.table = EmbeddingTable(dimension, palette, std::move(model.input_weights));
  return result;
}

namespace {

// Table rows in float precision, ordered by the grid palette.
std::vector<float> float_rows(const EmbeddingTable& table) {
  std::vector<float> rows(table.vectors().size());
  std::transform(table.vectors().begin(), table.vectors().end(), rows.begin(),
                 [](double v) { return static_cast<float>(v); });
  return rows;
}

}  // namespace

Field encode_level(const LevelGrid& grid, const EmbeddingTable& table) {
  const int m = table.dimension();
  std::vector<std::size_t> row_of(grid.token_count());
  for (std::size_t t = 0; t < grid.token_count(); ++t) {
    const auto idx = table.find(grid.palette()[t]);
    if (idx < 0) {
      throw ValidationError("token '" + grid.palette()[t] + "' has no embedding");
    }
    row_of[t] = static_cast<std::size_t>(idx);
  }
  const auto rows = float_rows(table);
  Field field(m, grid.shape());
  const auto spatial = field.spatial_size();
  const auto& vox = grid.voxels();
  auto data = field.data();
  for (int c = 0; c < m; ++c) {
    float* dst = data.data() + static_cast<std::size_t>(c) * spatial;
    for (std::size_t v = 0; v < spatial; ++v) {
      dst[v] = rows[row_of[vox[v]] * static_cast<std::size_t>(m) + static_cast<std::size_t>(c)];
    }
  }
  return field;
}

LevelGrid decode_level(const Field& field, const EmbeddingTable& table) {
  if (field.channels() != table.dimension()) {
    throw ValidationError("field has " + std::to_string(field.channels()) +
                          " channels, embedding dimension is " + std::to_string(table.dimension()));
  }
  const auto rows = float_rows(table);
  std::vector<TokenId> voxels(field.spatial_size());
  kernels::nearest_rows(field.data(), static_cast<std::int64_t>(field.spatial_size()), rows,
                        static_cast<int>(table.token_count()), table.dimension(), voxels);
  return LevelGrid(field.shape(), table.palette(), std::move(voxels));
}

EmbeddingTable parse_embeddings(const std::string& text, const std::string& source) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const ordered_json::parse_error& e) {
    throw ParseError(source + ": " + e.what());
  }
  if (!doc.is_object() || !doc.contains("dimension") || !doc.contains("tokens")) {
    throw ParseError(source + ": expected an object with fields 'dimension' and 'tokens'");
  }
  if (!doc["dimension"].is_number_integer() || doc["dimension"].get<int>() < 1) {
    throw ParseError(source + ": field 'dimension' must be a positive integer");
  }
  const int m = doc["dimension"].get<int>();
  const auto& tokens = doc["tokens"];
  if (!tokens.is_object()) throw ParseError(source + ": field 'tokens' must be an object");
  std::vector<std::string> palette;
  std::vector<double> vectors;
  vectors.reserve(tokens.size() * static_cast<std::size_t>(m));
  for (const auto& [name, row] : tokens.items()) {
    if (!row.is_array()) {
      throw ParseError(source + ": tokens['" + name + "'] must be an array");
    }
    if (row.size() != static_cast<std::size_t>(m)) {
      throw ValidationError(source + ": tokens['" + name + "'] has " + std::to_string(row.size()) +
                            " values, dimension is " + std::to_string(m));
    }
    for (const auto& v : row) {
      if (!v.is_number()) {
        throw ParseError(source + ": tokens['" + name + "'] contains a non-number");
      }
      vectors.push_back(v.get<double>());
    }
    palette.push_back(name);
  }
  try {
    return EmbeddingTable(m, std::move(palette), std::move(vectors));
  } catch (const ValidationError& e) {
    throw ValidationError(source + ": " + e.what());
  }
}

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_embeddings(ss.str(), path.string());
}

std::string embeddings_to_json(const EmbeddingTable& table, const std::string& metadata_json) {
  ordered_json doc;
  doc["dimension"] = table.dimension();
  ordered_json tokens = ordered_json::object();
  for (std::size_t i = 0; i < table.token_count(); ++i) {
    auto row = table.row(i);
    tokens[table.palette()[i]] = std::vector<double>(row.begin(), row.end());
  }
  doc["tokens"] = std::move(tokens);
  if (!metadata_json.empty()) doc["metadata"] = ordered_json::parse(metadata_json);
  return doc.dump(1) + "\n";
}

void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path,
                     const std::string& metadata_json) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << embeddings_to_json(table, metadata_json);
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / std::sqrt(na * nb);
}

}  // namespace worldgan
