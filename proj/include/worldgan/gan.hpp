#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "worldgan/autograd.hpp"
#include "worldgan/block2vec.hpp"
#include "worldgan/field.hpp"
#include "worldgan/pyramid.hpp"

namespace worldgan {

struct ConvNetSpec {
  int blocks = 5;
  int kernel = 3;
  int base_channels = 32;
  bool normalize = true;
  float leaky_slope = 0.2f;

  void validate() const;
};

// Fully convolutional stack of same-padded 3D convolutions. Every block but the last is
// conv -> per-channel spatial normalization -> leaky ReLU; the last block is a plain conv.
class ConvNet {
 public:
  struct Layer {
    int in_channels = 0;
    int out_channels = 0;
    bool normalize = false;
    bool activation = false;
  };

  ConvNet() = default;

  // Weights ~ N(0, 0.02), biases 0, norm gains ~ N(1, 0.02), norm offsets 0.
  static ConvNet create(const ConvNetSpec& spec, int in_channels, int out_channels,
                        std::mt19937_64& rng);
  // A single linear conv layer with the given [out][in][k][k][k] weights and [out] bias.
  static ConvNet single_layer(int kernel, ad::Tensor weight, ad::Tensor bias);
  // Architecture only, zero parameters; used when loading.
  static ConvNet skeleton(const ConvNetSpec& spec, int in_channels, int out_channels);

  [[nodiscard]] ad::Var forward(const ad::Var& x) const;
  [[nodiscard]] Field forward(const Field& x) const;

  [[nodiscard]] const std::vector<ad::Var>& parameters() const { return params_; }
  [[nodiscard]] std::vector<ad::Var>& parameters() { return params_; }
  [[nodiscard]] const std::vector<Layer>& layers() const { return layers_; }
  [[nodiscard]] int kernel() const { return kernel_; }
  [[nodiscard]] int in_channels() const { return layers_.front().in_channels; }
  [[nodiscard]] int out_channels() const { return layers_.back().out_channels; }
  // Smallest spatial extent accepted on every axis.
  [[nodiscard]] int min_extent() const { return kernel_; }
  [[nodiscard]] std::size_t parameter_count() const;

  // Deep copy; the returned net shares no parameter storage with this one.
  [[nodiscard]] ConvNet clone() const;

  // Zero the last layer's weights and bias.
  void zero_output_layer();

 private:
  std::vector<Layer> layers_;
  std::vector<ad::Var> params_;  // per layer: weight, bias[, gain, offset]
  int kernel_ = 3;
  float slope_ = 0.2f;
};

ad::Tensor to_tensor(const Field& field);
Field to_field(const ad::Tensor& tensor);

// prev_upsampled + net(noise + prev_upsampled).
ad::Var generator_forward(const ConvNet& generator, const ad::Var& prev_upsampled, const ad::Var& noise);
Field generator_step(const Field& prev_upsampled, const Field& noise, const ConvNet& generator);

// Mean of the critic's patch score map. Throws ValidationError below the receptive footprint.
double discriminator_score(const Field& field, const ConvNet& discriminator);

using Critic = std::function<ad::Var(const ad::Var&)>;
Critic as_critic(const ConvNet& discriminator);

struct GradientPenaltyLoss {
  ad::Var critic_loss;  // score(fake) - score(real)
  ad::Var penalty;      // lambda * (|grad score(x_hat)| - 1)^2
  double epsilon = 0.0;
};

// x_hat = eps * real + (1 - eps) * fake with eps ~ U(0, 1) from `seed`.
GradientPenaltyLoss wgan_gp_loss(const Critic& critic, const Field& real, const Field& fake,
                                 double gp_lambda, std::uint64_t seed);

double reconstruction_loss(const Field& reconstructed, const Field& real);
ad::Var mse(const ad::Var& a, const ad::Var& b);

// Root mean squared difference; the noise amplitude of a non-coarsest scale.
double noise_sigma(const Field& real, const Field& upsampled_reconstruction);

struct TrainConfig {
  double alpha = 10.0;
  double gp_lambda = 0.1;
  int steps_per_scale = 2000;
  int generator_steps = 3;
  int discriminator_steps = 3;
  double generator_lr = 5e-4;
  double discriminator_lr = 5e-4;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  ConvNetSpec network;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ScaleModel {
  ConvNet generator;
  ConvNet discriminator;
  double sigma = 1.0;
  Field recon_noise;
  Shape3 shape{};
};

struct GeneratorStack {
  std::vector<ScaleModel> scales;        // coarsest first
  std::vector<double> factors;           // pyramid order, finest first
  std::vector<Shape3> pyramid_shapes;    // pyramid order, finest first
  int channels = 0;
  TrainConfig config;
  EmbeddingTable embeddings;             // decodes generated fields

  [[nodiscard]] Shape3 training_shape() const { return pyramid_shapes.front(); }
};

struct StepLosses {
  double critic = 0.0;
  double penalty = 0.0;
  double adversarial = 0.0;
  double reconstruction = 0.0;
};

struct ScaleLog {
  std::size_t pyramid_level = 0;
  double sigma = 0.0;
  std::vector<StepLosses> steps;
};

using TrainingLog = std::vector<ScaleLog>;

// Cascade output after running scales[0 .. noises.size()) with the given per-scale noise.
Field run_cascade(std::span<const ScaleModel> scales, std::span<const Field> noises);

// Noise amplitude for pyramid level `level` given the already trained coarser scales
// (`trained` holds scales coarse-to-fine down to level + 1).
double noise_sigma(std::size_t level, const ScalePyramid& pyramid, std::span<const ScaleModel> trained);

// Trains the coarsest scale first, copying each finished scale's parameters into the next.
// Throws TrainingError on a non-finite loss.
GeneratorStack train(const ScalePyramid& pyramid, const TrainConfig& config,
                     const EmbeddingTable& embeddings, TrainingLog* log = nullptr,
                     const std::function<void(const std::string&)>& progress = {});

inline constexpr int kStackFormatVersion = 1;

// Directory with config.json, sigmas.json, embeddings.json and scale_<n>.bin per pyramid level.
void save_stack(const GeneratorStack& stack, const std::filesystem::path& dir,
                const std::string& metadata_json = "");
GeneratorStack load_stack(const std::filesystem::path& dir);

std::string train_config_to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const std::string& text);

}  // namespace worldgan
