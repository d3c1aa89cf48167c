#include "worldgan/gan.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>

#include "worldgan/errors.hpp"

namespace worldgan {

using nlohmann::ordered_json;

void ConvNetSpec::validate() const {
  if (blocks < 2) throw ValidationError("network needs at least 2 blocks");
  if (base_channels < 1) throw ValidationError("network base_channels must be positive");
  if (kernel < 1 || kernel % 2 == 0) throw ValidationError("network kernel must be odd and positive");
  if (!(leaky_slope >= 0.0f)) throw ValidationError("leaky_slope must be non-negative");
}

namespace {

constexpr float kNormEpsilon = 1e-5f;

ad::Tensor weight_tensor(int out, int in, int k) { return ad::Tensor({out, in, k, k, k}); }

}  // namespace

ConvNet ConvNet::skeleton(const ConvNetSpec& spec, int in_channels, int out_channels) {
  spec.validate();
  ConvNet net;
  net.kernel_ = spec.kernel;
  net.slope_ = spec.leaky_slope;
  for (int i = 0; i < spec.blocks; ++i) {
    const bool last = i == spec.blocks - 1;
    Layer layer{i == 0 ? in_channels : spec.base_channels, last ? out_channels : spec.base_channels,
                spec.normalize && !last, !last};
    net.layers_.push_back(layer);
    net.params_.push_back(ad::leaf(weight_tensor(layer.out_channels, layer.in_channels, spec.kernel)));
    net.params_.push_back(ad::leaf(ad::Tensor({layer.out_channels})));
    if (layer.normalize) {
      net.params_.push_back(ad::leaf(ad::Tensor({layer.out_channels}, 1.0f)));
      net.params_.push_back(ad::leaf(ad::Tensor({layer.out_channels})));
    }
  }
  return net;
}

ConvNet ConvNet::create(const ConvNetSpec& spec, int in_channels, int out_channels,
                        std::mt19937_64& rng) {
  auto net = skeleton(spec, in_channels, out_channels);
  std::normal_distribution<float> weight_init(0.0f, 0.02f);
  std::normal_distribution<float> gain_init(1.0f, 0.02f);
  std::size_t p = 0;
  for (const auto& layer : net.layers_) {
    for (auto& v : net.params_[p].mutable_value().storage()) v = weight_init(rng);
    p += 2;  // bias stays zero
    if (layer.normalize) {
      for (auto& v : net.params_[p].mutable_value().storage()) v = gain_init(rng);
      p += 2;
    }
  }
  return net;
}

ConvNet ConvNet::single_layer(int kernel, ad::Tensor weight, ad::Tensor bias) {
  if (weight.shape().size() != 5 || bias.shape().size() != 1 || bias.dim(0) != weight.dim(0) ||
      weight.dim(2) != kernel || kernel % 2 == 0) {
    throw ValidationError("single_layer: inconsistent weight/bias shapes");
  }
  ConvNet net;
  net.kernel_ = kernel;
  net.layers_.push_back({weight.dim(1), weight.dim(0), false, false});
  net.params_.push_back(ad::leaf(std::move(weight)));
  net.params_.push_back(ad::leaf(std::move(bias)));
  return net;
}

ad::Var ConvNet::forward(const ad::Var& x) const {
  const auto& shape = x.shape();
  if (shape.size() != 4 || shape[0] != in_channels()) {
    throw ValidationError("network expects " + std::to_string(in_channels()) + " input channels");
  }
  for (int axis = 1; axis < 4; ++axis) {
    if (shape[static_cast<std::size_t>(axis)] < min_extent()) {
      throw ValidationError("input extent " + std::to_string(shape[static_cast<std::size_t>(axis)]) +
                            " is smaller than the receptive footprint " +
                            std::to_string(min_extent()));
    }
  }
  ad::Var y = x;
  std::size_t p = 0;
  for (const auto& layer : layers_) {
    y = ad::conv3d(y, params_[p]);
    const auto out_shape = y.shape();
    y = ad::add(y, ad::channel_expand(params_[p + 1], out_shape));
    p += 2;
    if (layer.normalize) {
      const float inv_n = 1.0f / static_cast<float>(y.value().inner_size());
      auto mu = ad::scale(ad::channel_sum(y), inv_n);
      auto centered = ad::sub(y, ad::channel_expand(mu, out_shape));
      auto var = ad::scale(ad::channel_sum(ad::mul(centered, centered)), inv_n);
      auto inv_std = ad::pow_scalar(ad::add_scalar(var, kNormEpsilon), -0.5f);
      auto normed = ad::mul(centered, ad::channel_expand(inv_std, out_shape));
      y = ad::add(ad::mul(normed, ad::channel_expand(params_[p], out_shape)),
                  ad::channel_expand(params_[p + 1], out_shape));
      p += 2;
    }
    if (layer.activation) y = ad::leaky_relu(y, slope_);
  }
  return y;
}

Field ConvNet::forward(const Field& x) const {
  ad::NoGradGuard guard;
  return to_field(forward(ad::constant(to_tensor(x))).value());
}

std::size_t ConvNet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value().size();
  return n;
}

ConvNet ConvNet::clone() const {
  ConvNet copy;
  copy.layers_ = layers_;
  copy.kernel_ = kernel_;
  copy.slope_ = slope_;
  for (const auto& p : params_) copy.params_.push_back(ad::leaf(p.value()));
  return copy;
}

void ConvNet::zero_output_layer() {
  std::size_t p = 0;
  for (std::size_t i = 0; i + 1 < layers_.size(); ++i) p += layers_[i].normalize ? 4 : 2;
  for (auto& v : params_[p].mutable_value().storage()) v = 0.0f;
  for (auto& v : params_[p + 1].mutable_value().storage()) v = 0.0f;
}

ad::Tensor to_tensor(const Field& field) {
  const auto& s = field.shape();
  return ad::Tensor({field.channels(), s.d, s.h, s.w}, field.storage());
}

Field to_field(const ad::Tensor& tensor) {
  if (tensor.shape().size() != 4) throw ValidationError("to_field: expected a rank-4 tensor");
  return Field(tensor.dim(0), Shape3{tensor.dim(1), tensor.dim(2), tensor.dim(3)}, tensor.storage());
}

ad::Var generator_forward(const ConvNet& generator, const ad::Var& prev_upsampled, const ad::Var& noise) {
  if (prev_upsampled.shape() != noise.shape()) {
    throw ValidationError("generator_step: noise and previous output shapes differ");
  }
  return ad::add(prev_upsampled, generator.forward(ad::add(noise, prev_upsampled)));
}

Field generator_step(const Field& prev_upsampled, const Field& noise, const ConvNet& generator) {
  if (prev_upsampled.channels() != noise.channels() || !(prev_upsampled.shape() == noise.shape())) {
    throw ValidationError("generator_step: noise and previous output shapes differ");
  }
  ad::NoGradGuard guard;
  auto out = generator_forward(generator, ad::constant(to_tensor(prev_upsampled)),
                               ad::constant(to_tensor(noise)));
  return to_field(out.value());
}

Critic as_critic(const ConvNet& discriminator) {
  return [&discriminator](const ad::Var& x) { return ad::mean(discriminator.forward(x)); };
}

double discriminator_score(const Field& field, const ConvNet& discriminator) {
  ad::NoGradGuard guard;
  return as_critic(discriminator)(ad::constant(to_tensor(field))).item();
}

GradientPenaltyLoss wgan_gp_loss(const Critic& critic, const Field& real, const Field& fake,
                                 double gp_lambda, std::uint64_t seed) {
  if (real.channels() != fake.channels() || !(real.shape() == fake.shape())) {
    throw ValidationError("wgan_gp_loss: real and fake shapes differ");
  }
  std::mt19937_64 rng(seed);
  const double eps = std::uniform_real_distribution<double>(0.0, 1.0)(rng);

  GradientPenaltyLoss out;
  out.epsilon = eps;
  out.critic_loss = ad::sub(critic(ad::constant(to_tensor(fake))), critic(ad::constant(to_tensor(real))));

  ad::Tensor mixed = to_tensor(real);
  const auto fd = fake.data();
  auto md = mixed.data();
  for (std::size_t i = 0; i < md.size(); ++i) {
    md[i] = static_cast<float>(eps * md[i] + (1.0 - eps) * fd[i]);
  }
  auto x_hat = ad::leaf(std::move(mixed));
  auto score = critic(x_hat);
  auto g = ad::grad(score, {x_hat}, /*create_graph=*/true)[0];
  auto norm = ad::pow_scalar(ad::add_scalar(ad::sum(ad::mul(g, g)), 1e-12f), 0.5f);
  auto gap = ad::add_scalar(norm, -1.0f);
  out.penalty = ad::scale(ad::mul(gap, gap), static_cast<float>(gp_lambda));
  return out;
}

double reconstruction_loss(const Field& reconstructed, const Field& real) {
  if (reconstructed.size() != real.size() || !(reconstructed.shape() == real.shape())) {
    throw ValidationError("reconstruction_loss: shape mismatch");
  }
  double acc = 0.0;
  const auto a = reconstructed.data();
  const auto b = real.data();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

ad::Var mse(const ad::Var& a, const ad::Var& b) {
  auto d = ad::sub(a, b);
  return ad::mean(ad::mul(d, d));
}

double noise_sigma(const Field& real, const Field& upsampled_reconstruction) {
  return std::sqrt(reconstruction_loss(upsampled_reconstruction, real));
}

void TrainConfig::validate() const {
  if (!(alpha >= 0.0)) throw ValidationError("alpha must be non-negative");
  if (!(gp_lambda > 0.0)) throw ValidationError("gp_lambda must be positive");
  if (steps_per_scale < 0) throw ValidationError("steps_per_scale must be non-negative");
  if (generator_steps < 1 || discriminator_steps < 1) {
    throw ValidationError("generator/discriminator steps must be positive");
  }
  if (!(generator_lr > 0.0) || !(discriminator_lr > 0.0)) {
    throw ValidationError("learning rates must be positive");
  }
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ValidationError("adam betas must lie in [0, 1)");
  }
  network.validate();
}

namespace {

class Adam {
 public:
  Adam(const std::vector<ad::Var>& params, double lr, double beta1, double beta2)
      : lr_(lr), beta1_(beta1), beta2_(beta2) {
    for (const auto& p : params) {
      m_.emplace_back(p.value().size(), 0.0f);
      v_.emplace_back(p.value().size(), 0.0f);
    }
  }

  void step(std::vector<ad::Var>& params, const std::vector<ad::Var>& grads) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, t_);
    const double c2 = 1.0 - std::pow(beta2_, t_);
    const auto b1 = static_cast<float>(beta1_), b2 = static_cast<float>(beta2_);
    const auto step = static_cast<float>(lr_ / c1);
    const auto inv_c2 = static_cast<float>(1.0 / c2);
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto w = params[i].mutable_value().data();
      const auto g = grads[i].value().data();
      auto& m = m_[i];
      auto& v = v_[i];
      for (std::size_t j = 0; j < w.size(); ++j) {
        m[j] = b1 * m[j] + (1.0f - b1) * g[j];
        v[j] = b2 * v[j] + (1.0f - b2) * g[j] * g[j];
        w[j] -= step * m[j] / (std::sqrt(v[j] * inv_c2) + 1e-8f);
      }
    }
  }

 private:
  double lr_, beta1_, beta2_;
  int t_ = 0;
  std::vector<std::vector<float>> m_, v_;
};

Field gaussian_field(int channels, Shape3 shape, double sigma, std::mt19937_64& rng) {
  Field f(channels, shape);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  const auto s = static_cast<float>(sigma);
  for (auto& v : f.storage()) v = s * normal(rng);
  return f;
}

}  // namespace

Field run_cascade(std::span<const ScaleModel> scales, std::span<const Field> noises) {
  if (noises.empty() || noises.size() > scales.size()) {
    throw ValidationError("run_cascade: need between 1 and " + std::to_string(scales.size()) +
                          " noise fields");
  }
  Field x;
  for (std::size_t j = 0; j < noises.size(); ++j) {
    const auto& z = noises[j];
    Field prev = j == 0 ? Field(z.channels(), z.shape()) : resample_dense(x, z.shape());
    x = generator_step(prev, z, scales[j].generator);
  }
  return x;
}

double noise_sigma(std::size_t level, const ScalePyramid& pyramid, std::span<const ScaleModel> trained) {
  if (trained.empty()) return 1.0;
  std::vector<Field> noises;
  for (const auto& s : trained) noises.push_back(s.recon_noise);
  const auto up = resample_dense(run_cascade(trained, noises), pyramid.shapes.at(level));
  return noise_sigma(pyramid.fields.at(level), up);
}

GeneratorStack train(const ScalePyramid& pyramid, const TrainConfig& config,
                     const EmbeddingTable& embeddings, TrainingLog* log,
                     const std::function<void(const std::string&)>& progress) {
  config.validate();
  if (pyramid.scale_count() == 0) throw ValidationError("pyramid has no scales");
  const int m = pyramid.channels();
  if (embeddings.dimension() != m) {
    throw ValidationError("embedding dimension " + std::to_string(embeddings.dimension()) +
                          " does not match pyramid channels " + std::to_string(m));
  }
  for (std::size_t n = 0; n < pyramid.scale_count(); ++n) {
    const auto& s = pyramid.shapes[n];
    if (s.d < config.network.kernel || s.h < config.network.kernel || s.w < config.network.kernel) {
      throw ValidationError("scale " + std::to_string(n) + " shape " + to_string(s) +
                            " is below the receptive footprint " +
                            std::to_string(config.network.kernel));
    }
  }

  GeneratorStack stack;
  stack.factors = pyramid.factors;
  stack.pyramid_shapes = pyramid.shapes;
  stack.channels = m;
  stack.config = config;
  stack.embeddings = embeddings;

  std::mt19937_64 rng(config.seed);
  auto generator = ConvNet::create(config.network, m, m, rng);
  auto discriminator = ConvNet::create(config.network, m, 1, rng);
  std::vector<Field> recon_noises;
  const auto coarsest = pyramid.scale_count() - 1;
  const auto alpha = static_cast<float>(config.alpha);

  for (std::size_t j = 0; j <= coarsest; ++j) {
    const std::size_t level = coarsest - j;
    const Shape3 shape = pyramid.shapes[level];
    const Field& real = pyramid.fields[level];

    ScaleModel model;
    model.shape = shape;
    Field prev_rec = j == 0 ? Field(m, shape) : resample_dense(run_cascade(stack.scales, recon_noises), shape);
    model.sigma = j == 0 ? 1.0 : noise_sigma(real, prev_rec);
    model.recon_noise = j == 0 ? gaussian_field(m, shape, 1.0, rng) : Field(m, shape);

    ScaleLog scale_log;
    scale_log.pyramid_level = level;
    scale_log.sigma = model.sigma;
    if (progress) {
      progress("scale " + std::to_string(level) + " " + to_string(shape) + " sigma " +
               std::to_string(model.sigma));
    }

    Adam opt_g(generator.parameters(), config.generator_lr, config.adam_beta1, config.adam_beta2);
    Adam opt_d(discriminator.parameters(), config.discriminator_lr, config.adam_beta1, config.adam_beta2);
    const auto real_v = ad::constant(to_tensor(real));
    const auto prev_rec_v = ad::constant(to_tensor(prev_rec));
    const auto recon_noise_v = ad::constant(to_tensor(model.recon_noise));
    const auto critic = as_critic(discriminator);

    for (int step = 0; step < config.steps_per_scale; ++step) {
      Field prev_fake(m, shape);
      if (j > 0) {
        std::vector<Field> noises;
        for (const auto& s : stack.scales) noises.push_back(gaussian_field(m, s.shape, s.sigma, rng));
        prev_fake = resample_dense(run_cascade(stack.scales, noises), shape);
      }
      const Field noise = gaussian_field(m, shape, model.sigma, rng);
      const Field fake = generator_step(prev_fake, noise, generator);

      StepLosses losses;
      for (int k = 0; k < config.discriminator_steps; ++k) {
        auto terms = wgan_gp_loss(critic, real, fake, config.gp_lambda, rng());
        auto total = ad::add(terms.critic_loss, terms.penalty);
        auto grads = ad::grad(total, discriminator.parameters());
        losses.critic = terms.critic_loss.item();
        losses.penalty = terms.penalty.item();
        if (!std::isfinite(losses.critic) || !std::isfinite(losses.penalty)) break;
        opt_d.step(discriminator.parameters(), grads);
      }

      const auto prev_fake_v = ad::constant(to_tensor(prev_fake));
      const auto noise_v = ad::constant(to_tensor(noise));
      for (int k = 0; k < config.generator_steps && std::isfinite(losses.critic); ++k) {
        auto adversarial = ad::scale(critic(generator_forward(generator, prev_fake_v, noise_v)), -1.0f);
        auto rec = mse(generator_forward(generator, prev_rec_v, recon_noise_v), real_v);
        auto total = ad::add(adversarial, ad::scale(rec, alpha));
        auto grads = ad::grad(total, generator.parameters());
        losses.adversarial = adversarial.item();
        losses.reconstruction = rec.item();
        if (!std::isfinite(losses.adversarial) || !std::isfinite(losses.reconstruction)) break;
        opt_g.step(generator.parameters(), grads);
      }

      if (!std::isfinite(losses.critic) || !std::isfinite(losses.penalty) ||
          !std::isfinite(losses.adversarial) || !std::isfinite(losses.reconstruction)) {
        std::ostringstream msg;
        msg << "non-finite loss at scale " << level << " step " << step << ": critic=" << losses.critic
            << " penalty=" << losses.penalty << " adversarial=" << losses.adversarial
            << " reconstruction=" << losses.reconstruction;
        throw TrainingError(msg.str());
      }
      scale_log.steps.push_back(losses);
      if (progress && (step + 1) % 100 == 0) {
        std::ostringstream msg;
        msg << "  step " << step + 1 << " critic " << losses.critic << " penalty " << losses.penalty
            << " adv " << losses.adversarial << " rec " << losses.reconstruction;
        progress(msg.str());
      }
    }

    model.generator = generator.clone();
    model.discriminator = discriminator.clone();
    recon_noises.push_back(model.recon_noise);
    stack.scales.push_back(std::move(model));
    if (log) log->push_back(std::move(scale_log));
  }
  return stack;
}

// ---------------------------------------------------------------------------------------------
// Persistence

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

class Reader {
 public:
  Reader(const std::string& data, std::string source) : data_(data), source_(std::move(source)) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + static_cast<std::size_t>(i)]))
           << (8 * i);
    }
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  void expect_end() const {
    if (pos_ != data_.size()) throw ParseError(source_ + ": corrupt stack file (trailing bytes)");
  }
  [[nodiscard]] const std::string& source() const { return source_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > data_.size()) throw ParseError(source_ + ": corrupt stack file (truncated)");
  }
  const std::string& data_;
  std::string source_;
  std::size_t pos_ = 0;
};

void put_tensor(std::string& out, const ad::Tensor& t) {
  put_u32(out, static_cast<std::uint32_t>(t.shape().size()));
  for (int d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));
  for (float v : t.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
}

void read_tensor_into(Reader& in, ad::Tensor& target) {
  const auto rank = in.u32();
  if (rank != target.shape().size()) {
    throw ParseError(in.source() + ": corrupt stack file (tensor rank mismatch)");
  }
  for (int d : target.shape()) {
    if (in.u32() != static_cast<std::uint32_t>(d)) {
      throw ParseError(in.source() + ": corrupt stack file (tensor shape mismatch)");
    }
  }
  for (auto& v : target.storage()) v = in.f32();
}

constexpr char kScaleMagic[4] = {'W', 'G', 'S', 'B'};

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

ordered_json to_json(const ConvNetSpec& s) {
  return ordered_json{{"blocks", s.blocks},
                      {"kernel", s.kernel},
                      {"base_channels", s.base_channels},
                      {"normalize", s.normalize},
                      {"leaky_slope", s.leaky_slope}};
}

ordered_json to_json(const TrainConfig& c) {
  return ordered_json{{"alpha", c.alpha},
                      {"gp_lambda", c.gp_lambda},
                      {"steps_per_scale", c.steps_per_scale},
                      {"generator_steps", c.generator_steps},
                      {"discriminator_steps", c.discriminator_steps},
                      {"generator_lr", c.generator_lr},
                      {"discriminator_lr", c.discriminator_lr},
                      {"adam_beta1", c.adam_beta1},
                      {"adam_beta2", c.adam_beta2},
                      {"network", to_json(c.network)},
                      {"seed", c.seed}};
}

template <typename T>
void read_field(const ordered_json& obj, const char* key, T& target) {
  if (auto it = obj.find(key); it != obj.end()) {
    try {
      target = it->get<T>();
    } catch (const ordered_json::exception&) {
      throw ValidationError(std::string("config field '") + key + "' has the wrong type");
    }
  }
}

void check_keys(const ordered_json& obj, std::initializer_list<const char*> keys, const char* section) {
  for (const auto& [key, _] : obj.items()) {
    bool known = false;
    for (const char* k : keys) known = known || key == k;
    if (!known) throw ValidationError(std::string("unknown key '") + key + "' in " + section);
  }
}

TrainConfig train_config_from(const ordered_json& j) {
  if (!j.is_object()) throw ValidationError("train config must be an object");
  check_keys(j,
             {"alpha", "gp_lambda", "steps_per_scale", "generator_steps", "discriminator_steps",
              "generator_lr", "discriminator_lr", "adam_beta1", "adam_beta2", "network", "seed"},
             "train config");
  TrainConfig c;
  read_field(j, "alpha", c.alpha);
  read_field(j, "gp_lambda", c.gp_lambda);
  read_field(j, "steps_per_scale", c.steps_per_scale);
  read_field(j, "generator_steps", c.generator_steps);
  read_field(j, "discriminator_steps", c.discriminator_steps);
  read_field(j, "generator_lr", c.generator_lr);
  read_field(j, "discriminator_lr", c.discriminator_lr);
  read_field(j, "adam_beta1", c.adam_beta1);
  read_field(j, "adam_beta2", c.adam_beta2);
  read_field(j, "seed", c.seed);
  if (auto it = j.find("network"); it != j.end()) {
    if (!it->is_object()) throw ValidationError("train config 'network' must be an object");
    check_keys(*it, {"blocks", "kernel", "base_channels", "normalize", "leaky_slope"}, "network");
    read_field(*it, "blocks", c.network.blocks);
    read_field(*it, "kernel", c.network.kernel);
    read_field(*it, "base_channels", c.network.base_channels);
    read_field(*it, "normalize", c.network.normalize);
    read_field(*it, "leaky_slope", c.network.leaky_slope);
  }
  c.validate();
  return c;
}

}  // namespace

std::string train_config_to_json(const TrainConfig& config) { return to_json(config).dump(); }

TrainConfig train_config_from_json(const std::string& text) {
  try {
    return train_config_from(ordered_json::parse(text));
  } catch (const ordered_json::parse_error& e) {
    throw ParseError(std::string("train config: ") + e.what());
  }
}

void save_stack(const GeneratorStack& stack, const std::filesystem::path& dir,
                const std::string& metadata_json) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create stack directory '" + dir.string() + "': " + ec.message());

  ordered_json config;
  config["format_version"] = kStackFormatVersion;
  config["seed"] = stack.config.seed;
  config["channels"] = stack.channels;
  config["factors"] = stack.factors;
  ordered_json shapes = ordered_json::array();
  for (const auto& s : stack.pyramid_shapes) shapes.push_back({s.d, s.h, s.w});
  config["pyramid_shapes"] = shapes;
  config["train_config"] = to_json(stack.config);
  if (!metadata_json.empty()) config["metadata"] = ordered_json::parse(metadata_json);
  write_text(dir / "config.json", config.dump(2) + "\n");

  ordered_json sigmas;
  sigmas["order"] = "coarse_to_fine";
  ordered_json levels = ordered_json::array(), values = ordered_json::array();
  const auto coarsest = stack.scales.size() - 1;
  for (std::size_t j = 0; j < stack.scales.size(); ++j) {
    levels.push_back(coarsest - j);
    values.push_back(stack.scales[j].sigma);
  }
  sigmas["levels"] = levels;
  sigmas["sigmas"] = values;
  write_text(dir / "sigmas.json", sigmas.dump(2) + "\n");

  save_embeddings(stack.embeddings, dir / "embeddings.json");

  for (std::size_t j = 0; j < stack.scales.size(); ++j) {
    const auto& scale = stack.scales[j];
    const auto level = coarsest - j;
    std::string blob(kScaleMagic, sizeof kScaleMagic);
    put_u32(blob, kStackFormatVersion);
    put_u32(blob, static_cast<std::uint32_t>(level));
    put_u32(blob, static_cast<std::uint32_t>(scale.generator.parameters().size()));
    put_u32(blob, static_cast<std::uint32_t>(scale.discriminator.parameters().size()));
    for (const auto& p : scale.generator.parameters()) put_tensor(blob, p.value());
    for (const auto& p : scale.discriminator.parameters()) put_tensor(blob, p.value());
    put_tensor(blob, to_tensor(scale.recon_noise));
    write_text(dir / ("scale_" + std::to_string(level) + ".bin"), blob);
  }
}

GeneratorStack load_stack(const std::filesystem::path& dir) {
  const auto config_path = dir / "config.json";
  ordered_json config;
  try {
    config = ordered_json::parse(read_text(config_path));
  } catch (const ordered_json::parse_error& e) {
    throw ParseError(config_path.string() + ": " + e.what());
  }
  if (!config.is_object() || !config.contains("format_version")) {
    throw ParseError(config_path.string() + ": missing field 'format_version'");
  }
  if (config["format_version"] != kStackFormatVersion) {
    throw ValidationError(config_path.string() + ": unsupported stack format_version " +
                          config["format_version"].dump() + " (expected " +
                          std::to_string(kStackFormatVersion) + ")");
  }

  GeneratorStack stack;
  try {
    stack.channels = config.at("channels").get<int>();
    stack.factors = config.at("factors").get<std::vector<double>>();
    for (const auto& s : config.at("pyramid_shapes")) {
      stack.pyramid_shapes.push_back({s.at(0).get<int>(), s.at(1).get<int>(), s.at(2).get<int>()});
    }
    stack.config = train_config_from(config.at("train_config"));
  } catch (const ordered_json::exception& e) {
    throw ParseError(config_path.string() + ": " + e.what());
  }
  if (stack.pyramid_shapes.empty() || stack.pyramid_shapes.size() != stack.factors.size()) {
    throw ParseError(config_path.string() + ": factors and pyramid_shapes disagree");
  }

  std::vector<double> sigmas;
  const auto sigmas_path = dir / "sigmas.json";
  try {
    sigmas = ordered_json::parse(read_text(sigmas_path)).at("sigmas").get<std::vector<double>>();
  } catch (const ordered_json::exception& e) {
    throw ParseError(sigmas_path.string() + ": " + e.what());
  }
  if (sigmas.size() != stack.pyramid_shapes.size()) {
    throw ParseError(sigmas_path.string() + ": expected one sigma per scale");
  }

  stack.embeddings = load_embeddings(dir / "embeddings.json");
  if (stack.embeddings.dimension() != stack.channels) {
    throw ValidationError("stack embeddings have dimension " +
                          std::to_string(stack.embeddings.dimension()) + ", stack has " +
                          std::to_string(stack.channels) + " channels");
  }

  const auto coarsest = stack.pyramid_shapes.size() - 1;
  for (std::size_t j = 0; j <= coarsest; ++j) {
    const auto level = coarsest - j;
    const auto path = dir / ("scale_" + std::to_string(level) + ".bin");
    const auto blob = read_text(path);
    Reader in(blob, path.string());
    if (blob.size() < 4 || blob.compare(0, 4, kScaleMagic, 4) != 0) {
      throw ParseError(path.string() + ": corrupt stack file (bad magic)");
    }
    in.u32();  // magic
    const auto version = in.u32();
    if (version != static_cast<std::uint32_t>(kStackFormatVersion)) {
      throw ValidationError(path.string() + ": unsupported stack format_version " +
                            std::to_string(version));
    }
    if (in.u32() != level) throw ParseError(path.string() + ": corrupt stack file (level mismatch)");

    ScaleModel model;
    model.shape = stack.pyramid_shapes[level];
    model.sigma = sigmas[j];
    model.generator = ConvNet::skeleton(stack.config.network, stack.channels, stack.channels);
    model.discriminator = ConvNet::skeleton(stack.config.network, stack.channels, 1);
    if (in.u32() != model.generator.parameters().size() ||
        in.u32() != model.discriminator.parameters().size()) {
      throw ParseError(path.string() + ": corrupt stack file (parameter count mismatch)");
    }
    for (auto& p : model.generator.parameters()) read_tensor_into(in, p.mutable_value());
    for (auto& p : model.discriminator.parameters()) read_tensor_into(in, p.mutable_value());
    ad::Tensor noise({stack.channels, model.shape.d, model.shape.h, model.shape.w});
    read_tensor_into(in, noise);
    in.expect_end();
    model.recon_noise = to_field(noise);
    stack.scales.push_back(std::move(model));
  }
  return stack;
}

}  // namespace worldgan
