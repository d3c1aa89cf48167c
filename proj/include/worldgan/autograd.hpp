#pragma once

// Minimal reverse-mode automatic differentiation over float tensors.
//
// Backward rules are themselves written in terms of recorded ops, so gradients can be
// differentiated again (`grad(..., create_graph = true)`). The gradient penalty of the critic
// needs exactly one level of this: d/dparams of a function of d(score)/d(input).

#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace worldgan::ad {

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape, float fill = 0.0f);
  Tensor(std::vector<int> shape, std::vector<float> data);

  static Tensor scalar(float v) { return Tensor({1}, std::vector<float>{v}); }

  [[nodiscard]] const std::vector<int>& shape() const { return shape_; }
  [[nodiscard]] std::size_t size() const { return data_.size(); }
  [[nodiscard]] int dim(std::size_t i) const { return shape_[i]; }

  [[nodiscard]] std::span<float> data() { return data_; }
  [[nodiscard]] std::span<const float> data() const { return data_; }
  [[nodiscard]] std::vector<float>& storage() { return data_; }
  [[nodiscard]] const std::vector<float>& storage() const { return data_; }

  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  // Product of all dimensions after the first.
  [[nodiscard]] std::size_t inner_size() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<int> shape_;
  std::vector<float> data_;
};

struct Node;

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  [[nodiscard]] const Tensor& value() const;
  [[nodiscard]] Tensor& mutable_value();
  [[nodiscard]] const std::vector<int>& shape() const { return value().shape(); }
  [[nodiscard]] bool requires_grad() const;
  [[nodiscard]] float item() const { return value()[0]; }
  [[nodiscard]] Node* node() const { return node_.get(); }
  explicit operator bool() const { return static_cast<bool>(node_); }

 private:
  std::shared_ptr<Node> node_;
};

using BackwardFn = std::function<std::vector<Var>(const Var& grad, const std::vector<bool>& need)>;

struct Node {
  Tensor value;
  bool requires_grad = false;
  std::vector<Var> inputs;
  BackwardFn backward;
};

// While alive, ops do not record a graph.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

Var constant(Tensor value);
// Leaf that gradients can be taken with respect to.
Var leaf(Tensor value);

// Gradients of scalar `output` with respect to each of `inputs` (zeros where unreachable).
// With create_graph the returned gradients are recorded and can be differentiated again.
std::vector<Var> grad(const Var& output, const std::vector<Var>& inputs, bool create_graph = false);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, float s);
Var add_scalar(const Var& a, float s);
Var pow_scalar(const Var& a, float p);
// Elementwise product with a constant tensor.
Var mask_mul(const Var& a, std::shared_ptr<const Tensor> mask);
Var leaky_relu(const Var& a, float slope);

// Sum of all entries, shape {1}.
Var sum(const Var& a);
Var mean(const Var& a);
// Broadcast a {1} tensor to `shape`.
Var expand_scalar(const Var& s, const std::vector<int>& shape);

// [C, ...] -> [C] and back.
Var channel_sum(const Var& a);
Var channel_expand(const Var& c, const std::vector<int>& shape);

// Same-padded stride-1 3D convolution; x is [Ci, D, H, W], w is [Co, Ci, k, k, k].
Var conv3d(const Var& x, const Var& w);
// The two adjoints of conv3d, differentiable as well.
Var conv3d_input_grad(const Var& gy, const Var& w, const std::vector<int>& x_shape);
Var conv3d_weight_grad(const Var& x, const Var& gy, const std::vector<int>& w_shape);

}  // namespace worldgan::ad
