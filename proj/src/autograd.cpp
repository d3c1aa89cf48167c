#include "worldgan/autograd.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include "worldgan/kernels.hpp"

namespace worldgan::ad {

namespace {

thread_local bool g_record = true;

std::size_t product(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int s : shape) n *= static_cast<std::size_t>(s);
  return n;
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
  }
}

Var make_op(Tensor value, std::vector<Var> inputs, BackwardFn backward) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  bool any = false;
  for (const auto& in : inputs) any = any || in.requires_grad();
  if (g_record && any) {
    node->requires_grad = true;
    node->inputs = std::move(inputs);
    node->backward = std::move(backward);
  }
  return Var(std::move(node));
}

template <typename F>
Tensor map_unary(const Tensor& a, F f) {
  Tensor out(a.shape());
  auto src = a.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = f(src[i]);
  return out;
}

template <typename F>
Tensor map_binary(const Tensor& a, const Tensor& b, F f) {
  Tensor out(a.shape());
  auto x = a.data();
  auto y = b.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < x.size(); ++i) dst[i] = f(x[i], y[i]);
  return out;
}

kernels::ConvShape conv_shape(const std::vector<int>& x_shape, const std::vector<int>& w_shape) {
  if (x_shape.size() != 4 || w_shape.size() != 5 || w_shape[1] != x_shape[0] ||
      w_shape[2] != w_shape[3] || w_shape[3] != w_shape[4] || w_shape[2] % 2 == 0) {
    throw std::invalid_argument("conv3d: incompatible input/weight shapes");
  }
  return {x_shape[0], w_shape[0], w_shape[2], Shape3{x_shape[1], x_shape[2], x_shape[3]}};
}

}  // namespace

Tensor::Tensor(std::vector<int> shape, float fill)
    : shape_(std::move(shape)), data_(product(shape_), fill) {}

Tensor::Tensor(std::vector<int> shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != product(shape_)) {
    throw std::invalid_argument("Tensor: data size does not match shape");
  }
}

std::size_t Tensor::inner_size() const {
  return shape_.empty() ? 0 : data_.size() / static_cast<std::size_t>(shape_[0]);
}

const Tensor& Var::value() const { return node_->value; }
Tensor& Var::mutable_value() { return node_->value; }
bool Var::requires_grad() const { return node_ && node_->requires_grad; }

NoGradGuard::NoGradGuard() : previous_(g_record) { g_record = false; }
NoGradGuard::~NoGradGuard() { g_record = previous_; }

Var constant(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Var(std::move(node));
}

Var leaf(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  return Var(std::move(node));
}

std::vector<Var> grad(const Var& output, const std::vector<Var>& inputs, bool create_graph) {
  if (output.value().size() != 1) {
    throw std::invalid_argument("grad: output must be a scalar");
  }
  std::vector<Var> result;
  result.reserve(inputs.size());
  auto zeros_like = [](const Var& v) { return constant(Tensor(v.shape())); };
  if (!output.requires_grad()) {
    for (const auto& in : inputs) result.push_back(zeros_like(in));
    return result;
  }

  // Post-order over the recorded graph: inputs precede the nodes that consume them.
  std::vector<Node*> order;
  std::unordered_map<Node*, bool> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{output.node(), 0}};
  visited[output.node()] = true;
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].node();
      if (child->requires_grad && !visited[child]) {
        visited[child] = true;
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  std::unordered_map<Node*, bool> needed;
  for (const auto& in : inputs) needed[in.node()] = true;
  for (Node* node : order) {
    bool& flag = needed[node];
    for (const auto& in : node->inputs) flag = flag || needed[in.node()];
  }

  std::unordered_map<Node*, Var> grads;
  grads[output.node()] = constant(Tensor(output.shape(), 1.0f));

  const bool previous = g_record;
  g_record = create_graph;
  try {
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      Node* node = *it;
      if (!needed[node] || !node->backward) continue;
      auto found = grads.find(node);
      if (found == grads.end()) continue;
      std::vector<bool> need(node->inputs.size());
      bool any = false;
      for (std::size_t i = 0; i < need.size(); ++i) {
        need[i] = node->inputs[i].requires_grad() && needed[node->inputs[i].node()];
        any = any || need[i];
      }
      if (!any) continue;
      const Var upstream = found->second;
      auto input_grads = node->backward(upstream, need);
      for (std::size_t i = 0; i < need.size(); ++i) {
        if (!need[i] || !input_grads[i]) continue;
        Node* target = node->inputs[i].node();
        auto slot = grads.find(target);
        if (slot == grads.end()) {
          grads.emplace(target, input_grads[i]);
        } else {
          slot->second = add(slot->second, input_grads[i]);
        }
      }
    }
  } catch (...) {
    g_record = previous;
    throw;
  }
  g_record = previous;

  for (const auto& in : inputs) {
    auto it = grads.find(in.node());
    result.push_back(it == grads.end() ? zeros_like(in) : it->second);
  }
  return result;
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  return make_op(map_binary(a.value(), b.value(), [](float x, float y) { return x + y; }), {a, b},
                 [](const Var& g, const std::vector<bool>&) { return std::vector<Var>{g, g}; });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  return make_op(map_binary(a.value(), b.value(), [](float x, float y) { return x - y; }), {a, b},
                 [](const Var& g, const std::vector<bool>& need) {
                   return std::vector<Var>{g, need[1] ? scale(g, -1.0f) : Var()};
                 });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  return make_op(map_binary(a.value(), b.value(), [](float x, float y) { return x * y; }), {a, b},
                 [a, b](const Var& g, const std::vector<bool>& need) {
                   return std::vector<Var>{need[0] ? mul(g, b) : Var(), need[1] ? mul(g, a) : Var()};
                 });
}

Var scale(const Var& a, float s) {
  return make_op(map_unary(a.value(), [s](float x) { return x * s; }), {a},
                 [s](const Var& g, const std::vector<bool>&) { return std::vector<Var>{scale(g, s)}; });
}

Var add_scalar(const Var& a, float s) {
  return make_op(map_unary(a.value(), [s](float x) { return x + s; }), {a},
                 [](const Var& g, const std::vector<bool>&) { return std::vector<Var>{g}; });
}

Var pow_scalar(const Var& a, float p) {
  return make_op(map_unary(a.value(), [p](float x) { return std::pow(x, p); }), {a},
                 [a, p](const Var& g, const std::vector<bool>&) {
                   if (p == 1.0f) return std::vector<Var>{g};
                   if (p == 2.0f) return std::vector<Var>{mul(g, scale(a, 2.0f))};
                   return std::vector<Var>{mul(g, scale(pow_scalar(a, p - 1.0f), p))};
                 });
}

Var mask_mul(const Var& a, std::shared_ptr<const Tensor> mask) {
  if (mask->shape() != a.shape()) throw std::invalid_argument("mask_mul: shape mismatch");
  auto value = map_binary(a.value(), *mask, [](float x, float m) { return x * m; });
  return make_op(std::move(value), {a}, [mask](const Var& g, const std::vector<bool>&) {
    return std::vector<Var>{mask_mul(g, mask)};
  });
}

Var leaky_relu(const Var& a, float slope) {
  auto mask = std::make_shared<Tensor>(
      map_unary(a.value(), [slope](float x) { return x > 0.0f ? 1.0f : slope; }));
  return mask_mul(a, std::move(mask));
}

Var sum(const Var& a) {
  double acc = 0.0;
  for (float v : a.value().data()) acc += v;
  auto shape = a.shape();
  return make_op(Tensor::scalar(static_cast<float>(acc)), {a},
                 [shape](const Var& g, const std::vector<bool>&) {
                   return std::vector<Var>{expand_scalar(g, shape)};
                 });
}

Var mean(const Var& a) { return scale(sum(a), 1.0f / static_cast<float>(a.value().size())); }

Var expand_scalar(const Var& s, const std::vector<int>& shape) {
  if (s.value().size() != 1) throw std::invalid_argument("expand_scalar: expects a scalar");
  return make_op(Tensor(shape, s.item()), {s},
                 [](const Var& g, const std::vector<bool>&) { return std::vector<Var>{sum(g)}; });
}

Var channel_sum(const Var& a) {
  const auto& t = a.value();
  const int channels = t.dim(0);
  const std::size_t inner = t.inner_size();
  Tensor out({channels});
  for (int c = 0; c < channels; ++c) {
    double acc = 0.0;
    const float* p = t.data().data() + static_cast<std::size_t>(c) * inner;
    for (std::size_t i = 0; i < inner; ++i) acc += p[i];
    out[static_cast<std::size_t>(c)] = static_cast<float>(acc);
  }
  auto shape = a.shape();
  return make_op(std::move(out), {a}, [shape](const Var& g, const std::vector<bool>&) {
    return std::vector<Var>{channel_expand(g, shape)};
  });
}

Var channel_expand(const Var& c, const std::vector<int>& shape) {
  if (c.shape().size() != 1 || c.shape()[0] != shape[0]) {
    throw std::invalid_argument("channel_expand: channel count mismatch");
  }
  Tensor out(shape);
  const std::size_t inner = out.inner_size();
  for (int ch = 0; ch < shape[0]; ++ch) {
    const float v = c.value()[static_cast<std::size_t>(ch)];
    float* p = out.data().data() + static_cast<std::size_t>(ch) * inner;
    std::fill(p, p + inner, v);
  }
  return make_op(std::move(out), {c}, [](const Var& g, const std::vector<bool>&) {
    return std::vector<Var>{channel_sum(g)};
  });
}

// With T(x, w, y) = <y, conv(x, w)>, conv3d, conv3d_input_grad and conv3d_weight_grad are the
// partial derivatives of T with respect to y, x and w. Each one's backward is expressed through the
// other two, which closes the set under repeated differentiation.

Var conv3d(const Var& x, const Var& w) {
  const auto cs = conv_shape(x.shape(), w.shape());
  Tensor out({cs.out_channels, cs.spatial.d, cs.spatial.h, cs.spatial.w});
  kernels::conv3d_forward(x.value().data(), w.value().data(), out.data(), cs);
  auto x_shape = x.shape();
  auto w_shape = w.shape();
  return make_op(std::move(out), {x, w},
                 [x, w, x_shape, w_shape](const Var& g, const std::vector<bool>& need) {
                   return std::vector<Var>{need[0] ? conv3d_input_grad(g, w, x_shape) : Var(),
                                           need[1] ? conv3d_weight_grad(x, g, w_shape) : Var()};
                 });
}

Var conv3d_input_grad(const Var& gy, const Var& w, const std::vector<int>& x_shape) {
  const auto cs = conv_shape(x_shape, w.shape());
  Tensor out(x_shape);
  kernels::conv3d_input_grad(gy.value().data(), w.value().data(), out.data(), cs);
  auto w_shape = w.shape();
  return make_op(std::move(out), {gy, w},
                 [gy, w, w_shape](const Var& g, const std::vector<bool>& need) {
                   return std::vector<Var>{need[0] ? conv3d(g, w) : Var(),
                                           need[1] ? conv3d_weight_grad(g, gy, w_shape) : Var()};
                 });
}

Var conv3d_weight_grad(const Var& x, const Var& gy, const std::vector<int>& w_shape) {
  const auto cs = conv_shape(x.shape(), w_shape);
  Tensor out(w_shape);
  kernels::conv3d_weight_grad(x.value().data(), gy.value().data(), out.data(), cs);
  auto x_shape = x.shape();
  return make_op(std::move(out), {x, gy},
                 [x, gy, x_shape](const Var& g, const std::vector<bool>& need) {
                   return std::vector<Var>{need[0] ? conv3d_input_grad(gy, g, x_shape) : Var(),
                                           need[1] ? conv3d(x, g) : Var()};
                 });
}

}  // namespace worldgan::ad
