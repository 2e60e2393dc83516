#include "sff/nn.hpp"

#include <cmath>

#include "sff/errors.hpp"
#include "sff/ops.hpp"

namespace sff::nn {

namespace o = sff::ops;

Linear Linear::init(std::size_t in, std::size_t out, Rng& rng) {
  const float bound = 1.0f / std::sqrt(static_cast<float>(in));
  return {uniform_tensor({out, in}, bound, rng, true),
          uniform_tensor({out}, bound, rng, true)};
}

void Linear::register_in(ParameterSet& params, const std::string& prefix) const {
  params.add(prefix + ".weight", weight);
  params.add(prefix + ".bias", bias);
}

Tensor Linear::operator()(const Tensor& x) const {
  return o::add(o::matmul(weight, x), bias);
}

Mlp Mlp::init(std::span<const std::size_t> sizes, Rng& rng) {
  if (sizes.size() < 2) throw ConfigError("mlp: need at least input and output sizes");
  Mlp m;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i)
    m.layers.push_back(Linear::init(sizes[i], sizes[i + 1], rng));
  return m;
}

void Mlp::register_in(ParameterSet& params, const std::string& prefix) const {
  for (std::size_t i = 0; i < layers.size(); ++i)
    layers[i].register_in(params, prefix + "." + std::to_string(i));
}

Tensor Mlp::operator()(const Tensor& x) const {
  Tensor h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = layers[i](h);
    if (i + 1 < layers.size()) h = o::maximum(h, 0.0f);
  }
  return h;
}

GruWeights GruWeights::init(std::size_t input, std::size_t hidden, Rng& rng) {
  const float k = 1.0f / std::sqrt(static_cast<float>(hidden));
  auto mat = [&](std::size_t cols) { return uniform_tensor({hidden, cols}, k, rng, true); };
  auto vec = [&] { return uniform_tensor({hidden}, k, rng, true); };
  GruWeights w;
  w.w_z = mat(input);
  w.w_r = mat(input);
  w.w_n = mat(input);
  w.u_z = mat(hidden);
  w.u_r = mat(hidden);
  w.u_n = mat(hidden);
  w.b_z = vec();
  w.b_r = vec();
  w.b_n = vec();
  w.c_n = vec();
  return w;
}

GruWeights GruWeights::zeros(std::size_t input, std::size_t hidden) {
  auto mat = [&](std::size_t cols) { return Tensor::zeros({hidden, cols}, true); };
  auto vec = [&] { return Tensor::zeros({hidden}, true); };
  return {mat(input), mat(input), mat(input), mat(hidden), mat(hidden),
          mat(hidden), vec(),      vec(),      vec(),       vec()};
}

void GruWeights::register_in(ParameterSet& params, const std::string& prefix) const {
  params.add(prefix + ".w_z", w_z);
  params.add(prefix + ".w_r", w_r);
  params.add(prefix + ".w_n", w_n);
  params.add(prefix + ".u_z", u_z);
  params.add(prefix + ".u_r", u_r);
  params.add(prefix + ".u_n", u_n);
  params.add(prefix + ".b_z", b_z);
  params.add(prefix + ".b_r", b_r);
  params.add(prefix + ".b_n", b_n);
  params.add(prefix + ".c_n", c_n);
}

Tensor gru_cell(const Tensor& x, const Tensor& h_prev, const GruWeights& w) {
  if (x.rank() != 1 || x.size() != w.input_dim()) {
    throw ShapeError("gru_cell: input shape " + shape_string(x.shape()) +
                     " does not match weights expecting [" +
                     std::to_string(w.input_dim()) + "]");
  }
  if (h_prev.rank() != 1 || h_prev.size() != w.hidden_dim()) {
    throw ShapeError("gru_cell: hidden shape " + shape_string(h_prev.shape()) +
                     " does not match weights expecting [" +
                     std::to_string(w.hidden_dim()) + "]");
  }
  auto gate = [&](const Tensor& wx, const Tensor& uh, const Tensor& b) {
    return o::sigmoid(o::add(o::add(o::matmul(wx, x), o::matmul(uh, h_prev)), b));
  };
  Tensor z = gate(w.w_z, w.u_z, w.b_z);
  Tensor r = gate(w.w_r, w.u_r, w.b_r);
  Tensor recurrent = o::add(o::matmul(w.u_n, h_prev), w.c_n);
  Tensor n = o::tanh(o::add(o::add(o::matmul(w.w_n, x), w.b_n), o::mul(r, recurrent)));
  return o::add(o::mul(o::affine(z, -1.0f, 1.0f), n), o::mul(z, h_prev));
}

BiGru BiGru::init(std::size_t input, std::size_t hidden_per_direction, Rng& rng) {
  BiGru b;
  b.forward = GruWeights::init(input, hidden_per_direction, rng);
  b.backward = GruWeights::init(input, hidden_per_direction, rng);
  return b;
}

void BiGru::register_in(ParameterSet& params, const std::string& prefix) const {
  forward.register_in(params, prefix + ".fwd");
  backward.register_in(params, prefix + ".bwd");
}

std::vector<Tensor> BiGru::run(std::span<const Tensor> inputs, const Tensor& h0_forward,
                               const Tensor& h0_backward) const {
  const std::size_t n = inputs.size();
  if (n == 0) throw ShapeError("bigru: empty input sequence");
  std::vector<Tensor> fwd(n), bwd(n);
  Tensor h = h0_forward;
  for (std::size_t j = 0; j < n; ++j) fwd[j] = h = gru_cell(inputs[j], h, forward);
  h = h0_backward;
  for (std::size_t j = n; j-- > 0;) bwd[j] = h = gru_cell(inputs[j], h, backward);
  std::vector<Tensor> out(n);
  for (std::size_t j = 0; j < n; ++j) out[j] = o::concat({fwd[j], bwd[j]});
  return out;
}

Pooled attention_pool(std::span<const Tensor> hidden, const Tensor& projection,
                      const Tensor& context) {
  if (hidden.empty()) throw ShapeError("attention_pool: empty sequence");
  Tensor m = o::stack(hidden);                                   // [n, H]
  Tensor u = o::tanh(o::matmul(m, o::transpose(projection)));   // [n, H]
  Tensor alphas = o::softmax(o::matmul(u, context));             // [n]
  return {o::matmul(alphas, m), alphas};
}

Pooled mean_pool(std::span<const Tensor> hidden) {
  if (hidden.empty()) throw ShapeError("mean_pool: empty sequence");
  const std::size_t n = hidden.size();
  Tensor alphas = Tensor::vector(std::vector<float>(n, 1.0f / static_cast<float>(n)));
  return {o::matmul(alphas, o::stack(hidden)), alphas};
}

}  // namespace sff::nn
