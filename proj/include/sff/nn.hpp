#ifndef SFF_NN_HPP
#define SFF_NN_HPP

#include <span>
#include <string>
#include <vector>

#include "sff/params.hpp"
#include "sff/random.hpp"
#include "sff/tensor.hpp"

// Layers shared by the embedding network and the agent.
namespace sff::nn {

// y = W x + b, W is [out, in].
struct Linear {
  Tensor weight;
  Tensor bias;

  static Linear init(std::size_t in, std::size_t out, Rng& rng);
  void register_in(ParameterSet& params, const std::string& prefix) const;
  Tensor operator()(const Tensor& x) const;
  std::size_t in_dim() const { return weight.dim(1); }
  std::size_t out_dim() const { return weight.dim(0); }
};

// Stack of Linear layers with ReLU between them (none after the last).
struct Mlp {
  std::vector<Linear> layers;

  static Mlp init(std::span<const std::size_t> sizes, Rng& rng);
  void register_in(ParameterSet& params, const std::string& prefix) const;
  Tensor operator()(const Tensor& x) const;
};

// Gated recurrent unit, one direction:
//   z  = sigmoid(Wz x + Uz h + bz)
//   r  = sigmoid(Wr x + Ur h + br)
//   n  = tanh(Wn x + bn + r * (Un h + cn))
//   h' = (1 - z) * n + z * h
struct GruWeights {
  Tensor w_z, w_r, w_n;  // [hidden, input]
  Tensor u_z, u_r, u_n;  // [hidden, hidden]
  Tensor b_z, b_r, b_n, c_n;  // [hidden]

  static GruWeights init(std::size_t input, std::size_t hidden, Rng& rng);
  static GruWeights zeros(std::size_t input, std::size_t hidden);
  void register_in(ParameterSet& params, const std::string& prefix) const;
  std::size_t input_dim() const { return w_z.dim(1); }
  std::size_t hidden_dim() const { return w_z.dim(0); }
};

Tensor gru_cell(const Tensor& x, const Tensor& h_prev, const GruWeights& w);

// Two GRUs reading the sequence in opposite directions; position j's output
// is [forward_j; backward_j].
struct BiGru {
  GruWeights forward;
  GruWeights backward;

  static BiGru init(std::size_t input, std::size_t hidden_per_direction, Rng& rng);
  void register_in(ParameterSet& params, const std::string& prefix) const;
  std::size_t output_dim() const { return 2 * forward.hidden_dim(); }

  std::vector<Tensor> run(std::span<const Tensor> inputs, const Tensor& h0_forward,
                          const Tensor& h0_backward) const;
};

struct Pooled {
  Tensor pooled;  // [H]
  Tensor alphas;  // [n], non-negative, sums to 1
};

// u_j = tanh(W h_j), alpha = softmax(u_j . c), pooled = sum_j alpha_j h_j.
Pooled attention_pool(std::span<const Tensor> hidden, const Tensor& projection,
                      const Tensor& context);
// Uniform weights 1/n.
Pooled mean_pool(std::span<const Tensor> hidden);

}  // namespace sff::nn

#endif  // SFF_NN_HPP
