#ifndef SFF_RANDOM_HPP
#define SFF_RANDOM_HPP

#include <cstdint>
#include <random>
#include <string_view>

#include "sff/tensor.hpp"

namespace sff {

using Rng = std::mt19937_64;

// Seed for an independent stream named `stream` under `root`. Each
// stochastic consumer (initialisation, pair shuffling, action sampling)
// draws from its own stream, so enabling one never perturbs another.
std::uint64_t derive_seed(std::uint64_t root, std::string_view stream);
Rng make_stream(std::uint64_t root, std::string_view stream);

// Uniform in [-bound, bound].
Tensor uniform_tensor(Shape shape, float bound, Rng& rng,
                      bool requires_grad = false);
Tensor normal_tensor(Shape shape, float stddev, Rng& rng,
                     bool requires_grad = false);

}  // namespace sff

#endif  // SFF_RANDOM_HPP
