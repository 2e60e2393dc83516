#include "sff/random.hpp"

namespace sff {

std::uint64_t derive_seed(std::uint64_t root, std::string_view stream) {
  // FNV-1a over the stream name, then a splitmix64 finaliser mixed with
  // the root seed.
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : stream) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::uint64_t z = root ^ (h + 0x9e3779b97f4a7c15ull + (root << 6) + (root >> 2));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

Rng make_stream(std::uint64_t root, std::string_view stream) {
  return Rng(derive_seed(root, stream));
}

Tensor uniform_tensor(Shape shape, float bound, Rng& rng, bool requires_grad) {
  std::uniform_real_distribution<float> dist(-bound, bound);
  std::vector<float> v(shape_size(shape));
  for (auto& x : v) x = dist(rng);
  return Tensor::from(std::move(shape), std::move(v), requires_grad);
}

Tensor normal_tensor(Shape shape, float stddev, Rng& rng, bool requires_grad) {
  std::normal_distribution<float> dist(0.0f, stddev);
  std::vector<float> v(shape_size(shape));
  for (auto& x : v) x = dist(rng);
  return Tensor::from(std::move(shape), std::move(v), requires_grad);
}

}  // namespace sff
