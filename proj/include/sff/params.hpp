#ifndef SFF_PARAMS_HPP
#define SFF_PARAMS_HPP

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "sff/tensor.hpp"

namespace sff {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

// Ordered collection of trainable tensors. Order is registration order and
// is the order used by checkpoints and the optimizer.
class ParameterSet {
 public:
  // Registers `t` (marking it requires_grad) and returns the stored handle.
  Tensor add(std::string name, Tensor t);
  // Appends all entries of `other` with `prefix` prepended to their names.
  void extend(const ParameterSet& other, std::string_view prefix = {});

  const std::vector<NamedTensor>& entries() const { return entries_; }
  std::vector<Tensor> tensors() const;
  Tensor find(std::string_view name) const;
  std::size_t scalar_count() const;

  void zero_grad();
  void clear_grad();
  // Deep copy of all values (gradient slots are not copied).
  std::vector<std::vector<float>> snapshot() const;
  void restore(const std::vector<std::vector<float>>& values);

 private:
  std::vector<NamedTensor> entries_;
};

// "SSKP" checkpoint: magic, u32 version, then records of
// (u32 name length, UTF-8 name, u32 rank, u32 dims..., f32 values...),
// all little-endian, until end of file.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(std::ostream& os, const std::vector<NamedTensor>& items);
std::vector<NamedTensor> read_checkpoint(std::istream& is);

void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params);
std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path);

// Copies checkpointed values into `params`, matching by name. Missing
// entries and shape mismatches throw ShapeError naming both shapes.
void restore_checkpoint(const std::vector<NamedTensor>& saved, ParameterSet& params);

}  // namespace sff

#endif  // SFF_PARAMS_HPP
