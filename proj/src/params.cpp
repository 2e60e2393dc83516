#include "sff/params.hpp"

#include <algorithm>
#include <fstream>
#include <limits>

#include "sff/binary_io.hpp"
#include "sff/errors.hpp"

namespace sff {

Tensor ParameterSet::add(std::string name, Tensor t) {
  if (find(name).defined()) {
    throw std::invalid_argument("parameter set: duplicate name " + name);
  }
  t.set_requires_grad(true);
  entries_.push_back({std::move(name), t});
  return t;
}

void ParameterSet::extend(const ParameterSet& other, std::string_view prefix) {
  for (const auto& e : other.entries_) add(std::string(prefix) + e.name, e.tensor);
}

std::vector<Tensor> ParameterSet::tensors() const {
  std::vector<Tensor> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.tensor);
  return out;
}

Tensor ParameterSet::find(std::string_view name) const {
  for (const auto& e : entries_)
    if (e.name == name) return e.tensor;
  return {};
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.tensor.size();
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

void ParameterSet::clear_grad() {
  for (auto& e : entries_) e.tensor.clear_grad();
}

std::vector<std::vector<float>> ParameterSet::snapshot() const {
  std::vector<std::vector<float>> out;
  for (const auto& e : entries_) out.push_back(e.tensor.values());
  return out;
}

void ParameterSet::restore(const std::vector<std::vector<float>>& values) {
  if (values.size() != entries_.size()) {
    throw ShapeError("parameter set: snapshot has " +
                     std::to_string(values.size()) + " entries, expected " +
                     std::to_string(entries_.size()));
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto data = entries_[i].tensor.data();
    if (values[i].size() != data.size()) {
      throw ShapeError("parameter set: snapshot size mismatch for " +
                       entries_[i].name);
    }
    std::copy(values[i].begin(), values[i].end(), data.begin());
  }
}

void write_checkpoint(std::ostream& os, const std::vector<NamedTensor>& items) {
  os.write("SSKP", 4);
  binary::write_u32(os, kCheckpointVersion);
  for (const auto& item : items) {
    binary::write_u32(os, static_cast<std::uint32_t>(item.name.size()));
    os.write(item.name.data(), static_cast<std::streamsize>(item.name.size()));
    const auto& shape = item.tensor.shape();
    binary::write_u32(os, static_cast<std::uint32_t>(shape.size()));
    for (auto d : shape) binary::write_u32(os, static_cast<std::uint32_t>(d));
    for (float v : item.tensor.data()) binary::write_f32(os, v);
  }
}

std::vector<NamedTensor> read_checkpoint(std::istream& is) {
  std::string magic;
  if (!binary::read_magic(is, magic) || magic != "SSKP") {
    throw DataError("checkpoint: bad magic (expected SSKP)");
  }
  std::uint32_t version = 0;
  if (!binary::read_u32(is, version)) throw DataError("checkpoint: truncated header");
  if (version != kCheckpointVersion) {
    throw DataError("checkpoint: unsupported version " + std::to_string(version));
  }
  std::vector<NamedTensor> out;
  while (true) {
    std::uint32_t name_len = 0;
    if (!binary::read_u32(is, name_len)) {
      if (is.gcount() == 0 && is.eof()) break;  // clean end of file
      throw DataError("checkpoint: truncated record header");
    }
    if (name_len == 0 || name_len > 4096) {
      throw DataError("checkpoint: implausible name length " +
                      std::to_string(name_len));
    }
    std::string name(name_len, '\0');
    if (!is.read(name.data(), name_len)) throw DataError("checkpoint: truncated name");
    std::uint32_t rank = 0;
    if (!binary::read_u32(is, rank) || rank == 0 || rank > 8) {
      throw DataError("checkpoint: bad rank for " + name);
    }
    Shape shape(rank);
    std::uint64_t count = 1;
    for (auto& d : shape) {
      std::uint32_t v = 0;
      if (!binary::read_u32(is, v) || v == 0) {
        throw DataError("checkpoint: bad dimension for " + name);
      }
      d = v;
      count *= v;
      if (count > (std::uint64_t{1} << 32)) {
        throw DataError("checkpoint: tensor " + name + " is implausibly large");
      }
    }
    std::vector<float> values(count);
    for (auto& v : values) {
      if (!binary::read_f32(is, v)) {
        throw DataError("checkpoint: truncated payload for " + name);
      }
    }
    out.push_back({std::move(name), Tensor::from(std::move(shape), std::move(values))});
  }
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("checkpoint: cannot open " + path.string() + " for writing");
  write_checkpoint(os, params.entries());
  if (!os) throw DataError("checkpoint: write failed for " + path.string());
}

std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("checkpoint: cannot open " + path.string());
  try {
    return read_checkpoint(is);
  } catch (const DataError& e) {
    throw DataError(std::string(e.what()) + " in " + path.string());
  }
}

void restore_checkpoint(const std::vector<NamedTensor>& saved, ParameterSet& params) {
  for (const auto& e : params.entries()) {
    auto it = std::find_if(saved.begin(), saved.end(),
                           [&](const NamedTensor& s) { return s.name == e.name; });
    if (it == saved.end()) {
      throw ShapeError("checkpoint: missing tensor " + e.name);
    }
    if (it->tensor.shape() != e.tensor.shape()) {
      throw ShapeError("checkpoint: tensor " + e.name + " has shape " +
                       shape_string(it->tensor.shape()) +
                       " but the configured model expects " +
                       shape_string(e.tensor.shape()));
    }
  }
  for (const auto& e : params.entries()) {
    auto it = std::find_if(saved.begin(), saved.end(),
                           [&](const NamedTensor& s) { return s.name == e.name; });
    Tensor dst = e.tensor;
    auto src = it->tensor.data();
    std::copy(src.begin(), src.end(), dst.data().begin());
  }
}

}  // namespace sff
