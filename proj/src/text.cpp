#include "sff/text.hpp"

#include <algorithm>

#include "sff/errors.hpp"

namespace sff {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    const bool separator =
        c < 0x80 && (c <= 0x20 || c == 0x7f ||
                     (c >= 0x21 && c <= 0x2f) || (c >= 0x3a && c <= 0x40) ||
                     (c >= 0x5b && c <= 0x60) || (c >= 0x7b && c <= 0x7e));
    if (separator) {
      if (!current.empty()) out.push_back(std::move(current));
      current.clear();
      continue;
    }
    current.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : ch);
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

WordVectorTable::WordVectorTable(std::size_t dim) : dim_(dim), zero_(dim, 0.0f) {
  if (dim == 0) throw DataError("word vectors: dimension must be positive");
}

bool WordVectorTable::add(std::string token, std::span<const float> vector) {
  if (vector.size() != dim_) {
    throw ShapeError("word vectors: token '" + token + "' has dimension " +
                     std::to_string(vector.size()) + ", table expects " +
                     std::to_string(dim_));
  }
  if (index_.count(token)) return false;
  index_.emplace(token, tokens_.size());
  tokens_.push_back(std::move(token));
  rows_.insert(rows_.end(), vector.begin(), vector.end());
  return true;
}

std::size_t WordVectorTable::index_of(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnknown : it->second;
}

std::span<const float> WordVectorTable::vector(std::size_t index) const {
  if (index == kUnknown) return zero_;
  if (index >= tokens_.size()) {
    throw std::out_of_range("word vectors: index " + std::to_string(index) +
                            " outside vocabulary of " + std::to_string(size()));
  }
  return std::span<const float>(rows_).subspan(index * dim_, dim_);
}

std::vector<std::size_t> WordVectorTable::lookup(
    std::span<const std::string> tokens) const {
  std::vector<std::size_t> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(index_of(t));
  return out;
}

void Document::validate() const {
  if (sentences.empty()) throw DataError("document: no sentences");
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (sentences[i].empty()) {
      throw DataError("document: sentence " + std::to_string(i) + " is empty");
    }
  }
}

std::size_t Document::token_count() const {
  std::size_t n = 0;
  for (const auto& s : sentences) n += s.size();
  return n;
}

Document make_document(std::span<const std::string> lines,
                       const WordVectorTable& table) {
  Document doc;
  for (const auto& line : lines) {
    auto tokens = tokenize(line);
    if (tokens.empty()) continue;
    doc.sentences.push_back(table.lookup(tokens));
  }
  doc.validate();
  return doc;
}

}  // namespace sff
