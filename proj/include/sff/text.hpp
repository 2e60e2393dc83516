#ifndef SFF_TEXT_HPP
#define SFF_TEXT_HPP

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace sff {

// Lowercases ASCII letters and splits on whitespace and ASCII punctuation.
// Bytes >= 0x80 are kept inside tokens so UTF-8 words survive intact.
std::vector<std::string> tokenize(std::string_view text);

// Frozen word representations. Tokens absent from the table resolve to
// kUnknown, whose vector is all zeros.
class WordVectorTable {
 public:
  static constexpr std::size_t kUnknown = std::numeric_limits<std::size_t>::max();

  explicit WordVectorTable(std::size_t dim);

  // Returns false (and keeps the existing row) when `token` is already
  // present.
  bool add(std::string token, std::span<const float> vector);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return tokens_.size(); }
  std::size_t index_of(std::string_view token) const;
  const std::string& token(std::size_t index) const { return tokens_.at(index); }
  // Row for `index`; kUnknown yields the zero vector.
  std::span<const float> vector(std::size_t index) const;

  std::vector<std::size_t> lookup(std::span<const std::string> tokens) const;

 private:
  std::size_t dim_;
  std::vector<std::string> tokens_;
  std::vector<float> rows_;
  std::vector<float> zero_;
  std::unordered_map<std::string, std::size_t> index_;
};

using Sentence = std::vector<std::size_t>;

// N >= 1 sentences, each with at least one token index.
struct Document {
  std::vector<Sentence> sentences;

  // Throws DataError when a structural invariant is violated.
  void validate() const;
  std::size_t token_count() const;
};

// Tokenizes each line into a sentence, dropping lines with no tokens.
Document make_document(std::span<const std::string> lines,
                       const WordVectorTable& table);

}  // namespace sff

#endif  // SFF_TEXT_HPP
