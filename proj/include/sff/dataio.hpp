#ifndef SFF_DATAIO_HPP
#define SFF_DATAIO_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "sff/errors.hpp"
#include "sff/metrics.hpp"
#include "sff/text.hpp"
#include "sff/vdan.hpp"

// Loaders and writers for the on-disk formats, the dataset directory
// layout, and the seeded synthetic dataset generator.
namespace sff::dataio {

enum class FormatIssue {
  kUnreadable,
  kBadMagic,
  kBadVersion,
  kBadDimension,
  kTruncated,
  kTrailingData,
  kMalformed,
};

class FormatError : public DataError {
 public:
  FormatError(FormatIssue issue, const std::string& what) : DataError(what), issue_(issue) {}
  FormatIssue issue() const { return issue_; }

 private:
  FormatIssue issue_;
};

// ---- VDFF frame features -------------------------------------------------
// "VDFF", u32 version, u32 dimension, u32 count, count x dimension f32
// values (row-major), all little-endian.
inline constexpr std::uint32_t kFrameFeatureVersion = 1;

struct FrameFeatures {
  std::size_t dim = 0;
  std::vector<float> values;  // count * dim

  std::size_t count() const { return dim == 0 ? 0 : values.size() / dim; }
  std::span<const float> row(std::size_t i) const {
    return std::span<const float>(values).subspan(i * dim, dim);
  }
};

void write_frame_features(std::ostream& os, const FrameFeatures& features);
FrameFeatures read_frame_features(std::istream& is);
void save_frame_features(const std::filesystem::path& path, const FrameFeatures& features);
FrameFeatures load_frame_features(const std::filesystem::path& path);

// ---- Word vectors ----------------------------------------------------------
// One entry per line: token followed by space-separated decimal floats.
struct WordVectorLoad {
  WordVectorTable table;
  std::vector<std::string> warnings;  // e.g. duplicate tokens (first wins)
};

WordVectorLoad read_word_vectors(std::istream& is);
WordVectorLoad load_word_vectors(const std::filesystem::path& path);
void write_word_vectors(std::ostream& os, const WordVectorTable& table);

// ---- Documents and ground truth -------------------------------------------
std::vector<std::string> read_lines(std::istream& is);
Document load_document(const std::filesystem::path& path, const WordVectorTable& table);

// CSV rows "start_frame,end_frame" (inclusive).
metrics::GroundTruth read_ground_truth(std::istream& is, std::size_t video_length);
metrics::GroundTruth load_ground_truth(const std::filesystem::path& path,
                                       std::size_t video_length);
void write_ground_truth(std::ostream& os, const metrics::GroundTruth& gt);

// ---- Selection files -------------------------------------------------------
// Header "# video=<id> frames=<N> selected=<T>", then one index per line.
struct Selection {
  std::string video_id;
  std::size_t frames = 0;
  std::vector<std::size_t> indices;
};

void write_selection(std::ostream& os, const Selection& selection);
Selection read_selection(std::istream& is);
Selection load_selection(const std::filesystem::path& path);

// ---- Captioned-image corpus ------------------------------------------------
// corpus/images.vdff holds one feature row per image; corpus/captions.tsv
// has rows "<image index>\t<group or ->\t<caption text>".
struct TextCorpus {
  FrameFeatures features;
  std::vector<std::vector<std::string>> captions;  // per image
  std::vector<int> groups;                          // per image, -1 unknown
};

vdan::ImageCorpus tokenize_corpus(const TextCorpus& corpus, const WordVectorTable& table);
void write_captions(std::ostream& os, const TextCorpus& corpus);
TextCorpus load_text_corpus(const std::filesystem::path& corpus_dir);

// ---- Dataset directory -----------------------------------------------------
//   words.txt
//   corpus/images.vdff, corpus/captions.tsv
//   videos/<id>.vdff, videos/<id>.txt, videos/<id>.gt.csv
//   train_videos.txt, test_videos.txt   (one id per line)
struct DatasetPaths {
  std::filesystem::path root;

  std::filesystem::path words() const { return root / "words.txt"; }
  std::filesystem::path corpus_dir() const { return root / "corpus"; }
  std::filesystem::path video_features(const std::string& id) const;
  std::filesystem::path video_document(const std::string& id) const;
  std::filesystem::path video_ground_truth(const std::string& id) const;
  std::filesystem::path train_list() const { return root / "train_videos.txt"; }
  std::filesystem::path test_list() const { return root / "test_videos.txt"; }
};

std::vector<std::string> load_id_list(const std::filesystem::path& path);

// ---- Synthetic data --------------------------------------------------------
struct SyntheticSpec {
  std::size_t classes = 3;
  std::size_t feature_dim = 64;
  std::size_t word_dim = 16;
  std::size_t images_per_class = 20;
  std::size_t captions_per_image = 5;
  std::size_t vocab_per_class = 8;
  std::size_t tokens_per_sentence = 5;
  std::size_t document_sentences = 4;
  std::size_t videos = 30;
  std::size_t frames_per_video = 400;
  std::size_t segments_per_video = 1;
  std::size_t segment_length = 100;
  std::size_t shot_length = 10;  // off-segment frames change class per shot
  // When non-empty, every video uses exactly these segments.
  std::vector<metrics::Segment> segments;
  float noise = 0.05f;
  std::uint64_t seed = 1;

  void validate() const;
};

struct SyntheticVideo {
  std::string id;
  std::size_t target_class = 0;
  FrameFeatures features;
  std::vector<std::string> document;  // one sentence per entry
  metrics::GroundTruth ground_truth;
};

struct SyntheticData {
  WordVectorTable words{1};
  TextCorpus corpus;
  std::vector<std::vector<float>> prototypes;  // per class
  std::vector<SyntheticVideo> videos;
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);
void write_dataset(const std::filesystem::path& root, const SyntheticData& data);

}  // namespace sff::dataio

#endif  // SFF_DATAIO_HPP
