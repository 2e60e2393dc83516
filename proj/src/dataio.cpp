#include "sff/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string_view>

#include "sff/binary_io.hpp"
#include "sff/random.hpp"

namespace sff::dataio {
namespace fs = std::filesystem;

namespace {

std::ifstream open_in(const fs::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw FormatError(FormatIssue::kUnreadable, "cannot open " + path.string());
  return in;
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

std::string_view trim(std::string_view s) {
  const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_spaces(std::string_view line) {
  std::vector<std::string_view> parts;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) parts.push_back(line.substr(i, j - i));
    i = j;
  }
  return parts;
}

bool parse_size(std::string_view s, std::size_t& out) {
  s = trim(s);
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

bool parse_float(std::string_view s, float& out) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

std::string format_float(float v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

std::string line_label(std::size_t line_no) { return "line " + std::to_string(line_no); }

}  // namespace

// ---- VDFF ------------------------------------------------------------------

void write_frame_features(std::ostream& os, const FrameFeatures& features) {
  if (features.dim == 0)
    throw FormatError(FormatIssue::kBadDimension, "frame features: dimension is 0");
  if (features.values.size() % features.dim != 0)
    throw DataError("frame features: value count is not a multiple of the dimension");
  os.write("VDFF", 4);
  binary::write_u32(os, kFrameFeatureVersion);
  binary::write_u32(os, static_cast<std::uint32_t>(features.dim));
  binary::write_u32(os, static_cast<std::uint32_t>(features.count()));
  for (float v : features.values) binary::write_f32(os, v);
  if (!os) throw DataError("frame features: write failed");
}

FrameFeatures read_frame_features(std::istream& is) {
  std::string magic;
  if (!binary::read_magic(is, magic))
    throw FormatError(FormatIssue::kTruncated, "frame features: truncated header");
  if (magic != "VDFF")
    throw FormatError(FormatIssue::kBadMagic, "frame features: bad magic (expected VDFF)");
  std::uint32_t version = 0, dim = 0, count = 0;
  if (!binary::read_u32(is, version) || !binary::read_u32(is, dim) ||
      !binary::read_u32(is, count))
    throw FormatError(FormatIssue::kTruncated, "frame features: truncated header");
  if (version != kFrameFeatureVersion)
    throw FormatError(FormatIssue::kBadVersion,
                      "frame features: unsupported version " + std::to_string(version));
  if (dim == 0) throw FormatError(FormatIssue::kBadDimension, "frame features: dimension is 0");

  FrameFeatures f;
  f.dim = dim;
  const std::size_t total = static_cast<std::size_t>(dim) * count;
  f.values.resize(total);
  for (std::size_t i = 0; i < total; ++i) {
    if (!binary::read_f32(is, f.values[i]))
      throw FormatError(FormatIssue::kTruncated,
                        "frame features: truncated payload (header claims " +
                            std::to_string(count) + " frames, found " +
                            std::to_string(i / dim) + ")");
  }
  if (is.peek() != std::char_traits<char>::eof())
    throw FormatError(FormatIssue::kTrailingData, "frame features: trailing bytes after payload");
  return f;
}

void save_frame_features(const fs::path& path, const FrameFeatures& features) {
  auto out = open_out(path, std::ios::binary);
  write_frame_features(out, features);
}

FrameFeatures load_frame_features(const fs::path& path) {
  auto in = open_in(path, std::ios::binary);
  try {
    return read_frame_features(in);
  } catch (const FormatError& e) {
    throw FormatError(e.issue(), path.string() + ": " + e.what());
  }
}

// ---- Word vectors ------------------------------------------------------------

WordVectorLoad read_word_vectors(std::istream& is) {
  std::optional<WordVectorTable> table;
  std::vector<std::string> warnings;
  std::vector<float> row;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto content = trim(line);
    if (content.empty()) continue;
    const auto parts = split_spaces(content);
    const std::size_t found = parts.size() - 1;
    if (!table) {
      if (found == 0)
        throw FormatError(FormatIssue::kBadDimension,
                          "word vectors: " + line_label(line_no) + " has no values");
      table.emplace(found);
    }
    if (found != table->dim())
      throw FormatError(FormatIssue::kMalformed,
                        "word vectors: " + line_label(line_no) + " has " +
                            std::to_string(found) + " values, expected " +
                            std::to_string(table->dim()));
    row.assign(found, 0.0f);
    for (std::size_t k = 0; k < found; ++k) {
      if (!parse_float(parts[k + 1], row[k]))
        throw FormatError(FormatIssue::kMalformed,
                          "word vectors: " + line_label(line_no) + " has invalid number '" +
                              std::string(parts[k + 1]) + "'");
    }
    std::string token(parts[0]);
    if (!table->add(token, row))
      warnings.push_back("word vectors: duplicate token '" + token + "' at " +
                         line_label(line_no) + " ignored; first occurrence kept");
  }
  if (!table) throw FormatError(FormatIssue::kMalformed, "word vectors: file is empty");
  return WordVectorLoad{std::move(*table), std::move(warnings)};
}

WordVectorLoad load_word_vectors(const fs::path& path) {
  auto in = open_in(path);
  try {
    return read_word_vectors(in);
  } catch (const FormatError& e) {
    throw FormatError(e.issue(), path.string() + ": " + e.what());
  }
}

void write_word_vectors(std::ostream& os, const WordVectorTable& table) {
  for (std::size_t i = 0; i < table.size(); ++i) {
    os << table.token(i);
    for (float v : table.vector(i)) os << ' ' << format_float(v);
    os << '\n';
  }
}

// ---- Documents, ground truth ---------------------------------------------------

std::vector<std::string> read_lines(std::istream& is) {
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

Document load_document(const fs::path& path, const WordVectorTable& table) {
  auto in = open_in(path);
  const auto lines = read_lines(in);
  Document doc = make_document(lines, table);
  if (doc.sentences.empty())
    throw FormatError(FormatIssue::kMalformed, path.string() + ": document has no sentences");
  doc.validate();
  return doc;
}

metrics::GroundTruth read_ground_truth(std::istream& is, std::size_t video_length) {
  metrics::GroundTruth gt;
  gt.video_length = video_length;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto content = trim(line);
    if (content.empty() || content.front() == '#') continue;
    if (content == "start,end" || content == "start_frame,end_frame") continue;
    const auto comma = content.find(',');
    metrics::Segment s;
    if (comma == std::string_view::npos || !parse_size(content.substr(0, comma), s.start) ||
        !parse_size(content.substr(comma + 1), s.end))
      throw FormatError(FormatIssue::kMalformed, "ground truth: " + line_label(line_no) +
                                                     " is not 'start_frame,end_frame'");
    gt.segments.push_back(s);
  }
  gt.validate();
  return gt;
}

metrics::GroundTruth load_ground_truth(const fs::path& path, std::size_t video_length) {
  auto in = open_in(path);
  try {
    return read_ground_truth(in, video_length);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_ground_truth(std::ostream& os, const metrics::GroundTruth& gt) {
  os << "start,end\n";
  for (const auto& s : gt.segments) os << s.start << ',' << s.end << '\n';
}

// ---- Selections ----------------------------------------------------------------

void write_selection(std::ostream& os, const Selection& selection) {
  if (selection.video_id.find_first_of(" \t\r\n") != std::string::npos)
    throw DataError("selection: video id must not contain whitespace");
  os << "# video=" << selection.video_id << " frames=" << selection.frames
     << " selected=" << selection.indices.size() << '\n';
  for (std::size_t i : selection.indices) os << i << '\n';
}

Selection read_selection(std::istream& is) {
  std::string header;
  if (!std::getline(is, header)) throw FormatError(FormatIssue::kMalformed, "selection: empty file");
  const auto parts = split_spaces(trim(header));
  Selection sel;
  std::size_t expected = 0;
  const auto field = [&](std::size_t idx, std::string_view key) -> std::string_view {
    if (idx >= parts.size() || !parts[idx].starts_with(key))
      throw FormatError(FormatIssue::kMalformed,
                        "selection: header must be '# video=<id> frames=<N> selected=<T>'");
    return parts[idx].substr(key.size());
  };
  if (parts.size() != 4 || parts[0] != "#")
    throw FormatError(FormatIssue::kMalformed,
                      "selection: header must be '# video=<id> frames=<N> selected=<T>'");
  sel.video_id = std::string(field(1, "video="));
  if (!parse_size(field(2, "frames="), sel.frames) ||
      !parse_size(field(3, "selected="), expected))
    throw FormatError(FormatIssue::kMalformed, "selection: header has a non-numeric count");

  std::string line;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    const auto content = trim(line);
    if (content.empty()) continue;
    std::size_t idx = 0;
    if (!parse_size(content, idx))
      throw FormatError(FormatIssue::kMalformed,
                        "selection: " + line_label(line_no) + " is not a frame index");
    if (idx >= sel.frames)
      throw FormatError(FormatIssue::kMalformed, "selection: " + line_label(line_no) +
                                                     " index " + std::to_string(idx) +
                                                     " is outside the video");
    sel.indices.push_back(idx);
  }
  if (sel.indices.size() != expected)
    throw FormatError(FormatIssue::kTruncated,
                      "selection: header declares " + std::to_string(expected) +
                          " frames, found " + std::to_string(sel.indices.size()));
  return sel;
}

Selection load_selection(const fs::path& path) {
  auto in = open_in(path);
  try {
    return read_selection(in);
  } catch (const FormatError& e) {
    throw FormatError(e.issue(), path.string() + ": " + e.what());
  }
}

// ---- Corpus ------------------------------------------------------------------

vdan::ImageCorpus tokenize_corpus(const TextCorpus& corpus, const WordVectorTable& table) {
  const std::size_t n = corpus.features.count();
  if (corpus.captions.size() != n || corpus.groups.size() != n)
    throw DataError("corpus: feature, caption and group counts differ");
  vdan::ImageCorpus out;
  out.images.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    vdan::CaptionedImage img;
    const auto row = corpus.features.row(i);
    img.feature.assign(row.begin(), row.end());
    img.captions = make_document(corpus.captions[i], table).sentences;
    img.group = corpus.groups[i];
    if (img.captions.empty())
      throw DataError("corpus: image " + std::to_string(i) + " has no usable captions");
    out.images.push_back(std::move(img));
  }
  return out;
}

void write_captions(std::ostream& os, const TextCorpus& corpus) {
  for (std::size_t i = 0; i < corpus.captions.size(); ++i) {
    const int g = i < corpus.groups.size() ? corpus.groups[i] : -1;
    for (const auto& c : corpus.captions[i]) {
      if (c.find_first_of("\t\n") != std::string::npos)
        throw DataError("corpus: caption contains a tab or newline");
      os << i << '\t';
      if (g < 0) os << '-';
      else os << g;
      os << '\t' << c << '\n';
    }
  }
}

TextCorpus load_text_corpus(const fs::path& corpus_dir) {
  TextCorpus corpus;
  corpus.features = load_frame_features(corpus_dir / "images.vdff");
  const std::size_t n = corpus.features.count();
  corpus.captions.assign(n, {});
  corpus.groups.assign(n, -1);
  std::vector<bool> seen(n, false);

  const auto path = corpus_dir / "captions.tsv";
  auto in = open_in(path);
  std::string line;
  std::size_t line_no = 0;
  const auto bad = [&](const std::string& why) {
    return FormatError(FormatIssue::kMalformed,
                       path.string() + ": " + line_label(line_no) + " " + why);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) throw bad("needs three tab-separated fields");
    std::size_t image = 0;
    if (!parse_size(std::string_view(line).substr(0, t1), image)) throw bad("has a bad image index");
    if (image >= n) throw bad("refers to image " + std::to_string(image) + " beyond the feature file");
    const auto group_text = trim(std::string_view(line).substr(t1 + 1, t2 - t1 - 1));
    int group = -1;
    if (group_text != "-") {
      std::size_t g = 0;
      if (!parse_size(group_text, g)) throw bad("has a bad group");
      group = static_cast<int>(g);
    }
    if (seen[image] && corpus.groups[image] != group) throw bad("changes the group of an image");
    seen[image] = true;
    corpus.groups[image] = group;
    corpus.captions[image].push_back(line.substr(t2 + 1));
  }
  for (std::size_t i = 0; i < n; ++i)
    if (!seen[i]) throw FormatError(FormatIssue::kMalformed,
                                    path.string() + ": image " + std::to_string(i) + " has no captions");
  return corpus;
}

// ---- Dataset layout ----------------------------------------------------------

fs::path DatasetPaths::video_features(const std::string& id) const {
  return root / "videos" / (id + ".vdff");
}
fs::path DatasetPaths::video_document(const std::string& id) const {
  return root / "videos" / (id + ".txt");
}
fs::path DatasetPaths::video_ground_truth(const std::string& id) const {
  return root / "videos" / (id + ".gt.csv");
}

std::vector<std::string> load_id_list(const fs::path& path) {
  auto in = open_in(path);
  std::vector<std::string> ids;
  for (const auto& line : read_lines(in)) {
    const auto id = trim(line);
    if (!id.empty()) ids.emplace_back(id);
  }
  return ids;
}

// ---- Synthetic ---------------------------------------------------------------

void SyntheticSpec::validate() const {
  if (classes < 3) throw ConfigError("synthetic: at least 3 classes are required");
  if (feature_dim == 0 || word_dim == 0) throw ConfigError("synthetic: dimensions must be positive");
  if (images_per_class == 0 || captions_per_image == 0 || vocab_per_class == 0 ||
      tokens_per_sentence == 0 || document_sentences == 0)
    throw ConfigError("synthetic: corpus sizes must be positive");
  if (frames_per_video == 0) throw ConfigError("synthetic: frames_per_video must be positive");
  if (shot_length == 0) throw ConfigError("synthetic: shot_length must be positive");
  if (noise < 0.0f) throw ConfigError("synthetic: noise must be non-negative");
  if (!segments.empty()) {
    metrics::GroundTruth gt{segments, frames_per_video};
    try {
      gt.validate();
    } catch (const DataError& e) {
      throw ConfigError(std::string("synthetic: planted segments invalid: ") + e.what());
    }
  } else if (segments_per_video > 0) {
    if (segment_length == 0) throw ConfigError("synthetic: segment_length must be positive");
    if (frames_per_video / segments_per_video < segment_length)
      throw ConfigError("synthetic: planted segments do not fit in the video");
  }
}

namespace {

std::string class_token(std::size_t k, std::size_t j) {
  return "c" + std::to_string(k) + "w" + std::to_string(j);
}

std::string make_sentence(std::size_t k, const SyntheticSpec& spec, Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, spec.vocab_per_class - 1);
  std::string s;
  for (std::size_t t = 0; t < spec.tokens_per_sentence; ++t) {
    if (t) s += ' ';
    s += class_token(k, pick(rng));
  }
  return s;
}

std::vector<metrics::Segment> place_segments(const SyntheticSpec& spec, Rng& rng) {
  if (!spec.segments.empty()) return spec.segments;
  std::vector<metrics::Segment> out;
  if (spec.segments_per_video == 0) return out;
  // One segment per equal slot, uniformly positioned inside the slot.
  const std::size_t slot = spec.frames_per_video / spec.segments_per_video;
  for (std::size_t s = 0; s < spec.segments_per_video; ++s) {
    std::uniform_int_distribution<std::size_t> off(0, slot - spec.segment_length);
    const std::size_t start = s * slot + off(rng);
    out.push_back({start, start + spec.segment_length - 1});
  }
  return out;
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  SyntheticData data;
  const std::size_t K = spec.classes, z = spec.feature_dim;

  Rng word_rng = make_stream(spec.seed, "synth.words");
  data.words = WordVectorTable(spec.word_dim);
  std::normal_distribution<float> word_dist(0.0f, 0.5f);
  std::vector<float> wv(spec.word_dim);
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t j = 0; j < spec.vocab_per_class; ++j) {
      for (auto& v : wv) v = word_dist(word_rng);
      data.words.add(class_token(k, j), wv);
    }

  Rng proto_rng = make_stream(spec.seed, "synth.prototypes");
  std::normal_distribution<float> unit(0.0f, 1.0f);
  data.prototypes.assign(K, std::vector<float>(z));
  for (auto& p : data.prototypes)
    for (auto& v : p) v = unit(proto_rng);

  Rng noise_rng = make_stream(spec.seed, "synth.noise");
  std::normal_distribution<float> noise(0.0f, 1.0f);
  const auto emit = [&](std::vector<float>& dst, std::size_t k) {
    for (std::size_t d = 0; d < z; ++d)
      dst.push_back(data.prototypes[k][d] + spec.noise * noise(noise_rng));
  };

  Rng caption_rng = make_stream(spec.seed, "synth.captions");
  data.corpus.features.dim = z;
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t i = 0; i < spec.images_per_class; ++i) {
      emit(data.corpus.features.values, k);
      std::vector<std::string> caps;
      for (std::size_t c = 0; c < spec.captions_per_image; ++c)
        caps.push_back(make_sentence(k, spec, caption_rng));
      data.corpus.captions.push_back(std::move(caps));
      data.corpus.groups.push_back(static_cast<int>(k));
    }

  Rng video_rng = make_stream(spec.seed, "synth.videos");
  std::uniform_int_distribution<std::size_t> other(1, K - 1);
  for (std::size_t v = 0; v < spec.videos; ++v) {
    SyntheticVideo video;
    video.id = "video" + std::to_string(v);
    video.target_class = v % K;
    video.ground_truth.video_length = spec.frames_per_video;
    video.ground_truth.segments = place_segments(spec, video_rng);
    video.features.dim = z;
    video.features.values.reserve(spec.frames_per_video * z);
    std::size_t shot_class = 0;
    for (std::size_t f = 0; f < spec.frames_per_video; ++f) {
      if (f % spec.shot_length == 0) shot_class = (video.target_class + other(video_rng)) % K;
      emit(video.features.values,
           video.ground_truth.is_relevant(f) ? video.target_class : shot_class);
    }
    for (std::size_t s = 0; s < spec.document_sentences; ++s)
      video.document.push_back(make_sentence(video.target_class, spec, video_rng));
    data.videos.push_back(std::move(video));
  }

  // Last third (at least one) of the videos is held out for testing.
  const std::size_t n_test = spec.videos == 0 ? 0 : std::max<std::size_t>(1, spec.videos / 3);
  for (std::size_t v = 0; v < spec.videos; ++v)
    (v + n_test < spec.videos ? data.train_ids : data.test_ids).push_back(data.videos[v].id);
  return data;
}

void write_dataset(const fs::path& root, const SyntheticData& data) {
  DatasetPaths paths{root};
  {
    auto out = open_out(paths.words());
    write_word_vectors(out, data.words);
  }
  save_frame_features(paths.corpus_dir() / "images.vdff", data.corpus.features);
  {
    auto out = open_out(paths.corpus_dir() / "captions.tsv");
    write_captions(out, data.corpus);
  }
  for (const auto& v : data.videos) {
    save_frame_features(paths.video_features(v.id), v.features);
    auto doc = open_out(paths.video_document(v.id));
    for (const auto& s : v.document) doc << s << '\n';
    auto gt = open_out(paths.video_ground_truth(v.id));
    write_ground_truth(gt, v.ground_truth);
  }
  const auto write_ids = [&](const fs::path& p, const std::vector<std::string>& ids) {
    auto out = open_out(p);
    for (const auto& id : ids) out << id << '\n';
  };
  write_ids(paths.train_list(), data.train_ids);
  write_ids(paths.test_list(), data.test_ids);
}

}  // namespace sff::dataio
