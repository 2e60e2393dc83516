#include "sff/vdan.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "sff/adam.hpp"
#include "sff/errors.hpp"
#include "sff/ops.hpp"

namespace sff::vdan {

namespace o = sff::ops;

VdanConfig VdanConfig::toy() {
  VdanConfig c;
  c.word_dim = 16;
  c.sentence_hidden = 32;
  c.document_hidden = 64;
  c.feature_dim = 64;
  c.embedding_dim = 16;
  c.head_hidden = 64;
  return c;
}

void VdanConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ConfigError(std::string("vdan config: ") + name + " must be positive");
  };
  positive(word_dim, "word_dim");
  positive(sentence_hidden, "sentence_hidden");
  positive(document_hidden, "document_hidden");
  positive(feature_dim, "feature_dim");
  positive(embedding_dim, "embedding_dim");
  positive(head_hidden, "head_hidden");
  if (sentence_hidden % 2 || document_hidden % 2) {
    throw ConfigError("vdan config: hidden sizes must be even (split across two directions)");
  }
  if (document_hidden != feature_dim) {
    throw ConfigError("vdan config: document_hidden (" + std::to_string(document_hidden) +
                      ") must equal feature_dim (" + std::to_string(feature_dim) +
                      ") so the image feature can seed the document recurrence");
  }
  if (!std::isfinite(margin)) throw ConfigError("vdan config: margin must be finite");
}

Vdan::Vdan(VdanConfig config, std::shared_ptr<const WordVectorTable> words, Rng& rng)
    : config_(config), words_(std::move(words)) {
  config_.validate();
  if (!words_) throw ConfigError("vdan: word vector table is required");
  if (words_->dim() != config_.word_dim) {
    throw ConfigError("vdan: word vectors have dimension " + std::to_string(words_->dim()) +
                      ", config expects " + std::to_string(config_.word_dim));
  }
  const std::size_t hp = config_.sentence_hidden;
  const std::size_t hd = config_.document_hidden;
  sentence_rnn_ = nn::BiGru::init(config_.word_dim, hp / 2, rng);
  word_projection_ = uniform_tensor({hp, hp}, 1.0f / std::sqrt(float(hp)), rng, true);
  word_context_ = uniform_tensor({hp}, 1.0f / std::sqrt(float(hp)), rng, true);
  document_rnn_ = nn::BiGru::init(hp, hd / 2, rng);
  sentence_projection_ = uniform_tensor({hd, hd}, 1.0f / std::sqrt(float(hd)), rng, true);
  sentence_context_ = uniform_tensor({hd}, 1.0f / std::sqrt(float(hd)), rng, true);
  const std::size_t doc_sizes[] = {hd, config_.head_hidden, config_.embedding_dim};
  document_head_ = nn::Mlp::init(doc_sizes, rng);
  const std::size_t img_sizes[] = {config_.feature_dim, config_.head_hidden,
                                   config_.embedding_dim};
  image_head_ = nn::Mlp::init(img_sizes, rng);

  sentence_rnn_.register_in(params_, "vdan.sentence_rnn");
  params_.add("vdan.word_attention.projection", word_projection_);
  params_.add("vdan.word_attention.context", word_context_);
  document_rnn_.register_in(params_, "vdan.document_rnn");
  params_.add("vdan.sentence_attention.projection", sentence_projection_);
  params_.add("vdan.sentence_attention.context", sentence_context_);
  document_head_.register_in(params_, "vdan.document_head");
  image_head_.register_in(params_, "vdan.image_head");
}

SentenceEncoding Vdan::encode_sentence(const Sentence& tokens) const {
  if (tokens.empty()) throw DataError("encode_sentence: empty sentence");
  std::vector<Tensor> inputs;
  inputs.reserve(tokens.size());
  for (auto idx : tokens) {
    auto v = words_->vector(idx);
    inputs.push_back(Tensor::vector({v.begin(), v.end()}));
  }
  const std::size_t half = config_.sentence_hidden / 2;
  Tensor h0 = Tensor::zeros({half});
  auto hidden = sentence_rnn_.run(inputs, h0, h0);
  auto pooled = config_.word_attention
                    ? nn::attention_pool(hidden, word_projection_, word_context_)
                    : nn::mean_pool(hidden);
  return {pooled.pooled, pooled.alphas};
}

void Vdan::check_feature(const Tensor& feature) const {
  if (feature.rank() != 1 || feature.size() != config_.feature_dim) {
    throw ShapeError("vdan: image feature has shape " + shape_string(feature.shape()) +
                     ", expected [" + std::to_string(config_.feature_dim) + "]");
  }
}

DocumentEncoding Vdan::encode_document(const Document& doc,
                                       const Tensor& image_feature) const {
  doc.validate();
  check_feature(image_feature);
  DocumentEncoding enc;
  std::vector<Tensor> sentences;
  sentences.reserve(doc.sentences.size());
  for (const auto& s : doc.sentences) {
    auto e = encode_sentence(s);
    sentences.push_back(e.vector);
    enc.word_alphas.push_back(e.alphas);
  }
  // The image feature is the initial document-level state [h0_fwd; h0_bwd].
  const std::size_t half = config_.document_hidden / 2;
  Tensor h0_fwd = o::slice(image_feature, 0, half);
  Tensor h0_bwd = o::slice(image_feature, half, half);
  auto hidden = document_rnn_.run(sentences, h0_fwd, h0_bwd);
  auto pooled = nn::attention_pool(hidden, sentence_projection_, sentence_context_);
  enc.sentence_alphas = pooled.alphas;
  enc.embedding = o::l2_normalize(document_head_(pooled.pooled));
  return enc;
}

Tensor Vdan::encode_image(const Tensor& image_feature) const {
  check_feature(image_feature);
  double norm = 0.0;
  for (float v : image_feature.data()) norm += double(v) * v;
  if (!(norm > 0.0)) throw DataError("encode_image: image feature has zero norm");
  return o::l2_normalize(image_head_(image_feature));
}

DocumentEncoding Vdan::encode_document(const Document& doc,
                                       std::span<const float> image_feature) const {
  return encode_document(doc, Tensor::vector({image_feature.begin(), image_feature.end()}));
}

Tensor Vdan::encode_image(std::span<const float> image_feature) const {
  return encode_image(Tensor::vector({image_feature.begin(), image_feature.end()}));
}

Tensor cosine_embedding_loss(const Tensor& e_doc, const Tensor& e_img, bool corresponding,
                             float margin) {
  Tensor cos = o::cosine(e_doc, e_img);
  if (corresponding) return o::affine(cos, -1.0f, 1.0f);
  return o::maximum(o::affine(cos, 1.0f, -margin), 0.0f);
}

void ImageCorpus::validate(std::size_t feature_dim) const {
  if (images.size() < 3) {
    throw DataError("corpus: need at least 3 images to build pairs, got " +
                    std::to_string(images.size()));
  }
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto& img = images[i];
    if (img.feature.size() != feature_dim) {
      throw DataError("corpus: image " + std::to_string(i) + " has feature dimension " +
                      std::to_string(img.feature.size()) + ", expected " +
                      std::to_string(feature_dim));
    }
    if (img.captions.empty()) {
      throw DataError("corpus: image " + std::to_string(i) + " has no captions");
    }
    for (const auto& c : img.captions) {
      if (c.empty()) throw DataError("corpus: image " + std::to_string(i) + " has an empty caption");
    }
  }
}

namespace {

std::size_t pick_other(std::size_t n, std::span<const std::size_t> exclude, Rng& rng) {
  std::uniform_int_distribution<std::size_t> dist(0, n - 1);
  while (true) {
    std::size_t c = dist(rng);
    if (std::find(exclude.begin(), exclude.end(), c) == exclude.end()) return c;
  }
}

Document join_captions(const ImageCorpus& corpus, std::size_t a, std::size_t b, Rng& rng) {
  Document d;
  const auto& ca = corpus.images[a].captions;
  const auto& cb = corpus.images[b].captions;
  d.sentences.insert(d.sentences.end(), ca.begin(), ca.end());
  d.sentences.insert(d.sentences.end(), cb.begin(), cb.end());
  std::shuffle(d.sentences.begin(), d.sentences.end(), rng);
  return d;
}

}  // namespace

std::vector<TrainingPair> build_training_pairs(const ImageCorpus& corpus,
                                               std::span<const std::size_t> subset,
                                               Rng& rng) {
  const std::size_t n = corpus.images.size();
  if (n < 3) {
    throw DataError("build_training_pairs: corpus has " + std::to_string(n) +
                    " images, need at least 3");
  }
  const bool grouped = std::all_of(corpus.images.begin(), corpus.images.end(),
                                   [](const CaptionedImage& i) { return i.group >= 0; });

  std::vector<TrainingPair> pairs;
  pairs.reserve(2 * subset.size());
  for (std::size_t img : subset) {
    if (img >= n) throw std::out_of_range("build_training_pairs: image index out of range");

    const std::size_t self[] = {img};
    const std::size_t extra = pick_other(n, self, rng);
    pairs.push_back({join_captions(corpus, img, extra, rng), img, true});

    std::vector<std::size_t> candidates;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == img) continue;
      if (grouped && corpus.images[j].group == corpus.images[img].group) continue;
      candidates.push_back(j);
    }
    if (candidates.size() < 2) {
      throw DataError("build_training_pairs: image " + std::to_string(img) +
                      " has fewer than two candidates for a negative document");
    }
    std::uniform_int_distribution<std::size_t> dist(0, candidates.size() - 1);
    const std::size_t first = dist(rng);
    std::size_t second = dist(rng);
    while (second == first) second = dist(rng);
    pairs.push_back(
        {join_captions(corpus, candidates[first], candidates[second], rng), img, false});
  }
  return pairs;
}

std::vector<TrainingPair> build_training_pairs(const ImageCorpus& corpus, Rng& rng) {
  std::vector<std::size_t> all(corpus.images.size());
  std::iota(all.begin(), all.end(), 0);
  return build_training_pairs(corpus, all, rng);
}

namespace {
Tensor pair_loss(const Vdan& model, const ImageCorpus& corpus, const TrainingPair& pair) {
  const auto& feature = corpus.images.at(pair.image).feature;
  Tensor phi = Tensor::vector(feature);
  auto doc = model.encode_document(pair.document, phi);
  Tensor img = model.encode_image(phi);
  return cosine_embedding_loss(doc.embedding, img, pair.corresponding, model.config().margin);
}
}  // namespace

double accumulate_batch_gradients(const Vdan& model, const ImageCorpus& corpus,
                                  std::span<const TrainingPair> pairs) {
  if (pairs.empty()) throw std::invalid_argument("accumulate_batch_gradients: empty batch");
  const float weight = 1.0f / static_cast<float>(pairs.size());
  double total = 0.0;
  for (const auto& pair : pairs) {
    Tape tape;
    TapeScope scope(tape);
    Tensor loss = pair_loss(model, corpus, pair);
    total += loss.item();
    Tensor scaled = o::affine(loss, weight, 0.0f);
    if (tape.contains(scaled)) backward(tape, scaled);
  }
  return total / static_cast<double>(pairs.size());
}

double train_step(Vdan& model, const ImageCorpus& corpus, std::span<const TrainingPair> batch,
                  AdamState& adam) {
  auto& params = model.parameters();
  params.zero_grad();
  const double loss = accumulate_batch_gradients(model, corpus, batch);
  if (!std::isfinite(loss)) throw NumericError("vdan: non-finite batch loss");
  auto tensors = params.tensors();
  adam_step(tensors, adam);
  return loss;
}

double evaluate_loss(const Vdan& model, const ImageCorpus& corpus,
                     std::span<const TrainingPair> pairs) {
  if (pairs.empty()) return 0.0;
  NoGradScope no_grad;
  double total = 0.0;
  for (const auto& pair : pairs) total += pair_loss(model, corpus, pair).item();
  return total / static_cast<double>(pairs.size());
}

void TrainOptions::validate() const {
  if (epochs == 0) throw ConfigError("train_vdan: epochs must be positive");
  if (batch_size == 0) throw ConfigError("train_vdan: batch size must be positive");
  if (!(learning_rate > 0.0f)) throw ConfigError("train_vdan: learning rate must be positive");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("train_vdan: validation fraction must be in [0, 1)");
  }
}

TrainResult train_vdan(Vdan& model, const ImageCorpus& corpus, const TrainOptions& options,
                       const std::function<void(const EpochLog&)>& on_epoch) {
  corpus.validate(model.config().feature_dim);
  options.validate();

  // Hold out a seeded share of the images; their pairs are built once.
  std::vector<std::size_t> order(corpus.images.size());
  std::iota(order.begin(), order.end(), 0);
  Rng split_rng = make_stream(options.seed, "vdan.split");
  std::shuffle(order.begin(), order.end(), split_rng);
  const auto held = static_cast<std::size_t>(
      std::lround(options.validation_fraction * static_cast<double>(order.size())));
  std::vector<std::size_t> validation(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(held));
  std::vector<std::size_t> training(order.begin() + static_cast<std::ptrdiff_t>(held), order.end());
  if (training.empty()) throw DataError("train_vdan: no training images after the split");

  Rng val_rng = make_stream(options.seed, "vdan.validation_pairs");
  const auto validation_pairs = build_training_pairs(corpus, validation, val_rng);
  Rng pair_rng = make_stream(options.seed, "vdan.pairs");

  AdamState adam(AdamConfig{options.learning_rate});
  auto& params = model.parameters();
  TrainResult result;
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::vector<float>> best_values;

  for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
    auto pairs = build_training_pairs(corpus, training, pair_rng);
    std::shuffle(pairs.begin(), pairs.end(), pair_rng);
    double total = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < pairs.size(); start += options.batch_size, ++batch_index) {
      const std::size_t len = std::min(options.batch_size, pairs.size() - start);
      std::span<const TrainingPair> batch(pairs.data() + start, len);
      params.zero_grad();
      const double loss = accumulate_batch_gradients(model, corpus, batch);
      if (!std::isfinite(loss)) {
        throw NumericError("train_vdan: non-finite loss in epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(batch_index));
      }
      auto tensors = params.tensors();
      adam_step(tensors, adam);
      total += loss * static_cast<double>(len);
    }
    EpochLog entry;
    entry.epoch = epoch;
    entry.train_loss = total / static_cast<double>(pairs.size());
    entry.validation_loss =
        validation_pairs.empty() ? entry.train_loss : evaluate_loss(model, corpus, validation_pairs);
    if (!std::isfinite(entry.validation_loss)) {
      throw NumericError("train_vdan: non-finite validation loss in epoch " + std::to_string(epoch));
    }
    result.log.push_back(entry);
    if (entry.validation_loss < best) {
      best = entry.validation_loss;
      best_values = params.snapshot();
      result.best_epoch = epoch;
    }
    if (on_epoch) on_epoch(entry);
  }
  params.restore(best_values);
  params.clear_grad();
  return result;
}

Separation evaluate_separation(const Vdan& model, const ImageCorpus& corpus,
                               std::span<const TrainingPair> pairs) {
  NoGradScope no_grad;
  Separation s;
  double pos = 0.0, neg = 0.0;
  for (const auto& pair : pairs) {
    const auto& feature = corpus.images.at(pair.image).feature;
    Tensor phi = Tensor::vector(feature);
    const float cos =
        o::dot(model.encode_document(pair.document, phi).embedding, model.encode_image(phi)).item();
    if (pair.corresponding) {
      pos += cos;
      ++s.corresponding;
    } else {
      neg += cos;
      ++s.non_corresponding;
    }
  }
  if (s.corresponding) s.mean_corresponding = pos / static_cast<double>(s.corresponding);
  if (s.non_corresponding) s.mean_non_corresponding = neg / static_cast<double>(s.non_corresponding);
  return s;
}

}  // namespace sff::vdan
