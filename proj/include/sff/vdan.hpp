#ifndef SFF_VDAN_HPP
#define SFF_VDAN_HPP

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "sff/adam.hpp"
#include "sff/nn.hpp"
#include "sff/params.hpp"
#include "sff/random.hpp"
#include "sff/text.hpp"

// Visually-guided document attention network: a hierarchical bidirectional
// GRU document encoder with word- and sentence-level attention whose
// document-level recurrence is seeded with the image feature, plus an image
// projection head. Both branches end in an l2 normalisation so embeddings
// live on the unit sphere.
namespace sff::vdan {

struct VdanConfig {
  std::size_t word_dim = 300;
  std::size_t sentence_hidden = 1024;  // both directions together
  std::size_t document_hidden = 2048;  // both directions together; equals feature_dim
  std::size_t feature_dim = 2048;
  std::size_t embedding_dim = 128;
  std::size_t head_hidden = 512;
  float margin = 0.0f;
  bool word_attention = true;

  // Desk-scale dimensions used by tests and the `toy` CLI profile.
  static VdanConfig toy();
  // Throws ConfigError when dimensions are inconsistent.
  void validate() const;
};

struct SentenceEncoding {
  Tensor vector;  // [sentence_hidden]
  Tensor alphas;  // word weights
};

struct DocumentEncoding {
  Tensor embedding;  // [embedding_dim], unit norm
  Tensor sentence_alphas;
  std::vector<Tensor> word_alphas;
};

class Vdan {
 public:
  Vdan(VdanConfig config, std::shared_ptr<const WordVectorTable> words, Rng& init_rng);

  const VdanConfig& config() const { return config_; }
  const WordVectorTable& words() const { return *words_; }
  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }

  SentenceEncoding encode_sentence(const Sentence& tokens) const;
  DocumentEncoding encode_document(const Document& doc, const Tensor& image_feature) const;
  Tensor encode_image(const Tensor& image_feature) const;

  // Convenience overloads taking raw feature values.
  DocumentEncoding encode_document(const Document& doc,
                                   std::span<const float> image_feature) const;
  Tensor encode_image(std::span<const float> image_feature) const;

  // Structured views of the parameters, for inspection and oracle tests.
  const nn::BiGru& sentence_rnn() const { return sentence_rnn_; }
  const nn::BiGru& document_rnn() const { return document_rnn_; }
  const Tensor& word_projection() const { return word_projection_; }
  const Tensor& word_context() const { return word_context_; }
  const Tensor& sentence_projection() const { return sentence_projection_; }
  const Tensor& sentence_context() const { return sentence_context_; }
  const nn::Mlp& document_head() const { return document_head_; }
  const nn::Mlp& image_head() const { return image_head_; }

 private:
  void check_feature(const Tensor& feature) const;

  VdanConfig config_;
  std::shared_ptr<const WordVectorTable> words_;
  nn::BiGru sentence_rnn_;
  Tensor word_projection_, word_context_;
  nn::BiGru document_rnn_;
  Tensor sentence_projection_, sentence_context_;
  nn::Mlp document_head_;
  nn::Mlp image_head_;
  ParameterSet params_;
};

// 1 - cos for corresponding pairs, max(0, cos - margin) otherwise.
Tensor cosine_embedding_loss(const Tensor& e_doc, const Tensor& e_img,
                             bool corresponding, float margin);

struct CaptionedImage {
  std::vector<float> feature;
  std::vector<Sentence> captions;
  // Optional content group (e.g. a class label); -1 when unknown. When
  // every image has a group, negatives are drawn from other groups.
  int group = -1;
};

struct ImageCorpus {
  std::vector<CaptionedImage> images;
  void validate(std::size_t feature_dim) const;
};

struct TrainingPair {
  Document document;
  std::size_t image = 0;  // index into the corpus
  bool corresponding = false;
};

// For every image in `subset`, one positive document (its captions plus
// those of another random image) and one negative document (captions of
// two other images), each with freshly shuffled sentence order.
std::vector<TrainingPair> build_training_pairs(const ImageCorpus& corpus,
                                               std::span<const std::size_t> subset,
                                               Rng& rng);
std::vector<TrainingPair> build_training_pairs(const ImageCorpus& corpus, Rng& rng);

struct TrainOptions {
  std::size_t epochs = 30;
  std::size_t batch_size = 64;
  float learning_rate = 1e-5f;
  double validation_fraction = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double validation_loss = 0.0;
};

struct TrainResult {
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
};

// Mean loss over `pairs`, gradients accumulated into the parameters.
double accumulate_batch_gradients(const Vdan& model, const ImageCorpus& corpus,
                                  std::span<const TrainingPair> pairs);
// One optimizer step on one batch; returns the batch mean loss.
double train_step(Vdan& model, const ImageCorpus& corpus,
                  std::span<const TrainingPair> batch, AdamState& adam);
double evaluate_loss(const Vdan& model, const ImageCorpus& corpus,
                     std::span<const TrainingPair> pairs);

// Trains in place and leaves the parameters of the epoch with the lowest
// validation loss in `model`.
TrainResult train_vdan(Vdan& model, const ImageCorpus& corpus, const TrainOptions& options,
                       const std::function<void(const EpochLog&)>& on_epoch = {});

struct Separation {
  double mean_corresponding = 0.0;
  double mean_non_corresponding = 0.0;
  std::size_t corresponding = 0;
  std::size_t non_corresponding = 0;
  double gap() const { return mean_corresponding - mean_non_corresponding; }
};

Separation evaluate_separation(const Vdan& model, const ImageCorpus& corpus,
                               std::span<const TrainingPair> pairs);

}  // namespace sff::vdan

#endif  // SFF_VDAN_HPP
