#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <set>

#include "reference_oracle.hpp"
#include "sff/errors.hpp"
#include "sff/gradcheck.hpp"
#include "sff/nn.hpp"
#include "sff/ops.hpp"
#include "sff/vdan.hpp"
#include "test_support.hpp"

using namespace sff;
namespace o = sff::ops;

namespace {

std::shared_ptr<WordVectorTable> random_words(std::size_t dim, std::size_t count, Rng& rng) {
  auto table = std::make_shared<WordVectorTable>(dim);
  for (std::size_t i = 0; i < count; ++i) {
    auto v = uniform_tensor({dim}, 1.0f, rng);
    table->add("t" + std::to_string(i), v.data());
  }
  return table;
}

std::vector<float> random_feature(std::size_t dim, Rng& rng) {
  return uniform_tensor({dim}, 1.0f, rng).values();
}

vdan::VdanConfig tiny_config() {
  vdan::VdanConfig c;
  c.word_dim = 4;
  c.sentence_hidden = 4;
  c.document_hidden = 6;
  c.feature_dim = 6;
  c.embedding_dim = 3;
  c.head_hidden = 5;
  return c;
}

double norm(std::span<const float> v) {
  double s = 0.0;
  for (float x : v) s += double(x) * x;
  return std::sqrt(s);
}

double sum(std::span<const float> v) {
  double s = 0.0;
  for (float x : v) s += x;
  return s;
}

}  // namespace

TEST_CASE("gru cell at zero weights halves the previous state") {
  auto w = nn::GruWeights::zeros(3, 4);
  Rng rng(5);
  Tensor x = uniform_tensor({3}, 1.0f, rng);
  Tensor h = uniform_tensor({4}, 1.0f, rng);
  Tensor next = nn::gru_cell(x, h, w);
  for (std::size_t i = 0; i < 4; ++i) CHECK(next.data()[i] == doctest::Approx(0.5 * h.data()[i]).epsilon(1e-7));
}

TEST_CASE("gru cell keeps the origin fixed when biases are zero") {
  Rng rng(6);
  auto w = nn::GruWeights::init(3, 4, rng);
  for (Tensor* b : {&w.b_z, &w.b_r, &w.b_n, &w.c_n})
    for (auto& v : b->data()) v = 0.0f;
  Tensor next = nn::gru_cell(Tensor::zeros({3}), Tensor::zeros({4}), w);
  for (float v : next.data()) CHECK(v == 0.0f);
}

TEST_CASE("gru cell matches the scalar oracle") {
  Rng rng(7);
  auto w = nn::GruWeights::init(5, 4, rng);
  Tensor x = uniform_tensor({5}, 1.0f, rng);
  Tensor h = uniform_tensor({4}, 1.0f, rng);
  Tensor next = nn::gru_cell(x, h, w);
  CHECK(oracle::max_abs_diff(oracle::gru_cell(oracle::to_vec(x), oracle::to_vec(h), w), next.data()) < 1e-6);
}

TEST_CASE("gru cell rejects mismatched dimensions") {
  Rng rng(8);
  auto w = nn::GruWeights::init(5, 4, rng);
  CHECK_THROWS_AS(nn::gru_cell(Tensor::zeros({3}), Tensor::zeros({4}), w), ShapeError);
  CHECK_THROWS_AS(nn::gru_cell(Tensor::zeros({5}), Tensor::zeros({2}), w), ShapeError);
}

TEST_CASE("attention pooling closed forms") {
  SUBCASE("singleton") {
    Rng rng(9);
    Tensor h = uniform_tensor({3}, 1.0f, rng);
    auto p = nn::attention_pool(std::vector<Tensor>{h}, uniform_tensor({3, 3}, 1.0f, rng),
                                uniform_tensor({3}, 1.0f, rng));
    CHECK(p.alphas.item() == 1.0f);
    CHECK(test_support::bit_equal(p.pooled.data(), h.data()));
  }
  SUBCASE("two identical vectors") {
    Rng rng(10);
    Tensor h = uniform_tensor({3}, 1.0f, rng);
    auto p = nn::attention_pool(std::vector<Tensor>{h, h.clone()}, uniform_tensor({3, 3}, 1.0f, rng),
                                uniform_tensor({3}, 1.0f, rng));
    CHECK(p.alphas.data()[0] == doctest::Approx(0.5));
    CHECK(p.alphas.data()[1] == doctest::Approx(0.5));
    for (std::size_t i = 0; i < 3; ++i) CHECK(p.pooled.data()[i] == doctest::Approx(h.data()[i]).epsilon(1e-6));
  }
  SUBCASE("scores 0 and ln 2") {
    // W = I and c = e_0 give score tanh(h_0); pick h_0 = atanh(ln 2).
    Tensor w = Tensor::from({2, 2}, {1, 0, 0, 1});
    Tensor c = Tensor::vector({1, 0});
    const float a = static_cast<float>(std::atanh(std::log(2.0)));
    auto p = nn::attention_pool(std::vector<Tensor>{Tensor::vector({0, 1}), Tensor::vector({a, 0})}, w, c);
    CHECK(p.alphas.data()[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
    CHECK(p.alphas.data()[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-6));
  }
  SUBCASE("empty sequence") {
    CHECK_THROWS_AS(nn::attention_pool(std::vector<Tensor>{}, Tensor::zeros({2, 2}), Tensor::zeros({2})),
                    ShapeError);
  }
}

TEST_CASE("sentence and document encoders match the scalar oracle") {
  Rng rng(11);
  auto words = random_words(16, 20, rng);
  Rng init(12);
  vdan::Vdan model(vdan::VdanConfig::toy(), words, init);

  const Sentence three{3, 7, 11};
  auto s = model.encode_sentence(three);
  const auto ref = oracle::encode_sentence(model, three);
  CHECK(oracle::max_abs_diff(ref.pooled, s.vector.data()) < 1e-6);
  CHECK(oracle::max_abs_diff(ref.alphas, s.alphas.data()) < 1e-6);

  const Document doc{{three, {1, 2}, {19, 0, 5, 5}}};
  const auto feature = random_feature(64, rng);
  auto e = model.encode_document(doc, feature);
  CHECK(oracle::max_abs_diff(oracle::encode_document(model, doc, oracle::to_vec(feature)),
                             e.embedding.data()) < 1e-6);

  auto img = model.encode_image(feature);
  CHECK(oracle::max_abs_diff(oracle::encode_image(model, oracle::to_vec(feature)), img.data()) < 1e-6);
}

TEST_CASE("sentence encoder shapes and singletons") {
  Rng rng(13);
  auto words = random_words(16, 10, rng);
  Rng init(14);
  vdan::Vdan model(vdan::VdanConfig::toy(), words, init);
  for (std::size_t len : {1u, 2u, 7u}) {
    Sentence s(len, 4);
    auto e = model.encode_sentence(s);
    CHECK(e.vector.size() == 32);
    CHECK(e.alphas.size() == len);
    CHECK(sum(e.alphas.data()) == doctest::Approx(1.0).epsilon(1e-6));
  }
  // A single token's encoding is its bidirectional hidden state.
  auto e = model.encode_sentence({6});
  const oracle::Vec h0(16, 0.0);
  const auto hs = oracle::bigru({oracle::to_vec(words->vector(6))}, model.sentence_rnn(), h0, h0);
  CHECK(e.alphas.item() == 1.0f);
  CHECK(oracle::max_abs_diff(hs[0], e.vector.data()) < 1e-6);
  // Unknown tokens read the zero vector instead of failing.
  CHECK_NOTHROW(model.encode_sentence({WordVectorTable::kUnknown, 2}));
  CHECK_THROWS_AS(model.encode_sentence({}), DataError);
}

TEST_CASE("document and image embeddings are unit norm") {
  Rng rng(15);
  auto words = random_words(16, 12, rng);
  Rng init(16);
  vdan::Vdan model(vdan::VdanConfig::toy(), words, init);
  for (int trial = 0; trial < 5; ++trial) {
    Document doc;
    const std::size_t n = 1 + rng() % 4;
    for (std::size_t i = 0; i < n; ++i) doc.sentences.push_back({rng() % 12, rng() % 12});
    auto feature = random_feature(64, rng);
    auto e = model.encode_document(doc, feature);
    CHECK(norm(e.embedding.data()) == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(e.sentence_alphas.size() == n);
    CHECK(sum(e.sentence_alphas.data()) == doctest::Approx(1.0).epsilon(1e-6));
    for (float a : e.sentence_alphas.data()) CHECK(a >= 0.0f);
    CHECK(norm(model.encode_image(feature).data()) == doctest::Approx(1.0).epsilon(1e-5));
  }
  Document one{{{1, 2, 3}}};
  CHECK(model.encode_document(one, random_feature(64, rng)).sentence_alphas.item() == 1.0f);
}

TEST_CASE("image features steer the document embedding") {
  Rng rng(17);
  auto words = random_words(16, 12, rng);
  Rng init(18);
  vdan::Vdan model(vdan::VdanConfig::toy(), words, init);
  Document doc{{{1, 2, 3}, {4, 5}}};
  auto a = model.encode_document(doc, random_feature(64, rng)).embedding;
  auto b = model.encode_document(doc, random_feature(64, rng)).embedding;
  CHECK_FALSE(test_support::bit_equal(a.data(), b.data()));
}

TEST_CASE("image encoder contracts") {
  Rng rng(19);
  auto words = random_words(16, 4, rng);
  Rng init(20);
  vdan::Vdan model(vdan::VdanConfig::toy(), words, init);
  auto f = random_feature(64, rng);
  auto doubled = f;
  for (auto& v : doubled) v *= 2.0f;
  CHECK(norm(model.encode_image(doubled).data()) == doctest::Approx(1.0).epsilon(1e-5));
  CHECK_FALSE(test_support::bit_equal(model.image_head()(Tensor::vector(f)).data(),
                                      model.image_head()(Tensor::vector(doubled)).data()));
  CHECK_THROWS_AS(model.encode_image(std::vector<float>(64, 0.0f)), DataError);
  CHECK_THROWS_AS(model.encode_image(std::vector<float>(63, 1.0f)), ShapeError);
  CHECK_THROWS_AS(model.encode_document(Document{{{1}}}, std::vector<float>(10, 1.0f)), ShapeError);
}

TEST_CASE("encoding is deterministic") {
  Rng rng(21);
  auto words = random_words(16, 8, rng);
  Rng init_a(22), init_b(22);
  vdan::Vdan a(vdan::VdanConfig::toy(), words, init_a);
  vdan::Vdan b(vdan::VdanConfig::toy(), words, init_b);
  Document doc{{{1, 2}, {3, 4, 5}}};
  auto f = random_feature(64, rng);
  CHECK(test_support::bit_equal(a.encode_document(doc, f).embedding.data(),
                                b.encode_document(doc, f).embedding.data()));
  CHECK(test_support::bit_equal(a.encode_document(doc, f).embedding.data(),
                                a.encode_document(doc, f).embedding.data()));
}

TEST_CASE("word attention ablation only changes sentence pooling") {
  Rng rng(23);
  auto words = random_words(16, 8, rng);
  auto config = vdan::VdanConfig::toy();
  config.word_attention = false;
  Rng init(24);
  vdan::Vdan model(config, words, init);
  Document doc{{{1, 2, 3}, {4, 5}, {6}}};
  auto f = random_feature(64, rng);
  auto e = model.encode_document(doc, f);
  CHECK(norm(e.embedding.data()) == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(sum(e.sentence_alphas.data()) == doctest::Approx(1.0).epsilon(1e-6));
  for (float a : e.word_alphas[0].data()) CHECK(a == doctest::Approx(1.0 / 3.0));
  CHECK(oracle::max_abs_diff(oracle::encode_document(model, doc, oracle::to_vec(f)), e.embedding.data()) < 1e-6);
}

TEST_CASE("cosine embedding loss cases") {
  Tensor a = Tensor::vector({0.6f, 0.8f});
  CHECK(vdan::cosine_embedding_loss(a, a, true, 0.0f).item() == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(vdan::cosine_embedding_loss(Tensor::vector({1, 0}), Tensor::vector({0, 1}), false, 0.0f).item() == 0.0f);
  // cos = 0.3 between unit vectors.
  const float s = std::sqrt(1.0f - 0.09f);
  CHECK(vdan::cosine_embedding_loss(Tensor::vector({1, 0}), Tensor::vector({0.3f, s}), false, 0.0f).item() ==
        doctest::Approx(0.3).epsilon(1e-6));
  CHECK(vdan::cosine_embedding_loss(Tensor::vector({1, 0}), Tensor::vector({0.3f, s}), false, 0.5f).item() == 0.0f);
  CHECK(vdan::cosine_embedding_loss(Tensor::vector({1, 0}), Tensor::vector({-1, 0}), true, 0.0f).item() ==
        doctest::Approx(2.0));
}

TEST_CASE("training pair construction") {
  Rng rng(25);
  vdan::ImageCorpus corpus;
  std::size_t next = 0;
  for (int i = 0; i < 6; ++i) {
    vdan::CaptionedImage img;
    img.feature = random_feature(4, rng);
    for (int c = 0; c < 5; ++c) img.captions.push_back({next++});
    corpus.images.push_back(img);
  }
  Rng pair_rng(26);
  auto pairs = vdan::build_training_pairs(corpus, pair_rng);
  REQUIRE(pairs.size() == 12);
  std::size_t positives = 0;
  for (const auto& p : pairs) {
    CHECK(p.document.sentences.size() == 10);
    std::set<std::size_t> own;
    for (const auto& s : corpus.images[p.image].captions) own.insert(s[0]);
    std::size_t shared = 0;
    for (const auto& s : p.document.sentences) shared += own.count(s[0]);
    if (p.corresponding) {
      ++positives;
      CHECK(shared == 5);
    } else {
      CHECK(shared == 0);
    }
  }
  CHECK(positives == 6);

  // Rebuilding with the same partner keeps the sentence multiset but
  // reshuffles the order.
  const std::size_t subset[] = {0};
  Rng shuffle_rng(27);
  std::map<std::vector<Sentence>, std::set<std::vector<Sentence>>> orders;
  for (int round = 0; round < 40; ++round) {
    for (const auto& p : vdan::build_training_pairs(corpus, subset, shuffle_rng)) {
      if (!p.corresponding) continue;
      auto key = p.document.sentences;
      std::sort(key.begin(), key.end());
      orders[key].insert(p.document.sentences);
    }
  }
  bool reordered = false;
  for (const auto& [multiset, seen] : orders) reordered |= seen.size() > 1;
  CHECK(reordered);

  vdan::ImageCorpus small;
  small.images.assign(2, corpus.images[0]);
  CHECK_THROWS_AS(vdan::build_training_pairs(small, rng), DataError);
}

TEST_CASE("negatives come from other groups when groups are known") {
  Rng rng(28);
  vdan::ImageCorpus corpus;
  std::size_t next = 0;
  for (int i = 0; i < 9; ++i) {
    vdan::CaptionedImage img;
    img.feature = random_feature(4, rng);
    img.group = i % 3;
    img.captions.push_back({next++});
    corpus.images.push_back(img);
  }
  for (int round = 0; round < 10; ++round) {
    for (const auto& p : vdan::build_training_pairs(corpus, rng)) {
      if (p.corresponding) continue;
      for (const auto& s : p.document.sentences)
        CHECK(corpus.images[s[0]].group != corpus.images[p.image].group);
    }
  }
}

TEST_CASE("full forward and loss pass the gradient check") {
  Rng rng(29);
  auto words = random_words(4, 6, rng);
  Rng init(30);
  vdan::Vdan model(tiny_config(), words, init);
  const Document doc{{{0, 1, 2}, {3, 4}, {5}}};
  const auto f1 = random_feature(6, rng);
  const auto f2 = random_feature(6, rng);
  // A margin of -1 keeps the hinge active, away from its kink.
  auto fn = [&] {
    Tensor pos = vdan::cosine_embedding_loss(model.encode_document(doc, f1).embedding,
                                             model.encode_image(f1), true, 0.0f);
    Tensor neg = vdan::cosine_embedding_loss(model.encode_document(doc, f2).embedding,
                                             model.encode_image(f2), false, -1.0f);
    return o::add(pos, neg);
  };
  auto params = model.parameters().tensors();
  CHECK(grad_check(fn, params, test_support::kPrimitiveCheck) < 1e-3);
}

TEST_CASE("overfitting a single pair") {
  Rng rng(31);
  auto words = random_words(16, 10, rng);
  vdan::ImageCorpus corpus;
  corpus.images.push_back({random_feature(64, rng), {{1, 2, 3}, {4, 5}}, -1});
  const Document doc{{{1, 2, 3}, {4, 5}, {6, 7}}};

  for (bool corresponding : {true, false}) {
    CAPTURE(corresponding);
    Rng init(32);
    vdan::Vdan model(vdan::VdanConfig::toy(), words, init);
    // Start the negative case from an aligned pair so there is work to do.
    const std::vector<vdan::TrainingPair> batch{{doc, 0, corresponding}};
    AdamState adam(AdamConfig{1e-3f});
    if (!corresponding) {
      const std::vector<vdan::TrainingPair> pull{{doc, 0, true}};
      for (int i = 0; i < 100; ++i) vdan::train_step(model, corpus, pull, adam);
      adam = AdamState(AdamConfig{1e-3f});
    }
    for (int i = 0; i < 500; ++i) vdan::train_step(model, corpus, batch, adam);
    NoGradScope no_grad;
    const double cos = o::dot(model.encode_document(doc, corpus.images[0].feature).embedding,
                              model.encode_image(corpus.images[0].feature)).item();
    if (corresponding) CHECK(cos > 0.9);
    else CHECK(cos <= 0.05);
  }
}

TEST_CASE("configuration validation") {
  auto c = vdan::VdanConfig::toy();
  c.document_hidden = 32;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = vdan::VdanConfig::toy();
  c.sentence_hidden = 31;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  Rng rng(33);
  auto words = random_words(8, 3, rng);
  CHECK_THROWS_AS(vdan::Vdan(vdan::VdanConfig::toy(), words, rng), ConfigError);
}
