#ifndef SFF_TESTS_METRICS_ORACLE_HPP
#define SFF_TESTS_METRICS_ORACLE_HPP

// Frame-by-frame brute force versions of the selection metrics.

#include <random>
#include <vector>

#include "sff/metrics.hpp"

namespace metrics_oracle {

struct Instance {
  sff::metrics::GroundTruth gt;
  std::vector<std::size_t> selected;
};

// Up to 50 frames, 1 to 5 disjoint segments, a random (possibly repeated)
// selection.
inline Instance random_instance(std::mt19937_64& rng) {
  Instance inst;
  const std::size_t len = 1 + rng() % 50;
  inst.gt.video_length = len;
  const std::size_t wanted = 1 + rng() % 5;
  std::vector<bool> used(len, false);
  std::size_t pos = 0;
  for (std::size_t s = 0; s < wanted && pos < len; ++s) {
    const std::size_t start = pos + rng() % (len - pos);
    const std::size_t end = start + rng() % (len - start);
    inst.gt.segments.push_back({start, end});
    pos = end + 1;
  }
  const std::size_t count = rng() % (len + 1);
  for (std::size_t i = 0; i < count; ++i) inst.selected.push_back(rng() % len);
  return inst;
}

inline sff::metrics::PrecisionRecall precision_recall_f1(const std::vector<std::size_t>& selected,
                                                         const sff::metrics::GroundTruth& gt) {
  std::vector<bool> picked(gt.video_length, false), relevant(gt.video_length, false);
  for (auto f : selected) picked[f] = true;
  for (const auto& s : gt.segments)
    for (std::size_t f = s.start; f <= s.end; ++f) relevant[f] = true;
  double tp = 0, npicked = 0, nrel = 0;
  for (std::size_t f = 0; f < gt.video_length; ++f) {
    tp += picked[f] && relevant[f];
    npicked += picked[f];
    nrel += relevant[f];
  }
  sff::metrics::PrecisionRecall r;
  r.precision = npicked > 0 ? tp / npicked : 0.0;
  r.recall = nrel > 0 ? tp / nrel : 0.0;
  r.f1 = r.precision + r.recall > 0 ? 2 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  return r;
}

inline double coverage(const std::vector<std::size_t>& selected, const sff::metrics::GroundTruth& gt,
                       std::size_t hit) {
  std::vector<bool> picked(gt.video_length, false);
  for (auto f : selected) picked[f] = true;
  double covered = 0;
  for (const auto& s : gt.segments) {
    std::size_t hits = 0;
    for (std::size_t f = s.start; f <= s.end; ++f) hits += picked[f];
    covered += hits >= hit;
  }
  return covered / double(gt.segments.size());
}

}  // namespace metrics_oracle

#endif  // SFF_TESTS_METRICS_ORACLE_HPP
