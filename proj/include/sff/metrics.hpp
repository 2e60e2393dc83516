#ifndef SFF_METRICS_HPP
#define SFF_METRICS_HPP

#include <cstddef>
#include <iosfwd>
#include <map>
#include <span>
#include <vector>

namespace sff::metrics {

// Inclusive frame range.
struct Segment {
  std::size_t start = 0;
  std::size_t end = 0;
  std::size_t length() const { return end - start + 1; }
  bool contains(std::size_t frame) const { return frame >= start && frame <= end; }
};

struct GroundTruth {
  std::vector<Segment> segments;  // sorted, disjoint, inside [0, video_length)
  std::size_t video_length = 0;

  // Throws DataError on reversed, overlapping, unsorted or out-of-range
  // segments.
  void validate() const;
  std::size_t relevant_count() const;
  bool is_relevant(std::size_t frame) const;
};

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Duplicate indices count once. Empty selection gives precision 0; F1 is
// 0 whenever precision + recall is 0.
PrecisionRecall precision_recall_f1(std::span<const std::size_t> selected,
                                    const GroundTruth& gt);
double f1_score(double precision, double recall);

// Fraction of segments holding at least `hit_number` selected frames.
double segment_coverage(std::span<const std::size_t> selected, const GroundTruth& gt,
                        std::size_t hit_number);

struct EvalReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::map<std::size_t, double> coverage;  // hit number -> coverage
  std::size_t selected_count = 0;
  std::size_t relevant_count = 0;
};

EvalReport evaluate(std::span<const std::size_t> selected, const GroundTruth& gt,
                    std::span<const std::size_t> hit_numbers);

// "key = value" lines.
void write_report(std::ostream& os, const EvalReport& report);
// "hit_number,coverage" header plus one row per hit number.
void write_coverage_csv(std::ostream& os, const EvalReport& report);

// Evenly spaced selection of `count` frames over [0, video_length),
// starting at frame 0.
std::vector<std::size_t> uniform_selection(std::size_t video_length, std::size_t count);

}  // namespace sff::metrics

#endif  // SFF_METRICS_HPP
