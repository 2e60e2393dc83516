#include "sff/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <ostream>
#include <set>
#include <string>

#include "sff/errors.hpp"

namespace sff::metrics {

void GroundTruth::validate() const {
  if (video_length == 0) throw DataError("ground truth: video length is zero");
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& s = segments[i];
    const std::string where = "segment " + std::to_string(i) + " (" +
                              std::to_string(s.start) + "," + std::to_string(s.end) + ")";
    if (s.end < s.start) throw DataError("ground truth: reversed range in " + where);
    if (s.end >= video_length) {
      throw DataError("ground truth: " + where + " exceeds video length " +
                      std::to_string(video_length));
    }
    if (i > 0) {
      const auto& prev = segments[i - 1];
      if (s.start <= prev.end) {
        if (s.start >= prev.start) throw DataError("ground truth: overlapping ranges at " + where);
        throw DataError("ground truth: unsorted ranges at " + where);
      }
    }
  }
}

std::size_t GroundTruth::relevant_count() const {
  std::size_t n = 0;
  for (const auto& s : segments) n += s.length();
  return n;
}

bool GroundTruth::is_relevant(std::size_t frame) const {
  auto it = std::upper_bound(segments.begin(), segments.end(), frame,
                             [](std::size_t f, const Segment& s) { return f < s.start; });
  if (it == segments.begin()) return false;
  return std::prev(it)->contains(frame);
}

double f1_score(double precision, double recall) {
  if (precision + recall <= 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

namespace {
std::set<std::size_t> checked_unique(std::span<const std::size_t> selected,
                                     const GroundTruth& gt) {
  std::set<std::size_t> unique(selected.begin(), selected.end());
  if (!unique.empty() && *unique.rbegin() >= gt.video_length) {
    throw DataError("metrics: selected frame " + std::to_string(*unique.rbegin()) +
                    " is outside the video of length " + std::to_string(gt.video_length));
  }
  return unique;
}
}  // namespace

PrecisionRecall precision_recall_f1(std::span<const std::size_t> selected,
                                    const GroundTruth& gt) {
  const auto unique = checked_unique(selected, gt);
  std::size_t hits = 0;
  for (auto f : unique) hits += gt.is_relevant(f) ? 1 : 0;
  PrecisionRecall pr;
  const std::size_t relevant = gt.relevant_count();
  pr.precision = unique.empty() ? 0.0 : double(hits) / double(unique.size());
  pr.recall = relevant == 0 ? 0.0 : double(hits) / double(relevant);
  pr.f1 = f1_score(pr.precision, pr.recall);
  return pr;
}

double segment_coverage(std::span<const std::size_t> selected, const GroundTruth& gt,
                        std::size_t hit_number) {
  if (hit_number == 0) throw ConfigError("segment_coverage: hit number must be >= 1");
  if (gt.segments.empty()) throw DataError("segment_coverage: ground truth has no segments");
  const auto unique = checked_unique(selected, gt);
  std::size_t covered = 0;
  for (const auto& s : gt.segments) {
    auto lo = unique.lower_bound(s.start);
    auto hi = unique.upper_bound(s.end);
    if (static_cast<std::size_t>(std::distance(lo, hi)) >= hit_number) ++covered;
  }
  return double(covered) / double(gt.segments.size());
}

EvalReport evaluate(std::span<const std::size_t> selected, const GroundTruth& gt,
                    std::span<const std::size_t> hit_numbers) {
  gt.validate();
  EvalReport r;
  auto pr = precision_recall_f1(selected, gt);
  r.precision = pr.precision;
  r.recall = pr.recall;
  r.f1 = pr.f1;
  r.selected_count = std::set<std::size_t>(selected.begin(), selected.end()).size();
  r.relevant_count = gt.relevant_count();
  for (auto h : hit_numbers) r.coverage[h] = segment_coverage(selected, gt, h);
  return r;
}

namespace {
// Shortest text that reads back to the same double.
std::string number(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}
}  // namespace

void write_report(std::ostream& os, const EvalReport& r) {
  os << "precision = " << number(r.precision) << '\n';
  os << "recall = " << number(r.recall) << '\n';
  os << "f1 = " << number(r.f1) << '\n';
  os << "selected_count = " << r.selected_count << '\n';
  os << "relevant_count = " << r.relevant_count << '\n';
  for (const auto& [hit, cov] : r.coverage) os << "coverage@" << hit << " = " << number(cov) << '\n';
}

void write_coverage_csv(std::ostream& os, const EvalReport& r) {
  os << "hit_number,coverage\n";
  for (const auto& [hit, cov] : r.coverage) os << hit << ',' << number(cov) << '\n';
}

std::vector<std::size_t> uniform_selection(std::size_t video_length, std::size_t count) {
  std::vector<std::size_t> out;
  if (video_length == 0 || count == 0) return out;
  count = std::min(count, video_length);
  for (std::size_t i = 0; i < count; ++i) out.push_back(i * video_length / count);
  return out;
}

}  // namespace sff::metrics
