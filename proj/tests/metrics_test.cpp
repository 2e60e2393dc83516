#include <random>
#include <set>
#include <sstream>

#include "doctest.h"
#include "sff/errors.hpp"
#include "sff/metrics.hpp"
#include "metrics_oracle.hpp"

using namespace sff;
using metrics::GroundTruth;
using metrics::Segment;

TEST_CASE("precision recall and f1 closed forms") {
  GroundTruth gt{{{2, 4}, {8, 9}}, 12};
  const std::vector<std::size_t> exact{2, 3, 4, 8, 9};
  auto pr = metrics::precision_recall_f1(exact, gt);
  CHECK(pr.precision == 1.0);
  CHECK(pr.recall == 1.0);
  CHECK(pr.f1 == 1.0);

  const std::vector<std::size_t> miss{0, 1, 5};
  pr = metrics::precision_recall_f1(miss, gt);
  CHECK(pr.precision == 0.0);
  CHECK(pr.recall == 0.0);
  CHECK(pr.f1 == 0.0);

  pr = metrics::precision_recall_f1(std::vector<std::size_t>{}, gt);
  CHECK(pr.precision == 0.0);
  CHECK(pr.f1 == 0.0);

  // Duplicates count once.
  pr = metrics::precision_recall_f1(std::vector<std::size_t>{2, 2, 0}, gt);
  CHECK(pr.precision == doctest::Approx(0.5));
  CHECK(pr.recall == doctest::Approx(0.2));

  CHECK_THROWS_AS(metrics::precision_recall_f1(std::vector<std::size_t>{12}, gt), DataError);
}

TEST_CASE("f1 from a reported precision and recall pair") {
  CHECK(metrics::f1_score(0.52, 0.95) == doctest::Approx(0.67).epsilon(0.005 / 0.67));
  CHECK(metrics::f1_score(0.0, 0.0) == 0.0);
}

TEST_CASE("segment coverage examples") {
  GroundTruth gt{{{0, 9}, {20, 29}}, 30};
  std::vector<std::size_t> first(10);
  for (std::size_t i = 0; i < 10; ++i) first[i] = i;
  CHECK(metrics::segment_coverage(first, gt, 3) == 0.5);
  CHECK(metrics::segment_coverage(std::vector<std::size_t>{5, 25}, gt, 1) == 1.0);
  CHECK(metrics::segment_coverage(std::vector<std::size_t>{}, gt, 1) == 0.0);
  // Inclusive threshold: exactly hit_number frames counts.
  CHECK(metrics::segment_coverage(std::vector<std::size_t>{0, 1, 2}, gt, 3) == 0.5);
  CHECK_THROWS_AS(metrics::segment_coverage(first, gt, 0), ConfigError);
  CHECK_THROWS_AS(metrics::segment_coverage(first, GroundTruth{{}, 30}, 1), DataError);
}

TEST_CASE("ground truth validation") {
  CHECK_THROWS_AS((GroundTruth{{{20, 10}}, 30}.validate()), DataError);
  CHECK_THROWS_AS((GroundTruth{{{0, 10}, {5, 15}}, 30}.validate()), DataError);
  CHECK_THROWS_AS((GroundTruth{{{10, 12}, {0, 3}}, 30}.validate()), DataError);
  CHECK_THROWS_AS((GroundTruth{{{25, 30}}, 30}.validate()), DataError);
  CHECK_NOTHROW((GroundTruth{{{0, 3}, {4, 29}}, 30}.validate()));
}

TEST_CASE("metrics agree with the brute-force oracle") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto inst = metrics_oracle::random_instance(rng);
    CAPTURE(trial);
    const auto pr = metrics::precision_recall_f1(inst.selected, inst.gt);
    const auto ref = metrics_oracle::precision_recall_f1(inst.selected, inst.gt);
    CHECK(pr.precision == doctest::Approx(ref.precision).epsilon(1e-12));
    CHECK(pr.recall == doctest::Approx(ref.recall).epsilon(1e-12));
    CHECK(pr.f1 == doctest::Approx(ref.f1).epsilon(1e-12));
    for (std::size_t h = 1; h <= 6; ++h)
      CHECK(metrics::segment_coverage(inst.selected, inst.gt, h) ==
            doctest::Approx(metrics_oracle::coverage(inst.selected, inst.gt, h)).epsilon(1e-12));
  }
}

TEST_CASE("coverage is non-increasing in hit number and monotone in the selection") {
  std::mt19937_64 rng(100);
  for (int trial = 0; trial < 300; ++trial) {
    auto inst = metrics_oracle::random_instance(rng);
    double prev = 1.0;
    for (std::size_t h = 1; h <= 10; ++h) {
      const double c = metrics::segment_coverage(inst.selected, inst.gt, h);
      CHECK(c <= prev);
      CHECK(c >= 0.0);
      prev = c;
    }
    const double recall = metrics::precision_recall_f1(inst.selected, inst.gt).recall;
    const double cov = metrics::segment_coverage(inst.selected, inst.gt, 2);
    auto grown = inst.selected;
    grown.push_back(rng() % inst.gt.video_length);
    CHECK(metrics::precision_recall_f1(grown, inst.gt).recall >= recall);
    CHECK(metrics::segment_coverage(grown, inst.gt, 2) >= cov);
  }
}

TEST_CASE("report and coverage table formats") {
  GroundTruth gt{{{0, 9}, {20, 29}}, 30};
  std::vector<std::size_t> sel{0, 1, 2, 3, 20};
  const std::size_t hits[] = {1, 3, 5};
  auto report = metrics::evaluate(sel, gt, hits);
  CHECK(report.selected_count == 5);
  CHECK(report.relevant_count == 20);
  CHECK(report.coverage.size() == 3);
  std::ostringstream csv;
  metrics::write_coverage_csv(csv, report);
  CHECK(csv.str() == "hit_number,coverage\n1,1\n3,0.5\n5,0\n");
  std::ostringstream text;
  metrics::write_report(text, report);
  CHECK(text.str().find("f1 = ") != std::string::npos);
  CHECK(text.str().find("coverage@3 = 0.5") != std::string::npos);
}

TEST_CASE("uniform selection spacing") {
  CHECK(metrics::uniform_selection(100, 4) == std::vector<std::size_t>{0, 25, 50, 75});
  CHECK(metrics::uniform_selection(5, 5) == std::vector<std::size_t>{0, 1, 2, 3, 4});
  CHECK(metrics::uniform_selection(1, 1) == std::vector<std::size_t>{0});
}
