#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "diar/segmentation.hpp"
#include "oracles.hpp"

using namespace diar;

namespace {

TimedLabeling speech(const std::string& uri,
                     std::initializer_list<Interval> intervals) {
  TimedLabeling lab;
  lab.uri = uri;
  for (const Interval& iv : intervals)
    lab.turns.push_back({iv.begin, iv.duration(), "speech"});
  return lab;
}

ChangeScoreTrack track_covering(double begin, double end, double step = 0.01) {
  ChangeScoreTrack t;
  t.step = step;
  t.offset = begin;
  const auto n = static_cast<std::size_t>(std::lround((end - begin) / step)) + 1;
  t.scores.assign(n, 0.0);
  return t;
}

void set_peak(ChangeScoreTrack& t, double time, double value) {
  const auto i = static_cast<std::size_t>(std::lround((time - t.offset) / t.step));
  t.scores.at(i) = value;
}

double segments_total(const SegmentList& list) {
  double total = 0.0;
  for (const Segment& s : list.segments) total += s.duration;
  for (const Interval& iv : list.short_leftovers) total += iv.duration();
  return total;
}

}  // namespace

TEST_CASE("speech_regions merges adjacency and keeps gaps", "[segmentation]") {
  SECTION("adjacent turns become one region") {
    const SegmentList out = speech_regions(speech("u", {{0.0, 5.0}, {5.0, 7.0}}));
    REQUIRE(out.segments.size() == 1);
    CHECK(out.segments[0].onset == 0.0);
    CHECK(out.segments[0].duration == 7.0);
  }
  SECTION("gaps are preserved") {
    const SegmentList out = speech_regions(speech("u", {{0.0, 2.0}, {3.0, 4.0}}));
    REQUIRE(out.segments.size() == 2);
    CHECK(out.segments[1].onset == 3.0);
  }
  SECTION("non-speech labels are excluded") {
    TimedLabeling lab;
    lab.uri = "u";
    lab.turns = {{0.0, 2.0, "speech"}, {2.0, 1.0, "non-speech"}, {3.0, 2.0, "speech"}};
    const SegmentList out = speech_regions(lab);
    REQUIRE(out.segments.size() == 2);
  }
  SECTION("empty SAD is valid and empty") {
    const SegmentList out = speech_regions(speech("u", {}));
    CHECK(out.segments.empty());
  }
  SECTION("matches the boolean-timeline oracle on random interval sets") {
    oracles::Rng rng(42);
    for (int round = 0; round < 100; ++round) {
      std::vector<Interval> ivs;
      const int n = 1 + rng.uniform_int(12);
      for (int i = 0; i < n; ++i) {
        // Snap to the millisecond grid so the rasterization oracle is exact.
        const double b = std::round(rng.uniform(0.0, 30.0) * 1000.0) / 1000.0;
        const double d = std::round(rng.uniform(0.05, 6.0) * 1000.0) / 1000.0;
        ivs.push_back({b, b + d});
      }
      TimedLabeling lab;
      lab.uri = "u";
      for (const Interval& iv : ivs)
        lab.turns.push_back({iv.begin, iv.duration(), "speech"});
      const SegmentList got = speech_regions(lab);
      const auto want = oracles::raster_regions(ivs);
      REQUIRE(got.segments.size() == want.size());
      for (std::size_t i = 0; i < want.size(); ++i) {
        REQUIRE_THAT(got.segments[i].onset,
                     Catch::Matchers::WithinAbs(want[i].begin, 5e-4));
        REQUIRE_THAT(got.segments[i].end(),
                     Catch::Matchers::WithinAbs(want[i].end, 5e-4));
      }
    }
  }
}

TEST_CASE("cut_at_changes splits at threshold-clearing peaks", "[segmentation]") {
  const SegmentList regions = speech_regions(speech("u", {{0.0, 4.0}}));

  SECTION("single clear peak cuts the region") {
    ChangeScoreTrack t = track_covering(0.0, 4.0);
    set_peak(t, 2.0, 0.9);
    const SegmentList out = cut_at_changes(regions, t, 0.5, 0.5);
    REQUIRE(out.segments.size() == 2);
    CHECK(out.segments[0].onset == 0.0);
    CHECK_THAT(out.segments[0].duration, Catch::Matchers::WithinAbs(2.0, 1e-9));
    CHECK_THAT(out.segments[1].onset, Catch::Matchers::WithinAbs(2.0, 1e-9));
  }
  SECTION("sub-threshold peak leaves the region uncut") {
    ChangeScoreTrack t = track_covering(0.0, 4.0);
    set_peak(t, 2.0, 0.9);
    const SegmentList out = cut_at_changes(regions, t, 0.95, 0.5);
    REQUIRE(out.segments.size() == 1);
    CHECK(out.segments[0].duration == 4.0);
  }
  SECTION("sub-minimum piece moves to short_leftovers") {
    const SegmentList small = speech_regions(speech("u", {{0.0, 1.2}}));
    ChangeScoreTrack t = track_covering(0.0, 1.2);
    set_peak(t, 0.3, 0.9);
    const SegmentList out = cut_at_changes(small, t, 0.5, 0.5);
    REQUIRE(out.segments.size() == 1);
    CHECK_THAT(out.segments[0].onset, Catch::Matchers::WithinAbs(0.3, 1e-9));
    CHECK_THAT(out.segments[0].duration, Catch::Matchers::WithinAbs(0.9, 1e-9));
    REQUIRE(out.short_leftovers.size() == 1);
    CHECK_THAT(out.short_leftovers[0].end - out.short_leftovers[0].begin,
               Catch::Matchers::WithinAbs(0.3, 1e-9));
  }
  SECTION("non-covering track warns and passes the region through") {
    ChangeScoreTrack t = track_covering(10.0, 20.0);
    set_peak(t, 15.0, 0.9);
    std::string warning;
    ScopedWarnHandler capture([&](const std::string& m) { warning = m; });
    const SegmentList out = cut_at_changes(regions, t, 0.5, 0.5);
    REQUIRE(out.segments.size() == 1);
    CHECK(out.segments[0].duration == 4.0);
    CHECK(!warning.empty());
  }
  SECTION("nearby peaks are non-maximum suppressed") {
    ChangeScoreTrack t = track_covering(0.0, 4.0);
    set_peak(t, 2.0, 0.9);
    set_peak(t, 2.1, 0.8);  // inside the 0.25 s radius of the higher peak
    set_peak(t, 3.0, 0.7);
    const SegmentList out = cut_at_changes(regions, t, 0.5, 0.5);
    REQUIRE(out.segments.size() == 3);  // cuts at 2.0 and 3.0 only
  }
}

TEST_CASE("fallback change scores from feature divergence", "[segmentation]") {
  const int dim = 8;
  auto make_features = [&](int frames) {
    FeatureMatrix f;
    f.frame_shift = 0.01;
    f.frame_length = 0.025;
    f.frames.resize(frames, dim);
    return f;
  };

  SECTION("constant features score zero") {
    FeatureMatrix f = make_features(400);
    f.frames.setConstant(3.0);
    const ChangeScoreTrack t = fallback_change_scores(f, 0.5);
    REQUIRE(!t.scores.empty());
    for (double s : t.scores) REQUIRE(s == 0.0);
  }
  SECTION("stationary noise stays quiet") {
    oracles::Rng rng(11);
    FeatureMatrix f = make_features(600);
    for (Eigen::Index r = 0; r < f.frames.rows(); ++r)
      for (Eigen::Index c = 0; c < f.frames.cols(); ++c)
        f.frames(r, c) = rng.normal();
    const ChangeScoreTrack t = fallback_change_scores(f, 1.0);
    REQUIRE(!t.scores.empty());
    double mx = 0.0;
    for (double s : t.scores) mx = std::max(mx, s);
    REQUIRE(mx < 0.1);
  }
  SECTION("a 10-sigma mean jump peaks at the boundary") {
    oracles::Rng rng(12);
    FeatureMatrix f = make_features(600);
    for (Eigen::Index r = 0; r < f.frames.rows(); ++r)
      for (Eigen::Index c = 0; c < f.frames.cols(); ++c)
        f.frames(r, c) = rng.normal() + (r >= 300 ? 10.0 : 0.0);
    const ChangeScoreTrack t = fallback_change_scores(f, 1.0);
    std::size_t argmax = 0;
    for (std::size_t i = 1; i < t.scores.size(); ++i)
      if (t.scores[i] > t.scores[argmax]) argmax = i;
    const double peak_time = t.time_of(argmax);
    REQUIRE_THAT(peak_time, Catch::Matchers::WithinAbs(300 * 0.01, 2 * 0.01 + 1e-9));
  }
  SECTION("too-short input yields an empty track") {
    FeatureMatrix f = make_features(5);
    f.frames.setZero();
    const ChangeScoreTrack t = fallback_change_scores(f, 1.0);
    CHECK(t.scores.empty());
  }
}

TEST_CASE("uniform_subsegment geometries", "[segmentation]") {
  auto one_segment = [](double onset, double end) {
    SegmentList list;
    list.uri = "u";
    list.segments = {{onset, end - onset, 0}};
    return list;
  };

  SECTION("paper geometry: [0,5) with 2 s windows and 1 s overlap") {
    const SegmentList out = uniform_subsegment(one_segment(0.0, 5.0), 2.0, 1.0, 0.5);
    REQUIRE(out.segments.size() == 4);
    const double expected[][2] = {{0, 2}, {1, 3}, {2, 4}, {3, 5}};
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK_THAT(out.segments[i].onset,
                 Catch::Matchers::WithinAbs(expected[i][0], 1e-9));
      CHECK_THAT(out.segments[i].end(),
                 Catch::Matchers::WithinAbs(expected[i][1], 1e-9));
    }
  }
  SECTION("short segments pass through") {
    const SegmentList out = uniform_subsegment(one_segment(0.0, 1.5), 2.0, 1.0, 0.5);
    REQUIRE(out.segments.size() == 1);
    CHECK(out.segments[0].duration == 1.5);
  }
  SECTION("kaldi geometry keeps a tail above the minimum") {
    const SegmentList out =
        uniform_subsegment(one_segment(0.0, 1.6), 1.5, 0.75, 0.5);
    REQUIRE(out.segments.size() == 2);
    CHECK_THAT(out.segments[0].end(), Catch::Matchers::WithinAbs(1.5, 1e-9));
    CHECK_THAT(out.segments[1].onset, Catch::Matchers::WithinAbs(0.75, 1e-9));
    CHECK_THAT(out.segments[1].end(), Catch::Matchers::WithinAbs(1.6, 1e-9));
  }
  SECTION("a sub-minimum tail becomes a full window shifted left") {
    // hop 1.3: full window [0,1.5), tail [1.3,1.7) of 0.4 < 0.5.
    const SegmentList out =
        uniform_subsegment(one_segment(0.0, 1.7), 1.5, 0.2, 0.5);
    REQUIRE(out.segments.size() == 2);
    CHECK_THAT(out.segments[1].onset, Catch::Matchers::WithinAbs(0.2, 1e-9));
    CHECK_THAT(out.segments[1].duration, Catch::Matchers::WithinAbs(1.5, 1e-9));
  }
  SECTION("invalid geometry is rejected") {
    CHECK_THROWS_AS(uniform_subsegment(one_segment(0, 5), 2.0, 2.0, 0.5),
                    std::invalid_argument);
    CHECK_THROWS_AS(uniform_subsegment(one_segment(0, 5), 2.0, 1.0, 3.0),
                    std::invalid_argument);
  }
}

TEST_CASE("segmentation pipeline tiles the speech timeline", "[segmentation]") {
  // Union of segments plus leftovers must equal the SAD speech timeline; no
  // segment may cross a non-speech gap.
  oracles::Rng rng(314);
  for (int round = 0; round < 120; ++round) {
    std::vector<Interval> ivs;
    const int n = 1 + rng.uniform_int(6);
    for (int i = 0; i < n; ++i) {
      const double b = std::round(rng.uniform(0.0, 40.0) * 1000.0) / 1000.0;
      const double d = std::round(rng.uniform(0.1, 8.0) * 1000.0) / 1000.0;
      ivs.push_back({b, b + d});
    }
    TimedLabeling sad;
    sad.uri = "u";
    for (const Interval& iv : ivs)
      sad.turns.push_back({iv.begin, iv.duration(), "speech"});

    const SegmentList regions = speech_regions(sad);
    ChangeScoreTrack t = track_covering(0.0, 50.0);
    for (int p = 0; p < 6; ++p)
      set_peak(t, std::round(rng.uniform(0.5, 48.0) * 100.0) / 100.0,
               rng.uniform(0.3, 1.0));
    const SegmentList cut = cut_at_changes(regions, t, 0.5, 0.5);
    const SegmentList subs = uniform_subsegment(cut, 2.0, 1.0, 0.5);

    const auto speech_merged = oracles::raster_regions(ivs);
    std::vector<Interval> covered;
    for (const Segment& s : subs.segments) covered.push_back(s.span());
    for (const Interval& iv : subs.short_leftovers) covered.push_back(iv);
    const auto covered_merged = merge_intervals(std::move(covered), 1e-9);

    REQUIRE_THAT(total_duration(covered_merged),
                 Catch::Matchers::WithinAbs(total_duration(speech_merged), 1e-3));
    // Every segment sits inside one SAD region.
    for (const Segment& s : subs.segments) {
      bool inside = false;
      for (const Interval& r : speech_merged)
        if (s.onset >= r.begin - 5e-4 && s.end() <= r.end + 5e-4) {
          inside = true;
          break;
        }
      REQUIRE(inside);
    }
    // Post-filter segments respect the minimum duration.
    for (const Segment& s : cut.segments) REQUIRE(s.duration >= 0.5 - 1e-9);
    for (const Interval& iv : cut.short_leftovers)
      REQUIRE(iv.end - iv.begin < 0.5 + 1e-9);
  }
}
