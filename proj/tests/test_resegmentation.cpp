#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "diar/resegmentation.hpp"
#include "oracles.hpp"

using namespace diar;

namespace {

Eigen::MatrixXd blob_frames(oracles::Rng& rng, int n, double center,
                            double sigma = 1.0) {
  Eigen::MatrixXd m(n, 1);
  for (int i = 0; i < n; ++i) m(i, 0) = center + sigma * rng.normal();
  return m;
}

LikelihoodTracks constant_tracks(int speakers, int frames, double shift) {
  LikelihoodTracks t;
  for (int s = 0; s < speakers; ++s) t.speakers.push_back("spk" + std::to_string(s));
  t.frame_shift = shift;
  t.ll = Eigen::MatrixXd::Zero(speakers, frames);
  return t;
}

}  // namespace

TEST_CASE("single-component GMM equals sample moments", "[resegmentation]") {
  oracles::Rng rng(1);
  Eigen::MatrixXd frames(50, 3);
  for (Eigen::Index r = 0; r < frames.rows(); ++r)
    for (Eigen::Index c = 0; c < frames.cols(); ++c)
      frames(r, c) = rng.uniform(-4.0, 4.0);
  const GmmModel model = fit_gmm(frames, 1);
  REQUIRE(model.components() == 1);
  const Eigen::RowVectorXd mean = frames.colwise().mean();
  const Eigen::RowVectorXd var =
      (frames.rowwise() - mean).array().square().colwise().mean();
  CHECK((model.means.row(0) - mean).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((model.variances.row(0) - var).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_THAT(model.weights(0), Catch::Matchers::WithinAbs(1.0, 1e-12));
}

TEST_CASE("two separated blobs are recovered", "[resegmentation]") {
  oracles::Rng rng(2);
  Eigen::MatrixXd frames(400, 1);
  frames << blob_frames(rng, 200, -6.0), blob_frames(rng, 200, 6.0);
  const GmmModel model = fit_gmm(frames, 2);
  REQUIRE(model.components() == 2);
  std::vector<double> centers = {model.means(0, 0), model.means(1, 0)};
  std::sort(centers.begin(), centers.end());
  CHECK_THAT(centers[0], Catch::Matchers::WithinAbs(-6.0, 0.1));
  CHECK_THAT(centers[1], Catch::Matchers::WithinAbs(6.0, 0.1));
}

TEST_CASE("GMM EM log-likelihood is monotone on fuzz data", "[resegmentation]") {
  oracles::Rng rng(3);
  for (int round = 0; round < 100; ++round) {
    const int n = 20 + rng.uniform_int(80);
    const int dim = 1 + rng.uniform_int(4);
    const int c = 1 + rng.uniform_int(4);
    Eigen::MatrixXd frames(n, dim);
    for (Eigen::Index r = 0; r < n; ++r)
      for (Eigen::Index k = 0; k < dim; ++k)
        frames(r, k) = 3.0 * rng.normal() + rng.uniform_int(3);
    std::vector<double> trace;
    GmmFitOptions opts;
    opts.ll_tolerance = 0.0;  // run all iterations
    opts.max_iterations = 25;
    fit_gmm(frames, c, opts, &trace);
    REQUIRE(trace.size() >= 2);
    for (std::size_t i = 1; i < trace.size(); ++i)
      REQUIRE(trace[i] >= trace[i - 1] - 1e-6 * std::abs(trace[i - 1]));
  }
}

TEST_CASE("fit_gmm reduces starved component counts with a warning", "[resegmentation]") {
  Eigen::MatrixXd frames(3, 2);
  frames << 0, 0, 1, 1, 2, 2;
  std::string warning;
  ScopedWarnHandler capture([&](const std::string& m) { warning = m; });
  const GmmModel model = fit_gmm(frames, 8);
  CHECK(model.components() == 3);
  CHECK(!warning.empty());
}

TEST_CASE("fit_gmm is deterministic given the seed", "[resegmentation]") {
  oracles::Rng rng(4);
  Eigen::MatrixXd frames(120, 2);
  for (Eigen::Index r = 0; r < frames.rows(); ++r)
    for (Eigen::Index c = 0; c < frames.cols(); ++c) frames(r, c) = rng.normal();
  const GmmModel a = fit_gmm(frames, 4);
  const GmmModel b = fit_gmm(frames, 4);
  REQUIRE(a.means == b.means);
  REQUIRE(a.variances == b.variances);
  REQUIRE(a.weights == b.weights);
}

TEST_CASE("component_count doubles per doubling of data", "[resegmentation]") {
  CHECK(component_count(1) == 1);
  CHECK(component_count(99) == 1);
  CHECK(component_count(150) == 1);
  CHECK(component_count(200) == 2);
  CHECK(component_count(399) == 2);
  CHECK(component_count(1600) == 16);
  CHECK(component_count(6400) == 64);
  CHECK(component_count(1000000) == 64);
  CHECK_THROWS_AS(component_count(0), std::invalid_argument);
}

TEST_CASE("smooth_tracks behavior", "[resegmentation]") {
  SECTION("a constant track is a fixed point") {
    LikelihoodTracks t = constant_tracks(2, 200, 0.01);
    t.ll.row(0).setConstant(-3.5);
    t.ll.row(1).setConstant(-7.0);
    const LikelihoodTracks out = smooth_tracks(t);
    REQUIRE(out.ll.rows() == 2);
    REQUIRE(out.ll.cols() == 200);
    CHECK((out.ll.row(0).array() + 3.5).abs().maxCoeff() < 1e-9);
    CHECK((out.ll.row(1).array() + 7.0).abs().maxCoeff() < 1e-9);
  }
  SECTION("an anchor-aligned spike spreads symmetrically") {
    LikelihoodTracks t = constant_tracks(1, 200, 0.01);
    const int spike = 100;  // t = 1.0 s, a multiple of the 50 ms anchor step
    t.ll(0, spike) = 100.0;
    const LikelihoodTracks out = smooth_tracks(t);
    CHECK(out.ll(0, spike) < 100.0);
    CHECK(out.ll(0, spike - 2) > 0.0);
    CHECK(out.ll(0, spike + 2) > 0.0);
    // First moment of the smoothed bump stays at the spike.
    double num = 0.0, den = 0.0;
    for (Eigen::Index f = 0; f < out.ll.cols(); ++f) {
      num += static_cast<double>(f) * out.ll(0, f);
      den += out.ll(0, f);
    }
    REQUIRE(den > 0.0);
    CHECK_THAT(num / den, Catch::Matchers::WithinAbs(spike, 1.0));
  }
  SECTION("two symmetric tracks keep their crossover") {
    const int frames = 400;
    LikelihoodTracks t = constant_tracks(2, frames, 0.01);
    for (int f = 0; f < frames; ++f) {
      t.ll(0, f) = -static_cast<double>(f);           // decreasing
      t.ll(1, f) = -static_cast<double>(frames - f);  // increasing
    }
    // Crossover where f = frames - f, i.e. f = 200.
    const LikelihoodTracks out = smooth_tracks(t);
    int crossover = -1;
    for (int f = 1; f < frames; ++f)
      if (out.ll(0, f) < out.ll(1, f) && out.ll(0, f - 1) >= out.ll(1, f - 1)) {
        crossover = f;
        break;
      }
    REQUIRE(crossover >= 0);
    // Anchor quantization is 50 ms = 5 frames; the crossover may land on
    // either side of an anchor boundary.
    CHECK(std::abs(crossover - 200) <= 5);
  }
  SECTION("matches a direct discrete convolution oracle") {
    oracles::Rng rng(5);
    LikelihoodTracks t = constant_tracks(1, 120, 0.01);
    for (int f = 0; f < 120; ++f) t.ll(0, f) = rng.uniform(-20.0, 0.0);
    const LikelihoodTracks out = smooth_tracks(t, 0.075, 0.05);
    const double sigma = 0.075 / 4.0;
    for (int f = 0; f < 120; ++f) {
      const double tf = 0.01 * f;
      const double anchor = 0.05 * std::lround(tf / 0.05);
      double num = 0.0, den = 0.0;
      for (int g = 0; g < 120; ++g) {
        const double tg = 0.01 * g;
        if (std::abs(tg - anchor) > 0.075 / 2.0 + 1e-12) continue;
        const double w = std::exp(-0.5 * (tg - anchor) * (tg - anchor) / (sigma * sigma));
        num += w * t.ll(0, g);
        den += w;
      }
      REQUIRE_THAT(out.ll(0, f), Catch::Matchers::WithinAbs(num / den, 1e-9));
    }
  }
  SECTION("short track warns and passes through") {
    LikelihoodTracks t = constant_tracks(1, 3, 0.01);
    t.ll.setConstant(-1.0);
    std::string warning;
    ScopedWarnHandler capture([&](const std::string& m) { warning = m; });
    const LikelihoodTracks out = smooth_tracks(t, 0.075, 0.05);
    CHECK(out.ll == t.ll);
    CHECK(!warning.empty());
  }
  SECTION("window must exceed the frame shift") {
    LikelihoodTracks t = constant_tracks(1, 100, 0.05);
    CHECK_THROWS_AS(smooth_tracks(t, 0.04, 0.05), std::invalid_argument);
  }
}

TEST_CASE("reassign_frames follows the dominant track", "[resegmentation]") {
  TimedLabeling sad;
  sad.uri = "u";
  sad.turns = {{0.0, 10.0, "speech"}};

  SECTION("one dominant speaker gives one turn per region") {
    LikelihoodTracks t = constant_tracks(2, 1000, 0.01);
    t.ll.row(0).setConstant(-1.0);
    t.ll.row(1).setConstant(-5.0);
    const TimedLabeling out = reassign_frames(t, sad);
    REQUIRE(out.turns.size() == 1);
    CHECK(out.turns[0].label == "spk0");
    CHECK(out.turns[0].onset == 0.0);
    CHECK(out.turns[0].duration == 10.0);
  }
  SECTION("a dominance flip puts the boundary at the flip frame") {
    LikelihoodTracks t = constant_tracks(2, 1000, 0.01);
    for (int f = 0; f < 1000; ++f) {
      t.ll(0, f) = f < 500 ? -1.0 : -9.0;
      t.ll(1, f) = f < 500 ? -9.0 : -1.0;
    }
    const TimedLabeling out = reassign_frames(t, sad);
    REQUIRE(out.turns.size() == 2);
    CHECK(out.turns[0].label == "spk0");
    CHECK_THAT(out.turns[0].end(), Catch::Matchers::WithinAbs(5.0, 0.01 + 1e-9));
    CHECK(out.turns[1].label == "spk1");
  }
  SECTION("ties go to the lower speaker index") {
    LikelihoodTracks t = constant_tracks(3, 1000, 0.01);
    t.ll.setConstant(-2.0);
    const TimedLabeling out = reassign_frames(t, sad);
    REQUIRE(out.turns.size() == 1);
    CHECK(out.turns[0].label == "spk0");
  }
  SECTION("non-speech is never labeled and regions tile exactly") {
    TimedLabeling gappy;
    gappy.uri = "u";
    gappy.turns = {{0.5, 2.25, "speech"}, {4.125, 3.0, "speech"}};
    LikelihoodTracks t = constant_tracks(2, 1000, 0.01);
    for (int f = 0; f < 1000; ++f) {
      t.ll(0, f) = (f % 100 < 50) ? -1.0 : -3.0;
      t.ll(1, f) = (f % 100 < 50) ? -3.0 : -1.0;
    }
    const TimedLabeling out = reassign_frames(t, gappy);
    // Tiling: total output duration equals the speech duration, every turn
    // inside a region.
    double total = 0.0;
    for (const Turn& turn : out.turns) {
      total += turn.duration;
      const bool inside =
          (turn.onset >= 0.5 - 1e-12 && turn.end() <= 2.75 + 1e-12) ||
          (turn.onset >= 4.125 - 1e-12 && turn.end() <= 7.125 + 1e-12);
      REQUIRE(inside);
    }
    REQUIRE_THAT(total, Catch::Matchers::WithinAbs(5.25, 1e-9));
    // Labels only from the track speaker set.
    for (const Turn& turn : out.turns)
      REQUIRE((turn.label == "spk0" || turn.label == "spk1"));
  }
  SECTION("empty tracks pass the fallback through with a warning") {
    LikelihoodTracks t;
    t.frame_shift = 0.01;
    TimedLabeling fallback;
    fallback.uri = "u";
    fallback.turns = {{0.0, 10.0, "spk3"}};
    std::string warning;
    ScopedWarnHandler capture([&](const std::string& m) { warning = m; });
    const TimedLabeling out = reassign_frames(t, sad, &fallback);
    CHECK(out.turns.size() == 1);
    CHECK(out.turns[0].label == "spk3");
    CHECK(!warning.empty());
  }
}

TEST_CASE("add_overlap_second emits the runner-up speaker", "[resegmentation]") {
  TimedLabeling primary;
  primary.uri = "u";
  primary.turns = {{0.0, 10.0, "spk0"}};

  SECTION("with two speakers the only candidate is the other one") {
    LikelihoodTracks t = constant_tracks(2, 1000, 0.01);
    t.ll.row(0).setConstant(-1.0);
    t.ll.row(1).setConstant(-4.0);
    TimedLabeling overlap;
    overlap.uri = "u";
    overlap.turns = {{2.0, 1.0, "overlap"}};
    const TimedLabeling out = add_overlap_second(t, overlap, primary);
    REQUIRE(out.turns.size() == 2);
    CHECK(out.turns[1].label == "spk1");
    CHECK_THAT(out.turns[1].onset, Catch::Matchers::WithinAbs(2.0, 1e-12));
    CHECK_THAT(out.turns[1].duration, Catch::Matchers::WithinAbs(1.0, 1e-12));
  }
  SECTION("with ordered likelihoods the second best is emitted") {
    LikelihoodTracks t = constant_tracks(3, 1000, 0.01);
    t.ll.row(0).setConstant(-1.0);
    t.ll.row(1).setConstant(-2.0);
    t.ll.row(2).setConstant(-3.0);
    TimedLabeling overlap;
    overlap.uri = "u";
    overlap.turns = {{4.0, 2.0, "overlap"}};
    const TimedLabeling out = add_overlap_second(t, overlap, primary);
    REQUIRE(out.turns.size() == 2);
    CHECK(out.turns[1].label == "spk1");
  }
  SECTION("empty overlap regions return the primary untouched") {
    LikelihoodTracks t = constant_tracks(2, 100, 0.01);
    TimedLabeling overlap;
    overlap.uri = "u";
    const TimedLabeling out = add_overlap_second(t, overlap, primary);
    CHECK(out.turns.size() == primary.turns.size());
  }
  SECTION("fewer than two speakers warns and no-ops") {
    LikelihoodTracks t = constant_tracks(1, 100, 0.01);
    TimedLabeling overlap;
    overlap.uri = "u";
    overlap.turns = {{0.0, 1.0, "overlap"}};
    std::string warning;
    ScopedWarnHandler capture([&](const std::string& m) { warning = m; });
    const TimedLabeling out = add_overlap_second(t, overlap, primary);
    CHECK(out.turns.size() == primary.turns.size());
    CHECK(!warning.empty());
  }
}
