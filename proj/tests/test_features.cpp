#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "diar/features.hpp"
#include "oracles.hpp"

using namespace diar;

namespace {

AudioBuffer sine(double freq, double seconds, int rate) {
  AudioBuffer a;
  a.sample_rate = rate;
  const auto n = static_cast<std::size_t>(seconds * rate);
  a.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    a.samples[i] = 0.5 * std::sin(2.0 * std::numbers::pi * freq *
                                  static_cast<double>(i) / rate);
  return a;
}

}  // namespace

TEST_CASE("silence produces identical frames with the floored c0", "[features]") {
  AudioBuffer a;
  a.sample_rate = 16000;
  a.samples.assign(16000, 0.0);
  const LfccConfig cfg;
  const FeatureMatrix f = extract_lfcc(a, cfg);
  REQUIRE(f.num_frames() > 1);
  REQUIRE(f.dim() == 20);
  for (Eigen::Index r = 1; r < f.num_frames(); ++r)
    REQUIRE((f.frames.row(r) - f.frames.row(0)).cwiseAbs().maxCoeff() == 0.0);
  // All filter outputs hit the log floor, so the spectrum over channels is
  // constant: c0 = sqrt(M) * log(floor), higher coefficients vanish.
  const double expected_c0 = std::sqrt(30.0) * std::log(cfg.log_floor);
  CHECK_THAT(f.frames(0, 0), Catch::Matchers::WithinAbs(expected_c0, 1e-9));
  for (Eigen::Index c = 1; c < f.dim(); ++c)
    CHECK_THAT(f.frames(0, c), Catch::Matchers::WithinAbs(0.0, 1e-9));
}

TEST_CASE("a stationary sine gives equal interior frames", "[features]") {
  // 1 kHz at 16 kHz with a 10 ms shift: every hop is an integer number of
  // periods, so all interior frames see the same signal.
  const FeatureMatrix f = extract_lfcc(sine(1000.0, 1.0, 16000));
  REQUIRE(f.num_frames() > 10);
  const Eigen::RowVectorXd base = f.frames.row(1);
  for (Eigen::Index r = 2; r + 1 < f.num_frames(); ++r)
    REQUIRE((f.frames.row(r) - base).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("default config echoes its geometry", "[features]") {
  const FeatureMatrix f = extract_lfcc(sine(440.0, 0.5, 16000));
  CHECK(f.dim() == 20);
  CHECK(f.frame_shift == 0.010);
  CHECK(f.frame_length == 0.025);
  CHECK(f.kind == FeatureKind::LFCC);
}

TEST_CASE("frame count formula holds on randomized inputs", "[features]") {
  oracles::Rng rng(99);
  LfccConfig cfg;
  int checked = 0;
  for (int round = 0; round < 1000; ++round) {
    const int rate = 4000 + 4000 * rng.uniform_int(4);
    const auto num_samples =
        static_cast<std::size_t>(rng.uniform(400.0, 20000.0));
    const auto win = static_cast<std::size_t>(std::lround(cfg.frame_length * rate));
    const auto hop = static_cast<std::size_t>(std::lround(cfg.frame_shift * rate));
    AudioBuffer a;
    a.sample_rate = rate;
    a.samples.resize(num_samples);
    for (auto& s : a.samples) s = rng.uniform(-0.5, 0.5);
    if (num_samples < win) {
      CHECK_THROWS_AS(extract_lfcc(a, cfg), std::invalid_argument);
      continue;
    }
    const FeatureMatrix f = extract_lfcc(a, cfg);
    REQUIRE(static_cast<std::size_t>(f.num_frames()) == (num_samples - win) / hop + 1);
    ++checked;
  }
  REQUIRE(checked > 800);
}

TEST_CASE("extract_lfcc is deterministic", "[features]") {
  const AudioBuffer a = sine(523.0, 0.3, 16000);
  const FeatureMatrix f1 = extract_lfcc(a);
  const FeatureMatrix f2 = extract_lfcc(a);
  REQUIRE(f1.frames == f2.frames);
}

TEST_CASE("LFCC matches an independent DFT reference implementation", "[features]") {
  // One frame, recomputed with a naive DFT, the same filterbank geometry
  // rebuilt from scratch, and a direct DCT-II sum.
  LfccConfig cfg;
  cfg.preemphasis = 0.0;
  const int rate = 16000;
  AudioBuffer a;
  a.sample_rate = rate;
  a.samples.resize(400);
  oracles::Rng rng(5);
  for (auto& s : a.samples) s = rng.uniform(-0.8, 0.8);

  const FeatureMatrix f = extract_lfcc(a, cfg);
  REQUIRE(f.num_frames() == 1);

  const std::size_t win = 400, fft_size = 512;
  std::vector<double> frame(win);
  for (std::size_t i = 0; i < win; ++i) {
    const double w = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i /
                                            static_cast<double>(win - 1));
    frame[i] = a.samples[i] * w;
  }
  const auto mag = oracles::naive_dft_magnitude(frame, fft_size);

  const int m = cfg.num_filters;
  std::vector<double> log_energy(static_cast<std::size_t>(m));
  for (int fi = 0; fi < m; ++fi) {
    const double nyquist = rate / 2.0;
    const double lo = nyquist * fi / (m + 1);
    const double ce = nyquist * (fi + 1) / (m + 1);
    const double hi = nyquist * (fi + 2) / (m + 1);
    double acc = 0.0;
    for (std::size_t k = 0; k < mag.size(); ++k) {
      const double hz = static_cast<double>(k) * rate / fft_size;
      double weight = 0.0;
      if (hz > lo && hz <= ce)
        weight = (hz - lo) / (ce - lo);
      else if (hz > ce && hz < hi)
        weight = (hi - hz) / (hi - ce);
      acc += weight * mag[k];
    }
    log_energy[static_cast<std::size_t>(fi)] = std::log(std::max(acc, cfg.log_floor));
  }
  for (int k = 0; k < cfg.num_coeffs; ++k) {
    double acc = 0.0;
    for (int i = 0; i < m; ++i)
      acc += log_energy[static_cast<std::size_t>(i)] *
             std::cos(std::numbers::pi * k * (2 * i + 1) / (2.0 * m));
    acc *= std::sqrt((k == 0 ? 1.0 : 2.0) / m);
    REQUIRE_THAT(f.frames(0, k), Catch::Matchers::WithinAbs(acc, 1e-6));
  }
}

TEST_CASE("config validation", "[features]") {
  AudioBuffer a;
  a.sample_rate = 0;
  a.samples.assign(1000, 0.0);
  CHECK_THROWS_AS(extract_lfcc(a), std::invalid_argument);

  a.sample_rate = 16000;
  LfccConfig bad;
  bad.num_coeffs = 40;  // more than the filter count
  CHECK_THROWS_AS(extract_lfcc(a, bad), std::invalid_argument);
}

TEST_CASE("CMN zeroes column means", "[features]") {
  SECTION("hand fixture") {
    FeatureMatrix f;
    f.kind = FeatureKind::LFCC;
    f.frames.resize(2, 2);
    f.frames << 1, 2, 3, 4;
    const FeatureMatrix out = apply_cmn(f);
    CHECK(out.kind == FeatureKind::LFCC_CMN);
    Eigen::MatrixXd expected(2, 2);
    expected << -1, -1, 1, 1;
    CHECK((out.frames - expected).cwiseAbs().maxCoeff() == 0.0);
  }
  SECTION("single frame degenerates to zero") {
    FeatureMatrix f;
    f.frames.resize(1, 2);
    f.frames << 5, 7;
    const FeatureMatrix out = apply_cmn(f);
    CHECK(out.frames.cwiseAbs().maxCoeff() == 0.0);
  }
  SECTION("column means vanish on random input") {
    FeatureMatrix f;
    f.frames.resize(37, 13);
    oracles::Rng rng(3);
    for (Eigen::Index r = 0; r < f.frames.rows(); ++r)
      for (Eigen::Index c = 0; c < f.frames.cols(); ++c)
        f.frames(r, c) = rng.uniform(-10.0, 10.0);
    const FeatureMatrix out = apply_cmn(f);
    REQUIRE(out.frames.colwise().mean().cwiseAbs().maxCoeff() < 1e-9);
  }
  SECTION("empty matrix is a warned no-op") {
    FeatureMatrix f;
    f.frames.resize(0, 4);
    std::string warning;
    ScopedWarnHandler capture([&](const std::string& m) { warning = m; });
    const FeatureMatrix out = apply_cmn(f);
    CHECK(out.frames.rows() == 0);
    CHECK(!warning.empty());
  }
  SECTION("already normalized input is rejected") {
    FeatureMatrix f;
    f.kind = FeatureKind::LFCC_CMN;
    f.frames.resize(2, 2);
    CHECK_THROWS_AS(apply_cmn(f), std::invalid_argument);
  }
}
