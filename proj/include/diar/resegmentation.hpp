#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "diar/features.hpp"
#include "diar/log.hpp"
#include "diar/segmentation.hpp"
#include "diar/timeline.hpp"

namespace diar {

// Diagonal-covariance Gaussian mixture.
struct GmmModel {
  Eigen::VectorXd weights;   // c, sums to 1
  Eigen::MatrixXd means;     // c x D
  Eigen::MatrixXd variances;  // c x D, floored

  Eigen::Index components() const { return weights.size(); }

  // Log density of one frame under the mixture.
  double log_likelihood(const Eigen::RowVectorXd& frame) const {
    const auto c = components();
    const auto d = static_cast<double>(frame.size());
    double best = -std::numeric_limits<double>::infinity();
    Eigen::VectorXd comp(c);
    for (Eigen::Index i = 0; i < c; ++i) {
      const Eigen::ArrayXd diff = (frame - means.row(i)).transpose().array();
      const Eigen::ArrayXd var = variances.row(i).transpose().array();
      comp(i) = std::log(weights(i)) - 0.5 * (diff.square() / var).sum() -
                0.5 * var.log().sum() -
                0.5 * d * std::log(2.0 * std::numbers::pi);
      best = std::max(best, comp(i));
    }
    if (!std::isfinite(best)) return -1e9;
    double sum = 0.0;
    for (Eigen::Index i = 0; i < c; ++i) sum += std::exp(comp(i) - best);
    return best + std::log(sum);
  }
};

struct GmmFitOptions {
  int max_iterations = 50;
  double ll_tolerance = 1e-4;   // stop when the per-frame gain drops below
  double variance_floor = 1e-6;
  std::uint32_t seed = 7321;
};

namespace detail {

// 53-bit uniform in [0, 1) straight from the engine; keeps seeding behavior
// independent of the standard library's distribution implementations.
inline double canonical_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// k-means++ seeding of component means with a fixed-seed generator.
inline std::vector<Eigen::Index> kmeanspp_seeds(const Eigen::MatrixXd& frames,
                                                Eigen::Index c,
                                                std::uint32_t seed) {
  std::mt19937_64 rng(seed);
  const auto n = frames.rows();
  std::vector<Eigen::Index> centers;
  centers.push_back(static_cast<Eigen::Index>(canonical_uniform(rng) *
                                              static_cast<double>(n)));
  Eigen::VectorXd dist2 =
      (frames.rowwise() - frames.row(centers[0])).rowwise().squaredNorm();
  while (static_cast<Eigen::Index>(centers.size()) < c) {
    const double total = dist2.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      const double target = canonical_uniform(rng) * total;
      double acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += dist2(i);
        if (acc >= target) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<Eigen::Index>(centers.size()) % n;
    }
    centers.push_back(pick);
    dist2 = dist2.cwiseMin(
        (frames.rowwise() - frames.row(pick)).rowwise().squaredNorm());
  }
  return centers;
}

}  // namespace detail

// EM fit of a diagonal GMM on the given frames. Deterministic given the
// seed; the training log-likelihood per iteration (appended to *ll_trace
// when given) is non-decreasing up to round-off.
inline GmmModel fit_gmm(const Eigen::MatrixXd& frames, int components,
                        const GmmFitOptions& opts = {},
                        std::vector<double>* ll_trace = nullptr) {
  const auto n = frames.rows();
  const auto d = frames.cols();
  if (n == 0) throw std::invalid_argument("fit_gmm: no frames");
  if (components < 1) throw std::invalid_argument("fit_gmm: components must be >= 1");
  auto c = static_cast<Eigen::Index>(components);
  if (n < c) {
    warn("fit_gmm: only " + std::to_string(n) + " frames for " +
         std::to_string(components) + " components; reducing");
    c = n;
  }

  GmmModel model;
  model.weights = Eigen::VectorXd::Constant(c, 1.0 / static_cast<double>(c));
  model.means.resize(c, d);
  const auto seeds = detail::kmeanspp_seeds(frames, c, opts.seed);
  for (Eigen::Index i = 0; i < c; ++i)
    model.means.row(i) = frames.row(seeds[static_cast<std::size_t>(i)]);
  const Eigen::RowVectorXd global_mean = frames.colwise().mean();
  Eigen::RowVectorXd global_var =
      (frames.rowwise() - global_mean).array().square().colwise().mean();
  global_var = global_var.cwiseMax(opts.variance_floor);
  model.variances = global_var.replicate(c, 1);

  const double log2pi = std::log(2.0 * std::numbers::pi);
  Eigen::MatrixXd log_resp(n, c);
  double prev_ll = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    // E-step in log space.
    for (Eigen::Index i = 0; i < c; ++i) {
      const Eigen::ArrayXd var = model.variances.row(i).transpose().array();
      const double log_norm = std::log(model.weights(i)) -
                              0.5 * var.log().sum() -
                              0.5 * static_cast<double>(d) * log2pi;
      const Eigen::MatrixXd diff2 =
          (frames.rowwise() - model.means.row(i)).array().square();
      log_resp.col(i) =
          (-0.5 * (diff2 * var.inverse().matrix())).array() + log_norm;
    }
    double ll = 0.0;
    for (Eigen::Index r = 0; r < n; ++r) {
      const double mx = log_resp.row(r).maxCoeff();
      const double lse = mx + std::log((log_resp.row(r).array() - mx).exp().sum());
      ll += lse;
      log_resp.row(r) = (log_resp.row(r).array() - lse).exp();
    }
    if (ll_trace) ll_trace->push_back(ll);

    // M-step; log_resp now holds responsibilities.
    for (Eigen::Index i = 0; i < c; ++i) {
      const double resp_sum = log_resp.col(i).sum();
      if (resp_sum < 1e-10) continue;  // starved component keeps its params
      model.weights(i) = resp_sum / static_cast<double>(n);
      const Eigen::RowVectorXd mean =
          (log_resp.col(i).transpose() * frames) / resp_sum;
      Eigen::RowVectorXd var =
          (log_resp.col(i).transpose() *
           (frames.rowwise() - mean).array().square().matrix()) /
          resp_sum;
      model.means.row(i) = mean;
      model.variances.row(i) = var.cwiseMax(opts.variance_floor);
    }
    model.weights /= model.weights.sum();

    if (std::isfinite(prev_ll) &&
        ll - prev_ll < opts.ll_tolerance * static_cast<double>(n))
      break;
    prev_ll = ll;
  }
  return model;
}

// Component budget that doubles with each doubling of the data, capped to
// [1, 64]; fewer than 200 frames get a single Gaussian.
inline int component_count(std::size_t n_frames, double /*frame_shift*/ = 0.0) {
  if (n_frames == 0)
    throw std::invalid_argument("component_count: need at least one frame");
  const std::size_t scaled = n_frames / 100;
  if (scaled < 1) return 1;
  const std::size_t p = std::bit_floor(scaled);
  return static_cast<int>(std::min<std::size_t>(p, 64));
}

// Per-speaker frame log-likelihood tracks, aligned to the feature frames.
struct LikelihoodTracks {
  std::vector<std::string> speakers;
  Eigen::MatrixXd ll;  // speakers x frames, floored at -1e9
  double frame_shift = 0.0;

  Eigen::Index num_frames() const { return ll.cols(); }
  double frame_time(Eigen::Index f) const {
    return frame_shift * static_cast<double>(f);
  }
};

inline LikelihoodTracks evaluate_tracks(const std::vector<GmmModel>& models,
                                        const std::vector<std::string>& speakers,
                                        const FeatureMatrix& features) {
  if (models.size() != speakers.size())
    throw std::invalid_argument("evaluate_tracks: models/speakers size mismatch");
  LikelihoodTracks tracks;
  tracks.speakers = speakers;
  tracks.frame_shift = features.frame_shift;
  const auto t = features.num_frames();
  tracks.ll.resize(static_cast<Eigen::Index>(models.size()), t);
  for (std::size_t s = 0; s < models.size(); ++s)
    for (Eigen::Index f = 0; f < t; ++f)
      tracks.ll(static_cast<Eigen::Index>(s), f) =
          std::max(-1e9, models[s].log_likelihood(features.frames.row(f)));
  return tracks;
}

// Gaussian-window smoothing: anchor values every `shift` seconds are the
// Gaussian-weighted average (sigma = window/4) of the log-likelihoods inside
// the window, and each frame takes its nearest anchor's value. Track lengths
// are unchanged.
inline LikelihoodTracks smooth_tracks(const LikelihoodTracks& tracks,
                                      double window = 0.075,
                                      double shift = 0.050) {
  if (!(window > tracks.frame_shift))
    throw std::invalid_argument("smooth_tracks: window must exceed the frame shift");
  if (!(shift > 0.0)) throw std::invalid_argument("smooth_tracks: shift must be > 0");
  const auto t = tracks.num_frames();
  const double extent = tracks.frame_shift * static_cast<double>(t);
  if (extent < window) {
    warn("smooth_tracks: track shorter than one window; returned unchanged");
    return tracks;
  }

  const double sigma = window / 4.0;
  const double half = window / 2.0;
  const auto num_anchors = static_cast<Eigen::Index>(
      std::floor(tracks.frame_time(t - 1) / shift)) + 1;

  LikelihoodTracks out = tracks;
  Eigen::MatrixXd anchor(tracks.ll.rows(), num_anchors);
  for (Eigen::Index a = 0; a < num_anchors; ++a) {
    const double ta = shift * static_cast<double>(a);
    const auto f_lo = static_cast<Eigen::Index>(
        std::max(0.0, std::ceil((ta - half) / tracks.frame_shift)));
    const auto f_hi = std::min<Eigen::Index>(
        t - 1,
        static_cast<Eigen::Index>(std::floor((ta + half) / tracks.frame_shift)));
    double wsum = 0.0;
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(tracks.ll.rows());
    for (Eigen::Index f = f_lo; f <= f_hi; ++f) {
      const double dt = tracks.frame_time(f) - ta;
      const double w = std::exp(-0.5 * dt * dt / (sigma * sigma));
      wsum += w;
      acc += w * tracks.ll.col(f);
    }
    if (wsum > 0.0) {
      anchor.col(a) = acc / wsum;
    } else {
      const auto nearest = std::clamp<Eigen::Index>(
          static_cast<Eigen::Index>(std::lround(ta / tracks.frame_shift)), 0, t - 1);
      anchor.col(a) = tracks.ll.col(nearest);
    }
  }
  for (Eigen::Index f = 0; f < t; ++f) {
    const auto a = std::clamp<Eigen::Index>(
        static_cast<Eigen::Index>(std::lround(tracks.frame_time(f) / shift)), 0,
        num_anchors - 1);
    out.ll.col(f) = anchor.col(a);
  }
  return out;
}

namespace detail {

// Splits one speech region into maximal runs of equal frame labels. The
// label of time t is the label of the frame containing t; the pieces tile
// the region exactly.
template <typename LabelAt>
inline void emit_region_turns(const Interval& region, double frame_shift,
                              LabelAt&& label_at,
                              const std::vector<std::string>& names,
                              std::vector<Turn>& out) {
  int current = label_at(region.begin);
  double start = region.begin;
  auto k = static_cast<long long>(std::floor(region.begin / frame_shift)) + 1;
  for (; static_cast<double>(k) * frame_shift < region.end; ++k) {
    const double t = static_cast<double>(k) * frame_shift;
    const int lbl = label_at(t);
    if (lbl != current) {
      if (t > start)
        out.push_back({start, t - start, names[static_cast<std::size_t>(current)]});
      start = t;
      current = lbl;
    }
  }
  if (region.end > start)
    out.push_back({start, region.end - start, names[static_cast<std::size_t>(current)]});
}

}  // namespace detail

// Relabels every SAD speech frame with the argmax speaker of the (smoothed)
// tracks; ties go to the lower speaker index. Non-speech is never labeled;
// the output tiles the SAD speech timeline exactly.
inline TimedLabeling reassign_frames(const LikelihoodTracks& tracks,
                                     const TimedLabeling& sad,
                                     const TimedLabeling* fallback = nullptr) {
  TimedLabeling out;
  out.uri = sad.uri;
  if (tracks.speakers.empty() || tracks.num_frames() == 0) {
    warn("reassign_frames: empty likelihood tracks; clustering labels passed through");
    return fallback ? *fallback : out;
  }

  const auto t = tracks.num_frames();
  auto label_at = [&](double time) {
    const auto f = std::clamp<Eigen::Index>(
        static_cast<Eigen::Index>(std::floor(time / tracks.frame_shift)), 0, t - 1);
    Eigen::Index best = 0;
    tracks.ll.col(f).maxCoeff(&best);
    return static_cast<int>(best);
  };

  std::vector<Interval> speech;
  for (const Segment& s : speech_regions(sad).segments) speech.push_back(s.span());
  for (const Interval& region : speech)
    detail::emit_region_turns(region, tracks.frame_shift, label_at,
                              tracks.speakers, out.turns);
  return out;
}

// Within each known overlap region, adds a turn for the speaker with the
// second-highest smoothed likelihood per frame. Primary turns are unchanged.
inline TimedLabeling add_overlap_second(const LikelihoodTracks& tracks,
                                        const TimedLabeling& overlap_regions,
                                        const TimedLabeling& primary) {
  if (overlap_regions.turns.empty()) return primary;
  if (tracks.speakers.size() < 2) {
    warn("add_overlap_second: fewer than 2 speakers; no second speaker emitted");
    return primary;
  }

  const auto t = tracks.num_frames();
  auto second_at = [&](double time) {
    const auto f = std::clamp<Eigen::Index>(
        static_cast<Eigen::Index>(std::floor(time / tracks.frame_shift)), 0, t - 1);
    Eigen::Index best = 0;
    tracks.ll.col(f).maxCoeff(&best);
    int second = -1;
    double second_val = -std::numeric_limits<double>::infinity();
    for (Eigen::Index s = 0; s < tracks.ll.rows(); ++s) {
      if (s == best) continue;
      if (tracks.ll(s, f) > second_val) {
        second_val = tracks.ll(s, f);
        second = static_cast<int>(s);
      }
    }
    return second;
  };

  TimedLabeling out = primary;
  std::vector<Interval> regions;
  for (const Turn& turn : overlap_regions.turns) regions.push_back(turn.span());
  for (const Interval& region : merge_intervals(std::move(regions)))
    detail::emit_region_turns(region, tracks.frame_shift, second_at,
                              tracks.speakers, out.turns);
  return out;
}

}  // namespace diar
