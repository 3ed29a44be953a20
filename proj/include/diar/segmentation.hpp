#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "diar/features.hpp"
#include "diar/log.hpp"
#include "diar/timeline.hpp"

namespace diar {

// Speaker-change probabilities sampled on a regular grid.
struct ChangeScoreTrack {
  std::vector<double> scores;  // each in [0,1]
  double step = 0.0;           // seconds between scores
  double offset = 0.0;         // time of the first score

  double time_of(std::size_t i) const { return offset + step * static_cast<double>(i); }

  void validate() const {
    if (!(step > 0.0)) throw std::invalid_argument("ChangeScoreTrack: step must be > 0");
    for (double s : scores)
      if (!(s >= 0.0 && s <= 1.0))
        throw std::invalid_argument("ChangeScoreTrack: scores must lie in [0,1]");
  }
};

struct Segment {
  double onset = 0.0;
  double duration = 0.0;
  int parent_region = -1;

  double end() const { return onset + duration; }
  Interval span() const { return {onset, onset + duration}; }
};

// Clustering-ready segments plus the sub-minimum pieces that clustering
// skips (resegmentation decides those later).
struct SegmentList {
  std::string uri;
  std::vector<Segment> segments;
  std::vector<Interval> short_leftovers;
};

namespace detail {

inline bool is_non_speech_label(const std::string& label) {
  std::string l;
  l.reserve(label.size());
  for (char c : label) l.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  return l == "non-speech" || l == "nonspeech" || l == "nonspeech " ||
         l == "ns" || l == "silence" || l == "sil";
}

}  // namespace detail

// Maximal speech regions: adjacent or overlapping speech turns merged, one
// segment per connected region. Turns labeled as non-speech are dropped;
// a speech-only SAD keeps every turn.
inline SegmentList speech_regions(const TimedLabeling& sad) {
  sad.validate();
  SegmentList out;
  out.uri = sad.uri;
  std::vector<Interval> speech;
  for (const Turn& t : sad.turns)
    if (!detail::is_non_speech_label(t.label)) speech.push_back(t.span());
  int region = 0;
  for (const Interval& iv : merge_intervals(std::move(speech)))
    out.segments.push_back({iv.begin, iv.duration(), region++});
  return out;
}

// Cuts each region at local maxima of the change-score track that exceed
// `threshold`. Peaks are picked with non-maximum suppression of radius
// 0.25 s. Pieces shorter than `min_duration` move to short_leftovers.
inline SegmentList cut_at_changes(const SegmentList& regions,
                                  const ChangeScoreTrack& scores,
                                  double threshold, double min_duration,
                                  double nms_radius = 0.25) {
  if (!(threshold >= 0.0 && threshold <= 1.0))
    throw std::invalid_argument("cut_at_changes: threshold must lie in [0,1]");
  if (!(min_duration > 0.0))
    throw std::invalid_argument("cut_at_changes: min_duration must be > 0");
  if (!scores.scores.empty()) scores.validate();

  // Candidate cut points: strict-or-plateau local maxima above threshold,
  // then greedy NMS keeping the highest peak within the radius.
  struct Peak {
    double t;
    double v;
  };
  std::vector<Peak> peaks;
  const std::size_t n = scores.scores.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double v = scores.scores[i];
    if (v < threshold) continue;
    const double prev = i > 0 ? scores.scores[i - 1] : -1.0;
    const double next = i + 1 < n ? scores.scores[i + 1] : -1.0;
    if (v >= prev && v > next) peaks.push_back({scores.time_of(i), v});
  }
  std::stable_sort(peaks.begin(), peaks.end(),
                   [](const Peak& a, const Peak& b) { return a.v > b.v; });
  std::vector<Peak> kept;
  for (const Peak& p : peaks) {
    bool suppressed = false;
    for (const Peak& k : kept)
      if (std::abs(k.t - p.t) < nms_radius) {
        suppressed = true;
        break;
      }
    if (!suppressed) kept.push_back(p);
  }
  std::vector<double> cuts;
  for (const Peak& p : kept) cuts.push_back(p.t);
  std::sort(cuts.begin(), cuts.end());

  // A region counts as covered when the track reaches within `slack` of both
  // of its ends; detectors cannot score the outermost window of a signal.
  const double slack = std::max(2.0, 2.0 * scores.step);
  const double track_begin = scores.offset;
  const double track_end = n > 0 ? scores.time_of(n - 1) : scores.offset;

  SegmentList out;
  out.uri = regions.uri;
  out.short_leftovers = regions.short_leftovers;
  for (const Segment& region : regions.segments) {
    if (n == 0 || region.onset < track_begin - slack ||
        region.end() > track_end + slack) {
      warn("cut_at_changes: score track does not cover region [" +
           std::to_string(region.onset) + ", " + std::to_string(region.end()) +
           ") of '" + regions.uri + "'; region left uncut");
      if (region.duration < min_duration)
        out.short_leftovers.push_back(region.span());
      else
        out.segments.push_back(region);
      continue;
    }
    std::vector<double> bounds;
    bounds.push_back(region.onset);
    for (double c : cuts)
      if (c > region.onset && c < region.end()) bounds.push_back(c);
    bounds.push_back(region.end());
    for (std::size_t i = 0; i + 1 < bounds.size(); ++i) {
      const double dur = bounds[i + 1] - bounds[i];
      if (dur <= 0.0) continue;
      if (dur < min_duration)
        out.short_leftovers.push_back({bounds[i], bounds[i + 1]});
      else
        out.segments.push_back({bounds[i], dur, region.parent_region});
    }
  }
  return out;
}

// Stand-in change detector for when no external score track is available:
// normalized symmetric KL divergence between diagonal Gaussians fit on the
// feature windows either side of each candidate boundary.
inline ChangeScoreTrack fallback_change_scores(const FeatureMatrix& features,
                                               double window) {
  if (!(window > 0.0))
    throw std::invalid_argument("fallback_change_scores: window must be > 0");
  const auto num_frames = static_cast<std::size_t>(features.frames.rows());
  const auto dim = static_cast<std::size_t>(features.frames.cols());
  const std::size_t w = std::max<std::size_t>(
      2, static_cast<std::size_t>(std::lround(window / features.frame_shift)));

  ChangeScoreTrack track;
  track.step = features.frame_shift;
  track.offset = features.frame_shift * static_cast<double>(w);
  if (num_frames < 2 * w || dim == 0) return track;

  constexpr double kVarFloor = 1e-8;
  auto moments = [&](std::size_t begin, std::size_t end, Eigen::VectorXd& mean,
                     Eigen::VectorXd& var) {
    const auto len = static_cast<Eigen::Index>(end - begin);
    const auto block = features.frames.middleRows(static_cast<Eigen::Index>(begin), len);
    mean = block.colwise().mean();
    var = ((block.rowwise() - mean.transpose()).array().square().colwise().sum() /
           static_cast<double>(len)).matrix();
    var = var.cwiseMax(kVarFloor);
  };

  Eigen::VectorXd ml, vl, mr, vr;
  for (std::size_t t = w; t + w <= num_frames; ++t) {
    moments(t - w, t, ml, vl);
    moments(t, t + w, mr, vr);
    const Eigen::ArrayXd d2 = (ml - mr).array().square();
    const double kl2 =
        0.5 * (((vl.array() + d2) / vr.array()) + ((vr.array() + d2) / vl.array()) - 2.0)
                  .sum();
    const double norm = kl2 / static_cast<double>(dim);
    track.scores.push_back(norm / (1.0 + norm));
  }
  return track;
}

// Replaces segments longer than max_len by windows of length max_len hopping
// every (max_len - overlap). A tail shorter than max_len is emitted as a
// final window when it is at least min_len; otherwise the final window is
// shifted left to end at the segment end, keeping full length.
inline SegmentList uniform_subsegment(const SegmentList& segments,
                                      double max_len, double overlap,
                                      double min_len) {
  if (!(overlap >= 0.0 && overlap < max_len))
    throw std::invalid_argument("uniform_subsegment: need 0 <= overlap < max_len");
  if (!(min_len > 0.0 && min_len <= max_len))
    throw std::invalid_argument("uniform_subsegment: need 0 < min_len <= max_len");

  const double hop = max_len - overlap;
  constexpr double kTimeEps = 1e-9;

  SegmentList out;
  out.uri = segments.uri;
  out.short_leftovers = segments.short_leftovers;
  for (const Segment& seg : segments.segments) {
    if (seg.duration <= max_len + kTimeEps) {
      out.segments.push_back(seg);
      continue;
    }
    double start = seg.onset;
    double last_start = seg.onset;
    while (start + max_len <= seg.end() + kTimeEps) {
      out.segments.push_back({start, max_len, seg.parent_region});
      last_start = start;
      start += hop;
    }
    if (last_start + max_len < seg.end() - kTimeEps) {
      const double tail = seg.end() - start;
      if (tail + kTimeEps >= min_len) {
        out.segments.push_back({start, tail, seg.parent_region});
      } else {
        const double shifted = seg.end() - max_len;
        if (std::abs(shifted - last_start) > kTimeEps)
          out.segments.push_back({shifted, max_len, seg.parent_region});
      }
    }
  }
  return out;
}

}  // namespace diar
