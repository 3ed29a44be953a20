#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "diar/log.hpp"
#include "diar/segmentation.hpp"
#include "diar/timeline.hpp"

namespace diar {

namespace detail {

// Hungarian algorithm, O(n^2 m). Minimizes total cost of assigning each of
// n rows to a distinct one of m >= n columns. Returns row -> column.
inline std::vector<int> min_cost_assignment(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  const int m = static_cast<int>(cost.cols());
  if (n > m)
    throw std::invalid_argument("min_cost_assignment: rows must be <= cols");
  const double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> match(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, kInf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = match[j0];
      int j1 = -1;
      double delta = kInf;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= m; ++j)
    if (match[j] > 0) row_to_col[match[j] - 1] = j - 1;
  return row_to_col;
}

// Elementary time slice with the set of active speakers on each side.
struct Slice {
  double begin = 0.0;
  double end = 0.0;
  std::vector<int> ref;  // indices into the ref speaker list
  std::vector<int> hyp;
};

inline std::vector<std::string> speaker_list(const TimedLabeling& lab) {
  std::vector<std::string> out;
  for (const std::string& s : lab.speakers()) out.push_back(s);
  return out;
}

// Cuts the union of both labelings into elementary slices at every turn
// boundary. Within a slice the active-speaker sets are constant; a speaker
// with several self-overlapping turns counts once.
inline std::vector<Slice> build_slices(const TimedLabeling& ref,
                                       const TimedLabeling& hyp,
                                       const std::vector<std::string>& ref_spk,
                                       const std::vector<std::string>& hyp_spk) {
  std::vector<double> bounds;
  for (const Turn& t : ref.turns) {
    bounds.push_back(t.onset);
    bounds.push_back(t.end());
  }
  for (const Turn& t : hyp.turns) {
    bounds.push_back(t.onset);
    bounds.push_back(t.end());
  }
  std::sort(bounds.begin(), bounds.end());
  bounds.erase(std::unique(bounds.begin(), bounds.end()), bounds.end());

  auto index_of = [](const std::vector<std::string>& list,
                     const std::string& s) {
    return static_cast<int>(std::lower_bound(list.begin(), list.end(), s) -
                            list.begin());
  };

  std::vector<Slice> slices;
  slices.reserve(bounds.size());
  for (std::size_t b = 0; b + 1 < bounds.size(); ++b) {
    Slice s;
    s.begin = bounds[b];
    s.end = bounds[b + 1];
    if (s.end <= s.begin) continue;
    const double mid = 0.5 * (s.begin + s.end);
    std::vector<char> ref_on(ref_spk.size(), 0), hyp_on(hyp_spk.size(), 0);
    for (const Turn& t : ref.turns)
      if (t.span().contains(mid)) ref_on[index_of(ref_spk, t.label)] = 1;
    for (const Turn& t : hyp.turns)
      if (t.span().contains(mid)) hyp_on[index_of(hyp_spk, t.label)] = 1;
    for (std::size_t i = 0; i < ref_on.size(); ++i)
      if (ref_on[i]) s.ref.push_back(static_cast<int>(i));
    for (std::size_t i = 0; i < hyp_on.size(); ++i)
      if (hyp_on[i]) s.hyp.push_back(static_cast<int>(i));
    if (!s.ref.empty() || !s.hyp.empty()) slices.push_back(s);
  }
  return slices;
}

}  // namespace detail

// Diarization metrics for one conversation. All rate fields are percentages
// of total reference speaker time (overlap counted with multiplicity).
struct FileScore {
  std::string uri;
  double ref_speaker_time = 0.0;  // seconds, DER denominator
  double miss = 0.0;              // %
  double falarm = 0.0;            // %
  double spkerr = 0.0;            // %
  double der = 0.0;               // % = miss + falarm + spkerr
  double jer = 0.0;               // %
  std::optional<double> coverage;
  std::optional<double> purity;
  // Optimal one-to-one reference -> hypothesis speaker mapping.
  std::vector<std::pair<std::string, std::string>> mapping;
};

struct ScoreReport {
  std::vector<FileScore> files;
  // Mean of per-file DERs ("Average DER") and the time-weighted pool over
  // all files. Both are emitted because the aggregation rule is ambiguous
  // in common usage; they coincide for equal-duration files only.
  double der_file_mean = 0.0;
  double der_time_weighted = 0.0;
  double jer_file_mean = 0.0;
  double miss_time_weighted = 0.0;
  double falarm_time_weighted = 0.0;
  double spkerr_time_weighted = 0.0;
};

// DER with no collar, overlap included, optimal speaker mapping. The sweep is
// exact interval arithmetic over all boundary points; no rasterization.
inline FileScore der(const TimedLabeling& ref_in, const TimedLabeling& hyp_in,
                     const std::vector<Interval>& uem = {}) {
  if (!ref_in.uri.empty() && !hyp_in.uri.empty() && ref_in.uri != hyp_in.uri)
    throw std::invalid_argument("der: uri mismatch '" + ref_in.uri + "' vs '" +
                                hyp_in.uri + "'");
  const TimedLabeling ref = uem.empty() ? ref_in : crop(ref_in, uem);
  const TimedLabeling hyp = uem.empty() ? hyp_in : crop(hyp_in, uem);

  const std::vector<std::string> ref_spk = detail::speaker_list(ref);
  const std::vector<std::string> hyp_spk = detail::speaker_list(hyp);
  const auto slices = detail::build_slices(ref, hyp, ref_spk, hyp_spk);

  double total = 0.0;
  for (const auto& s : slices)
    total += (s.end - s.begin) * static_cast<double>(s.ref.size());
  if (total <= 0.0)
    throw std::domain_error("der: no reference speaker time in '" +
                            ref_in.uri + "' (DER undefined)");

  // Joint speaking time per (ref, hyp) speaker pair, and per-speaker totals.
  Eigen::MatrixXd overlap =
      Eigen::MatrixXd::Zero(static_cast<int>(ref_spk.size()),
                            static_cast<int>(hyp_spk.size()));
  std::vector<double> ref_time(ref_spk.size(), 0.0);
  std::vector<double> hyp_time(hyp_spk.size(), 0.0);
  for (const auto& s : slices) {
    const double d = s.end - s.begin;
    for (int r : s.ref) ref_time[static_cast<std::size_t>(r)] += d;
    for (int h : s.hyp) hyp_time[static_cast<std::size_t>(h)] += d;
    for (int r : s.ref)
      for (int h : s.hyp) overlap(r, h) += d;
  }

  // Optimal mapping maximizes total mapped overlap (md-eval behavior).
  std::vector<int> ref_to_hyp(ref_spk.size(), -1);
  if (!ref_spk.empty() && !hyp_spk.empty()) {
    if (ref_spk.size() <= hyp_spk.size()) {
      ref_to_hyp = detail::min_cost_assignment(-overlap);
    } else {
      const std::vector<int> hyp_to_ref =
          detail::min_cost_assignment((-overlap).transpose());
      for (std::size_t h = 0; h < hyp_to_ref.size(); ++h)
        if (hyp_to_ref[h] >= 0)
          ref_to_hyp[static_cast<std::size_t>(hyp_to_ref[h])] =
              static_cast<int>(h);
    }
  }

  double miss_s = 0.0, fa_s = 0.0, err_s = 0.0;
  for (const auto& s : slices) {
    const double d = s.end - s.begin;
    const int r = static_cast<int>(s.ref.size());
    const int h = static_cast<int>(s.hyp.size());
    miss_s += d * std::max(0, r - h);
    fa_s += d * std::max(0, h - r);
    int correct = 0;
    for (int rs : s.ref) {
      const int mapped = ref_to_hyp[static_cast<std::size_t>(rs)];
      if (mapped >= 0 &&
          std::find(s.hyp.begin(), s.hyp.end(), mapped) != s.hyp.end())
        ++correct;
    }
    err_s += d * (std::min(r, h) - correct);
  }

  FileScore out;
  out.uri = ref_in.uri.empty() ? hyp_in.uri : ref_in.uri;
  out.ref_speaker_time = total;
  out.miss = 100.0 * miss_s / total;
  out.falarm = 100.0 * fa_s / total;
  out.spkerr = 100.0 * err_s / total;
  out.der = out.miss + out.falarm + out.spkerr;
  for (std::size_t r = 0; r < ref_spk.size(); ++r)
    if (ref_to_hyp[r] >= 0)
      out.mapping.emplace_back(ref_spk[r],
                               hyp_spk[static_cast<std::size_t>(ref_to_hyp[r])]);

  // JER under the DER-optimal mapping: per reference speaker, one minus the
  // Jaccard index of its time with the mapped hypothesis speaker's time.
  double jer_sum = 0.0;
  for (std::size_t r = 0; r < ref_spk.size(); ++r) {
    double jer_s = 1.0;
    const int h = ref_to_hyp[r];
    if (h >= 0) {
      const double inter = overlap(static_cast<int>(r), h);
      const double uni =
          ref_time[r] + hyp_time[static_cast<std::size_t>(h)] - inter;
      if (uni > 0.0) jer_s = 1.0 - inter / uni;
    }
    jer_sum += jer_s;
  }
  out.jer = ref_spk.empty() ? 0.0
                            : 100.0 * jer_sum / static_cast<double>(ref_spk.size());
  return out;
}

inline double jer(const TimedLabeling& ref, const TimedLabeling& hyp,
                  const std::vector<Interval>& uem = {}) {
  return der(ref, hyp, uem).jer;
}

// Segmentation quality against a reference labeling. Purity: how single-
// speaker the segments are. Coverage: how fully each reference turn is
// covered by its best single segment.
inline std::pair<double, double> coverage_purity(const TimedLabeling& ref,
                                                 const SegmentList& segments) {
  if (ref.turns.empty())
    throw std::invalid_argument("coverage_purity: reference has no turns");

  if (segments.segments.empty()) {
    warn("coverage_purity: empty segment list; purity reported as 1 by convention");
    return {0.0, 1.0};
  }

  // Per-speaker merged reference timelines.
  std::map<std::string, std::vector<Interval>> by_speaker;
  for (const Turn& t : ref.turns) by_speaker[t.label].push_back(t.span());
  for (auto& [spk, ivs] : by_speaker) ivs = merge_intervals(std::move(ivs));

  double seg_total = 0.0, seg_best = 0.0;
  for (const Segment& s : segments.segments) {
    seg_total += s.duration;
    double best = 0.0;
    for (const auto& [spk, ivs] : by_speaker) {
      double ov = 0.0;
      for (const Interval& iv : ivs) ov += intersect(iv, s.span()).duration();
      best = std::max(best, std::max(ov, 0.0));
    }
    seg_best += best;
  }
  const double purity = seg_total > 0.0 ? seg_best / seg_total : 1.0;

  double turn_total = 0.0, turn_best = 0.0;
  for (const Turn& t : ref.turns) {
    turn_total += t.duration;
    double best = 0.0;
    for (const Segment& s : segments.segments)
      best = std::max(best, intersect(t.span(), s.span()).duration());
    turn_best += std::max(best, 0.0);
  }
  const double coverage = turn_total > 0.0 ? turn_best / turn_total : 0.0;
  return {coverage, purity};
}

inline ScoreReport aggregate(std::vector<FileScore> files) {
  ScoreReport rep;
  rep.files = std::move(files);
  if (rep.files.empty()) return rep;
  double time = 0.0, miss_s = 0.0, fa_s = 0.0, err_s = 0.0;
  for (const FileScore& f : rep.files) {
    rep.der_file_mean += f.der;
    rep.jer_file_mean += f.jer;
    time += f.ref_speaker_time;
    miss_s += f.miss / 100.0 * f.ref_speaker_time;
    fa_s += f.falarm / 100.0 * f.ref_speaker_time;
    err_s += f.spkerr / 100.0 * f.ref_speaker_time;
  }
  const double n = static_cast<double>(rep.files.size());
  rep.der_file_mean /= n;
  rep.jer_file_mean /= n;
  if (time > 0.0) {
    rep.miss_time_weighted = 100.0 * miss_s / time;
    rep.falarm_time_weighted = 100.0 * fa_s / time;
    rep.spkerr_time_weighted = 100.0 * err_s / time;
    rep.der_time_weighted = rep.miss_time_weighted +
                            rep.falarm_time_weighted +
                            rep.spkerr_time_weighted;
  }
  return rep;
}

}  // namespace diar
