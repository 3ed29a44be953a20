#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace diar {

// Half-open time interval [begin, end) in seconds.
struct Interval {
  double begin = 0.0;
  double end = 0.0;

  double duration() const { return end - begin; }
  bool empty() const { return end <= begin; }
  bool contains(double t) const { return t >= begin && t < end; }
};

inline Interval intersect(const Interval& a, const Interval& b) {
  return {std::max(a.begin, b.begin), std::min(a.end, b.end)};
}

// One speaker turn: (onset, duration, label).
struct Turn {
  double onset = 0.0;
  double duration = 0.0;
  std::string label;

  double end() const { return onset + duration; }
  Interval span() const { return {onset, onset + duration}; }
};

// A list of labeled turns for one conversation. Serves as SAD input,
// diarization hypothesis, and scoring reference.
struct TimedLabeling {
  std::string uri;
  std::vector<Turn> turns;

  void validate() const {
    for (const Turn& t : turns) {
      if (!(t.duration > 0.0))
        throw std::invalid_argument("TimedLabeling '" + uri +
                                    "': turn duration must be > 0");
      if (!std::isfinite(t.onset) || t.onset < 0.0 || !std::isfinite(t.duration))
        throw std::invalid_argument("TimedLabeling '" + uri +
                                    "': onsets must be finite and >= 0");
    }
  }

  std::vector<Turn> sorted_turns() const {
    std::vector<Turn> out = turns;
    std::sort(out.begin(), out.end(), [](const Turn& a, const Turn& b) {
      if (a.onset != b.onset) return a.onset < b.onset;
      if (a.duration != b.duration) return a.duration < b.duration;
      return a.label < b.label;
    });
    return out;
  }

  std::set<std::string> speakers() const {
    std::set<std::string> out;
    for (const Turn& t : turns) out.insert(t.label);
    return out;
  }

  double extent() const {
    double e = 0.0;
    for (const Turn& t : turns) e = std::max(e, t.end());
    return e;
  }
};

// Union of intervals, merged into disjoint sorted pieces. Adjacent pieces
// (gap <= eps) are coalesced.
inline std::vector<Interval> merge_intervals(std::vector<Interval> in,
                                             double eps = 0.0) {
  std::vector<Interval> out;
  std::erase_if(in, [](const Interval& iv) { return iv.empty(); });
  std::sort(in.begin(), in.end(), [](const Interval& a, const Interval& b) {
    return a.begin != b.begin ? a.begin < b.begin : a.end < b.end;
  });
  for (const Interval& iv : in) {
    if (!out.empty() && iv.begin <= out.back().end + eps)
      out.back().end = std::max(out.back().end, iv.end);
    else
      out.push_back(iv);
  }
  return out;
}

inline std::vector<Interval> intersect_timelines(
    const std::vector<Interval>& a, const std::vector<Interval>& b) {
  std::vector<Interval> out;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    Interval iv = intersect(a[i], b[j]);
    if (!iv.empty()) out.push_back(iv);
    if (a[i].end < b[j].end)
      ++i;
    else
      ++j;
  }
  return out;
}

inline double total_duration(const std::vector<Interval>& merged) {
  double d = 0.0;
  for (const Interval& iv : merged) d += iv.duration();
  return d;
}

// Turns clipped to a set of scoring regions. Turns outside every region drop
// out; turns straddling a region boundary are trimmed.
inline TimedLabeling crop(const TimedLabeling& labeling,
                          const std::vector<Interval>& regions) {
  TimedLabeling out;
  out.uri = labeling.uri;
  for (const Turn& t : labeling.turns) {
    for (const Interval& r : regions) {
      Interval iv = intersect(t.span(), r);
      if (!iv.empty()) out.turns.push_back({iv.begin, iv.duration(), t.label});
    }
  }
  return out;
}

}  // namespace diar
