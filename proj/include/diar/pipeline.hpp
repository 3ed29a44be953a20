#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "diar/audio.hpp"
#include "diar/clustering.hpp"
#include "diar/domain.hpp"
#include "diar/embeddings.hpp"
#include "diar/features.hpp"
#include "diar/io.hpp"
#include "diar/log.hpp"
#include "diar/resegmentation.hpp"
#include "diar/scoring.hpp"
#include "diar/segmentation.hpp"
#include "diar/timeline.hpp"

namespace diar {

struct SubsegmentGeometry {
  double max_len = 2.0;
  double overlap = 1.0;
  double min_len = 0.5;
};

// Everything a corpus run needs. Directory layout under corpus_dir:
//   wav/<uri>.wav          sad/<uri>.rttm (or .lab)   ref/<uri>.rttm
//   tracks/<uri>.track     emb/<uri>.<engine>.<kind>.dmat
//   models/{whiten_global,whiten_block}.dwhiten
//   models/{plda_sd,plda_kaldi}.dplda  models/{stage1,stage2}.dmlp
//   conv/<uri>.dmat        registry.json              uem/<uri>.uem
struct RunConfig {
  std::filesystem::path corpus_dir;
  std::filesystem::path output_dir;

  SubsegmentGeometry sd_geometry{2.0, 1.0, 0.5};
  SubsegmentGeometry kaldi_geometry{1.5, 0.75, 0.5};
  double min_segment = 0.5;        // SCD minimum piece duration
  double scd_window = 1.0;         // fallback detector window
  double kaldi_ahc_threshold = 0.0;  // on -LLR; merge while LLR > 0
  LfccConfig lfcc;
  std::uint32_t seed = 7321;
  int workers = 1;
  // Late-combination overrides: domain label -> engine.
  std::map<std::string, Engine> engine_overrides;

  std::filesystem::path wav_path(const std::string& uri) const {
    return corpus_dir / "wav" / (uri + ".wav");
  }
  std::filesystem::path sad_rttm_path(const std::string& uri) const {
    return corpus_dir / "sad" / (uri + ".rttm");
  }
  std::filesystem::path sad_label_path(const std::string& uri) const {
    return corpus_dir / "sad" / (uri + ".lab");
  }
  std::filesystem::path ref_path(const std::string& uri) const {
    return corpus_dir / "ref" / (uri + ".rttm");
  }
  std::filesystem::path track_path(const std::string& uri) const {
    return corpus_dir / "tracks" / (uri + ".track");
  }
  std::filesystem::path emb_path(const std::string& uri, Engine engine,
                                 EmbeddingKind kind) const {
    const std::string k = kind == EmbeddingKind::IVEC ? "ivec" : "xvec";
    return corpus_dir / "emb" / (uri + "." + to_string(engine) + "." + k + ".dmat");
  }
  std::filesystem::path conv_vector_path(const std::string& uri) const {
    return corpus_dir / "conv" / (uri + ".dmat");
  }
  std::filesystem::path whiten_path(Engine engine) const {
    return corpus_dir / "models" /
           (engine == Engine::SD ? "whiten_global.dwhiten" : "whiten_block.dwhiten");
  }
  std::filesystem::path plda_path(Engine engine) const {
    return corpus_dir / "models" /
           (engine == Engine::SD ? "plda_sd.dplda" : "plda_kaldi.dplda");
  }
  std::filesystem::path registry_path() const { return corpus_dir / "registry.json"; }
  std::filesystem::path stage1_path() const { return corpus_dir / "models" / "stage1.dmlp"; }
  std::filesystem::path stage2_path() const { return corpus_dir / "models" / "stage2.dmlp"; }

  void validate() const {
    namespace fs = std::filesystem;
    if (!fs::exists(corpus_dir / "sad"))
      throw std::invalid_argument("RunConfig: missing SAD directory under '" +
                                  corpus_dir.string() + "'");
  }
};

struct EngineResult {
  std::string uri;
  Engine engine = Engine::SD;
  TimedLabeling hypothesis;
  struct Diagnostics {
    int cluster_count = 0;
    double threshold_used = 0.0;
    std::string notes;
  } diagnostics;
};

namespace detail {

inline TimedLabeling load_sad(const RunConfig& cfg, const std::string& uri) {
  namespace fs = std::filesystem;
  if (fs::exists(cfg.sad_rttm_path(uri))) {
    auto all = read_rttm(cfg.sad_rttm_path(uri).string());
    auto it = all.find(uri);
    if (it == all.end())
      throw std::runtime_error("SAD RTTM for '" + uri + "' does not mention it");
    return it->second;
  }
  if (fs::exists(cfg.sad_label_path(uri)))
    return read_label_file(cfg.sad_label_path(uri).string(), uri);
  throw std::runtime_error("no SAD input for '" + uri + "' under " +
                           (cfg.corpus_dir / "sad").string());
}

inline std::string speaker_name(int cluster) {
  return "spk" + std::to_string(cluster);
}

inline TimedLabeling single_speaker_hypothesis(const TimedLabeling& sad) {
  TimedLabeling hyp;
  hyp.uri = sad.uri;
  for (const Segment& s : speech_regions(sad).segments)
    hyp.turns.push_back({s.onset, s.duration, speaker_name(0)});
  return hyp;
}

// Labeled subsegments to turns: same-label neighbors merge, and an overlap
// between differently labeled neighbors splits at its midpoint.
inline TimedLabeling subsegments_to_turns(const SegmentList& subs,
                                          const std::vector<int>& labels,
                                          const std::string& uri) {
  struct Piece {
    double begin, end;
    int label;
  };
  std::vector<Piece> pieces;
  for (std::size_t i = 0; i < subs.segments.size(); ++i)
    pieces.push_back({subs.segments[i].onset, subs.segments[i].end(),
                      labels[i]});
  std::sort(pieces.begin(), pieces.end(), [](const Piece& a, const Piece& b) {
    return a.begin != b.begin ? a.begin < b.begin : a.end < b.end;
  });
  for (std::size_t i = 0; i + 1 < pieces.size(); ++i) {
    auto& cur = pieces[i];
    auto& nxt = pieces[i + 1];
    if (nxt.begin < cur.end && cur.label != nxt.label) {
      const double mid = 0.5 * (nxt.begin + cur.end);
      cur.end = mid;
      nxt.begin = mid;
    }
  }
  TimedLabeling out;
  out.uri = uri;
  for (const Piece& p : pieces) {
    if (p.end <= p.begin) continue;
    if (!out.turns.empty() && out.turns.back().label == speaker_name(p.label) &&
        p.begin <= out.turns.back().end() + 1e-9) {
      const double end = std::max(out.turns.back().end(), p.end);
      out.turns.back().duration = end - out.turns.back().onset;
    } else {
      out.turns.push_back({p.begin, p.end - p.begin, speaker_name(p.label)});
    }
  }
  return out;
}

inline void check_within_sad(const TimedLabeling& hyp, const TimedLabeling& sad) {
  std::vector<Interval> speech;
  for (const Segment& s : speech_regions(sad).segments) speech.push_back(s.span());
  for (const Turn& t : hyp.turns) {
    bool inside = false;
    for (const Interval& r : speech)
      if (t.onset >= r.begin - 1e-6 && t.end() <= r.end + 1e-6) {
        inside = true;
        break;
      }
    if (!inside)
      throw std::logic_error("hypothesis turn [" + std::to_string(t.onset) + ", " +
                             std::to_string(t.end()) + ") of '" + hyp.uri +
                             "' spills outside SAD speech");
  }
}

}  // namespace detail

// The paper-style engine: SCD segmentation, 2 s / 1 s subsegments, xi-vector
// fusion, dev-mean whitening, conversation PCA, per-domain clustering, GMM
// resegmentation. A NONE-clustering profile short-circuits to the reference
// SAD relabeled as one speaker.
inline EngineResult run_sd(const std::string& uri, const RunConfig& cfg,
                           const DomainProfile& profile) {
  namespace fs = std::filesystem;
  EngineResult result;
  result.uri = uri;
  result.engine = Engine::SD;

  const TimedLabeling sad = detail::load_sad(cfg, uri);
  if (profile.clustering == ClusteringMethod::NONE) {
    result.hypothesis = detail::single_speaker_hypothesis(sad);
    result.diagnostics.cluster_count = 1;
    result.diagnostics.notes = "single-speaker short circuit";
    detail::check_within_sad(result.hypothesis, sad);
    return result;
  }

  const SegmentList regions = speech_regions(sad);
  if (regions.segments.empty()) {
    result.hypothesis.uri = uri;
    result.diagnostics.notes = "empty SAD";
    return result;
  }

  FeatureMatrix features;
  try {
    features = apply_cmn(extract_lfcc(read_wav(cfg.wav_path(uri).string()), cfg.lfcc));
  } catch (const std::exception& e) {
    throw std::runtime_error("run_sd[features] " + uri + ": " + e.what());
  }

  SegmentList subs;
  try {
    ChangeScoreTrack track;
    if (fs::exists(cfg.track_path(uri)))
      track = read_track(cfg.track_path(uri).string());
    else
      track = fallback_change_scores(features, cfg.scd_window);
    const SegmentList cut =
        cut_at_changes(regions, track, profile.scd_threshold, cfg.min_segment);
    subs = uniform_subsegment(cut, cfg.sd_geometry.max_len, cfg.sd_geometry.overlap,
                              cfg.sd_geometry.min_len);
  } catch (const std::exception& e) {
    throw std::runtime_error("run_sd[segmentation] " + uri + ": " + e.what());
  }
  if (subs.segments.empty()) {
    warn("run_sd: no clusterable segments for '" + uri + "'");
    result.hypothesis = detail::single_speaker_hypothesis(sad);
    result.diagnostics.cluster_count = 1;
    result.diagnostics.notes = "no clusterable segments; single-speaker fallback";
    return result;
  }

  EmbeddingSet embedded;
  try {
    const EmbeddingSet xvecs = load_embeddings(
        cfg.emb_path(uri, Engine::SD, EmbeddingKind::XVEC).string(),
        EmbeddingKind::XVEC, subs, uri);
    const EmbeddingSet ivecs = load_embeddings(
        cfg.emb_path(uri, Engine::SD, EmbeddingKind::IVEC).string(),
        EmbeddingKind::IVEC, subs, uri);
    embedded = fuse_xi(ivecs, xvecs);
    if (fs::exists(cfg.whiten_path(Engine::SD)))
      embedded = apply_whiten(embedded, read_whiten(cfg.whiten_path(Engine::SD).string()));
    else
      warn("run_sd: no whitening model for '" + uri + "'; skipping whitening");
    if (profile.pca_dim > 0)
      embedded = apply_pca(embedded, fit_conversation_pca(embedded, profile.pca_dim));
  } catch (const std::exception& e) {
    throw std::runtime_error("run_sd[embeddings] " + uri + ": " + e.what());
  }

  ClusterAssignment clusters;
  try {
    if (profile.clustering == ClusteringMethod::AHC) {
      clusters = ahc(cosine_distance_matrix(embedded), profile.ahc_threshold,
                     profile.k_min, profile.k_max);
      result.diagnostics.threshold_used = profile.ahc_threshold;
    } else {
      const PldaModel plda = read_plda(cfg.plda_path(Engine::SD).string());
      clusters = k_medoids(plda_distance_matrix(plda, embedded), profile.k);
    }
  } catch (const std::exception& e) {
    throw std::runtime_error("run_sd[clustering] " + uri + ": " + e.what());
  }
  result.diagnostics.cluster_count = clusters.k;

  try {
    const TimedLabeling initial =
        detail::subsegments_to_turns(subs, clusters.labels, uri);

    // One GMM per cluster over the frames inside its subsegments.
    std::vector<GmmModel> models;
    std::vector<std::string> names;
    const auto num_frames = features.num_frames();
    for (int c = 0; c < clusters.k; ++c) {
      std::vector<Interval> spans;
      for (std::size_t i = 0; i < subs.segments.size(); ++i)
        if (clusters.labels[i] == c) spans.push_back(subs.segments[i].span());
      spans = merge_intervals(std::move(spans));
      std::vector<Eigen::Index> rows;
      for (Eigen::Index f = 0; f < num_frames; ++f) {
        const double t = features.frame_shift * static_cast<double>(f);
        for (const Interval& iv : spans)
          if (iv.contains(t)) {
            rows.push_back(f);
            break;
          }
      }
      Eigen::MatrixXd frames(static_cast<Eigen::Index>(rows.size()), features.dim());
      for (std::size_t r = 0; r < rows.size(); ++r)
        frames.row(static_cast<Eigen::Index>(r)) = features.frames.row(rows[r]);
      if (rows.empty()) {
        warn("run_sd: cluster " + std::to_string(c) + " of '" + uri +
             "' has no frames; using whole-conversation statistics");
        frames = features.frames;
      }
      GmmFitOptions opts;
      opts.seed = cfg.seed;
      models.push_back(
          fit_gmm(frames, component_count(static_cast<std::size_t>(frames.rows()),
                                          features.frame_shift),
                  opts));
      names.push_back(detail::speaker_name(c));
    }

    const LikelihoodTracks tracks =
        smooth_tracks(evaluate_tracks(models, names, features));
    result.hypothesis = reassign_frames(tracks, sad, &initial);
  } catch (const std::exception& e) {
    throw std::runtime_error("run_sd[resegmentation] " + uri + ": " + e.what());
  }

  detail::check_within_sad(result.hypothesis, sad);
  return result;
}

// The Kaldi-recipe engine: uniform 1.5 s / 0.75 s subsegments straight from
// the SAD regions, block-concatenated whitening, PLDA-distance AHC with one
// global threshold, no resegmentation.
inline EngineResult run_kaldi_style(const std::string& uri, const RunConfig& cfg) {
  EngineResult result;
  result.uri = uri;
  result.engine = Engine::KALDI;
  result.diagnostics.threshold_used = cfg.kaldi_ahc_threshold;

  const TimedLabeling sad = detail::load_sad(cfg, uri);
  const SegmentList regions = speech_regions(sad);
  if (regions.segments.empty()) {
    result.hypothesis.uri = uri;
    result.diagnostics.notes = "empty SAD";
    return result;
  }

  SegmentList subs;
  EmbeddingSet embedded;
  try {
    subs = uniform_subsegment(regions, cfg.kaldi_geometry.max_len,
                              cfg.kaldi_geometry.overlap, cfg.kaldi_geometry.min_len);
    const EmbeddingSet xvecs = load_embeddings(
        cfg.emb_path(uri, Engine::KALDI, EmbeddingKind::XVEC).string(),
        EmbeddingKind::XVEC, subs, uri);
    const EmbeddingSet ivecs = load_embeddings(
        cfg.emb_path(uri, Engine::KALDI, EmbeddingKind::IVEC).string(),
        EmbeddingKind::IVEC, subs, uri);
    embedded = fuse_xi(ivecs, xvecs);
    embedded = apply_whiten(
        embedded, read_whiten(cfg.whiten_path(Engine::KALDI).string()));
  } catch (const std::exception& e) {
    throw std::runtime_error("run_kaldi[embeddings] " + uri + ": " + e.what());
  }

  try {
    const PldaModel plda = read_plda(cfg.plda_path(Engine::KALDI).string());
    DistanceMatrix dist = plda_distance_matrix(plda, embedded, false);
    const ClusterAssignment clusters =
        ahc(dist, cfg.kaldi_ahc_threshold, 1,
            static_cast<int>(subs.segments.size()));
    result.diagnostics.cluster_count = clusters.k;
    result.hypothesis = detail::subsegments_to_turns(subs, clusters.labels, uri);
  } catch (const std::exception& e) {
    throw std::runtime_error("run_kaldi[clustering] " + uri + ": " + e.what());
  }

  detail::check_within_sad(result.hypothesis, sad);
  return result;
}

// Late system combination: the Kaldi result replaces SD for conversations
// whose (classified) domain routes to it; the selection table lives in the
// registry's engine column with per-run overrides.
inline EngineResult combine(const DomainDecision& decision,
                            const EngineResult* sd, const EngineResult* kaldi,
                            const DomainRegistry& registry,
                            const std::map<std::string, Engine>& overrides = {}) {
  Engine engine = Engine::SD;
  if (auto it = overrides.find(decision.label); it != overrides.end())
    engine = it->second;
  else if (decision.label != kSingleSpeaker)
    engine = registry.profile_for(decision.label).engine;

  const EngineResult* chosen = engine == Engine::SD ? sd : kaldi;
  if (chosen == nullptr)
    throw std::invalid_argument("combine: missing " + to_string(engine) +
                                " result for domain '" + decision.label + "'");
  return *chosen;
}

// ---------------------------------------------------------------------------
// Synthetic corpus generation (test utility; DIHARD audio is not
// redistributable, so end-to-end runs use scripted conversations).
// ---------------------------------------------------------------------------

struct SynthConfig {
  int num_conversations = 1;
  int num_speakers = 3;
  double duration = 300.0;
  double mean_separation = 6.0;  // inter-speaker mean distance, in within-class sigmas
  double within_sigma = 1.0;
  int xvec_dim = 16;
  int ivec_dim = 16;
  double turn_min = 2.0;
  double turn_max = 8.0;
  double gap_prob = 0.35;
  double gap_min = 0.3;
  double gap_max = 1.0;
  int sample_rate = 16000;
  std::uint32_t seed = 42;
  int dev_speakers = 12;
  int dev_samples_per_speaker = 40;
};

namespace detail {

// Portable deterministic RNG: raw mt19937_64 words mapped to doubles, plus
// Box-Muller normals; keeps generated corpora identical across library
// implementations.
class SynthRng {
 public:
  explicit SynthRng(std::uint64_t seed) : eng_(seed) {}

  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int uniform_int(int n) {
    return std::min(n - 1, static_cast<int>(uniform() * n));
  }
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform(), u2 = uniform();
    if (u1 <= 1e-300) u1 = 1e-300;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

inline Eigen::VectorXd speaker_mean(const SynthConfig& cfg, int speaker, int dim) {
  // Axis-aligned means sep/sqrt(2) out give exact pairwise distance `sep`.
  Eigen::VectorXd m = Eigen::VectorXd::Zero(dim);
  const double radius =
      cfg.mean_separation * cfg.within_sigma / std::numbers::sqrt2;
  m(speaker % dim) = radius * (1 + speaker / dim);
  return m;
}

struct SynthTimeline {
  std::vector<Turn> turns;            // reference speaker turns
  std::vector<double> internal_changes;  // boundaries inside speech regions
};

inline SynthTimeline synth_timeline(const SynthConfig& cfg, SynthRng& rng) {
  SynthTimeline out;
  double t = rng.uniform(0.2, 0.8);
  int prev = -1;
  int forced = 0;  // first pass gives every speaker at least one turn
  while (t < cfg.duration) {
    int spk;
    if (forced < cfg.num_speakers) {
      spk = forced++;
    } else {
      do {
        spk = rng.uniform_int(cfg.num_speakers);
      } while (spk == prev && cfg.num_speakers > 1);
    }
    const double len = rng.uniform(cfg.turn_min, cfg.turn_max);
    const double end = std::min(t + len, cfg.duration);
    if (end - t < 0.8) break;
    out.turns.push_back({t, end - t, "ref" + std::to_string(spk)});
    prev = spk;
    t = end;
    if (rng.uniform() < cfg.gap_prob) {
      t += rng.uniform(cfg.gap_min, cfg.gap_max);
    } else if (out.turns.size() >= 2 && t < cfg.duration - 1.0) {
      out.internal_changes.push_back(t);
    }
  }
  return out;
}

inline void synth_audio(const SynthConfig& cfg, const SynthTimeline& timeline,
                        SynthRng& rng, const std::string& path) {
  AudioBuffer audio;
  audio.sample_rate = cfg.sample_rate;
  const auto total =
      static_cast<std::size_t>(std::lround(cfg.duration * cfg.sample_rate));
  audio.samples.assign(total, 0.0);
  for (const Turn& turn : timeline.turns) {
    const int spk = std::stoi(turn.label.substr(3));
    const double base = 220.0 + 130.0 * spk;
    const auto begin = static_cast<std::size_t>(std::lround(turn.onset * cfg.sample_rate));
    const auto end = std::min(
        total, static_cast<std::size_t>(std::lround(turn.end() * cfg.sample_rate)));
    for (std::size_t i = begin; i < end; ++i) {
      const double ts = static_cast<double>(i) / cfg.sample_rate;
      double v = 0.30 * std::sin(2.0 * std::numbers::pi * base * ts) +
                 0.18 * std::sin(2.0 * std::numbers::pi * base * 2.4 * ts) +
                 0.10 * std::sin(2.0 * std::numbers::pi * base * 3.9 * ts);
      v += 0.01 * (rng.uniform() - 0.5);
      audio.samples[i] = v;
    }
  }
  write_wav(path, audio);
}

inline ChangeScoreTrack synth_track(const SynthConfig& cfg,
                                    const SynthTimeline& timeline) {
  ChangeScoreTrack track;
  track.step = 0.01;
  track.offset = 0.0;
  const auto n = static_cast<std::size_t>(std::ceil(cfg.duration / track.step)) + 1;
  track.scores.assign(n, 0.0);
  for (double c : timeline.internal_changes) {
    const auto i = static_cast<std::size_t>(std::lround(c / track.step));
    if (i < n) track.scores[i] = 0.9;
  }
  return track;
}

inline int dominant_speaker(const SynthTimeline& timeline, const Interval& span) {
  std::map<int, double> overlap;
  for (const Turn& t : timeline.turns) {
    const double ov = intersect(t.span(), span).duration();
    if (ov > 0.0) overlap[std::stoi(t.label.substr(3))] += ov;
  }
  int best = 0;
  double best_ov = -1.0;
  for (const auto& [spk, ov] : overlap)
    if (ov > best_ov) {
      best_ov = ov;
      best = spk;
    }
  return best;
}

inline Eigen::MatrixXd synth_embeddings(const SynthConfig& cfg,
                                        const SynthTimeline& timeline,
                                        const SegmentList& subs, int dim,
                                        int block_offset, SynthRng& rng) {
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(subs.segments.size()), dim);
  for (std::size_t i = 0; i < subs.segments.size(); ++i) {
    const int spk = dominant_speaker(timeline, subs.segments[i].span());
    Eigen::VectorXd v = speaker_mean(cfg, spk + block_offset, dim);
    for (int d = 0; d < dim; ++d) v(d) += cfg.within_sigma * rng.normal();
    rows.row(static_cast<Eigen::Index>(i)) = v.transpose();
  }
  return rows;
}

}  // namespace detail

// Writes a complete synthetic corpus tree (audio, SAD, reference, change
// tracks, engine-aligned embeddings, whitening/PLDA models, registry) under
// cfg.corpus_dir. Returns the generated uris.
inline std::vector<std::string> gen_synth(const SynthConfig& synth,
                                          const RunConfig& cfg) {
  namespace fs = std::filesystem;
  for (const char* sub :
       {"wav", "sad", "ref", "tracks", "emb", "models", "conv", "uem"})
    fs::create_directories(cfg.corpus_dir / sub);

  std::vector<std::string> uris;
  detail::SynthRng rng(synth.seed);

  for (int conv = 0; conv < synth.num_conversations; ++conv) {
    const std::string uri = "synth" + std::to_string(conv);
    uris.push_back(uri);

    const detail::SynthTimeline timeline = detail::synth_timeline(synth, rng);
    if (timeline.turns.empty())
      throw std::runtime_error("gen_synth: degenerate timeline for " + uri);

    TimedLabeling ref;
    ref.uri = uri;
    ref.turns = timeline.turns;
    write_rttm((cfg.corpus_dir / "ref" / (uri + ".rttm")).string(), ref);

    TimedLabeling sad;
    sad.uri = uri;
    std::vector<Interval> speech;
    for (const Turn& t : timeline.turns) speech.push_back(t.span());
    for (const Interval& iv : merge_intervals(std::move(speech), 1e-6))
      sad.turns.push_back({iv.begin, iv.duration(), "speech"});
    write_rttm((cfg.corpus_dir / "sad" / (uri + ".rttm")).string(), sad);
    write_uem((cfg.corpus_dir / "uem" / (uri + ".uem")).string(), uri,
              {{0.0, synth.duration}});

    detail::synth_audio(synth, timeline, rng,
                        (cfg.corpus_dir / "wav" / (uri + ".wav")).string());
    const ChangeScoreTrack track = detail::synth_track(synth, timeline);
    write_track((cfg.corpus_dir / "tracks" / (uri + ".track")).string(), track);

    // Embeddings aligned with the exact subsegment lists each engine builds.
    const SegmentList regions = speech_regions(sad);
    const SegmentList cut = cut_at_changes(regions, track, 0.5, cfg.min_segment);
    const SegmentList sd_subs =
        uniform_subsegment(cut, cfg.sd_geometry.max_len, cfg.sd_geometry.overlap,
                           cfg.sd_geometry.min_len);
    const SegmentList kaldi_subs = uniform_subsegment(
        regions, cfg.kaldi_geometry.max_len, cfg.kaldi_geometry.overlap,
        cfg.kaldi_geometry.min_len);
    const std::array<std::pair<Engine, const SegmentList*>, 2> engine_subs{
        {{Engine::SD, &sd_subs}, {Engine::KALDI, &kaldi_subs}}};
    for (const auto& [engine, subs] : engine_subs) {
      write_matrix(cfg.emb_path(uri, engine, EmbeddingKind::XVEC).string(),
                   detail::synth_embeddings(synth, timeline, *subs,
                                            synth.xvec_dim, 0, rng));
      write_matrix(cfg.emb_path(uri, engine, EmbeddingKind::IVEC).string(),
                   detail::synth_embeddings(synth, timeline, *subs,
                                            synth.ivec_dim, 1, rng));
    }

    // Conversation-level vector: mean of the SD xi-vectors (extractor-free
    // fallback input for the domain classifier).
    const Eigen::MatrixXd xv =
        read_matrix(cfg.emb_path(uri, Engine::SD, EmbeddingKind::XVEC).string());
    const Eigen::MatrixXd iv =
        read_matrix(cfg.emb_path(uri, Engine::SD, EmbeddingKind::IVEC).string());
    Eigen::MatrixXd conv_vec(1, xv.cols() + iv.cols());
    conv_vec << xv.colwise().mean(), iv.colwise().mean();
    write_matrix(cfg.conv_vector_path(uri).string(), conv_vec);
  }

  // Development set: fresh speakers from the same generative family, used to
  // fit whitening and both PLDA backends.
  const int xi_dim = synth.xvec_dim + synth.ivec_dim;
  const int n_dev = synth.dev_speakers * synth.dev_samples_per_speaker;
  Eigen::MatrixXd dev(n_dev, xi_dim);
  std::vector<int> dev_labels(static_cast<std::size_t>(n_dev));
  const double radius =
      synth.mean_separation * synth.within_sigma / std::numbers::sqrt2;
  for (int s = 0; s < synth.dev_speakers; ++s) {
    Eigen::VectorXd mean(xi_dim);
    for (int d = 0; d < xi_dim; ++d) mean(d) = radius * rng.normal();
    for (int i = 0; i < synth.dev_samples_per_speaker; ++i) {
      const int row = s * synth.dev_samples_per_speaker + i;
      for (int d = 0; d < xi_dim; ++d)
        dev(row, d) = mean(d) + synth.within_sigma * rng.normal();
      dev_labels[static_cast<std::size_t>(row)] = s;
    }
  }
  EmbeddingSet dev_set;
  dev_set.uri = "dev";
  dev_set.kind = EmbeddingKind::XI;
  dev_set.dim = xi_dim;
  dev_set.block_dims = {synth.xvec_dim, synth.ivec_dim};
  for (int r = 0; r < n_dev; ++r)
    dev_set.entries.push_back({0.0, 1.0, dev.row(r).transpose()});

  const WhitenModel whiten_global = fit_whiten(dev_set, WhitenStrategy::GLOBAL_MEAN);
  const WhitenModel whiten_block = fit_whiten(dev_set, WhitenStrategy::BLOCK_CONCAT);
  write_whiten(cfg.whiten_path(Engine::SD).string(), whiten_global);
  write_whiten(cfg.whiten_path(Engine::KALDI).string(), whiten_block);

  const EmbeddingSet dev_sd = apply_whiten(dev_set, whiten_global);
  const EmbeddingSet dev_kaldi = apply_whiten(dev_set, whiten_block);
  write_plda(cfg.plda_path(Engine::SD).string(),
             fit_plda(dev_sd.matrix(), dev_labels));
  write_plda(cfg.plda_path(Engine::KALDI).string(),
             fit_plda(dev_kaldi.matrix(), dev_labels));

  // Registry: the production table plus a row for this synthetic domain.
  DomainRegistry registry = default_registry();
  DomainProfile synthetic;
  synthetic.name = "synthetic";
  synthetic.clustering = ClusteringMethod::AHC;
  synthetic.k_min = 2;
  synthetic.k_max = std::max(2, synth.num_speakers + 1);
  synthetic.ahc_threshold = 0.5;
  synthetic.pca_dim = std::min(6, xi_dim);
  registry.add(synthetic);
  write_registry(cfg.registry_path().string(), registry);

  return uris;
}

// ---------------------------------------------------------------------------
// Corpus driver
// ---------------------------------------------------------------------------

enum class EnginePolicy { SD_ONLY, KALDI_ONLY, COMBINE };

struct CorpusRunSummary {
  std::vector<std::string> uris;
  std::vector<EngineResult> results;
};

inline std::vector<std::string> list_corpus_uris(const RunConfig& cfg) {
  namespace fs = std::filesystem;
  std::vector<std::string> uris;
  const fs::path sad_dir = cfg.corpus_dir / "sad";
  if (!fs::exists(sad_dir)) return uris;
  for (const auto& entry : fs::directory_iterator(sad_dir)) {
    if (!entry.is_regular_file()) continue;
    const fs::path p = entry.path();
    if (p.extension() == ".rttm" || p.extension() == ".lab")
      uris.push_back(p.stem().string());
  }
  std::sort(uris.begin(), uris.end());
  uris.erase(std::unique(uris.begin(), uris.end()), uris.end());
  return uris;
}

// Domain decision for one conversation: the two-stage classifier when its
// models are present, otherwise the forced profile name.
inline DomainDecision decide_domain(const std::string& uri, const RunConfig& cfg,
                                    const std::string& forced_profile) {
  namespace fs = std::filesystem;
  if (!forced_profile.empty()) {
    DomainDecision d;
    d.label = forced_profile;
    return d;
  }
  if (fs::exists(cfg.stage1_path()) && fs::exists(cfg.stage2_path())) {
    if (!fs::exists(cfg.conv_vector_path(uri)))
      throw std::runtime_error("classify: no conversation vector for '" + uri + "'");
    const MlpModel stage1 = read_mlp(cfg.stage1_path().string());
    const MlpModel stage2 = read_mlp(cfg.stage2_path().string());
    const Eigen::MatrixXd v = read_matrix(cfg.conv_vector_path(uri).string());
    return classify_domain(stage1, stage2, v.row(0).transpose());
  }
  warn("decide_domain: no classifier models; treating '" + uri +
       "' as unknown domain");
  DomainDecision d;
  d.label = kUnknownDomain;
  return d;
}

// Runs the configured engines over every conversation in the corpus and
// writes <output_dir>/rttm/<uri>.rttm. Conversations are processed by a
// small worker pool; outputs are written by the caller thread in uri order,
// so identical inputs and seed give a byte-identical output tree.
inline CorpusRunSummary run_corpus(const RunConfig& cfg, EnginePolicy policy,
                                   const std::string& forced_profile = "") {
  namespace fs = std::filesystem;
  cfg.validate();
  const DomainRegistry registry =
      fs::exists(cfg.registry_path())
          ? read_registry(cfg.registry_path().string())
          : default_registry();

  CorpusRunSummary summary;
  summary.uris = list_corpus_uris(cfg);

  auto run_one = [&](const std::string& uri) -> EngineResult {
    const DomainDecision decision = decide_domain(uri, cfg, forced_profile);
    const DomainProfile* profile = nullptr;
    if (decision.label == kSingleSpeaker) {
      static const DomainProfile kSingle = [] {
        DomainProfile p;
        p.name = kSingleSpeaker;
        p.clustering = ClusteringMethod::NONE;
        return p;
      }();
      profile = &kSingle;
    } else {
      profile = &registry.profile_for(decision.label);
    }

    switch (policy) {
      case EnginePolicy::SD_ONLY:
        return run_sd(uri, cfg, *profile);
      case EnginePolicy::KALDI_ONLY:
        return run_kaldi_style(uri, cfg);
      case EnginePolicy::COMBINE: {
        const EngineResult sd = run_sd(uri, cfg, *profile);
        if (decision.label == kSingleSpeaker)
          return combine(decision, &sd, nullptr, registry, cfg.engine_overrides);
        const EngineResult kaldi = run_kaldi_style(uri, cfg);
        return combine(decision, &sd, &kaldi, registry, cfg.engine_overrides);
      }
    }
    throw std::logic_error("run_corpus: unknown engine policy");
  };

  const int workers = std::max(1, cfg.workers);
  summary.results.resize(summary.uris.size());
  for (std::size_t at = 0; at < summary.uris.size();
       at += static_cast<std::size_t>(workers)) {
    const std::size_t chunk_end =
        std::min(summary.uris.size(), at + static_cast<std::size_t>(workers));
    std::vector<std::future<EngineResult>> futures;
    for (std::size_t i = at; i < chunk_end; ++i)
      futures.push_back(std::async(std::launch::async, run_one, summary.uris[i]));
    for (std::size_t i = at; i < chunk_end; ++i)
      summary.results[i] = futures[i - at].get();
  }

  fs::create_directories(cfg.output_dir / "rttm");
  for (std::size_t i = 0; i < summary.uris.size(); ++i)
    write_rttm((cfg.output_dir / "rttm" / (summary.uris[i] + ".rttm")).string(),
               summary.results[i].hypothesis);
  return summary;
}

}  // namespace diar
