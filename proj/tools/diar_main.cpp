// Command-line front end: full pipeline runs, metrics, and the individual
// stages as standalone verbs.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "diar/diar.hpp"

namespace fs = std::filesystem;
using namespace diar;

namespace {

TimedLabeling load_labeling(const std::string& path, const std::string& uri) {
  if (fs::path(path).extension() == ".lab") return read_label_file(path, uri);
  const auto all = read_rttm(path);
  if (!uri.empty()) {
    auto it = all.find(uri);
    if (it == all.end())
      throw std::runtime_error("'" + path + "' has no records for uri '" + uri + "'");
    return it->second;
  }
  if (all.size() != 1)
    throw std::runtime_error("'" + path + "' holds " + std::to_string(all.size()) +
                             " conversations; pass --uri");
  return all.begin()->second;
}

// ref/hyp may be single RTTM files or directories of <uri>.rttm.
std::map<std::string, TimedLabeling> load_labeling_set(const std::string& path) {
  std::map<std::string, TimedLabeling> out;
  if (fs::is_directory(path)) {
    for (const auto& entry : fs::directory_iterator(path)) {
      if (entry.path().extension() != ".rttm") continue;
      for (auto& [uri, lab] : read_rttm(entry.path().string())) out[uri] = lab;
    }
    return out;
  }
  return read_rttm(path);
}

int cmd_score(const std::string& ref_path, const std::string& hyp_path,
              const std::string& uem_path, const std::string& json_path) {
  const auto refs = load_labeling_set(ref_path);
  const auto hyps = load_labeling_set(hyp_path);
  std::map<std::string, std::vector<Interval>> uem;
  if (!uem_path.empty()) uem = read_uem(uem_path);

  std::vector<FileScore> scores;
  for (const auto& [uri, ref] : refs) {
    auto it = hyps.find(uri);
    if (it == hyps.end()) {
      std::cerr << "diar: no hypothesis for '" << uri << "'; scoring as empty\n";
      TimedLabeling empty;
      empty.uri = uri;
      scores.push_back(der(ref, empty,
                           uem.count(uri) ? uem.at(uri) : std::vector<Interval>{}));
      continue;
    }
    scores.push_back(der(ref, it->second,
                         uem.count(uri) ? uem.at(uri) : std::vector<Interval>{}));
  }
  const ScoreReport report = aggregate(std::move(scores));
  std::cout << report_table(report);
  if (!json_path.empty()) {
    std::ofstream out(json_path);
    out << report_to_json(report).dump(2) << '\n';
    std::cout << "wrote " << json_path << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"diar: speaker diarization back end"};
  app.require_subcommand(1);

  // --- run ------------------------------------------------------------
  auto* run = app.add_subcommand("run", "run the full pipeline over a corpus");
  std::string run_corpus_dir, run_out_dir, run_engine = "sd", run_profile;
  double run_threshold_override = std::numeric_limits<double>::quiet_NaN();
  double run_kaldi_threshold = 0.0;
  int run_workers = 1;
  std::uint32_t run_seed = 7321;
  run->add_option("--corpus", run_corpus_dir, "corpus directory")->required();
  run->add_option("--out", run_out_dir, "output directory")->required();
  run->add_option("--engine", run_engine, "sd | kaldi | combine");
  run->add_option("--profile", run_profile,
                  "force a registry profile instead of classifying");
  run->add_option("--ahc-threshold", run_threshold_override,
                  "override the profile's AHC threshold");
  run->add_option("--kaldi-threshold", run_kaldi_threshold,
                  "global AHC threshold of the Kaldi engine");
  run->add_option("--workers", run_workers, "parallel conversations");
  run->add_option("--seed", run_seed, "resegmentation seed");

  // --- score ----------------------------------------------------------
  auto* score = app.add_subcommand("score", "score hypotheses against references");
  std::string score_ref, score_hyp, score_uem, score_json;
  score->add_option("--ref", score_ref, "reference RTTM file or directory")->required();
  score->add_option("--hyp", score_hyp, "hypothesis RTTM file or directory")->required();
  score->add_option("--uem", score_uem, "UEM scoring regions");
  score->add_option("--json", score_json, "also write a JSON report");

  // --- segment ----------------------------------------------------------
  auto* segment = app.add_subcommand("segment", "SAD regions -> subsegments");
  std::string seg_sad, seg_uri = "", seg_track, seg_wav;
  double seg_threshold = 0.5, seg_min = 0.5;
  double seg_max_len = 2.0, seg_overlap = 1.0, seg_min_len = 0.5;
  segment->add_option("--sad", seg_sad, "SAD RTTM or .lab file")->required();
  segment->add_option("--uri", seg_uri, "conversation id");
  segment->add_option("--track", seg_track, "change-score track file");
  segment->add_option("--wav", seg_wav, "audio for the fallback change detector");
  segment->add_option("--scd-threshold", seg_threshold, "cut threshold");
  segment->add_option("--min-duration", seg_min, "minimum segment duration");
  segment->add_option("--max-len", seg_max_len, "subsegment window length");
  segment->add_option("--overlap", seg_overlap, "subsegment overlap");
  segment->add_option("--min-len", seg_min_len, "minimum tail length");

  // --- cluster ----------------------------------------------------------
  auto* cluster = app.add_subcommand("cluster", "cluster an embedding matrix");
  std::string cl_matrix, cl_method = "ahc", cl_plda;
  double cl_threshold = 0.5;
  int cl_kmin = 1, cl_kmax = 10, cl_k = 2;
  cluster->add_option("--matrix", cl_matrix, "embedding matrix (rows = points)")
      ->required();
  cluster->add_option("--method", cl_method, "ahc | k-medoids");
  cluster->add_option("--threshold", cl_threshold, "AHC stopping threshold");
  cluster->add_option("--k-min", cl_kmin, "AHC corridor minimum");
  cluster->add_option("--k-max", cl_kmax, "AHC corridor maximum");
  cluster->add_option("--k", cl_k, "k-medoids cluster count");
  cluster->add_option("--plda", cl_plda, "PLDA model for k-medoids distances");

  // --- reseg ----------------------------------------------------------
  auto* reseg = app.add_subcommand("reseg", "GMM resegmentation of a labeling");
  std::string rs_wav, rs_sad, rs_init, rs_out, rs_uri;
  std::uint32_t rs_seed = 7321;
  reseg->add_option("--wav", rs_wav, "conversation audio")->required();
  reseg->add_option("--sad", rs_sad, "SAD RTTM or .lab")->required();
  reseg->add_option("--init", rs_init, "initial labeling RTTM")->required();
  reseg->add_option("--out", rs_out, "output RTTM")->required();
  reseg->add_option("--uri", rs_uri, "conversation id");
  reseg->add_option("--seed", rs_seed, "GMM seed");

  // --- classify-domain -------------------------------------------------
  auto* classify = app.add_subcommand("classify-domain", "two-stage domain decision");
  std::string cd_stage1, cd_stage2, cd_vector;
  double cd_threshold = 0.6;
  classify->add_option("--stage1", cd_stage1, "stage-1 MLP file")->required();
  classify->add_option("--stage2", cd_stage2, "stage-2 MLP file")->required();
  classify->add_option("--vector", cd_vector, "conversation vector matrix")->required();
  classify->add_option("--threshold", cd_threshold, "positive detection threshold");

  // --- gen-synth --------------------------------------------------------
  auto* synth = app.add_subcommand("gen-synth", "generate a synthetic corpus");
  std::string gs_out;
  SynthConfig gs;
  synth->add_option("--out", gs_out, "corpus directory to create")->required();
  synth->add_option("--conversations", gs.num_conversations, "conversation count");
  synth->add_option("--speakers", gs.num_speakers, "speakers per conversation");
  synth->add_option("--duration", gs.duration, "conversation length (s)");
  synth->add_option("--separation", gs.mean_separation,
                    "speaker mean separation in sigmas");
  synth->add_option("--seed", gs.seed, "generator seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      RunConfig cfg;
      cfg.corpus_dir = run_corpus_dir;
      cfg.output_dir = run_out_dir;
      cfg.workers = run_workers;
      cfg.seed = run_seed;
      cfg.kaldi_ahc_threshold = run_kaldi_threshold;
      EnginePolicy policy = EnginePolicy::SD_ONLY;
      if (run_engine == "kaldi")
        policy = EnginePolicy::KALDI_ONLY;
      else if (run_engine == "combine")
        policy = EnginePolicy::COMBINE;
      else if (run_engine != "sd")
        throw std::runtime_error("unknown engine '" + run_engine + "'");

      if (!std::isnan(run_threshold_override) && !run_profile.empty()) {
        // Rewrite the forced profile's threshold through a transient registry.
        DomainRegistry registry =
            fs::exists(cfg.registry_path())
                ? read_registry(cfg.registry_path().string())
                : default_registry();
        DomainProfile profile = registry.profile_for(run_profile);
        profile.ahc_threshold = run_threshold_override;
        profile.name += "@override";
        DomainRegistry patched;
        for (const std::string& name : registry.names())
          patched.add(registry.profile_for(name));
        patched.add(profile);
        write_registry(cfg.registry_path().string(), patched);
        run_profile = profile.name;
      }

      const CorpusRunSummary summary = run_corpus(cfg, policy, run_profile);
      std::cout << "processed " << summary.results.size() << " conversation(s) -> "
                << (cfg.output_dir / "rttm").string() << '\n';
      for (const EngineResult& r : summary.results)
        std::cout << "  " << r.uri << ": engine=" << to_string(r.engine)
                  << " clusters=" << r.diagnostics.cluster_count
                  << (r.diagnostics.notes.empty() ? "" : " (" + r.diagnostics.notes + ")")
                  << '\n';
      return 0;
    }

    if (*score) return cmd_score(score_ref, score_hyp, score_uem, score_json);

    if (*segment) {
      const TimedLabeling sad = load_labeling(seg_sad, seg_uri);
      const SegmentList regions = speech_regions(sad);
      ChangeScoreTrack track;
      if (!seg_track.empty()) {
        track = read_track(seg_track);
      } else if (!seg_wav.empty()) {
        const FeatureMatrix features =
            apply_cmn(extract_lfcc(read_wav(seg_wav)));
        track = fallback_change_scores(features, 1.0);
      }
      const SegmentList cut =
          track.scores.empty() ? regions
                               : cut_at_changes(regions, track, seg_threshold, seg_min);
      const SegmentList subs =
          uniform_subsegment(cut, seg_max_len, seg_overlap, seg_min_len);
      for (const Segment& s : subs.segments)
        std::printf("%s %.3f %.3f\n", sad.uri.c_str(), s.onset, s.duration);
      for (const Interval& iv : subs.short_leftovers)
        std::printf("# leftover %.3f %.3f\n", iv.begin, iv.end - iv.begin);
      return 0;
    }

    if (*cluster) {
      const Eigen::MatrixXd m = read_matrix(cl_matrix);
      EmbeddingSet set;
      set.uri = "points";
      set.kind = EmbeddingKind::XI;
      set.dim = m.cols();
      for (Eigen::Index r = 0; r < m.rows(); ++r)
        set.entries.push_back({static_cast<double>(r), 1.0, m.row(r).transpose()});
      ClusterAssignment assignment;
      if (cl_method == "ahc") {
        assignment = ahc(cosine_distance_matrix(set), cl_threshold, cl_kmin, cl_kmax);
      } else if (cl_method == "k-medoids") {
        if (cl_plda.empty())
          throw std::runtime_error("k-medoids needs --plda for the distance matrix");
        assignment = k_medoids(plda_distance_matrix(read_plda(cl_plda), set), cl_k);
      } else {
        throw std::runtime_error("unknown clustering method '" + cl_method + "'");
      }
      std::cout << "clusters " << assignment.k << '\n';
      for (std::size_t i = 0; i < assignment.labels.size(); ++i)
        std::cout << i << ' ' << assignment.labels[i] << '\n';
      return 0;
    }

    if (*reseg) {
      const TimedLabeling sad = load_labeling(rs_sad, rs_uri);
      const TimedLabeling init = load_labeling(rs_init, rs_uri.empty() ? sad.uri : rs_uri);
      const FeatureMatrix features = apply_cmn(extract_lfcc(read_wav(rs_wav)));

      std::vector<std::string> speakers;
      for (const std::string& s : init.speakers()) speakers.push_back(s);
      std::vector<GmmModel> models;
      GmmFitOptions opts;
      opts.seed = rs_seed;
      for (const std::string& speaker : speakers) {
        std::vector<Interval> spans;
        for (const Turn& t : init.turns)
          if (t.label == speaker) spans.push_back(t.span());
        spans = merge_intervals(std::move(spans));
        std::vector<Eigen::Index> rows;
        for (Eigen::Index f = 0; f < features.num_frames(); ++f) {
          const double t = features.frame_shift * static_cast<double>(f);
          for (const Interval& iv : spans)
            if (iv.contains(t)) {
              rows.push_back(f);
              break;
            }
        }
        if (rows.empty())
          throw std::runtime_error("speaker '" + speaker + "' has no frames");
        Eigen::MatrixXd frames(static_cast<Eigen::Index>(rows.size()), features.dim());
        for (std::size_t r = 0; r < rows.size(); ++r)
          frames.row(static_cast<Eigen::Index>(r)) = features.frames.row(rows[r]);
        models.push_back(fit_gmm(
            frames,
            component_count(static_cast<std::size_t>(frames.rows())), opts));
      }
      const LikelihoodTracks tracks =
          smooth_tracks(evaluate_tracks(models, speakers, features));
      const TimedLabeling refined = reassign_frames(tracks, sad, &init);
      write_rttm(rs_out, refined);
      std::cout << "wrote " << rs_out << '\n';
      return 0;
    }

    if (*classify) {
      const MlpModel stage1 = read_mlp(cd_stage1);
      const MlpModel stage2 = read_mlp(cd_stage2);
      const Eigen::MatrixXd v = read_matrix(cd_vector);
      if (v.rows() < 1) throw std::runtime_error("empty conversation vector");
      const DomainDecision d =
          classify_domain(stage1, stage2, v.row(0).transpose(), cd_threshold);
      nlohmann::json j;
      j["label"] = d.label;
      j["stage1_prob"] = d.stage1_prob;
      if (d.stage2_posteriors) {
        std::vector<double> post(d.stage2_posteriors->data(),
                                 d.stage2_posteriors->data() + d.stage2_posteriors->size());
        j["stage2_posteriors"] = post;
      }
      std::cout << j.dump(2) << '\n';
      return 0;
    }

    if (*synth) {
      RunConfig cfg;
      cfg.corpus_dir = gs_out;
      cfg.output_dir = gs_out;
      const auto uris = gen_synth(gs, cfg);
      std::cout << "generated " << uris.size() << " conversation(s) under " << gs_out
                << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "diar: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
