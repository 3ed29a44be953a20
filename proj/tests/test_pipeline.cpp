#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "diar/pipeline.hpp"
#include "oracles.hpp"

using namespace diar;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("diar_pipe_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

RunConfig config_for(const fs::path& corpus, const fs::path& out) {
  RunConfig cfg;
  cfg.corpus_dir = corpus;
  cfg.output_dir = out;
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("run_sd diarizes a separable synthetic conversation", "[pipeline]") {
  TempDir tmp;
  RunConfig cfg = config_for(tmp.path / "corpus", tmp.path / "out");

  SynthConfig synth;
  synth.num_speakers = 3;
  synth.duration = 60.0;
  synth.mean_separation = 6.0;
  synth.seed = 2024;
  const auto uris = gen_synth(synth, cfg);
  REQUIRE(uris.size() == 1);

  const DomainRegistry reg = read_registry(cfg.registry_path().string());
  const EngineResult result = run_sd(uris[0], cfg, reg.profile_for("synthetic"));
  CHECK(result.engine == Engine::SD);
  CHECK(result.diagnostics.cluster_count == 3);

  const auto ref = read_rttm(cfg.ref_path(uris[0]).string()).at(uris[0]);
  const FileScore score = der(ref, result.hypothesis);
  CHECK(score.der < 5.0);
}

TEST_CASE("run_sd single-speaker short circuit uses the reference SAD", "[pipeline]") {
  TempDir tmp;
  RunConfig cfg = config_for(tmp.path / "corpus", tmp.path / "out");
  SynthConfig synth;
  synth.num_speakers = 1;
  synth.duration = 30.0;
  synth.seed = 7;
  const auto uris = gen_synth(synth, cfg);

  DomainProfile none;
  none.name = "LibriVox";
  none.clustering = ClusteringMethod::NONE;
  const EngineResult result = run_sd(uris[0], cfg, none);
  REQUIRE(!result.hypothesis.turns.empty());
  for (const Turn& t : result.hypothesis.turns) CHECK(t.label == "spk0");

  const auto sad = read_rttm(cfg.sad_rttm_path(uris[0]).string()).at(uris[0]);
  const SegmentList regions = speech_regions(sad);
  REQUIRE(result.hypothesis.turns.size() == regions.segments.size());
  for (std::size_t i = 0; i < regions.segments.size(); ++i) {
    CHECK(result.hypothesis.turns[i].onset == regions.segments[i].onset);
    CHECK(result.hypothesis.turns[i].duration == regions.segments[i].duration);
  }
}

TEST_CASE("run_sd k-medoids route works on a two-speaker conversation", "[pipeline]") {
  TempDir tmp;
  RunConfig cfg = config_for(tmp.path / "corpus", tmp.path / "out");
  SynthConfig synth;
  synth.num_speakers = 2;
  synth.duration = 60.0;
  synth.seed = 99;
  const auto uris = gen_synth(synth, cfg);

  // The MIXER6 row: k-medoids into 2 clusters with PLDA scores.
  const DomainRegistry reg = default_registry();
  const EngineResult result = run_sd(uris[0], cfg, reg.profile_for("MIXER6"));
  CHECK(result.diagnostics.cluster_count == 2);

  const auto ref = read_rttm(cfg.ref_path(uris[0]).string()).at(uris[0]);
  const FileScore score = der(ref, result.hypothesis);
  CHECK(score.der < 10.0);
}

TEST_CASE("run_kaldi_style produces a valid scored hypothesis", "[pipeline]") {
  TempDir tmp;
  RunConfig cfg = config_for(tmp.path / "corpus", tmp.path / "out");
  SynthConfig synth;
  synth.num_speakers = 3;
  synth.duration = 60.0;
  synth.seed = 11;
  const auto uris = gen_synth(synth, cfg);

  const EngineResult result = run_kaldi_style(uris[0], cfg);
  CHECK(result.engine == Engine::KALDI);
  REQUIRE(!result.hypothesis.turns.empty());

  const auto ref = read_rttm(cfg.ref_path(uris[0]).string()).at(uris[0]);
  const FileScore score = der(ref, result.hypothesis);
  CHECK(std::isfinite(score.der));

  SECTION("raising the global threshold never increases the cluster count") {
    int previous = std::numeric_limits<int>::max();
    for (double threshold : {-20.0, -5.0, 0.0, 5.0, 20.0}) {
      RunConfig swept = cfg;
      swept.kaldi_ahc_threshold = threshold;
      const EngineResult r = run_kaldi_style(uris[0], swept);
      REQUIRE(r.diagnostics.cluster_count <= previous);
      previous = r.diagnostics.cluster_count;
    }
  }
}

TEST_CASE("empty SAD gives an empty hypothesis", "[pipeline]") {
  TempDir tmp;
  RunConfig cfg = config_for(tmp.path / "corpus", tmp.path / "out");
  fs::create_directories(cfg.corpus_dir / "sad");
  std::ofstream((cfg.corpus_dir / "sad" / "empty.lab")) << "";

  DomainProfile profile;
  profile.name = "x";
  profile.clustering = ClusteringMethod::AHC;
  profile.k_min = 1;
  profile.k_max = 2;
  const EngineResult sd = run_sd("empty", cfg, profile);
  CHECK(sd.hypothesis.turns.empty());
  const EngineResult kaldi = run_kaldi_style("empty", cfg);
  CHECK(kaldi.hypothesis.turns.empty());
}

TEST_CASE("late combination selection table", "[pipeline]") {
  const DomainRegistry reg = default_registry();
  EngineResult sd;
  sd.uri = "u";
  sd.engine = Engine::SD;
  sd.hypothesis.turns = {{0.0, 1.0, "spk0"}};
  EngineResult kaldi;
  kaldi.uri = "u";
  kaldi.engine = Engine::KALDI;
  kaldi.hypothesis.turns = {{0.0, 1.0, "spk0"}, {1.0, 1.0, "spk1"}};

  auto decision = [](const std::string& label) {
    DomainDecision d;
    d.label = label;
    return d;
  };

  SECTION("unknown conversations use the Kaldi system") {
    CHECK(combine(decision(kUnknownDomain), &sd, &kaldi, reg).engine == Engine::KALDI);
  }
  SECTION("the problematic corpora use the Kaldi system") {
    CHECK(combine(decision("VAST"), &sd, &kaldi, reg).engine == Engine::KALDI);
    CHECK(combine(decision("SEEDLingS"), &sd, &kaldi, reg).engine == Engine::KALDI);
  }
  SECTION("everything else stays with SD") {
    CHECK(combine(decision("SCOTUS"), &sd, &kaldi, reg).engine == Engine::SD);
    CHECK(combine(decision("MIXER6"), &sd, &kaldi, reg).engine == Engine::SD);
    CHECK(combine(decision(kSingleSpeaker), &sd, &kaldi, reg).engine == Engine::SD);
  }
  SECTION("overrides swap the table") {
    CHECK(combine(decision("SCOTUS"), &sd, &kaldi, reg, {{"SCOTUS", Engine::KALDI}})
              .engine == Engine::KALDI);
  }
  SECTION("a missing chosen result is an error") {
    CHECK_THROWS_AS(combine(decision(kUnknownDomain), &sd, nullptr, reg),
                    std::invalid_argument);
  }
  SECTION("combine never mixes turns from the two engines") {
    const EngineResult out = combine(decision(kUnknownDomain), &sd, &kaldi, reg);
    REQUIRE(out.hypothesis.turns.size() == kaldi.hypothesis.turns.size());
  }
}

TEST_CASE("run_corpus writes hypotheses and scores cleanly", "[pipeline]") {
  TempDir tmp;
  RunConfig cfg = config_for(tmp.path / "corpus", tmp.path / "out");
  SynthConfig synth;
  synth.num_conversations = 2;
  synth.num_speakers = 2;
  synth.duration = 40.0;
  synth.seed = 31;
  const auto uris = gen_synth(synth, cfg);
  REQUIRE(uris.size() == 2);

  const CorpusRunSummary summary =
      run_corpus(cfg, EnginePolicy::SD_ONLY, "synthetic");
  REQUIRE(summary.results.size() == 2);
  for (const std::string& uri : summary.uris)
    REQUIRE(fs::exists(cfg.output_dir / "rttm" / (uri + ".rttm")));

  SECTION("same seed and inputs give byte-identical outputs") {
    RunConfig cfg2 = cfg;
    cfg2.output_dir = tmp.path / "out2";
    run_corpus(cfg2, EnginePolicy::SD_ONLY, "synthetic");
    for (const std::string& uri : summary.uris) {
      const std::string a = slurp(cfg.output_dir / "rttm" / (uri + ".rttm"));
      const std::string b = slurp(cfg2.output_dir / "rttm" / (uri + ".rttm"));
      REQUIRE(!a.empty());
      REQUIRE(a == b);
    }
  }
  SECTION("combine policy without classifier models routes to Kaldi") {
    RunConfig cfg3 = cfg;
    cfg3.output_dir = tmp.path / "out3";
    ScopedWarnHandler quiet([](const std::string&) {});
    const CorpusRunSummary combined = run_corpus(cfg3, EnginePolicy::COMBINE);
    REQUIRE(combined.results.size() == 2);
    for (const EngineResult& r : combined.results)
      CHECK(r.engine == Engine::KALDI);
  }
  SECTION("worker pool does not change results") {
    RunConfig cfg4 = cfg;
    cfg4.output_dir = tmp.path / "out4";
    cfg4.workers = 3;
    run_corpus(cfg4, EnginePolicy::SD_ONLY, "synthetic");
    for (const std::string& uri : summary.uris) {
      REQUIRE(slurp(cfg.output_dir / "rttm" / (uri + ".rttm")) ==
              slurp(cfg4.output_dir / "rttm" / (uri + ".rttm")));
    }
  }
}

TEST_CASE("hypotheses stay inside SAD speech", "[pipeline]") {
  TempDir tmp;
  RunConfig cfg = config_for(tmp.path / "corpus", tmp.path / "out");
  SynthConfig synth;
  synth.num_speakers = 3;
  synth.duration = 45.0;
  synth.mean_separation = 1.0;  // hard case: still must terminate and contain
  synth.seed = 77;
  const auto uris = gen_synth(synth, cfg);

  const DomainRegistry reg = read_registry(cfg.registry_path().string());
  const EngineResult result = run_sd(uris[0], cfg, reg.profile_for("synthetic"));
  REQUIRE(!result.hypothesis.turns.empty());

  const auto sad = read_rttm(cfg.sad_rttm_path(uris[0]).string()).at(uris[0]);
  std::vector<Interval> speech;
  for (const Turn& t : sad.turns) speech.push_back(t.span());
  const auto merged = merge_intervals(std::move(speech), 1e-6);
  for (const Turn& t : result.hypothesis.turns) {
    bool inside = false;
    for (const Interval& r : merged)
      if (t.onset >= r.begin - 1e-6 && t.end() <= r.end + 1e-6) {
        inside = true;
        break;
      }
    REQUIRE(inside);
  }
}
