#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "diar/clustering.hpp"
#include "diar/domain.hpp"
#include "diar/embeddings.hpp"
#include "diar/scoring.hpp"
#include "diar/segmentation.hpp"
#include "diar/timeline.hpp"

namespace diar {

namespace detail {

constexpr char kMatrixMagic[4] = {'D', 'M', 'A', 'T'};
constexpr std::uint32_t kMatrixVersion = 1;

inline std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

inline double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("cannot parse " + what + " from '" + s + "'");
  }
}

inline long parse_long(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("cannot parse " + what + " from '" + s + "'");
  }
}

inline std::string format_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_text_row(std::ostream& out, const Eigen::RowVectorXd& row) {
  for (Eigen::Index c = 0; c < row.size(); ++c) {
    if (c) out << ' ';
    out << format_full(row(c));
  }
  out << '\n';
}

inline Eigen::RowVectorXd read_text_row(std::istream& in, Eigen::Index cols,
                                        const std::string& what) {
  std::string line;
  do {
    if (!std::getline(in, line))
      throw std::runtime_error("unexpected end of file reading " + what);
  } while (line.empty());
  const auto toks = split_ws(line);
  if (static_cast<Eigen::Index>(toks.size()) != cols)
    throw std::runtime_error("expected " + std::to_string(cols) +
                             " values reading " + what + ", got " +
                             std::to_string(toks.size()));
  Eigen::RowVectorXd row(cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    row(c) = parse_double(toks[static_cast<std::size_t>(c)], what);
  return row;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Matrix container: binary (magic, version, dims, row-major little-endian
// float64) with an equivalent text form for diffable fixtures.
// ---------------------------------------------------------------------------

inline void write_matrix(const std::string& path, const Eigen::MatrixXd& m,
                         bool text = false) {
  if (text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_matrix: cannot open '" + path + "'");
    out << "dmat " << m.rows() << ' ' << m.cols() << '\n';
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      detail::write_text_row(out, m.row(r));
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_matrix: cannot open '" + path + "'");
  out.write(detail::kMatrixMagic, 4);
  const std::uint32_t version = detail::kMatrixVersion;
  const std::uint64_t rows = static_cast<std::uint64_t>(m.rows());
  const std::uint64_t cols = static_cast<std::uint64_t>(m.cols());
  out.write(reinterpret_cast<const char*>(&version), 4);
  out.write(reinterpret_cast<const char*>(&rows), 8);
  out.write(reinterpret_cast<const char*>(&cols), 8);
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const double v = m(r, c);
      out.write(reinterpret_cast<const char*>(&v), 8);
    }
}

inline Eigen::MatrixXd read_matrix(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_matrix: cannot open '" + path + "'");
  char magic[4] = {};
  in.read(magic, 4);
  if (in && std::memcmp(magic, detail::kMatrixMagic, 4) == 0) {
    std::uint32_t version = 0;
    std::uint64_t rows = 0, cols = 0;
    in.read(reinterpret_cast<char*>(&version), 4);
    in.read(reinterpret_cast<char*>(&rows), 8);
    in.read(reinterpret_cast<char*>(&cols), 8);
    if (!in || version != detail::kMatrixVersion)
      throw std::runtime_error("read_matrix: bad header in '" + path + "'");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::uint64_t r = 0; r < rows; ++r)
      for (std::uint64_t c = 0; c < cols; ++c) {
        double v = 0.0;
        in.read(reinterpret_cast<char*>(&v), 8);
        m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
      }
    if (!in) throw std::runtime_error("read_matrix: truncated payload in '" + path + "'");
    return m;
  }

  // Text form.
  in.clear();
  in.seekg(0);
  std::string header;
  if (!std::getline(in, header))
    throw std::runtime_error("read_matrix: empty file '" + path + "'");
  const auto toks = detail::split_ws(header);
  if (toks.size() != 3 || toks[0] != "dmat")
    throw std::runtime_error("read_matrix: '" + path +
                             "' is neither binary nor text matrix format");
  const long rows = detail::parse_long(toks[1], "matrix rows");
  const long cols = detail::parse_long(toks[2], "matrix cols");
  if (rows < 0 || cols < 0)
    throw std::runtime_error("read_matrix: negative dims in '" + path + "'");
  Eigen::MatrixXd m(rows, cols);
  for (long r = 0; r < rows; ++r)
    m.row(r) = detail::read_text_row(in, cols, "matrix row");
  return m;
}

// ---------------------------------------------------------------------------
// RTTM / UEM / plain SAD label files
// ---------------------------------------------------------------------------

inline std::string rttm_line(const std::string& uri, const Turn& t) {
  char buf[64];
  std::string out = "SPEAKER " + uri + " 1 ";
  std::snprintf(buf, sizeof(buf), "%.3f %.3f", t.onset, t.duration);
  out += buf;
  out += " <NA> <NA> " + t.label + " <NA> <NA>";
  return out;
}

inline void write_rttm(const std::string& path, const TimedLabeling& labeling) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_rttm: cannot open '" + path + "'");
  for (const Turn& t : labeling.sorted_turns())
    out << rttm_line(labeling.uri, t) << '\n';
}

inline std::map<std::string, TimedLabeling> read_rttm(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_rttm: cannot open '" + path + "'");
  std::map<std::string, TimedLabeling> out;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == ';' || line[0] == '#') continue;
    const auto toks = detail::split_ws(line);
    if (toks.empty()) continue;
    if (toks[0] != "SPEAKER") continue;
    if (toks.size() < 8)
      throw std::runtime_error("read_rttm: short SPEAKER record at " + path +
                               ":" + std::to_string(line_no));
    const std::string& uri = toks[1];
    Turn t;
    t.onset = detail::parse_double(toks[3], "RTTM onset");
    t.duration = detail::parse_double(toks[4], "RTTM duration");
    t.label = toks[7];
    auto& lab = out[uri];
    lab.uri = uri;
    lab.turns.push_back(t);
  }
  return out;
}

inline void write_uem(const std::string& path, const std::string& uri,
                      const std::vector<Interval>& regions) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_uem: cannot open '" + path + "'");
  char buf[64];
  for (const Interval& r : regions) {
    std::snprintf(buf, sizeof(buf), "%.3f %.3f", r.begin, r.end);
    out << uri << " 1 " << buf << '\n';
  }
}

inline std::map<std::string, std::vector<Interval>> read_uem(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_uem: cannot open '" + path + "'");
  std::map<std::string, std::vector<Interval>> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == ';' || line[0] == '#') continue;
    const auto toks = detail::split_ws(line);
    if (toks.size() != 4)
      throw std::runtime_error("read_uem: malformed line '" + line + "'");
    out[toks[0]].push_back({detail::parse_double(toks[2], "UEM onset"),
                            detail::parse_double(toks[3], "UEM end")});
  }
  return out;
}

// Plain `<onset> <end>` speech label file; every line is a speech interval.
inline TimedLabeling read_label_file(const std::string& path, const std::string& uri) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_label_file: cannot open '" + path + "'");
  TimedLabeling out;
  out.uri = uri;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto toks = detail::split_ws(line);
    if (toks.size() < 2)
      throw std::runtime_error("read_label_file: malformed line '" + line + "'");
    const double onset = detail::parse_double(toks[0], "label onset");
    const double end = detail::parse_double(toks[1], "label end");
    out.turns.push_back({onset, end - onset, "speech"});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Change-score track file
// ---------------------------------------------------------------------------

inline void write_track(const std::string& path, const ChangeScoreTrack& track) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_track: cannot open '" + path + "'");
  out << "dtrack " << track.scores.size() << ' '
      << detail::format_full(track.step) << ' '
      << detail::format_full(track.offset) << '\n';
  for (double s : track.scores) out << detail::format_full(s) << '\n';
}

inline ChangeScoreTrack read_track(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_track: cannot open '" + path + "'");
  std::string header;
  if (!std::getline(in, header))
    throw std::runtime_error("read_track: empty file '" + path + "'");
  const auto toks = detail::split_ws(header);
  if (toks.size() != 4 || toks[0] != "dtrack")
    throw std::runtime_error("read_track: bad header in '" + path + "'");
  ChangeScoreTrack track;
  const long n = detail::parse_long(toks[1], "track length");
  track.step = detail::parse_double(toks[2], "track step");
  track.offset = detail::parse_double(toks[3], "track offset");
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    track.scores.push_back(detail::parse_double(line, "track score"));
  }
  if (static_cast<long>(track.scores.size()) != n)
    throw std::runtime_error("read_track: expected " + std::to_string(n) +
                             " scores in '" + path + "'");
  track.validate();
  return track;
}

// ---------------------------------------------------------------------------
// Embedding sets: one matrix file per conversation per kind, rows aligned
// with the subsegment list.
// ---------------------------------------------------------------------------

inline void write_embeddings(const std::string& path, const EmbeddingSet& set,
                             bool text = false) {
  write_matrix(path, set.matrix(), text);
}

inline EmbeddingSet load_embeddings(const std::string& path, EmbeddingKind kind,
                                    const SegmentList& spans,
                                    const std::string& uri) {
  const Eigen::MatrixXd m = read_matrix(path);
  if (static_cast<std::size_t>(m.rows()) != spans.segments.size())
    throw std::runtime_error(
        "load_embeddings: '" + path + "' has " + std::to_string(m.rows()) +
        " rows but the segment list has " + std::to_string(spans.segments.size()));
  EmbeddingSet set;
  set.uri = uri;
  set.kind = kind;
  set.dim = m.cols();
  set.entries.reserve(spans.segments.size());
  for (std::size_t i = 0; i < spans.segments.size(); ++i) {
    EmbeddingSet::Entry e;
    e.onset = spans.segments[i].onset;
    e.duration = spans.segments[i].duration;
    e.vec = m.row(static_cast<Eigen::Index>(i)).transpose();
    set.entries.push_back(std::move(e));
  }
  set.validate();
  return set;
}

// ---------------------------------------------------------------------------
// MLP weight file: layered matrices with an activation tag per layer.
// ---------------------------------------------------------------------------

inline void write_mlp(const std::string& path, const MlpModel& model) {
  model.validate();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_mlp: cannot open '" + path + "'");
  out << "dmlp 1\n";
  out << "positive " << (model.positive_means_single ? "single" : "multi") << '\n';
  if (!model.class_names.empty()) {
    out << "classes";
    for (const auto& c : model.class_names) out << ' ' << c;
    out << '\n';
  }
  out << "layers " << model.layers.size() << '\n';
  for (const auto& layer : model.layers) {
    out << "layer " << to_string(layer.activation) << ' ' << layer.weight.rows()
        << ' ' << layer.weight.cols() << '\n';
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
      detail::write_text_row(out, layer.weight.row(r));
    out << "bias\n";
    detail::write_text_row(out, layer.bias.transpose());
  }
}

inline MlpModel read_mlp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_mlp: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || detail::split_ws(line) != std::vector<std::string>{"dmlp", "1"})
    throw std::runtime_error("read_mlp: bad header in '" + path + "'");

  MlpModel model;
  long layer_count = -1;
  while (layer_count < 0 && std::getline(in, line)) {
    const auto toks = detail::split_ws(line);
    if (toks.empty()) continue;
    if (toks[0] == "positive" && toks.size() == 2) {
      model.positive_means_single = toks[1] == "single";
    } else if (toks[0] == "classes") {
      model.class_names.assign(toks.begin() + 1, toks.end());
    } else if (toks[0] == "layers" && toks.size() == 2) {
      layer_count = detail::parse_long(toks[1], "layer count");
    } else {
      throw std::runtime_error("read_mlp: unexpected line '" + line + "'");
    }
  }
  if (layer_count < 0)
    throw std::runtime_error("read_mlp: missing layers line in '" + path + "'");
  for (long l = 0; l < layer_count; ++l) {
    do {
      if (!std::getline(in, line))
        throw std::runtime_error("read_mlp: truncated at layer " + std::to_string(l));
    } while (line.empty());
    const auto toks = detail::split_ws(line);
    if (toks.size() != 4 || toks[0] != "layer")
      throw std::runtime_error("read_mlp: expected layer header, got '" + line + "'");
    MlpModel::Layer layer;
    layer.activation = activation_from_string(toks[1]);
    const long rows = detail::parse_long(toks[2], "layer rows");
    const long cols = detail::parse_long(toks[3], "layer cols");
    layer.weight.resize(rows, cols);
    for (long r = 0; r < rows; ++r)
      layer.weight.row(r) = detail::read_text_row(in, cols, "layer weights");
    do {
      if (!std::getline(in, line))
        throw std::runtime_error("read_mlp: missing bias at layer " + std::to_string(l));
    } while (line.empty());
    if (detail::split_ws(line) != std::vector<std::string>{"bias"})
      throw std::runtime_error("read_mlp: expected bias line, got '" + line + "'");
    layer.bias = detail::read_text_row(in, rows, "layer bias").transpose();
    model.layers.push_back(std::move(layer));
  }
  model.validate();
  return model;
}

// ---------------------------------------------------------------------------
// PLDA model file
// ---------------------------------------------------------------------------

inline void write_plda(const std::string& path, const PldaModel& model) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_plda: cannot open '" + path + "'");
  const Eigen::Index d = model.dim();
  out << "dplda 1 " << d << '\n';
  out << "mu\n";
  detail::write_text_row(out, model.mu.transpose());
  out << "between\n";
  for (Eigen::Index r = 0; r < d; ++r)
    detail::write_text_row(out, model.between_cov.row(r));
  out << "within\n";
  for (Eigen::Index r = 0; r < d; ++r)
    detail::write_text_row(out, model.within_cov.row(r));
}

inline PldaModel read_plda(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_plda: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("read_plda: empty file '" + path + "'");
  const auto toks = detail::split_ws(line);
  if (toks.size() != 3 || toks[0] != "dplda" || toks[1] != "1")
    throw std::runtime_error("read_plda: bad header in '" + path + "'");
  const long d = detail::parse_long(toks[2], "plda dim");

  auto expect = [&](const std::string& tag) {
    do {
      if (!std::getline(in, line))
        throw std::runtime_error("read_plda: missing section '" + tag + "'");
    } while (line.empty());
    if (detail::split_ws(line) != std::vector<std::string>{tag})
      throw std::runtime_error("read_plda: expected '" + tag + "', got '" + line + "'");
  };

  PldaModel model;
  expect("mu");
  model.mu = detail::read_text_row(in, d, "plda mu").transpose();
  expect("between");
  model.between_cov.resize(d, d);
  for (long r = 0; r < d; ++r)
    model.between_cov.row(r) = detail::read_text_row(in, d, "plda between");
  expect("within");
  model.within_cov.resize(d, d);
  for (long r = 0; r < d; ++r)
    model.within_cov.row(r) = detail::read_text_row(in, d, "plda within");
  return model;
}

// ---------------------------------------------------------------------------
// Whitening model file
// ---------------------------------------------------------------------------

inline void write_whiten(const std::string& path, const WhitenModel& model) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_whiten: cannot open '" + path + "'");
  if (model.strategy == WhitenStrategy::GLOBAL_MEAN) {
    out << "dwhiten 1 global " << model.mean.size() << '\n';
    out << "mean\n";
    detail::write_text_row(out, model.mean.transpose());
    return;
  }
  out << "dwhiten 1 block " << model.blocks.size() << '\n';
  for (const auto& b : model.blocks) {
    out << "block " << b.mean.size() << ' ' << b.projection.rows() << '\n';
    out << "mean\n";
    detail::write_text_row(out, b.mean.transpose());
    out << "projection\n";
    for (Eigen::Index r = 0; r < b.projection.rows(); ++r)
      detail::write_text_row(out, b.projection.row(r));
  }
}

inline WhitenModel read_whiten(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_whiten: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("read_whiten: empty file '" + path + "'");
  const auto toks = detail::split_ws(line);
  if (toks.size() != 4 || toks[0] != "dwhiten" || toks[1] != "1")
    throw std::runtime_error("read_whiten: bad header in '" + path + "'");

  auto expect = [&](const std::string& tag) {
    do {
      if (!std::getline(in, line))
        throw std::runtime_error("read_whiten: missing '" + tag + "'");
    } while (line.empty());
    if (detail::split_ws(line) != std::vector<std::string>{tag})
      throw std::runtime_error("read_whiten: expected '" + tag + "', got '" + line + "'");
  };

  WhitenModel model;
  if (toks[2] == "global") {
    model.strategy = WhitenStrategy::GLOBAL_MEAN;
    const long d = detail::parse_long(toks[3], "whiten dim");
    expect("mean");
    model.mean = detail::read_text_row(in, d, "whiten mean").transpose();
    return model;
  }
  if (toks[2] != "block")
    throw std::runtime_error("read_whiten: unknown strategy '" + toks[2] + "'");
  model.strategy = WhitenStrategy::BLOCK_CONCAT;
  const long nblocks = detail::parse_long(toks[3], "whiten block count");
  std::vector<Eigen::VectorXd> means;
  for (long i = 0; i < nblocks; ++i) {
    do {
      if (!std::getline(in, line))
        throw std::runtime_error("read_whiten: truncated block " + std::to_string(i));
    } while (line.empty());
    const auto head = detail::split_ws(line);
    if (head.size() != 3 || head[0] != "block")
      throw std::runtime_error("read_whiten: expected block header, got '" + line + "'");
    const long in_dim = detail::parse_long(head[1], "block in dim");
    const long out_dim = detail::parse_long(head[2], "block out dim");
    WhitenModel::BlockTransform b;
    expect("mean");
    b.mean = detail::read_text_row(in, in_dim, "block mean").transpose();
    expect("projection");
    b.projection.resize(out_dim, in_dim);
    for (long r = 0; r < out_dim; ++r)
      b.projection.row(r) = detail::read_text_row(in, in_dim, "block projection");
    model.blocks.push_back(std::move(b));
  }
  Eigen::Index total = 0;
  for (const auto& b : model.blocks) total += b.mean.size();
  model.mean.resize(total);
  Eigen::Index at = 0;
  for (const auto& b : model.blocks) {
    model.mean.segment(at, b.mean.size()) = b.mean;
    at += b.mean.size();
  }
  return model;
}

// ---------------------------------------------------------------------------
// Domain registry config (JSON, schema-validated)
// ---------------------------------------------------------------------------

inline nlohmann::json registry_to_json(const DomainRegistry& registry) {
  nlohmann::json profiles = nlohmann::json::array();
  for (const std::string& name : registry.names()) {
    const DomainProfile& p = registry.profile_for(name);
    nlohmann::json j;
    j["name"] = p.name;
    j["clustering"] = to_string(p.clustering);
    j["engine"] = to_string(p.engine);
    j["pca_dim"] = p.pca_dim;
    j["scd_threshold"] = p.scd_threshold;
    if (p.clustering == ClusteringMethod::AHC) {
      j["k_min"] = p.k_min;
      j["k_max"] = p.k_max;
      j["ahc_threshold"] = p.ahc_threshold;
    } else if (p.clustering == ClusteringMethod::KMEDOIDS) {
      j["k"] = p.k;
    }
    profiles.push_back(j);
  }
  nlohmann::json root;
  root["version"] = 1;
  root["profiles"] = profiles;
  return root;
}

inline void write_registry(const std::string& path, const DomainRegistry& registry) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_registry: cannot open '" + path + "'");
  out << registry_to_json(registry).dump(2) << '\n';
}

inline DomainRegistry registry_from_json(const nlohmann::json& root) {
  if (!root.is_object() || !root.contains("version") || !root.contains("profiles"))
    throw std::runtime_error("registry: missing version/profiles");
  if (root.at("version").get<int>() != 1)
    throw std::runtime_error("registry: unsupported version");
  if (!root.at("profiles").is_array())
    throw std::runtime_error("registry: profiles must be an array");

  DomainRegistry registry;
  for (const auto& j : root.at("profiles")) {
    DomainProfile p;
    p.name = j.at("name").get<std::string>();
    p.clustering = clustering_from_string(j.at("clustering").get<std::string>());
    p.engine = engine_from_string(j.at("engine").get<std::string>());
    p.pca_dim = j.at("pca_dim").get<int>();
    p.scd_threshold = j.at("scd_threshold").get<double>();
    if (p.clustering == ClusteringMethod::AHC) {
      p.k_min = j.at("k_min").get<int>();
      p.k_max = j.at("k_max").get<int>();
      p.ahc_threshold = j.at("ahc_threshold").get<double>();
    } else if (p.clustering == ClusteringMethod::KMEDOIDS) {
      p.k = j.at("k").get<int>();
    }
    registry.add(std::move(p));
  }
  return registry;
}

inline DomainRegistry read_registry(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_registry: cannot open '" + path + "'");
  nlohmann::json root;
  try {
    in >> root;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("read_registry: '" + path + "': " + e.what());
  }
  return registry_from_json(root);
}

// ---------------------------------------------------------------------------
// Score reports: human-readable table and machine-readable JSON
// ---------------------------------------------------------------------------

inline std::string report_table(const ScoreReport& report) {
  char buf[256];
  std::string out;
  out += "uri                              DER%    miss%    falrm%   spkerr%  JER%\n";
  for (const FileScore& f : report.files) {
    std::snprintf(buf, sizeof(buf), "%-32s %-7.2f %-8.2f %-8.2f %-8.2f %-7.2f\n",
                  f.uri.c_str(), f.der, f.miss, f.falarm, f.spkerr, f.jer);
    out += buf;
  }
  std::snprintf(buf, sizeof(buf),
                "file-mean DER %.2f%%  JER %.2f%% | time-weighted DER %.2f%% "
                "(miss %.2f, falarm %.2f, spkerr %.2f)\n",
                report.der_file_mean, report.jer_file_mean,
                report.der_time_weighted, report.miss_time_weighted,
                report.falarm_time_weighted, report.spkerr_time_weighted);
  out += buf;
  return out;
}

inline nlohmann::json report_to_json(const ScoreReport& report) {
  nlohmann::json files = nlohmann::json::array();
  for (const FileScore& f : report.files) {
    nlohmann::json j;
    j["uri"] = f.uri;
    j["der"] = f.der;
    j["miss"] = f.miss;
    j["falarm"] = f.falarm;
    j["spkerr"] = f.spkerr;
    j["jer"] = f.jer;
    j["ref_speaker_time"] = f.ref_speaker_time;
    if (f.coverage) j["coverage"] = *f.coverage;
    if (f.purity) j["purity"] = *f.purity;
    nlohmann::json mapping = nlohmann::json::array();
    for (const auto& [r, h] : f.mapping) mapping.push_back({{"ref", r}, {"hyp", h}});
    j["mapping"] = mapping;
    files.push_back(j);
  }
  nlohmann::json root;
  root["files"] = files;
  root["der_file_mean"] = report.der_file_mean;
  root["der_time_weighted"] = report.der_time_weighted;
  root["jer_file_mean"] = report.jer_file_mean;
  root["miss_time_weighted"] = report.miss_time_weighted;
  root["falarm_time_weighted"] = report.falarm_time_weighted;
  root["spkerr_time_weighted"] = report.spkerr_time_weighted;
  return root;
}

}  // namespace diar
