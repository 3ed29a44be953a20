#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "diar/log.hpp"

namespace diar {

enum class Activation { IDENTITY, TANH, SIGMOID, SOFTMAX };

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::IDENTITY: return "identity";
    case Activation::TANH: return "tanh";
    case Activation::SIGMOID: return "sigmoid";
    case Activation::SOFTMAX: return "softmax";
  }
  throw std::logic_error("unknown activation");
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "identity") return Activation::IDENTITY;
  if (s == "tanh") return Activation::TANH;
  if (s == "sigmoid") return Activation::SIGMOID;
  if (s == "softmax") return Activation::SOFTMAX;
  throw std::invalid_argument("unknown activation '" + s + "'");
}

// Plain feed-forward network for inference; weights are ingested from file.
struct MlpModel {
  struct Layer {
    Eigen::MatrixXd weight;  // out x in
    Eigen::VectorXd bias;    // out
    Activation activation = Activation::IDENTITY;
  };

  std::vector<Layer> layers;
  // Whether a high stage-1 output means "single speaker" (model metadata;
  // the classifier flips the probability when false).
  bool positive_means_single = true;
  std::vector<std::string> class_names;  // stage-2 output labels, optional

  Eigen::Index input_dim() const {
    return layers.empty() ? 0 : layers.front().weight.cols();
  }
  Eigen::Index output_dim() const {
    return layers.empty() ? 0 : layers.back().weight.rows();
  }

  void validate() const {
    if (layers.empty()) throw std::invalid_argument("MlpModel: no layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& l = layers[i];
      if (l.bias.size() != l.weight.rows())
        throw std::invalid_argument("MlpModel: bias/weight shape mismatch at layer " +
                                    std::to_string(i));
      if (!l.weight.allFinite() || !l.bias.allFinite())
        throw std::invalid_argument("MlpModel: non-finite weights at layer " +
                                    std::to_string(i));
      if (i > 0 && l.weight.cols() != layers[i - 1].weight.rows())
        throw std::invalid_argument("MlpModel: layer dims do not chain at layer " +
                                    std::to_string(i));
    }
  }
};

inline Eigen::VectorXd mlp_forward(const MlpModel& model, const Eigen::VectorXd& x) {
  model.validate();
  if (x.size() != model.input_dim())
    throw std::invalid_argument("mlp_forward: input dim " + std::to_string(x.size()) +
                                " does not match model input " +
                                std::to_string(model.input_dim()));
  Eigen::VectorXd h = x;
  for (const auto& layer : model.layers) {
    h = (layer.weight * h + layer.bias).eval();
    switch (layer.activation) {
      case Activation::IDENTITY:
        break;
      case Activation::TANH:
        h = h.array().tanh();
        break;
      case Activation::SIGMOID:
        h = (1.0 / (1.0 + (-h.array()).exp()));
        break;
      case Activation::SOFTMAX: {
        const double mx = h.maxCoeff();
        Eigen::ArrayXd e = (h.array() - mx).exp();
        h = e / e.sum();
        break;
      }
    }
  }
  return h;
}

enum class ClusteringMethod { NONE, AHC, KMEDOIDS };

inline std::string to_string(ClusteringMethod m) {
  switch (m) {
    case ClusteringMethod::NONE: return "none";
    case ClusteringMethod::AHC: return "ahc";
    case ClusteringMethod::KMEDOIDS: return "k-medoids";
  }
  throw std::logic_error("unknown clustering method");
}

inline ClusteringMethod clustering_from_string(const std::string& s) {
  if (s == "none") return ClusteringMethod::NONE;
  if (s == "ahc") return ClusteringMethod::AHC;
  if (s == "k-medoids" || s == "kmedoids") return ClusteringMethod::KMEDOIDS;
  throw std::invalid_argument("unknown clustering method '" + s + "'");
}

enum class Engine { SD, KALDI };

inline std::string to_string(Engine e) {
  return e == Engine::SD ? "sd" : "kaldi";
}

inline Engine engine_from_string(const std::string& s) {
  if (s == "sd") return Engine::SD;
  if (s == "kaldi") return Engine::KALDI;
  throw std::invalid_argument("unknown engine '" + s + "'");
}

// Per-domain algorithm choice and hyperparameters (one registry row).
struct DomainProfile {
  std::string name;
  ClusteringMethod clustering = ClusteringMethod::AHC;
  int k_min = 0;               // AHC corridor
  int k_max = 0;
  double ahc_threshold = 0.0;  // AHC stopping threshold
  int k = 0;                   // k-medoids cluster count
  int pca_dim = 0;             // 0 = no conversation PCA
  double scd_threshold = 0.5;  // change-detector cut threshold
  Engine engine = Engine::SD;  // late-combination choice

  void validate() const {
    switch (clustering) {
      case ClusteringMethod::AHC:
        if (k_min < 1 || k_min > k_max)
          throw std::invalid_argument("DomainProfile '" + name +
                                      "': AHC needs 1 <= k_min <= k_max");
        if (k != 0)
          throw std::invalid_argument("DomainProfile '" + name +
                                      "': k is a k-medoids field");
        break;
      case ClusteringMethod::KMEDOIDS:
        if (k < 1)
          throw std::invalid_argument("DomainProfile '" + name +
                                      "': k-medoids needs k >= 1");
        if (k_min != 0 || k_max != 0 || ahc_threshold != 0.0)
          throw std::invalid_argument("DomainProfile '" + name +
                                      "': corridor/threshold are AHC fields");
        break;
      case ClusteringMethod::NONE:
        if (k != 0 || k_min != 0 || k_max != 0 || ahc_threshold != 0.0)
          throw std::invalid_argument("DomainProfile '" + name +
                                      "': no clustering fields allowed");
        break;
    }
    if (pca_dim < 0)
      throw std::invalid_argument("DomainProfile '" + name + "': pca_dim < 0");
    if (!(scd_threshold >= 0.0 && scd_threshold <= 1.0))
      throw std::invalid_argument("DomainProfile '" + name +
                                  "': scd_threshold outside [0,1]");
  }
};

inline constexpr const char* kUnknownDomain = "UNKNOWN";
inline constexpr const char* kSingleSpeaker = "SINGLE_SPEAKER";
inline constexpr const char* kFallbackProfile = "other";

// Registry of per-domain profiles; unknown conversations route to "other".
class DomainRegistry {
 public:
  DomainRegistry() = default;

  explicit DomainRegistry(std::vector<DomainProfile> profiles) {
    for (auto& p : profiles) add(std::move(p));
  }

  void add(DomainProfile profile) {
    profile.validate();
    order_.push_back(profile.name);
    profiles_[profile.name] = std::move(profile);
  }

  bool has(const std::string& name) const { return profiles_.count(name) > 0; }

  const DomainProfile& profile_for(const std::string& label) const {
    const std::string key = label == kUnknownDomain ? kFallbackProfile : label;
    auto it = profiles_.find(key);
    if (it == profiles_.end())
      throw std::invalid_argument("DomainRegistry: unregistered domain '" + label + "'");
    return it->second;
  }

  const std::vector<std::string>& names() const { return order_; }

 private:
  std::map<std::string, DomainProfile> profiles_;
  std::vector<std::string> order_;
};

// The experimentally chosen per-corpus configuration. The engine column
// encodes the late-combination rule: the Kaldi system replaces SD for the
// two most problematic corpora and for unknown data.
inline DomainRegistry default_registry() {
  auto ahc = [](std::string name, int k_min, int k_max, double thr, int pca,
                Engine eng) {
    DomainProfile p;
    p.name = std::move(name);
    p.clustering = ClusteringMethod::AHC;
    p.k_min = k_min;
    p.k_max = k_max;
    p.ahc_threshold = thr;
    p.pca_dim = pca;
    p.engine = eng;
    return p;
  };
  auto kmed = [](std::string name, int k) {
    DomainProfile p;
    p.name = std::move(name);
    p.clustering = ClusteringMethod::KMEDOIDS;
    p.k = k;
    return p;
  };
  DomainProfile librivox;
  librivox.name = "LibriVox";
  librivox.clustering = ClusteringMethod::NONE;

  return DomainRegistry({
      librivox,
      ahc("SEEDLingS", 2, 3, 0.62, 6, Engine::KALDI),
      kmed("CIR", 4),
      kmed("ADOS", 2),
      ahc("SCOTUS", 5, 10, 0.46, 12, Engine::SD),
      kmed("DCIEM", 2),
      ahc("RT-04S", 3, 10, 0.46, 6, Engine::SD),
      ahc("SLX", 2, 6, 0.762, 6, Engine::SD),
      kmed("MIXER6", 2),
      ahc("VAST", 1, 9, 0.58, 3, Engine::KALDI),
      ahc("YouthPoint", 3, 5, 0.54, 9, Engine::SD),
      ahc(kFallbackProfile, 2, 6, 0.1, 0, Engine::KALDI),
  });
}

// Two-stage classification result.
struct DomainDecision {
  double stage1_prob = 0.0;  // P(single speaker)
  std::optional<Eigen::VectorXd> stage2_posteriors;
  std::string label;
};

// Stage 1 decides single- vs multi-speaker; on the multi-speaker path the
// stage-2 posterior must clear the same threshold or the conversation is
// treated as unknown domain.
inline DomainDecision classify_domain(const MlpModel& stage1,
                                      const MlpModel& stage2,
                                      const Eigen::VectorXd& x,
                                      double threshold = 0.6) {
  DomainDecision decision;
  const Eigen::VectorXd s1 = mlp_forward(stage1, x);
  if (s1.size() != 1)
    throw std::invalid_argument("classify_domain: stage-1 model must have one output");
  decision.stage1_prob = stage1.positive_means_single ? s1(0) : 1.0 - s1(0);
  if (decision.stage1_prob >= threshold) {
    decision.label = kSingleSpeaker;
    return decision;
  }

  const Eigen::VectorXd s2 = mlp_forward(stage2, x);
  decision.stage2_posteriors = s2;
  Eigen::Index best = 0;
  const double top = s2.maxCoeff(&best);
  if (top >= threshold) {
    if (!stage2.class_names.empty()) {
      if (static_cast<std::size_t>(best) >= stage2.class_names.size())
        throw std::invalid_argument("classify_domain: class name list too short");
      decision.label = stage2.class_names[static_cast<std::size_t>(best)];
    } else {
      decision.label = "class" + std::to_string(best);
    }
  } else {
    decision.label = kUnknownDomain;
  }
  return decision;
}

}  // namespace diar
