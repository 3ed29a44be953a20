#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "diar/log.hpp"
#include "diar/segmentation.hpp"

namespace diar {

enum class EmbeddingKind { IVEC, XVEC, XI };

// Fixed-dimension vectors with the time span of the subsegment each one
// describes. Entries align one-to-one with a SegmentList.
struct EmbeddingSet {
  struct Entry {
    double onset = 0.0;
    double duration = 0.0;
    Eigen::VectorXd vec;
  };

  std::string uri;
  EmbeddingKind kind = EmbeddingKind::XVEC;
  Eigen::Index dim = 0;
  std::vector<Entry> entries;
  // Sub-vector partition for fused sets (e.g. {x_dim, i_dim}); empty for
  // plain extractor outputs.
  std::vector<Eigen::Index> block_dims;

  void validate() const {
    for (const Entry& e : entries) {
      if (e.vec.size() != dim)
        throw std::invalid_argument("EmbeddingSet '" + uri +
                                    "': inconsistent vector dimension");
      if (!e.vec.allFinite())
        throw std::invalid_argument("EmbeddingSet '" + uri +
                                    "': non-finite vector entry");
    }
  }

  Eigen::MatrixXd matrix() const {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(entries.size()), dim);
    for (std::size_t i = 0; i < entries.size(); ++i)
      m.row(static_cast<Eigen::Index>(i)) = entries[i].vec.transpose();
    return m;
  }
};

enum class WhitenStrategy { GLOBAL_MEAN, BLOCK_CONCAT };

// Mean subtraction fit on a development set; the block variant treats each
// sub-vector independently and concatenates the transformed blocks.
struct WhitenModel {
  struct BlockTransform {
    Eigen::VectorXd mean;
    Eigen::MatrixXd projection;  // rows: output dims of the block
  };

  WhitenStrategy strategy = WhitenStrategy::GLOBAL_MEAN;
  Eigen::VectorXd mean;
  std::vector<BlockTransform> blocks;  // BLOCK_CONCAT only

  Eigen::Index input_dim() const { return mean.size(); }
  Eigen::Index output_dim() const {
    if (strategy == WhitenStrategy::GLOBAL_MEAN) return mean.size();
    Eigen::Index d = 0;
    for (const auto& b : blocks) d += b.projection.rows();
    return d;
  }
};

// Conversation-dependent PCA: top-k eigenvectors of the conversation
// covariance in descending eigenvalue order.
struct PcaModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd components;  // k x dim, orthonormal rows
  Eigen::VectorXd eigenvalues;  // descending, size k
};

// Early fusion: entry j = concat(xvec_j, ivec_j), x block first.
inline EmbeddingSet fuse_xi(const EmbeddingSet& ivecs, const EmbeddingSet& xvecs) {
  if (ivecs.uri != xvecs.uri)
    throw std::invalid_argument("fuse_xi: uri mismatch '" + ivecs.uri +
                                "' vs '" + xvecs.uri + "'");
  if (ivecs.entries.size() != xvecs.entries.size())
    throw std::invalid_argument(
        "fuse_xi: entry count mismatch (" + std::to_string(ivecs.entries.size()) +
        " i-vectors vs " + std::to_string(xvecs.entries.size()) + " x-vectors)");

  constexpr double kSpanEps = 1e-6;
  EmbeddingSet out;
  out.uri = ivecs.uri;
  out.kind = EmbeddingKind::XI;
  out.dim = ivecs.dim + xvecs.dim;
  out.block_dims = {xvecs.dim, ivecs.dim};
  out.entries.reserve(ivecs.entries.size());
  for (std::size_t j = 0; j < ivecs.entries.size(); ++j) {
    const auto& iv = ivecs.entries[j];
    const auto& xv = xvecs.entries[j];
    if (std::abs(iv.onset - xv.onset) > kSpanEps ||
        std::abs(iv.duration - xv.duration) > kSpanEps)
      throw std::invalid_argument(
          "fuse_xi: segment span mismatch at entry " + std::to_string(j));
    EmbeddingSet::Entry e;
    e.onset = xv.onset;
    e.duration = xv.duration;
    e.vec.resize(out.dim);
    e.vec << xv.vec, iv.vec;
    out.entries.push_back(std::move(e));
  }
  return out;
}

namespace detail {

// Eigendecomposition of the sample covariance with a deterministic sign
// convention: the first nonzero entry of every component is non-negative.
inline void covariance_eig(const Eigen::MatrixXd& rows, Eigen::VectorXd& mean,
                           Eigen::MatrixXd& components, Eigen::VectorXd& eigvals) {
  const auto n = rows.rows();
  mean = rows.colwise().mean();
  const Eigen::MatrixXd centered = rows.rowwise() - mean.transpose();
  const double denom = n > 1 ? static_cast<double>(n - 1) : 1.0;
  const Eigen::MatrixXd cov = centered.transpose() * centered / denom;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("covariance eigendecomposition failed");
  // Eigen returns ascending order; flip to descending.
  components = solver.eigenvectors().rowwise().reverse().transpose();
  eigvals = solver.eigenvalues().reverse();
  for (Eigen::Index r = 0; r < components.rows(); ++r) {
    for (Eigen::Index c = 0; c < components.cols(); ++c) {
      if (components(r, c) != 0.0) {
        if (components(r, c) < 0.0) components.row(r) = -components.row(r);
        break;
      }
    }
  }
}

inline std::vector<Eigen::Index> effective_blocks(const EmbeddingSet& set) {
  if (!set.block_dims.empty()) return set.block_dims;
  return {set.dim};
}

}  // namespace detail

// Fits the whitening transform on a development set. GLOBAL_MEAN stores the
// dev-set mean. BLOCK_CONCAT fits an independent mean and full-rank PCA
// rotation per sub-vector block; externally trained projections (e.g. LDA)
// can be substituted on the returned model before use.
inline WhitenModel fit_whiten(const EmbeddingSet& dev, WhitenStrategy strategy) {
  if (dev.entries.empty())
    throw std::invalid_argument("fit_whiten: development set is empty");
  dev.validate();

  WhitenModel model;
  model.strategy = strategy;
  const Eigen::MatrixXd rows = dev.matrix();
  model.mean = rows.colwise().mean();
  if (strategy == WhitenStrategy::BLOCK_CONCAT) {
    Eigen::Index at = 0;
    for (Eigen::Index bd : detail::effective_blocks(dev)) {
      WhitenModel::BlockTransform b;
      Eigen::VectorXd eigvals;
      detail::covariance_eig(rows.middleCols(at, bd), b.mean, b.projection,
                             eigvals);
      model.blocks.push_back(std::move(b));
      at += bd;
    }
    if (at != dev.dim)
      throw std::invalid_argument("fit_whiten: block dims do not partition the vector");
  }
  return model;
}

inline EmbeddingSet apply_whiten(const EmbeddingSet& set, const WhitenModel& model) {
  if (set.dim != model.input_dim())
    throw std::invalid_argument("apply_whiten: dim mismatch (set " +
                                std::to_string(set.dim) + ", model " +
                                std::to_string(model.input_dim()) + ")");
  EmbeddingSet out = set;
  if (model.strategy == WhitenStrategy::GLOBAL_MEAN) {
    for (auto& e : out.entries) e.vec -= model.mean;
    return out;
  }
  Eigen::Index expected = 0;
  for (const auto& b : model.blocks) expected += b.mean.size();
  if (expected != set.dim)
    throw std::invalid_argument("apply_whiten: block transforms do not partition the vector");
  out.dim = model.output_dim();
  for (auto& e : out.entries) {
    Eigen::VectorXd v(out.dim);
    Eigen::Index in_at = 0, out_at = 0;
    for (const auto& b : model.blocks) {
      const Eigen::Index bd = b.mean.size();
      v.segment(out_at, b.projection.rows()) =
          b.projection * (e.vec.segment(in_at, bd) - b.mean);
      in_at += bd;
      out_at += b.projection.rows();
    }
    e.vec = std::move(v);
  }
  out.block_dims.clear();
  for (const auto& b : model.blocks) out.block_dims.push_back(b.projection.rows());
  return out;
}

// PCA on the data in one conversation. When fewer than k entries exist the
// rank falls back to entry_count - 1 (minimum 1) with a warning.
inline PcaModel fit_conversation_pca(const EmbeddingSet& set, int k) {
  if (set.entries.empty())
    throw std::invalid_argument("fit_conversation_pca: empty embedding set");
  if (k <= 0) throw std::invalid_argument("fit_conversation_pca: k must be > 0");
  set.validate();

  auto want = static_cast<Eigen::Index>(k);
  const auto n = static_cast<Eigen::Index>(set.entries.size());
  if (want > set.dim)
    throw std::invalid_argument("fit_conversation_pca: k exceeds embedding dim");
  if (n < want) {
    const Eigen::Index fallback = std::max<Eigen::Index>(1, n - 1);
    warn("fit_conversation_pca: only " + std::to_string(n) +
         " entries for k=" + std::to_string(k) + "; falling back to k=" +
         std::to_string(fallback));
    want = fallback;
  }

  Eigen::VectorXd mean, eigvals;
  Eigen::MatrixXd components;
  detail::covariance_eig(set.matrix(), mean, components, eigvals);

  PcaModel model;
  model.mean = std::move(mean);
  model.components = components.topRows(want);
  model.eigenvalues = eigvals.head(want);
  return model;
}

inline EmbeddingSet apply_pca(const EmbeddingSet& set, const PcaModel& model) {
  if (set.dim != model.mean.size())
    throw std::invalid_argument("apply_pca: dim mismatch");
  EmbeddingSet out = set;
  out.dim = model.components.rows();
  out.block_dims.clear();
  for (auto& e : out.entries) e.vec = model.components * (e.vec - model.mean);
  return out;
}

}  // namespace diar
