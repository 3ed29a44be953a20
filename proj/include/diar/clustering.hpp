#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "diar/embeddings.hpp"
#include "diar/log.hpp"

namespace diar {

enum class DistanceMetric { COSINE, NEG_PLDA };

struct DistanceMatrix {
  Eigen::MatrixXd d;
  DistanceMetric metric = DistanceMetric::COSINE;

  Eigen::Index size() const { return d.rows(); }

  void validate() const {
    if (d.rows() != d.cols())
      throw std::invalid_argument("DistanceMatrix: matrix must be square");
    if (!d.allFinite())
      throw std::invalid_argument("DistanceMatrix: non-finite entries");
    for (Eigen::Index i = 0; i < d.rows(); ++i)
      for (Eigen::Index j = i; j < d.cols(); ++j)
        if (std::abs(d(i, j) - d(j, i)) > 1e-9)
          throw std::invalid_argument("DistanceMatrix: not symmetric");
    if (metric == DistanceMetric::COSINE)
      for (Eigen::Index i = 0; i < d.rows(); ++i)
        if (std::abs(d(i, i)) > 1e-12)
          throw std::invalid_argument("DistanceMatrix: nonzero cosine diagonal");
  }
};

struct ClusterAssignment {
  struct Merge {
    int a = 0;
    int b = 0;
    double distance = 0.0;
  };

  std::vector<int> labels;          // one per point, in [0, k)
  int k = 0;
  std::vector<Merge> linkage_trace;  // AHC only
};

// 1 - cos(u, v), in [0, 2]. A zero vector has no direction; its distance to
// anything is defined as 1.
inline double cosine_distance(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  const double nu = u.norm(), nv = v.norm();
  if (nu == 0.0 || nv == 0.0) {
    warn("cosine_distance: zero vector; distance defined as 1");
    return 1.0;
  }
  return 1.0 - u.dot(v) / (nu * nv);
}

inline DistanceMatrix cosine_distance_matrix(const EmbeddingSet& set) {
  const auto n = static_cast<Eigen::Index>(set.entries.size());
  DistanceMatrix out;
  out.metric = DistanceMetric::COSINE;
  out.d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double dij = cosine_distance(set.entries[static_cast<std::size_t>(i)].vec,
                                         set.entries[static_cast<std::size_t>(j)].vec);
      out.d(i, j) = dij;
      out.d(j, i) = dij;
    }
  return out;
}

namespace detail {

// Relabels cluster ids to [0, k) by order of each cluster's first member.
inline ClusterAssignment finalize_labels(const std::vector<int>& raw, int n) {
  ClusterAssignment out;
  out.labels.resize(static_cast<std::size_t>(n));
  std::map<int, int> remap;
  for (int i = 0; i < n; ++i) {
    const int r = raw[static_cast<std::size_t>(i)];
    auto it = remap.find(r);
    if (it == remap.end())
      it = remap.emplace(r, static_cast<int>(remap.size())).first;
    out.labels[static_cast<std::size_t>(i)] = it->second;
  }
  out.k = static_cast<int>(remap.size());
  return out;
}

}  // namespace detail

// Average-linkage agglomerative clustering. Merging continues while the
// cluster count exceeds k_max regardless of the threshold; between k_max and
// k_min it continues only while the minimal average distance is within the
// threshold; it never merges below k_min. Inter-cluster distances follow the
// Lance-Williams average-linkage update. Ties break on the lowest (i, j).
inline ClusterAssignment ahc(const DistanceMatrix& dist, double threshold,
                             int k_min, int k_max) {
  dist.validate();
  const int n = static_cast<int>(dist.size());
  if (n == 0) throw std::invalid_argument("ahc: empty distance matrix");
  if (k_min < 1 || k_min > k_max)
    throw std::invalid_argument("ahc: need 1 <= k_min <= k_max");
  if (k_min > n) {
    warn("ahc: k_min=" + std::to_string(k_min) + " exceeds n=" +
         std::to_string(n) + "; clamping corridor to n");
    k_min = n;
  }
  if (k_max > n) k_max = n;

  Eigen::MatrixXd d = dist.d;
  std::vector<int> size(static_cast<std::size_t>(n), 1);
  std::vector<bool> alive(static_cast<std::size_t>(n), true);
  std::vector<int> raw(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) raw[static_cast<std::size_t>(i)] = i;

  ClusterAssignment result;
  int k = n;
  while (k > k_min) {
    int bi = -1, bj = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      if (!alive[static_cast<std::size_t>(i)]) continue;
      for (int j = i + 1; j < n; ++j) {
        if (!alive[static_cast<std::size_t>(j)]) continue;
        if (d(i, j) < best) {
          best = d(i, j);
          bi = i;
          bj = j;
        }
      }
    }
    if (bi < 0) break;
    if (k <= k_max && best > threshold) break;

    // Merge bj into bi (Lance-Williams, average linkage).
    const double ni = size[static_cast<std::size_t>(bi)];
    const double nj = size[static_cast<std::size_t>(bj)];
    for (int m = 0; m < n; ++m) {
      if (!alive[static_cast<std::size_t>(m)] || m == bi || m == bj) continue;
      const double merged = (ni * d(bi, m) + nj * d(bj, m)) / (ni + nj);
      d(bi, m) = merged;
      d(m, bi) = merged;
    }
    size[static_cast<std::size_t>(bi)] += size[static_cast<std::size_t>(bj)];
    alive[static_cast<std::size_t>(bj)] = false;
    for (int p = 0; p < n; ++p)
      if (raw[static_cast<std::size_t>(p)] == bj) raw[static_cast<std::size_t>(p)] = bi;
    result.linkage_trace.push_back({bi, bj, best});
    --k;
  }

  ClusterAssignment out = detail::finalize_labels(raw, n);
  out.linkage_trace = std::move(result.linkage_trace);
  return out;
}

// Two-covariance PLDA: speaker means drawn from N(mu, between_cov),
// observations from N(speaker_mean, within_cov).
struct PldaModel {
  Eigen::VectorXd mu;
  Eigen::MatrixXd between_cov;
  Eigen::MatrixXd within_cov;

  Eigen::Index dim() const { return mu.size(); }
};

// Precomputed quadratic forms for the pairwise log-likelihood ratio
//   log p(u, v | same speaker) - log p(u, v | different speakers).
class PldaScorer {
 public:
  explicit PldaScorer(const PldaModel& model) : mu_(model.mu) {
    const Eigen::Index d = model.dim();
    if (model.between_cov.rows() != d || model.within_cov.rows() != d)
      throw std::invalid_argument("PldaScorer: covariance dims do not match mu");
    const Eigen::MatrixXd total = model.between_cov + model.within_cov;
    Eigen::LDLT<Eigen::MatrixXd> total_ldlt(total);
    if (total_ldlt.info() != Eigen::Success ||
        (total_ldlt.vectorD().array() <= 0.0).any())
      throw std::runtime_error(
          "PldaScorer: total covariance not positive definite (condition ~" +
          std::to_string(condition_estimate(total)) + ")");
    const Eigen::MatrixXd total_inv =
        total_ldlt.solve(Eigen::MatrixXd::Identity(d, d));
    // Schur complement of the same-speaker joint covariance [[T, B], [B, T]].
    const Eigen::MatrixXd schur =
        total - model.between_cov * total_inv * model.between_cov;
    Eigen::LDLT<Eigen::MatrixXd> schur_ldlt(schur);
    if (schur_ldlt.info() != Eigen::Success ||
        (schur_ldlt.vectorD().array() <= 0.0).any())
      throw std::runtime_error(
          "PldaScorer: within covariance numerically singular (condition ~" +
          std::to_string(condition_estimate(model.within_cov)) + ")");
    const Eigen::MatrixXd schur_inv =
        schur_ldlt.solve(Eigen::MatrixXd::Identity(d, d));

    q_ = total_inv - schur_inv;
    // Cross block of the joint inverse, negated.
    p_ = total_inv * model.between_cov * schur_inv;
    const double logdet_total = total_ldlt.vectorD().array().log().sum();
    const double logdet_schur = schur_ldlt.vectorD().array().log().sum();
    constant_ = -0.5 * (logdet_total + logdet_schur) + logdet_total;
    // Symmetrize against round-off so score(u, v) == score(v, u) bit-exactly.
    q_ = 0.5 * (q_ + q_.transpose()).eval();
    p_ = 0.5 * (p_ + p_.transpose()).eval();
  }

  double score(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const {
    if (u.size() != mu_.size() || v.size() != mu_.size())
      throw std::invalid_argument("PldaScorer: vector dim mismatch");
    const Eigen::VectorXd uc = u - mu_;
    const Eigen::VectorXd vc = v - mu_;
    // The cross term is averaged both ways so that swapping u and v yields a
    // bit-identical result.
    const double cross = 0.5 * (uc.dot(p_ * vc) + vc.dot(p_ * uc));
    return 0.5 * (uc.dot(q_ * uc) + vc.dot(q_ * vc)) + cross + constant_;
  }

 private:
  static double condition_estimate(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    return lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  }

  Eigen::VectorXd mu_;
  Eigen::MatrixXd q_;
  Eigen::MatrixXd p_;
  double constant_ = 0.0;
};

inline double plda_score(const PldaModel& model, const Eigen::VectorXd& u,
                         const Eigen::VectorXd& v) {
  return PldaScorer(model).score(u, v);
}

// Pairwise -LLR matrix with a cleared diagonal. For k-medoids the entries
// are shifted so the minimum off-diagonal distance is 0; AHC thresholds the
// raw -LLR scale instead.
inline DistanceMatrix plda_distance_matrix(const PldaModel& model,
                                           const EmbeddingSet& set,
                                           bool shift_min_to_zero = true) {
  const PldaScorer scorer(model);
  const auto n = static_cast<Eigen::Index>(set.entries.size());
  DistanceMatrix out;
  out.metric = DistanceMetric::NEG_PLDA;
  out.d = Eigen::MatrixXd::Zero(n, n);
  double lo = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double dij = -scorer.score(set.entries[static_cast<std::size_t>(i)].vec,
                                       set.entries[static_cast<std::size_t>(j)].vec);
      out.d(i, j) = dij;
      out.d(j, i) = dij;
      lo = std::min(lo, dij);
    }
  if (shift_min_to_zero && n > 1 && std::isfinite(lo))
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        if (i != j) out.d(i, j) -= lo;
  return out;
}

struct PldaFitOptions {
  int max_iterations = 20;
  double variance_floor = 1e-8;
};

// EM for the two-covariance model on labeled development vectors. The
// marginal log-likelihood is appended to *ll_trace per iteration when given;
// it is non-decreasing up to round-off.
inline PldaModel fit_plda(const Eigen::MatrixXd& rows,
                          const std::vector<int>& labels,
                          const PldaFitOptions& opts = {},
                          std::vector<double>* ll_trace = nullptr) {
  const auto n = rows.rows();
  const auto d = rows.cols();
  if (n == 0 || static_cast<std::size_t>(n) != labels.size())
    throw std::invalid_argument("fit_plda: rows/labels size mismatch");

  std::map<int, std::vector<Eigen::Index>> classes;
  for (Eigen::Index i = 0; i < n; ++i) classes[labels[static_cast<std::size_t>(i)]].push_back(i);
  if (classes.size() < 2)
    throw std::invalid_argument(
        "fit_plda: between-class covariance undefined with a single class");
  bool any_multi = false;
  for (const auto& [c, idx] : classes) any_multi |= idx.size() >= 2;
  if (!any_multi)
    throw std::invalid_argument("fit_plda: need at least one class with >= 2 samples");

  const auto num_classes = static_cast<double>(classes.size());

  // Per-class sufficient statistics.
  std::vector<Eigen::VectorXd> class_mean;
  std::vector<double> class_count;
  Eigen::MatrixXd within_scatter = Eigen::MatrixXd::Zero(d, d);
  for (const auto& [c, idx] : classes) {
    Eigen::VectorXd m = Eigen::VectorXd::Zero(d);
    for (Eigen::Index i : idx) m += rows.row(i).transpose();
    m /= static_cast<double>(idx.size());
    for (Eigen::Index i : idx) {
      const Eigen::VectorXd r = rows.row(i).transpose() - m;
      within_scatter += r * r.transpose();
    }
    class_mean.push_back(std::move(m));
    class_count.push_back(static_cast<double>(idx.size()));
  }

  // Moment initialization: scatter of class means and pooled within scatter.
  PldaModel model;
  model.mu = Eigen::VectorXd::Zero(d);
  for (const auto& m : class_mean) model.mu += m;
  model.mu /= num_classes;
  model.between_cov = Eigen::MatrixXd::Zero(d, d);
  for (const auto& m : class_mean) {
    const Eigen::VectorXd r = m - model.mu;
    model.between_cov += r * r.transpose();
  }
  model.between_cov /= num_classes;
  model.within_cov = within_scatter / static_cast<double>(n);
  const auto floor_spd = [&](Eigen::MatrixXd& cov) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    const Eigen::VectorXd vals = es.eigenvalues().cwiseMax(opts.variance_floor);
    cov = es.eigenvectors() * vals.asDiagonal() * es.eigenvectors().transpose();
  };
  floor_spd(model.between_cov);
  floor_spd(model.within_cov);

  const double log2pi = std::log(2.0 * std::numbers::pi);
  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    const Eigen::MatrixXd b_inv =
        model.between_cov.ldlt().solve(Eigen::MatrixXd::Identity(d, d));
    const Eigen::MatrixXd w_inv =
        model.within_cov.ldlt().solve(Eigen::MatrixXd::Identity(d, d));

    // E-step: posterior of each class's latent mean; also the marginal
    // log-likelihood of the data under the current parameters.
    double ll = 0.0;
    std::vector<Eigen::VectorXd> post_mean(class_mean.size());
    std::vector<Eigen::MatrixXd> post_cov(class_mean.size());
    {
      const Eigen::LDLT<Eigen::MatrixXd> w_ldlt(model.within_cov);
      const double logdet_w = w_ldlt.vectorD().array().log().sum();
      for (std::size_t s = 0; s < class_mean.size(); ++s) {
        const double ns = class_count[s];
        const Eigen::MatrixXd precision = b_inv + ns * w_inv;
        post_cov[s] = precision.ldlt().solve(Eigen::MatrixXd::Identity(d, d));
        post_mean[s] = post_cov[s] * (b_inv * model.mu + ns * (w_inv * class_mean[s]));

        const Eigen::MatrixXd marg = model.between_cov + model.within_cov / ns;
        const Eigen::LDLT<Eigen::MatrixXd> marg_ldlt(marg);
        const Eigen::VectorXd rc = class_mean[s] - model.mu;
        ll += -0.5 * rc.dot(marg_ldlt.solve(rc)) -
              0.5 * marg_ldlt.vectorD().array().log().sum() -
              0.5 * static_cast<double>(d) * log2pi;
        ll += -0.5 * (ns - 1.0) * logdet_w -
              0.5 * (ns - 1.0) * static_cast<double>(d) * log2pi -
              0.5 * static_cast<double>(d) * std::log(ns);
      }
      // Pooled within-class scatter term of the marginal likelihood.
      ll += -0.5 * (w_inv * within_scatter).trace();
    }
    if (ll_trace) ll_trace->push_back(ll);

    // M-step.
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(d);
    for (const auto& m : post_mean) mu += m;
    mu /= num_classes;
    Eigen::MatrixXd between = Eigen::MatrixXd::Zero(d, d);
    for (std::size_t s = 0; s < post_mean.size(); ++s) {
      const Eigen::VectorXd r = post_mean[s] - mu;
      between += post_cov[s] + r * r.transpose();
    }
    between /= num_classes;
    Eigen::MatrixXd within = within_scatter;
    for (std::size_t s = 0; s < post_mean.size(); ++s) {
      const Eigen::VectorXd r = class_mean[s] - post_mean[s];
      within += class_count[s] * (post_cov[s] + r * r.transpose());
    }
    within /= static_cast<double>(n);

    model.mu = std::move(mu);
    model.between_cov = std::move(between);
    model.within_cov = std::move(within);
  }
  return model;
}

// PAM k-medoids: greedy BUILD then best-improvement SWAP until no swap
// lowers the total distance to medoids. Deterministic; ties break on the
// lowest point index.
inline ClusterAssignment k_medoids(const DistanceMatrix& dist, int k) {
  dist.validate();
  const int n = static_cast<int>(dist.size());
  if (n == 0) throw std::invalid_argument("k_medoids: empty distance matrix");
  if (k <= 0 || k > n)
    throw std::invalid_argument("k_medoids: need 0 < k <= n (k=" +
                                std::to_string(k) + ", n=" + std::to_string(n) + ")");
  const Eigen::MatrixXd& d = dist.d;

  auto total_cost = [&](const std::vector<int>& medoids) {
    double cost = 0.0;
    for (int p = 0; p < n; ++p) {
      double best = std::numeric_limits<double>::infinity();
      for (int m : medoids) best = std::min(best, d(p, m));
      cost += best;
    }
    return cost;
  };

  // BUILD: first the 1-medoid optimum, then greedily the point whose
  // addition reduces the cost most.
  std::vector<int> medoids;
  {
    int best_point = 0;
    double best_cost = std::numeric_limits<double>::infinity();
    for (int c = 0; c < n; ++c) {
      const double cost = d.col(c).sum();
      if (cost < best_cost) {
        best_cost = cost;
        best_point = c;
      }
    }
    medoids.push_back(best_point);
  }
  std::vector<double> nearest(static_cast<std::size_t>(n));
  auto refresh_nearest = [&]() {
    for (int p = 0; p < n; ++p) {
      double best = std::numeric_limits<double>::infinity();
      for (int m : medoids) best = std::min(best, d(p, m));
      nearest[static_cast<std::size_t>(p)] = best;
    }
  };
  refresh_nearest();
  while (static_cast<int>(medoids.size()) < k) {
    int best_cand = -1;
    double best_gain = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < n; ++c) {
      if (std::find(medoids.begin(), medoids.end(), c) != medoids.end()) continue;
      double gain = 0.0;
      for (int p = 0; p < n; ++p)
        gain += std::max(0.0, nearest[static_cast<std::size_t>(p)] - d(p, c));
      if (gain > best_gain) {
        best_gain = gain;
        best_cand = c;
      }
    }
    medoids.push_back(best_cand);
    refresh_nearest();
  }

  // SWAP: apply the best strictly improving (medoid, candidate) exchange
  // until none exists.
  double current = total_cost(medoids);
  for (;;) {
    int best_m = -1, best_c = -1;
    double best_cost = current;
    for (std::size_t mi = 0; mi < medoids.size(); ++mi) {
      for (int c = 0; c < n; ++c) {
        if (std::find(medoids.begin(), medoids.end(), c) != medoids.end()) continue;
        std::vector<int> trial = medoids;
        trial[mi] = c;
        const double cost = total_cost(trial);
        if (cost < best_cost - 1e-12) {
          best_cost = cost;
          best_m = static_cast<int>(mi);
          best_c = c;
        }
      }
    }
    if (best_m < 0) break;
    medoids[static_cast<std::size_t>(best_m)] = best_c;
    current = best_cost;
  }

  std::sort(medoids.begin(), medoids.end());
  ClusterAssignment out;
  out.k = k;
  out.labels.resize(static_cast<std::size_t>(n));
  for (int p = 0; p < n; ++p) {
    int best_idx = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t mi = 0; mi < medoids.size(); ++mi) {
      if (d(p, medoids[mi]) < best) {
        best = d(p, medoids[mi]);
        best_idx = static_cast<int>(mi);
      }
    }
    out.labels[static_cast<std::size_t>(p)] = best_idx;
  }
  return out;
}

}  // namespace diar
