#pragma once

#include <cstdint>
#include <functional>
#include <optional>

#include "gbc/core.hpp"
#include "gbc/distributions.hpp"

namespace gbc {

/// Starting point of a chain. Both draw Z uniformly and set p, pi, sigma2 and
/// the tau2's the same way; they differ in mu and L.
enum class InitScheme {
  /// With guidance: mu = 0 (the prior mean) and L_g = 1 iff U_g > 0.5.
  /// Without guidance this is the same as ClusterMeans.
  PriorCentred,
  /// mu = sample means over the random initial clusters, L ~ Bernoulli(0.5).
  ClusterMeans,
};

struct GibbsConfig {
  Hyperparameters hyper;
  std::uint64_t seed = 1;
  /// false runs the unguided sparse baseline: no U likelihood in the
  /// selection step and no tau2_u updates.
  bool guided = true;
  int thin = 1;
  int threads = 1;
  InitScheme init = InitScheme::PriorCentred;
  bool keep_full_draws = false;
  /// Called after every iteration; may be empty.
  std::function<void(const IterationDiagnostics&)> progress;

  void validate() const;
};

/// Data the conditionals read: the expression matrix in both layouts, per-gene
/// sums of squares and the optional guidance vector.
class SamplerData {
 public:
  SamplerData(const Matrix& values, std::optional<Vector> guidance);

  const Matrix& values() const { return values_; }
  /// n x G copy so per-sample dot products run over contiguous memory.
  const Matrix& by_sample() const { return by_sample_; }
  bool guided() const { return guidance_.has_value(); }
  const Vector& guidance() const { return *guidance_; }
  Eigen::Index genes() const { return values_.rows(); }
  Eigen::Index samples() const { return values_.cols(); }

 private:
  Matrix values_;
  Matrix by_sample_;
  std::optional<Vector> guidance_;
};

enum class TauComponent { Mu0, Mu1, U0, U1 };

/// Per-cluster sizes and gene-wise sums over cluster members.
struct ClusterStats {
  std::vector<int> counts;
  Matrix sums;  // G x K
};

ClusterStats cluster_statistics(const Matrix& values, const std::vector<int>& labels, int K, int threads = 1);

ModelState initialize_state(const ExpressionMatrix& expr, const std::optional<Vector>& guidance,
                            const GibbsConfig& cfg);
ModelState initialize_state(const ExpressionMatrix& expr, const GibbsConfig& cfg);

// Exact conditional distributions. Each update_* draws from the matching one.

BetaDist p_conditional(const ModelState& state, const Hyperparameters& hyper);
InverseGammaDist tau2_conditional(const ModelState& state, const SamplerData& data, const Hyperparameters& hyper,
                                  TauComponent which);
/// Log odds of L_g = 1 given everything else, computed in log space.
double selection_log_odds(const ModelState& state, const SamplerData& data, Eigen::Index g);
double selection_probability(const ModelState& state, const SamplerData& data, Eigen::Index g);
Vector pi_conditional(const ModelState& state, const Hyperparameters& hyper);
/// Unnormalized log weights log pi_k - sum_g (X_gi - mu_gk)^2 / (2 sigma_g^2),
/// up to an additive constant shared by all k.
Vector assignment_log_weights(const ModelState& state, const SamplerData& data, Eigen::Index i);
NormalDist mean_conditional(const ModelState& state, const ClusterStats& stats, Eigen::Index g, int k);
InverseGammaDist variance_conditional(const ModelState& state, const SamplerData& data,
                                      const Hyperparameters& hyper, Eigen::Index g);

void update_p(ModelState& state, const Hyperparameters& hyper, RngStream& rng);
void update_tau2(ModelState& state, const SamplerData& data, const Hyperparameters& hyper, TauComponent which,
                 RngStream& rng);
/// Per-gene draws use rng.child(Gene, g).
void update_gene_selection(ModelState& state, const SamplerData& data, const RngStream& rng, int threads = 1);
void update_pi(ModelState& state, const Hyperparameters& hyper, RngStream& rng);
/// Per-sample draws use rng.child(Sample, i).
void update_assignments(ModelState& state, const SamplerData& data, const RngStream& rng, int threads = 1);
void update_means(ModelState& state, const SamplerData& data, const RngStream& rng, int threads = 1);
void update_variances(ModelState& state, const SamplerData& data, const Hyperparameters& hyper,
                      const RngStream& rng, int threads = 1);

/// One full iteration in the fixed order p, tau2_mu0, tau2_mu1, tau2_u0,
/// tau2_u1, L, pi, Z, mu, sigma2. The guidance variances are skipped when
/// the data carries no guidance.
void gibbs_sweep(ModelState& state, const SamplerData& data, const Hyperparameters& hyper,
                 const RngStream& iteration_rng, int threads = 1);

/// Log of the full unnormalized posterior at `state`.
double log_posterior(const ModelState& state, const SamplerData& data, const Hyperparameters& hyper);

/// Runs the chain and keeps every `thin`-th post-burn-in draw.
PosteriorTrace run_gibbs(const ExpressionMatrix& expr, const std::optional<Vector>& guidance,
                         const GibbsConfig& cfg);

}  // namespace gbc
