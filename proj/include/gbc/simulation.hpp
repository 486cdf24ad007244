#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gbc/core.hpp"
#include "gbc/distributions.hpp"

namespace gbc {

/// Synthetic benchmark: disease modules, a continuous outcome driven by the
/// disease subtype, confounder-driven modules and unstructured noise genes.
struct SimulationConfig {
  int K = 3;
  double subjects_per_cluster_mean = 100.0;
  int modules = 20;
  double module_size_mean = 20.0;
  int confounders = 4;
  int modules_per_confounder = 20;
  int noise_genes = 3000;
  double sigma0 = 1.0;  // template noise
  double sigma1 = 3.0;  // biological variation
  double sigma2 = 6.0;  // outcome noise
  double sigma3 = 1.0;  // noise-gene sd
  double fold_change_low = 0.2;
  double fold_change_high = 2.0;
  double noise_mean_low = 4.0;
  double noise_mean_high = 8.0;
  double wishart_nu = 60.0;
  double wishart_phi_mix = 0.5;
  std::uint64_t seed = 1;

  void validate() const;
  /// Baseline level of (sub)class k, 0-based: 2 + 2 (k + 1).
  static double baseline(int k) { return 2.0 + 2.0 * (k + 1); }
};

enum class GeneCategory { Intrinsic, Confounder, Noise };

struct SimulatedDataset {
  ExpressionMatrix expr;  // raw, unstandardized
  std::vector<double> outcome;
  std::vector<GeneCategory> category;
  /// Module number within its category (1-based; 0 for noise genes).
  std::vector<int> module;
  /// Confounder number for confounder genes (1-based; 0 otherwise).
  std::vector<int> confounder_of_gene;
  std::vector<int> disease_labels;                  // 0-based
  std::vector<std::vector<int>> confounder_labels;  // per confounder, 0-based

  std::vector<Eigen::Index> intrinsic_genes() const;
};

/// phi = mix * I + (1 - mix) * J
Eigen::MatrixXd wishart_scale(Eigen::Index dim, double mix);

/// Inverse-Wishart covariance rescaled to unit diagonal. Retries up to five
/// fresh draws when a factorization fails.
Eigen::MatrixXd sample_module_correlation(Eigen::Index dim, const SimulationConfig& cfg, RngStream& rng);

/// Expression block (size x N) for one correlated module. Each class k gets
/// its own correlation matrix; a subject in class k draws its shifted
/// template X' ~ N(template[k], sigma1^2) and then MVN(X' 1, Sigma_k).
Matrix simulate_correlated_module(const Eigen::VectorXd& template_per_class, Eigen::Index size,
                                  std::span<const int> labels, const SimulationConfig& cfg, RngStream& rng);

/// Modules and noise genes are generated on up to `threads` workers; every
/// module and noise gene owns its substream, so the output does not depend
/// on the thread count.
SimulatedDataset simulate_dataset(const SimulationConfig& cfg, int threads = 1);

}  // namespace gbc
