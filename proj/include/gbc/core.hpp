#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace gbc {

/// Gene-major dense matrix: one row per gene, one column per sample.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Standardized expression values with gene and sample identifiers.
struct ExpressionMatrix {
  Matrix values;
  std::vector<std::string> gene_ids;
  std::vector<std::string> sample_ids;

  Eigen::Index genes() const { return values.rows(); }
  Eigen::Index samples() const { return values.cols(); }

  /// Checks shape, id counts and finiteness. Throws gbc::Error.
  void validate() const;
};

/// Generates ids of the form `<prefix><1-based index>`.
std::vector<std::string> numbered_ids(const std::string& prefix, std::size_t count);

/// Centers each row to mean 0 and scales to standard deviation 1 (n-1 divisor).
/// Throws ZeroVarianceGene for constant rows and NonFiniteInput for NaN/inf.
ExpressionMatrix standardize_genes(const Matrix& raw, std::vector<std::string> gene_ids,
                                   std::vector<std::string> sample_ids);
ExpressionMatrix standardize_genes(const ExpressionMatrix& raw);

/// Row indices kept by filter_low_expression, in original order.
std::vector<Eigen::Index> low_expression_keep(const Matrix& raw, double fraction);

/// Drops the `fraction` of genes with the lowest row mean. Keeps
/// ceil((1 - fraction) * G) rows; ties at the cutoff favour the lower row index.
Matrix filter_low_expression(const Matrix& raw, double fraction);
ExpressionMatrix filter_low_expression(const ExpressionMatrix& raw, double fraction);

enum class OutcomeKind { Continuous, Binary, Ordinal, Survival };

std::string to_string(OutcomeKind kind);
OutcomeKind outcome_kind_from_string(const std::string& name);

/// Clinical variable observed on every sample.
///
/// For survival outcomes `y` holds follow-up times and `events` the 0/1
/// event indicators; for the other kinds `events` is empty. Ordinal levels
/// are stored as their numeric codes.
struct ClinicalOutcome {
  OutcomeKind kind = OutcomeKind::Continuous;
  std::vector<double> y;
  std::vector<int> events;

  std::size_t size() const { return y.size(); }
  void validate(std::size_t expected_samples) const;
};

/// Prior hyperparameters plus cluster count and chain length.
///
/// Inverse-gamma priors use the shape/rate convention. Defaults are the
/// non-informative choices, with informative spike and slab priors on the
/// cluster-mean variances.
struct Hyperparameters {
  double c = 1.0;
  double a_p = 1.0, b_p = 1.0;
  double a_sigma = 0.001, b_sigma = 0.001;
  double a_tau_mu0 = 2.0, b_tau_mu0 = 0.005;
  double a_tau_mu1 = 4.0, b_tau_mu1 = 450.0;
  double a_tau_u0 = 0.001, b_tau_u0 = 0.001;
  double a_tau_u1 = 0.001, b_tau_u1 = 0.001;
  int K = 3;
  int n_total = 1000;
  int n_burnin = 500;

  void validate() const;
};

/// One point of the Gibbs chain. Labels are 0-based cluster indices.
struct ModelState {
  Vector pi;
  Matrix mu;  // G x K
  Vector sigma2;
  std::vector<std::uint8_t> selected;
  std::vector<int> labels;
  double p = 0.5;
  double tau2_mu0 = 1.0;
  double tau2_mu1 = 1.0;
  double tau2_u0 = 1.0;
  double tau2_u1 = 1.0;

  int K() const { return static_cast<int>(pi.size()); }
  Eigen::Index genes() const { return mu.rows(); }
  Eigen::Index samples() const { return static_cast<Eigen::Index>(labels.size()); }

  /// Rejects non-positive variances, off-simplex pi, p outside (0,1) and
  /// out-of-range labels.
  void validate() const;
};

/// Scalar diagnostics recorded at every iteration (burn-in included).
struct IterationDiagnostics {
  int iteration = 0;
  double log_posterior = 0.0;
  double p = 0.0;
  double tau2_mu0 = 0.0, tau2_mu1 = 0.0, tau2_u0 = 0.0, tau2_u1 = 0.0;
  int n_selected = 0;
};

/// Retained post-burn-in draws and running sums.
///
/// Selection and label draws are always kept; they are small (bytes/ints per
/// gene/sample). Full pi/mu/sigma2 draws are only kept on request.
struct PosteriorTrace {
  int K = 0;
  Eigen::Index G = 0;
  Eigen::Index n = 0;
  bool guided = true;

  std::vector<std::vector<std::uint8_t>> selection_draws;
  std::vector<std::vector<int>> label_draws;
  std::vector<IterationDiagnostics> diagnostics;

  Vector pi_sum;
  Matrix mu_sum;
  Vector sigma2_sum;
  double p_sum = 0.0;
  double tau2_sum[4] = {0.0, 0.0, 0.0, 0.0};

  std::vector<Vector> pi_draws;
  std::vector<Matrix> mu_draws;
  std::vector<Vector> sigma2_draws;

  std::size_t retained() const { return selection_draws.size(); }

  void reset(Eigen::Index genes, Eigen::Index samples, int clusters);
  void record(const ModelState& state, bool keep_full_draws);

  Vector inclusion_frequency() const;
  /// n x K matrix of per-sample cluster frequencies.
  Matrix cluster_frequency() const;
  Vector posterior_mean_pi() const;
  Matrix posterior_mean_mu() const;
  Vector posterior_mean_sigma2() const;
};

}  // namespace gbc
