#pragma once

#include <optional>
#include <variant>
#include <vector>

#include "gbc/core.hpp"
#include "gbc/sampler.hpp"

namespace gbc {

/// Local FDR P_g = 1 - posterior inclusion frequency of gene g.
Vector local_fdr(const PosteriorTrace& trace);

/// Expected FDR among genes with P_g <= eta; nullopt when nothing passes.
std::optional<double> fdr_at_threshold(const Vector& local_fdr, double eta);

struct ByFdr { double eta; };
struct TopM { Eigen::Index m; };
using SelectionMode = std::variant<ByFdr, TopM>;

struct GeneDecision {
  Vector local_fdr;
  std::vector<Eigen::Index> selected;  // ascending gene indices
  double eta = 0.0;
  /// nullopt marks an empty selection.
  std::optional<double> achieved_fdr;
};

/// by_fdr keeps {g : P_g <= eta}. top_m keeps the m smallest P_g (ties by
/// gene index) and reports the implied eta (largest kept P_g).
GeneDecision select_genes(const Vector& local_fdr, const SelectionMode& mode);

struct ClusterDecision {
  Matrix soft;              // n x K posterior cluster frequencies
  std::vector<int> labels;  // 0-based MAP labels, ties to the smallest index
};

ClusterDecision cluster_decision(const PosteriorTrace& trace);

/// Relabels clusters by decreasing size, ties by smallest member index,
/// empty clusters last. Permutes the soft matrix columns to match.
ClusterDecision canonical_relabel(const ClusterDecision& decision);

enum class BicPenalty {
  /// K * G * log G
  GeneCount,
  /// K * G * log n
  SampleCount,
};

struct BicTerms {
  double log_likelihood = 0.0;
  double penalty = 0.0;
  double value() const { return -2.0 * log_likelihood + penalty; }
};

double bic_penalty(int K, Eigen::Index genes, Eigen::Index samples, BicPenalty kind = BicPenalty::GeneCount);

/// Mixture log-likelihood sum_i log sum_k pi_k prod_g N(X_gi; mu_gk, sigma_g^2).
double mixture_log_likelihood(const Matrix& values, const Vector& pi, const Matrix& mu, const Vector& sigma2);

BicTerms bic_terms(const ExpressionMatrix& expr, const PosteriorTrace& trace, BicPenalty kind = BicPenalty::GeneCount);
double bic(const ExpressionMatrix& expr, const PosteriorTrace& trace, int K,
           BicPenalty kind = BicPenalty::GeneCount);

struct SelectKResult {
  int best_k = 0;
  std::vector<int> ks;
  std::vector<double> bic;
};

/// Seed of the chain used for cluster count K.
std::uint64_t seed_for_k(std::uint64_t master_seed, int K);

/// Fits one chain per K (seed derived from the master seed and K) and picks
/// the minimum BIC. Chains for different K run on up to `workers` threads.
SelectKResult select_k(const ExpressionMatrix& expr, const std::optional<Vector>& guidance,
                       const GibbsConfig& cfg_template, const std::vector<int>& k_range,
                       BicPenalty kind = BicPenalty::GeneCount, int workers = 1);

}  // namespace gbc
