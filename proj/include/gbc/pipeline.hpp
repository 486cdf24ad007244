#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gbc/core.hpp"
#include "gbc/guidance.hpp"
#include "gbc/inference.hpp"
#include "gbc/io.hpp"
#include "gbc/metrics.hpp"
#include "gbc/sampler.hpp"

namespace gbc {

/// Everything one fit needs besides the data.
struct FitOptions {
  GibbsConfig gibbs;
  GuidanceOptions guidance;
  SelectionMode selection = ByFdr{0.001};
  BicPenalty penalty = BicPenalty::GeneCount;
};

struct FitResult {
  std::optional<GuidanceVector> guidance;
  PosteriorTrace trace;
  io::DecisionRecord decision;
};

/// Guidance (computed from `outcome` unless `guidance` is given), chain and
/// decisions on already standardized data. The run is guided iff
/// options.gibbs.guided.
FitResult fit_standardized(const ExpressionMatrix& standardized, const std::optional<ClinicalOutcome>& outcome,
                           const std::optional<Vector>& guidance, const FitOptions& options);

/// Ground truth restricted to what the metrics need.
struct TruthView {
  std::vector<int> disease_labels;  // 0-based, aligned to the fit samples
  std::vector<bool> intrinsic;      // aligned to the fit genes
};

TruthView align_truth(const io::Truth& truth, const ExpressionMatrix& expr);

/// Metrics of one fit. Without truth only the silhouette is computed (other
/// fields are NaN); `reference_labels` replaces the true labels for the ARI.
EvaluationReport evaluate_decision(const ExpressionMatrix& standardized, const io::DecisionRecord& decision,
                                   const std::optional<TruthView>& truth,
                                   const std::optional<std::vector<int>>& reference_labels = std::nullopt);

/// Mean and standard error (n - 1 divisor) of the finite entries.
struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};
MeanSe mean_se(std::span<const double> values);

enum class SweepAxis { ATauMu0, BTauMu0, ATauMu1, BTauMu1 };

std::string to_string(SweepAxis axis);
/// Accepts a_tau_mu0 or a-tau-mu0 spellings.
SweepAxis sweep_axis_from_string(const std::string& name);
/// Default grid endpoints of each axis.
std::pair<double, double> default_sweep_range(SweepAxis axis);
/// `points` evenly spaced values; both endpoints are hit exactly.
std::vector<double> sweep_grid(double lo, double hi, int points);
double& hyper_field(Hyperparameters& hyper, SweepAxis axis);

}  // namespace gbc
