#pragma once

#include <span>
#include <string>
#include <vector>

#include "gbc/core.hpp"

namespace gbc {

/// Per-gene outcome association scaled to [0, 1].
struct GuidanceVector {
  Vector u;
  Vector raw_r2;
  OutcomeKind outcome_kind = OutcomeKind::Continuous;
  /// Genes whose univariate fit failed or hit separation, with the reason.
  std::vector<std::string> warnings;
};

enum class ContinuousMeasure { RSquared, AbsCorrelation };
enum class OrdinalModel { ProportionalOdds };

struct GuidanceOptions {
  ContinuousMeasure continuous = ContinuousMeasure::RSquared;
  OrdinalModel ordinal = OrdinalModel::ProportionalOdds;
  int threads = 1;
};

/// Status of a likelihood-based fit.
enum class FitStatus { Converged, Separation };

struct PseudoR2 {
  double value = 0.0;
  double loglik_null = 0.0;
  double loglik_model = 0.0;
  double coefficient = 0.0;
  int iterations = 0;
  FitStatus status = FitStatus::Converged;
};

/// OLS R^2 of y on (1, x), i.e. squared Pearson correlation.
double guidance_continuous(std::span<const double> x, std::span<const double> y);
double abs_correlation(std::span<const double> x, std::span<const double> y);

/// Cox-Snell pseudo R^2 from the maximized log-likelihoods over n subjects.
double cox_snell_r2(double loglik_null, double loglik_model, std::size_t n);

/// Logistic regression of 0/1 y on (1, x).
PseudoR2 fit_logistic(std::span<const double> x, std::span<const double> y);
/// Proportional-odds cumulative-logit regression; levels are ranked by value.
PseudoR2 fit_proportional_odds(std::span<const double> x, std::span<const double> y);
/// Univariate Cox model, Breslow ties, Newton-Raphson with step halving.
PseudoR2 fit_cox(std::span<const double> x, std::span<const double> times, std::span<const int> events);

/// Breslow partial log-likelihood at coefficient beta.
double cox_partial_loglik(std::span<const double> x, std::span<const double> times, std::span<const int> events,
                          double beta);

PseudoR2 guidance_glm(std::span<const double> x, const ClinicalOutcome& outcome);
PseudoR2 guidance_survival(std::span<const double> x, std::span<const double> times, std::span<const int> events);

/// Min-max rescaling to [0, 1]; throws DegenerateRange when max - min < 1e-12.
Vector adjust_pseudo_r2(const Vector& raw);

/// Gene-wise (pseudo-)R^2 followed by min-max adjustment. A gene whose fit
/// fails gets raw value 0 and a warning instead of aborting the run.
GuidanceVector compute_guidance(const ExpressionMatrix& expr, const ClinicalOutcome& outcome,
                                const GuidanceOptions& options = {});

}  // namespace gbc
