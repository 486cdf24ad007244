#include "gbc/pipeline.hpp"

#include <cmath>
#include <limits>
#include <set>
#include <unordered_map>

#include "gbc/error.hpp"

namespace gbc {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string selection_name(const SelectionMode& mode) {
  if (const auto* top = std::get_if<TopM>(&mode)) return "top_m(" + std::to_string(top->m) + ")";
  return "by_fdr(" + io::format_double(std::get<ByFdr>(mode).eta) + ")";
}

}  // namespace

FitResult fit_standardized(const ExpressionMatrix& standardized, const std::optional<ClinicalOutcome>& outcome,
                           const std::optional<Vector>& guidance, const FitOptions& options) {
  FitResult result;
  std::optional<Vector> u;
  if (options.gibbs.guided) {
    if (guidance) {
      u = guidance;
    } else {
      if (!outcome) throw Error(ErrorKind::InvalidParameter, "a guided fit needs an outcome or a guidance vector");
      result.guidance = compute_guidance(standardized, *outcome, options.guidance);
      u = result.guidance->u;
    }
  }
  result.trace = run_gibbs(standardized, u, options.gibbs);

  auto& d = result.decision;
  d.genes = select_genes(local_fdr(result.trace), options.selection);
  d.clusters = canonical_relabel(cluster_decision(result.trace));
  d.selection_mode = selection_name(options.selection);
  d.bic_k = {options.gibbs.hyper.K};
  d.bic_terms = {bic_terms(standardized, result.trace, options.penalty)};
  return result;
}

TruthView align_truth(const io::Truth& truth, const ExpressionMatrix& expr) {
  std::unordered_map<std::string, int> label_of;
  if (truth.sample_ids.size() != truth.disease_labels.size())
    throw Error(ErrorKind::LengthMismatch, "truth sample ids and labels differ in length");
  for (std::size_t i = 0; i < truth.sample_ids.size(); ++i) label_of.emplace(truth.sample_ids[i], truth.disease_labels[i]);

  TruthView view;
  for (const auto& id : expr.sample_ids) {
    const auto it = label_of.find(id);
    if (it == label_of.end()) throw Error(ErrorKind::DimensionMismatch, "sample '" + id + "' is not in the truth file");
    view.disease_labels.push_back(it->second);
  }
  const std::set<std::string> intrinsic(truth.intrinsic_genes.begin(), truth.intrinsic_genes.end());
  for (const auto& id : expr.gene_ids) view.intrinsic.push_back(intrinsic.count(id) > 0);
  return view;
}

EvaluationReport evaluate_decision(const ExpressionMatrix& standardized, const io::DecisionRecord& decision,
                                   const std::optional<TruthView>& truth,
                                   const std::optional<std::vector<int>>& reference_labels) {
  EvaluationReport r{kNaN, kNaN, kNaN, kNaN};
  const auto& labels = decision.clusters.labels;
  if (reference_labels) r.ari = adjusted_rand_index(labels, *reference_labels);
  if (truth) {
    if (!reference_labels) r.ari = adjusted_rand_index(labels, truth->disease_labels);
    std::vector<Eigen::Index> intrinsic;
    for (std::size_t g = 0; g < truth->intrinsic.size(); ++g)
      if (truth->intrinsic[g]) intrinsic.push_back(static_cast<Eigen::Index>(g));
    if (!(intrinsic.empty() && decision.genes.selected.empty()))
      r.jaccard = jaccard_index(decision.genes.selected, intrinsic);
    r.auc = gene_selection_auc(decision.genes.local_fdr, truth->intrinsic);
  }

  const std::set<int> distinct(labels.begin(), labels.end());
  if (!decision.genes.selected.empty() && distinct.size() >= 2) {
    Matrix selected(static_cast<Eigen::Index>(decision.genes.selected.size()), standardized.samples());
    for (std::size_t j = 0; j < decision.genes.selected.size(); ++j)
      selected.row(static_cast<Eigen::Index>(j)) = standardized.values.row(decision.genes.selected[j]);
    r.silhouette_mean = silhouette_mean(selected, labels);
  }
  return r;
}

MeanSe mean_se(std::span<const double> values) {
  MeanSe out;
  double sum = 0.0;
  for (double v : values)
    if (std::isfinite(v)) {
      sum += v;
      ++out.n;
    }
  if (out.n == 0) return {kNaN, kNaN, 0};
  out.mean = sum / static_cast<double>(out.n);
  if (out.n < 2) {
    out.se = kNaN;
    return out;
  }
  double ss = 0.0;
  for (double v : values)
    if (std::isfinite(v)) ss += (v - out.mean) * (v - out.mean);
  out.se = std::sqrt(ss / static_cast<double>(out.n - 1) / static_cast<double>(out.n));
  return out;
}

std::string to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::ATauMu0: return "a_tau_mu0";
    case SweepAxis::BTauMu0: return "b_tau_mu0";
    case SweepAxis::ATauMu1: return "a_tau_mu1";
    case SweepAxis::BTauMu1: return "b_tau_mu1";
  }
  return "a_tau_mu0";
}

SweepAxis sweep_axis_from_string(const std::string& name) {
  std::string key = name;
  for (auto& ch : key)
    if (ch == '-') ch = '_';
  for (auto axis : {SweepAxis::ATauMu0, SweepAxis::BTauMu0, SweepAxis::ATauMu1, SweepAxis::BTauMu1})
    if (to_string(axis) == key) return axis;
  throw Error(ErrorKind::Usage, "unknown sweep axis '" + name + "' (a_tau_mu0, b_tau_mu0, a_tau_mu1, b_tau_mu1)");
}

std::pair<double, double> default_sweep_range(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::ATauMu0: return {1.1, 2.0};
    case SweepAxis::BTauMu0: return {0.0005, 0.005};
    case SweepAxis::ATauMu1: return {1.5, 6.0};
    case SweepAxis::BTauMu1: return {50.0, 500.0};
  }
  return {1.1, 2.0};
}

std::vector<double> sweep_grid(double lo, double hi, int points) {
  if (points < 1) throw Error(ErrorKind::InvalidParameter, "a sweep needs at least one grid point");
  if (!(std::isfinite(lo) && std::isfinite(hi))) throw Error(ErrorKind::InvalidParameter, "sweep range must be finite");
  if (points == 1) return {lo};
  std::vector<double> grid(static_cast<std::size_t>(points));
  const double step = (hi - lo) / (points - 1);
  for (int j = 0; j < points; ++j) grid[static_cast<std::size_t>(j)] = lo + step * j;
  grid.back() = hi;
  return grid;
}

double& hyper_field(Hyperparameters& hyper, SweepAxis axis) {
  switch (axis) {
    case SweepAxis::ATauMu0: return hyper.a_tau_mu0;
    case SweepAxis::BTauMu0: return hyper.b_tau_mu0;
    case SweepAxis::ATauMu1: return hyper.a_tau_mu1;
    case SweepAxis::BTauMu1: return hyper.b_tau_mu1;
  }
  return hyper.a_tau_mu0;
}

}  // namespace gbc
