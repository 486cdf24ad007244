#include "gbc/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "gbc/error.hpp"

namespace gbc {

namespace {

void require_finite(const Matrix& m) {
  if (!m.allFinite()) throw Error(ErrorKind::NonFiniteInput, "matrix contains NaN or infinite values");
}

}  // namespace

void ExpressionMatrix::validate() const {
  if (values.rows() < 1 || values.cols() < 2)
    throw Error(ErrorKind::DimensionMismatch, "expression matrix needs at least 1 gene and 2 samples");
  if (static_cast<Eigen::Index>(gene_ids.size()) != values.rows())
    throw Error(ErrorKind::DimensionMismatch, "gene id count does not match matrix rows");
  if (static_cast<Eigen::Index>(sample_ids.size()) != values.cols())
    throw Error(ErrorKind::DimensionMismatch, "sample id count does not match matrix columns");
  require_finite(values);
}

std::vector<std::string> numbered_ids(const std::string& prefix, std::size_t count) {
  std::vector<std::string> ids;
  ids.reserve(count);
  for (std::size_t i = 0; i < count; ++i) ids.push_back(prefix + std::to_string(i + 1));
  return ids;
}

ExpressionMatrix standardize_genes(const Matrix& raw, std::vector<std::string> gene_ids,
                                   std::vector<std::string> sample_ids) {
  require_finite(raw);
  const Eigen::Index n = raw.cols();
  if (raw.rows() < 1 || n < 2)
    throw Error(ErrorKind::DimensionMismatch, "expression matrix needs at least 1 gene and 2 samples");

  ExpressionMatrix out{raw, std::move(gene_ids), std::move(sample_ids)};
  for (Eigen::Index g = 0; g < raw.rows(); ++g) {
    auto row = out.values.row(g);
    const double mean = row.mean();
    row.array() -= mean;
    const double ss = row.squaredNorm();
    const double scale = raw.row(g).cwiseAbs().maxCoeff();
    // relative test so rows like (1e9, 1e9 + 1e-7) are not mistaken for constants
    if (!(ss > 0.0) || std::sqrt(ss / static_cast<double>(n)) <= 1e-13 * std::max(scale, 1e-300)) {
      throw Error(ErrorKind::ZeroVarianceGene,
                  "gene " + (static_cast<std::size_t>(g) < out.gene_ids.size() ? out.gene_ids[g]
                                                                                : std::to_string(g + 1)) +
                      " has zero variance");
    }
    row /= std::sqrt(ss / static_cast<double>(n - 1));
    // second centring pass removes the rounding residue of the first
    row.array() -= row.mean();
  }
  out.validate();
  return out;
}

ExpressionMatrix standardize_genes(const ExpressionMatrix& raw) {
  return standardize_genes(raw.values, raw.gene_ids, raw.sample_ids);
}

std::vector<Eigen::Index> low_expression_keep(const Matrix& raw, double fraction) {
  if (!(fraction >= 0.0 && fraction < 1.0))
    throw Error(ErrorKind::InvalidParameter, "fraction must lie in [0, 1)");
  require_finite(raw);
  const Eigen::Index G = raw.rows();
  const auto keep_count = static_cast<Eigen::Index>(
      std::ceil((1.0 - fraction) * static_cast<double>(G) - 1e-9));
  if (keep_count < 1 || G == 0) throw Error(ErrorKind::EmptyResult, "filter removed every gene");

  const Vector means = raw.rowwise().mean();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(G));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return means[a] > means[b]; });
  order.resize(static_cast<std::size_t>(keep_count));
  std::sort(order.begin(), order.end());
  return order;
}

Matrix filter_low_expression(const Matrix& raw, double fraction) {
  const auto keep = low_expression_keep(raw, fraction);
  Matrix out(static_cast<Eigen::Index>(keep.size()), raw.cols());
  for (std::size_t r = 0; r < keep.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = raw.row(keep[r]);
  return out;
}

ExpressionMatrix filter_low_expression(const ExpressionMatrix& raw, double fraction) {
  const auto keep = low_expression_keep(raw.values, fraction);
  ExpressionMatrix out;
  out.values.resize(static_cast<Eigen::Index>(keep.size()), raw.values.cols());
  out.sample_ids = raw.sample_ids;
  for (std::size_t r = 0; r < keep.size(); ++r) {
    out.values.row(static_cast<Eigen::Index>(r)) = raw.values.row(keep[r]);
    out.gene_ids.push_back(raw.gene_ids.at(static_cast<std::size_t>(keep[r])));
  }
  return out;
}

std::string to_string(OutcomeKind kind) {
  switch (kind) {
    case OutcomeKind::Continuous: return "continuous";
    case OutcomeKind::Binary: return "binary";
    case OutcomeKind::Ordinal: return "ordinal";
    case OutcomeKind::Survival: return "survival";
  }
  return "continuous";
}

OutcomeKind outcome_kind_from_string(const std::string& name) {
  if (name == "continuous") return OutcomeKind::Continuous;
  if (name == "binary") return OutcomeKind::Binary;
  if (name == "ordinal") return OutcomeKind::Ordinal;
  if (name == "survival") return OutcomeKind::Survival;
  throw Error(ErrorKind::Usage, "unknown outcome kind '" + name + "'");
}

void ClinicalOutcome::validate(std::size_t expected_samples) const {
  if (y.size() != expected_samples)
    throw Error(ErrorKind::DimensionMismatch, "outcome length " + std::to_string(y.size()) +
                                                  " does not match " + std::to_string(expected_samples) +
                                                  " samples");
  for (double v : y)
    if (!std::isfinite(v)) throw Error(ErrorKind::NonFiniteInput, "outcome contains non-finite values");

  switch (kind) {
    case OutcomeKind::Continuous:
      break;
    case OutcomeKind::Binary: {
      bool zero = false, one = false;
      for (double v : y) {
        if (v == 0.0) zero = true;
        else if (v == 1.0) one = true;
        else throw Error(ErrorKind::InvalidParameter, "binary outcome must be coded 0/1");
      }
      if (!zero || !one) throw Error(ErrorKind::InvalidParameter, "binary outcome needs both classes");
      break;
    }
    case OutcomeKind::Ordinal: {
      std::set<double> levels(y.begin(), y.end());
      for (double v : levels)
        if (v != std::round(v)) throw Error(ErrorKind::InvalidParameter, "ordinal levels must be integers");
      if (levels.size() < 2) throw Error(ErrorKind::InvalidParameter, "ordinal outcome needs >= 2 levels");
      break;
    }
    case OutcomeKind::Survival: {
      if (events.size() != y.size())
        throw Error(ErrorKind::DimensionMismatch, "survival events length differs from times");
      for (double t : y)
        if (!(t > 0.0)) throw Error(ErrorKind::InvalidParameter, "survival times must be positive");
      for (int e : events)
        if (e != 0 && e != 1) throw Error(ErrorKind::InvalidParameter, "survival events must be 0/1");
      break;
    }
  }
}

void Hyperparameters::validate() const {
  const double positives[] = {c,         a_p,       b_p,       a_sigma,   b_sigma,  a_tau_mu0, b_tau_mu0,
                              a_tau_mu1, b_tau_mu1, a_tau_u0, b_tau_u0, a_tau_u1, b_tau_u1};
  for (double v : positives)
    if (!(v > 0.0) || !std::isfinite(v))
      throw Error(ErrorKind::InvalidParameter, "all prior shapes and rates must be positive and finite");
  if (K < 1) throw Error(ErrorKind::InvalidParameter, "K must be at least 1");
  if (n_burnin < 0 || n_burnin >= n_total)
    throw Error(ErrorKind::InvalidParameter, "need 0 <= burn-in < total iterations");
}

void ModelState::validate() const {
  const auto k = pi.size();
  if (k < 1 || mu.cols() != k || sigma2.size() != mu.rows() ||
      static_cast<Eigen::Index>(selected.size()) != mu.rows())
    throw Error(ErrorKind::DimensionMismatch, "inconsistent model state dimensions");
  if ((pi.array() <= 0.0).any() || std::abs(pi.sum() - 1.0) > 1e-12)
    throw Error(ErrorKind::InvalidParameter, "pi must be a strictly positive simplex vector");
  if ((sigma2.array() <= 0.0).any() || !sigma2.allFinite())
    throw Error(ErrorKind::InvalidParameter, "gene variances must be positive");
  for (double t : {tau2_mu0, tau2_mu1, tau2_u0, tau2_u1})
    if (!(t > 0.0) || !std::isfinite(t)) throw Error(ErrorKind::InvalidParameter, "tau^2 must be positive");
  if (!(p > 0.0 && p < 1.0)) throw Error(ErrorKind::InvalidParameter, "p must lie in (0,1)");
  for (int z : labels)
    if (z < 0 || z >= k) throw Error(ErrorKind::InvalidParameter, "label out of range");
  if (!mu.allFinite()) throw Error(ErrorKind::NonFiniteInput, "cluster means must be finite");
}

void PosteriorTrace::reset(Eigen::Index genes, Eigen::Index samples, int clusters) {
  K = clusters;
  G = genes;
  n = samples;
  selection_draws.clear();
  label_draws.clear();
  diagnostics.clear();
  pi_sum = Vector::Zero(clusters);
  mu_sum = Matrix::Zero(genes, clusters);
  sigma2_sum = Vector::Zero(genes);
  p_sum = 0.0;
  std::fill(std::begin(tau2_sum), std::end(tau2_sum), 0.0);
  pi_draws.clear();
  mu_draws.clear();
  sigma2_draws.clear();
}

void PosteriorTrace::record(const ModelState& state, bool keep_full_draws) {
  selection_draws.push_back(state.selected);
  label_draws.push_back(state.labels);
  pi_sum += state.pi;
  mu_sum += state.mu;
  sigma2_sum += state.sigma2;
  p_sum += state.p;
  tau2_sum[0] += state.tau2_mu0;
  tau2_sum[1] += state.tau2_mu1;
  tau2_sum[2] += state.tau2_u0;
  tau2_sum[3] += state.tau2_u1;
  if (keep_full_draws) {
    pi_draws.push_back(state.pi);
    mu_draws.push_back(state.mu);
    sigma2_draws.push_back(state.sigma2);
  }
}

namespace {
void require_draws(const PosteriorTrace& t) {
  if (t.retained() == 0) throw Error(ErrorKind::EmptyTrace, "posterior trace has no retained draws");
}
}  // namespace

Vector PosteriorTrace::inclusion_frequency() const {
  require_draws(*this);
  Vector counts = Vector::Zero(G);
  for (const auto& draw : selection_draws)
    for (Eigen::Index g = 0; g < G; ++g) counts[g] += draw[static_cast<std::size_t>(g)];
  return counts / static_cast<double>(retained());
}

Matrix PosteriorTrace::cluster_frequency() const {
  require_draws(*this);
  Matrix counts = Matrix::Zero(n, K);
  for (const auto& draw : label_draws)
    for (Eigen::Index i = 0; i < n; ++i) counts(i, draw[static_cast<std::size_t>(i)]) += 1.0;
  return counts / static_cast<double>(retained());
}

Vector PosteriorTrace::posterior_mean_pi() const {
  require_draws(*this);
  return pi_sum / static_cast<double>(retained());
}

Matrix PosteriorTrace::posterior_mean_mu() const {
  require_draws(*this);
  return mu_sum / static_cast<double>(retained());
}

Vector PosteriorTrace::posterior_mean_sigma2() const {
  require_draws(*this);
  return sigma2_sum / static_cast<double>(retained());
}

}  // namespace gbc
