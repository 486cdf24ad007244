#include "gbc/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gbc/error.hpp"
#include "gbc/parallel.hpp"

namespace gbc {

Vector local_fdr(const PosteriorTrace& trace) {
  return (1.0 - trace.inclusion_frequency().array()).cwiseMax(0.0).cwiseMin(1.0).matrix();
}

std::optional<double> fdr_at_threshold(const Vector& P, double eta) {
  double sum = 0.0;
  Eigen::Index count = 0;
  for (Eigen::Index g = 0; g < P.size(); ++g) {
    if (P[g] <= eta) {
      sum += P[g];
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return sum / static_cast<double>(count);
}

GeneDecision select_genes(const Vector& P, const SelectionMode& mode) {
  GeneDecision d;
  d.local_fdr = P;
  if (const auto* by = std::get_if<ByFdr>(&mode)) {
    d.eta = by->eta;
    for (Eigen::Index g = 0; g < P.size(); ++g)
      if (P[g] <= by->eta) d.selected.push_back(g);
    d.achieved_fdr = fdr_at_threshold(P, by->eta);
    return d;
  }

  const Eigen::Index m = std::get<TopM>(mode).m;
  if (m < 0 || m > P.size()) throw Error(ErrorKind::InvalidParameter, "top-m exceeds the number of genes");
  std::vector<Eigen::Index> order(static_cast<std::size_t>(P.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return P[a] < P[b]; });
  order.resize(static_cast<std::size_t>(m));
  std::sort(order.begin(), order.end());
  d.selected = order;
  if (m > 0) {
    double sum = 0.0;
    d.eta = 0.0;
    for (auto g : order) {
      sum += P[g];
      d.eta = std::max(d.eta, P[g]);
    }
    d.achieved_fdr = sum / static_cast<double>(m);
  }
  return d;
}

ClusterDecision cluster_decision(const PosteriorTrace& trace) {
  ClusterDecision d;
  d.soft = trace.cluster_frequency();
  d.labels.resize(static_cast<std::size_t>(d.soft.rows()));
  for (Eigen::Index i = 0; i < d.soft.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < d.soft.cols(); ++k)
      if (d.soft(i, k) > d.soft(i, best)) best = k;
    d.labels[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return d;
}

ClusterDecision canonical_relabel(const ClusterDecision& decision) {
  const auto K = static_cast<int>(decision.soft.cols());
  std::vector<int> size(static_cast<std::size_t>(K), 0);
  std::vector<std::size_t> first(static_cast<std::size_t>(K), decision.labels.size());
  for (std::size_t i = 0; i < decision.labels.size(); ++i) {
    const auto k = static_cast<std::size_t>(decision.labels[i]);
    ++size[k];
    first[k] = std::min(first[k], i);
  }
  std::vector<int> order(static_cast<std::size_t>(K));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const auto ua = static_cast<std::size_t>(a), ub = static_cast<std::size_t>(b);
    if (size[ua] != size[ub]) return size[ua] > size[ub];
    return first[ua] < first[ub];
  });
  std::vector<int> new_index(static_cast<std::size_t>(K));
  for (int r = 0; r < K; ++r) new_index[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])] = r;

  ClusterDecision out;
  out.soft.resize(decision.soft.rows(), K);
  for (int k = 0; k < K; ++k) out.soft.col(new_index[static_cast<std::size_t>(k)]) = decision.soft.col(k);
  out.labels.reserve(decision.labels.size());
  for (int z : decision.labels) out.labels.push_back(new_index[static_cast<std::size_t>(z)]);
  return out;
}

double bic_penalty(int K, Eigen::Index genes, Eigen::Index samples, BicPenalty kind) {
  const double count = static_cast<double>(K) * static_cast<double>(genes);
  const double base = kind == BicPenalty::GeneCount ? static_cast<double>(genes) : static_cast<double>(samples);
  return count * std::log(base);
}

double mixture_log_likelihood(const Matrix& values, const Vector& pi, const Matrix& mu, const Vector& sigma2) {
  const Eigen::Index G = values.rows();
  const Eigen::Index n = values.cols();
  const auto K = static_cast<int>(pi.size());
  if (mu.rows() != G || mu.cols() != K || sigma2.size() != G)
    throw Error(ErrorKind::DimensionMismatch, "parameter shapes do not match the data");
  constexpr double log2pi = 1.8378770664093454836;
  const double norm = -0.5 * (static_cast<double>(G) * log2pi + sigma2.array().log().sum());

  // per-sample, per-cluster sum over genes of the Gaussian log density
  Matrix dens = Matrix::Zero(n, K);
  for (Eigen::Index g = 0; g < G; ++g) {
    const double inv = 1.0 / sigma2[g];
    for (Eigen::Index i = 0; i < n; ++i)
      for (int k = 0; k < K; ++k) {
        const double r = values(g, i) - mu(g, k);
        dens(i, k) -= 0.5 * r * r * inv;
      }
  }
  double total = 0.0;
  std::vector<double> terms(static_cast<std::size_t>(K));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int k = 0; k < K; ++k) terms[static_cast<std::size_t>(k)] = std::log(pi[k]) + norm + dens(i, k);
    total += log_sum_exp(terms);
  }
  return total;
}

BicTerms bic_terms(const ExpressionMatrix& expr, const PosteriorTrace& trace, BicPenalty kind) {
  BicTerms t;
  t.log_likelihood = mixture_log_likelihood(expr.values, trace.posterior_mean_pi(), trace.posterior_mean_mu(),
                                            trace.posterior_mean_sigma2());
  t.penalty = bic_penalty(trace.K, expr.genes(), expr.samples(), kind);
  return t;
}

double bic(const ExpressionMatrix& expr, const PosteriorTrace& trace, int K, BicPenalty kind) {
  if (K != trace.K) throw Error(ErrorKind::DimensionMismatch, "K does not match the trace");
  return bic_terms(expr, trace, kind).value();
}

std::uint64_t seed_for_k(std::uint64_t master_seed, int K) {
  return RngStream(master_seed).child(StreamTag::ClusterCount, static_cast<std::uint64_t>(K))();
}

SelectKResult select_k(const ExpressionMatrix& expr, const std::optional<Vector>& guidance,
                       const GibbsConfig& cfg_template, const std::vector<int>& k_range, BicPenalty kind,
                       int workers) {
  if (k_range.empty()) throw Error(ErrorKind::InvalidParameter, "empty K range");
  for (int K : k_range)
    if (K < 1) throw Error(ErrorKind::InvalidParameter, "K must be >= 1");

  SelectKResult result;
  result.ks = k_range;
  result.bic.assign(k_range.size(), 0.0);
  parallel_for(0, static_cast<std::ptrdiff_t>(k_range.size()), workers, [&](std::ptrdiff_t j) {
    GibbsConfig cfg = cfg_template;
    cfg.hyper.K = k_range[static_cast<std::size_t>(j)];
    cfg.seed = seed_for_k(cfg_template.seed, cfg.hyper.K);
    if (workers > 1) cfg.progress = nullptr;
    const PosteriorTrace trace = run_gibbs(expr, guidance, cfg);
    result.bic[static_cast<std::size_t>(j)] = bic_terms(expr, trace, kind).value();
  });
  const auto best = std::min_element(result.bic.begin(), result.bic.end()) - result.bic.begin();
  result.best_k = k_range[static_cast<std::size_t>(best)];
  return result;
}

}  // namespace gbc
