#include "gbc/sampler.hpp"

#include <cmath>
#include <numbers>

#include "gbc/error.hpp"
#include "gbc/parallel.hpp"

namespace gbc {

namespace {

enum class Step : std::uint64_t {
  P = 1,
  TauMu0 = 2,
  TauMu1 = 3,
  TauU0 = 4,
  TauU1 = 5,
  Selection = 6,
  Pi = 7,
  Assignment = 8,
  Means = 9,
  Variances = 10,
};

RngStream step_stream(const RngStream& iteration, Step s) {
  return iteration.child(StreamTag::Step, static_cast<std::uint64_t>(s));
}

double prior_mean_or_one(double shape, double rate) { return shape > 1.0 ? rate / (shape - 1.0) : 1.0; }

double log_inverse_gamma_density(double x, double shape, double rate) {
  return shape * std::log(rate) - std::lgamma(shape) - (shape + 1.0) * std::log(x) - rate / x;
}

double log_sigmoid(double t) { return -(std::max(-t, 0.0) + std::log1p(std::exp(-std::abs(t)))); }

}  // namespace

void GibbsConfig::validate() const {
  hyper.validate();
  if (thin < 1) throw Error(ErrorKind::InvalidParameter, "thin must be >= 1");
  if (threads < 1) throw Error(ErrorKind::InvalidParameter, "threads must be >= 1");
}

SamplerData::SamplerData(const Matrix& values, std::optional<Vector> guidance)
    : values_(values), by_sample_(values.transpose()), guidance_(std::move(guidance)) {
  if (guidance_ && guidance_->size() != values_.rows())
    throw Error(ErrorKind::DimensionMismatch, "guidance length does not match gene count");
  if (!values_.allFinite()) throw Error(ErrorKind::NonFiniteInput, "expression values must be finite");
}

ClusterStats cluster_statistics(const Matrix& values, const std::vector<int>& labels, int K, int threads) {
  ClusterStats stats;
  stats.counts.assign(static_cast<std::size_t>(K), 0);
  for (int z : labels) ++stats.counts[static_cast<std::size_t>(z)];
  stats.sums = Matrix::Zero(values.rows(), K);
  parallel_for(0, values.rows(), threads, [&](std::ptrdiff_t g) {
    const double* row = values.row(g).data();
    double* out = stats.sums.row(g).data();
    for (std::size_t i = 0; i < labels.size(); ++i) out[labels[i]] += row[i];
  });
  return stats;
}

ModelState initialize_state(const ExpressionMatrix& expr, const GibbsConfig& cfg) {
  return initialize_state(expr, std::nullopt, cfg);
}

ModelState initialize_state(const ExpressionMatrix& expr, const std::optional<Vector>& guidance,
                            const GibbsConfig& cfg) {
  cfg.validate();
  expr.validate();
  if (guidance && guidance->size() != expr.genes())
    throw Error(ErrorKind::DimensionMismatch, "guidance length does not match gene count");
  const bool prior_centred = cfg.init == InitScheme::PriorCentred && guidance.has_value();
  const auto& hp = cfg.hyper;
  const int K = hp.K;
  const Eigen::Index G = expr.genes();
  const Eigen::Index n = expr.samples();
  RngStream rng = RngStream(cfg.seed).child(StreamTag::Init, 0);

  ModelState s;
  s.labels.resize(static_cast<std::size_t>(n));
  for (auto& z : s.labels) z = static_cast<int>(rng() % static_cast<std::uint64_t>(K));
  s.selected.resize(static_cast<std::size_t>(G));
  for (auto& l : s.selected) l = static_cast<std::uint8_t>(sample_bernoulli(rng, 0.5));
  if (prior_centred)
    for (Eigen::Index g = 0; g < G; ++g) s.selected[static_cast<std::size_t>(g)] = (*guidance)[g] > 0.5 ? 1 : 0;
  s.p = 0.5;
  s.pi = Vector::Constant(K, 1.0 / K);

  s.mu = Matrix::Zero(G, K);
  if (!prior_centred) {
    const ClusterStats stats = cluster_statistics(expr.values, s.labels, K, cfg.threads);
    for (int k = 0; k < K; ++k)
      if (stats.counts[static_cast<std::size_t>(k)] > 0)
        s.mu.col(k) = stats.sums.col(k) / static_cast<double>(stats.counts[static_cast<std::size_t>(k)]);
  }

  s.sigma2.resize(G);
  for (Eigen::Index g = 0; g < G; ++g) {
    const auto row = expr.values.row(g);
    s.sigma2[g] = (row.array() - row.mean()).square().sum() / static_cast<double>(n - 1);
    if (!(s.sigma2[g] > 0.0)) s.sigma2[g] = 1.0;
  }

  s.tau2_mu0 = prior_mean_or_one(hp.a_tau_mu0, hp.b_tau_mu0);
  s.tau2_mu1 = prior_mean_or_one(hp.a_tau_mu1, hp.b_tau_mu1);
  s.tau2_u0 = prior_mean_or_one(hp.a_tau_u0, hp.b_tau_u0);
  s.tau2_u1 = prior_mean_or_one(hp.a_tau_u1, hp.b_tau_u1);
  return s;
}

BetaDist p_conditional(const ModelState& state, const Hyperparameters& hyper) {
  double selected = 0.0;
  for (auto l : state.selected) selected += l;
  const auto G = static_cast<double>(state.selected.size());
  return {hyper.a_p + selected, hyper.b_p + G - selected};
}

InverseGammaDist tau2_conditional(const ModelState& state, const SamplerData& data, const Hyperparameters& hyper,
                                  TauComponent which) {
  const bool slab = which == TauComponent::Mu1 || which == TauComponent::U1;
  const std::uint8_t want = slab ? 1 : 0;
  const Eigen::Index G = state.genes();
  double count = 0.0, ss = 0.0;

  if (which == TauComponent::Mu0 || which == TauComponent::Mu1) {
    for (Eigen::Index g = 0; g < G; ++g) {
      if (state.selected[static_cast<std::size_t>(g)] != want) continue;
      count += 1.0;
      ss += state.mu.row(g).squaredNorm();
    }
    const double a = slab ? hyper.a_tau_mu1 : hyper.a_tau_mu0;
    const double b = slab ? hyper.b_tau_mu1 : hyper.b_tau_mu0;
    return {a + 0.5 * state.K() * count, b + 0.5 * ss};
  }

  const Vector& u = data.guidance();
  const double centre = slab ? 1.0 : 0.0;
  for (Eigen::Index g = 0; g < G; ++g) {
    if (state.selected[static_cast<std::size_t>(g)] != want) continue;
    count += 1.0;
    ss += (u[g] - centre) * (u[g] - centre);
  }
  const double a = slab ? hyper.a_tau_u1 : hyper.a_tau_u0;
  const double b = slab ? hyper.b_tau_u1 : hyper.b_tau_u0;
  return {a + 0.5 * count, b + 0.5 * ss};
}

double selection_log_odds(const ModelState& state, const SamplerData& data, Eigen::Index g) {
  const double K = state.K();
  const double mu_ss = state.mu.row(g).squaredNorm();
  double odds = std::log(state.p) - std::log1p(-state.p);
  // sum_k [log N(mu_gk; 0, tau_mu1) - log N(mu_gk; 0, tau_mu0)]
  odds += 0.5 * K * (std::log(state.tau2_mu0) - std::log(state.tau2_mu1));
  odds -= 0.5 * mu_ss * (1.0 / state.tau2_mu1 - 1.0 / state.tau2_mu0);
  if (data.guided()) {
    const double u = data.guidance()[g];
    odds += log_normal_density(u, 1.0, state.tau2_u1) - log_normal_density(u, 0.0, state.tau2_u0);
  }
  return odds;
}

double selection_probability(const ModelState& state, const SamplerData& data, Eigen::Index g) {
  return std::exp(log_sigmoid(selection_log_odds(state, data, g)));
}

Vector pi_conditional(const ModelState& state, const Hyperparameters& hyper) {
  Vector alpha = Vector::Constant(state.K(), hyper.c);
  for (int z : state.labels) alpha[z] += 1.0;
  return alpha;
}

Vector assignment_log_weights(const ModelState& state, const SamplerData& data, Eigen::Index i) {
  const int K = state.K();
  const auto x = data.by_sample().row(i);
  Vector w(K);
  for (int k = 0; k < K; ++k) {
    // -sum (x - mu)^2 / 2s2 = sum x mu / s2 - sum mu^2 / 2s2 - sum x^2 / 2s2 (last term shared)
    const auto mu = state.mu.col(k).array();
    const auto inv = state.sigma2.array().inverse();
    w[k] = std::log(state.pi[k]) + (x.transpose().array() * mu * inv).sum() - 0.5 * (mu.square() * inv).sum();
  }
  return w;
}

NormalDist mean_conditional(const ModelState& state, const ClusterStats& stats, Eigen::Index g, int k) {
  const double tau2 = state.selected[static_cast<std::size_t>(g)] ? state.tau2_mu1 : state.tau2_mu0;
  const double nk = stats.counts[static_cast<std::size_t>(k)];
  const double s2 = state.sigma2[g];
  const double denom = tau2 * nk + s2;
  return {tau2 * stats.sums(g, k) / denom, tau2 * s2 / denom};
}

namespace {

double residual_ss(const ModelState& state, const Matrix& values, Eigen::Index g) {
  const double* row = values.row(g).data();
  const double* mu = state.mu.row(g).data();
  double ss = 0.0;
  for (std::size_t i = 0; i < state.labels.size(); ++i) {
    const double r = row[i] - mu[state.labels[i]];
    ss += r * r;
  }
  return ss;
}

}  // namespace

InverseGammaDist variance_conditional(const ModelState& state, const SamplerData& data,
                                      const Hyperparameters& hyper, Eigen::Index g) {
  const double n = static_cast<double>(data.samples());
  return {hyper.a_sigma + 0.5 * n, hyper.b_sigma + 0.5 * residual_ss(state, data.values(), g)};
}

void update_p(ModelState& state, const Hyperparameters& hyper, RngStream& rng) {
  const auto d = p_conditional(state, hyper);
  state.p = sample_beta(rng, d.a, d.b);
}

void update_tau2(ModelState& state, const SamplerData& data, const Hyperparameters& hyper, TauComponent which,
                 RngStream& rng) {
  if ((which == TauComponent::U0 || which == TauComponent::U1) && !data.guided())
    throw Error(ErrorKind::InvalidParameter, "guidance variances need a guidance vector");
  const auto d = tau2_conditional(state, data, hyper, which);
  const double v = sample_inverse_gamma(rng, d.shape, d.rate);
  switch (which) {
    case TauComponent::Mu0: state.tau2_mu0 = v; break;
    case TauComponent::Mu1: state.tau2_mu1 = v; break;
    case TauComponent::U0: state.tau2_u0 = v; break;
    case TauComponent::U1: state.tau2_u1 = v; break;
  }
}

void update_gene_selection(ModelState& state, const SamplerData& data, const RngStream& rng, int threads) {
  parallel_for(0, state.genes(), threads, [&](std::ptrdiff_t g) {
    RngStream gene_rng = rng.child(StreamTag::Gene, static_cast<std::uint64_t>(g));
    const double log_prob = log_sigmoid(selection_log_odds(state, data, g));
    state.selected[static_cast<std::size_t>(g)] = std::log(gene_rng.uniform01()) < log_prob ? 1 : 0;
  });
}

void update_pi(ModelState& state, const Hyperparameters& hyper, RngStream& rng) {
  state.pi = sample_dirichlet(pi_conditional(state, hyper), rng);
}

void update_assignments(ModelState& state, const SamplerData& data, const RngStream& rng, int threads) {
  const int K = state.K();
  const Eigen::Index G = state.genes();
  // cluster-level terms shared by every sample
  Matrix scaled(K, G);  // mu_gk / sigma_g^2, cluster-major
  Vector offset(K);
  for (int k = 0; k < K; ++k) {
    scaled.row(k) = (state.mu.col(k).array() / state.sigma2.array()).matrix().transpose();
    offset[k] = std::log(state.pi[k]) - 0.5 * (state.mu.col(k).array().square() / state.sigma2.array()).sum();
  }
  const Matrix& xs = data.by_sample();
  parallel_for(0, data.samples(), threads, [&](std::ptrdiff_t i) {
    RngStream sample_rng = rng.child(StreamTag::Sample, static_cast<std::uint64_t>(i));
    double w[64];
    std::vector<double> heap;
    double* weights = w;
    if (K > 64) {
      heap.resize(static_cast<std::size_t>(K));
      weights = heap.data();
    }
    const auto x = xs.row(i);
    for (int k = 0; k < K; ++k) weights[k] = offset[k] + x.dot(scaled.row(k));
    state.labels[static_cast<std::size_t>(i)] =
        sample_categorical_log(std::span<const double>(weights, static_cast<std::size_t>(K)), sample_rng);
  });
}

void update_means(ModelState& state, const SamplerData& data, const RngStream& rng, int threads) {
  const int K = state.K();
  const ClusterStats stats = cluster_statistics(data.values(), state.labels, K, threads);
  parallel_for(0, state.genes(), threads, [&](std::ptrdiff_t g) {
    RngStream gene_rng = rng.child(StreamTag::Gene, static_cast<std::uint64_t>(g));
    for (int k = 0; k < K; ++k) {
      const auto d = mean_conditional(state, stats, g, k);
      state.mu(g, k) = d.mean + std::sqrt(d.variance) * sample_standard_normal(gene_rng);
    }
  });
}

void update_variances(ModelState& state, const SamplerData& data, const Hyperparameters& hyper,
                      const RngStream& rng, int threads) {
  parallel_for(0, state.genes(), threads, [&](std::ptrdiff_t g) {
    RngStream gene_rng = rng.child(StreamTag::Gene, static_cast<std::uint64_t>(g));
    const auto d = variance_conditional(state, data, hyper, g);
    state.sigma2[g] = sample_inverse_gamma(gene_rng, d.shape, d.rate);
  });
}

void gibbs_sweep(ModelState& state, const SamplerData& data, const Hyperparameters& hyper,
                 const RngStream& iteration_rng, int threads) {
  auto rng = step_stream(iteration_rng, Step::P);
  update_p(state, hyper, rng);
  rng = step_stream(iteration_rng, Step::TauMu0);
  update_tau2(state, data, hyper, TauComponent::Mu0, rng);
  rng = step_stream(iteration_rng, Step::TauMu1);
  update_tau2(state, data, hyper, TauComponent::Mu1, rng);
  if (data.guided()) {
    rng = step_stream(iteration_rng, Step::TauU0);
    update_tau2(state, data, hyper, TauComponent::U0, rng);
    rng = step_stream(iteration_rng, Step::TauU1);
    update_tau2(state, data, hyper, TauComponent::U1, rng);
  }
  update_gene_selection(state, data, step_stream(iteration_rng, Step::Selection), threads);
  rng = step_stream(iteration_rng, Step::Pi);
  update_pi(state, hyper, rng);
  update_assignments(state, data, step_stream(iteration_rng, Step::Assignment), threads);
  update_means(state, data, step_stream(iteration_rng, Step::Means), threads);
  update_variances(state, data, hyper, step_stream(iteration_rng, Step::Variances), threads);
}

double log_posterior(const ModelState& state, const SamplerData& data, const Hyperparameters& hp) {
  const Eigen::Index G = state.genes();
  const double n = static_cast<double>(data.samples());
  const int K = state.K();
  constexpr double log2pi = 1.8378770664093454836;

  double lp = 0.0;
  for (int z : state.labels) lp += std::log(state.pi[z]);
  for (Eigen::Index g = 0; g < G; ++g) {
    const double s2 = state.sigma2[g];
    const bool sel = state.selected[static_cast<std::size_t>(g)] != 0;
    lp += -0.5 * n * (log2pi + std::log(s2)) - 0.5 * residual_ss(state, data.values(), g) / s2;
    const double tau2 = sel ? state.tau2_mu1 : state.tau2_mu0;
    lp += -0.5 * K * (log2pi + std::log(tau2)) - 0.5 * state.mu.row(g).squaredNorm() / tau2;
    if (data.guided())
      lp += sel ? log_normal_density(data.guidance()[g], 1.0, state.tau2_u1)
                : log_normal_density(data.guidance()[g], 0.0, state.tau2_u0);
    lp += log_inverse_gamma_density(s2, hp.a_sigma, hp.b_sigma);
    lp += sel ? std::log(state.p) : std::log1p(-state.p);
  }
  lp += std::lgamma(hp.a_p + hp.b_p) - std::lgamma(hp.a_p) - std::lgamma(hp.b_p) +
        (hp.a_p - 1.0) * std::log(state.p) + (hp.b_p - 1.0) * std::log1p(-state.p);
  lp += std::lgamma(K * hp.c) - K * std::lgamma(hp.c);
  for (int k = 0; k < K; ++k) lp += (hp.c - 1.0) * std::log(state.pi[k]);
  lp += log_inverse_gamma_density(state.tau2_mu0, hp.a_tau_mu0, hp.b_tau_mu0);
  lp += log_inverse_gamma_density(state.tau2_mu1, hp.a_tau_mu1, hp.b_tau_mu1);
  if (data.guided()) {
    lp += log_inverse_gamma_density(state.tau2_u0, hp.a_tau_u0, hp.b_tau_u0);
    lp += log_inverse_gamma_density(state.tau2_u1, hp.a_tau_u1, hp.b_tau_u1);
  }
  return lp;
}

PosteriorTrace run_gibbs(const ExpressionMatrix& expr, const std::optional<Vector>& guidance,
                         const GibbsConfig& cfg) {
  cfg.validate();
  if (cfg.guided != guidance.has_value())
    throw Error(ErrorKind::InvalidParameter, "guidance must be supplied exactly when the run is guided");
  const auto& hp = cfg.hyper;
  ModelState state = initialize_state(expr, guidance, cfg);
  const SamplerData data(expr.values, guidance);

  PosteriorTrace trace;
  trace.reset(expr.genes(), expr.samples(), hp.K);
  trace.guided = cfg.guided;
  trace.diagnostics.reserve(static_cast<std::size_t>(hp.n_total));

  const RngStream chain = RngStream(cfg.seed).child(StreamTag::Chain, 0);
  for (int t = 0; t < hp.n_total; ++t) {
    gibbs_sweep(state, data, hp, chain.child(StreamTag::Iteration, static_cast<std::uint64_t>(t)), cfg.threads);

    IterationDiagnostics diag;
    diag.iteration = t + 1;
    diag.log_posterior = log_posterior(state, data, hp);
    diag.p = state.p;
    diag.tau2_mu0 = state.tau2_mu0;
    diag.tau2_mu1 = state.tau2_mu1;
    diag.tau2_u0 = state.tau2_u0;
    diag.tau2_u1 = state.tau2_u1;
    for (auto l : state.selected) diag.n_selected += l;
    trace.diagnostics.push_back(diag);
    if (cfg.progress) cfg.progress(diag);

    if (t >= hp.n_burnin && (t - hp.n_burnin) % cfg.thin == 0) trace.record(state, cfg.keep_full_draws);
  }
  return trace;
}

}  // namespace gbc
