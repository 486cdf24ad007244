#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "doctest.h"
#include "support.hpp"

#include "gbc/error.hpp"
#include "gbc/guidance.hpp"
#include "gbc/inference.hpp"
#include "gbc/metrics.hpp"
#include "gbc/sampler.hpp"

using namespace gbc;
using test::batch_means_se;
using test::moments;

namespace {

ModelState make_state(Eigen::Index G, Eigen::Index n, int K) {
  ModelState s;
  s.pi = Vector::Constant(K, 1.0 / K);
  s.mu = Matrix::Zero(G, K);
  s.sigma2 = Vector::Ones(G);
  s.selected.assign(static_cast<std::size_t>(G), 0);
  s.labels.assign(static_cast<std::size_t>(n), 0);
  for (Eigen::Index i = 0; i < n; ++i) s.labels[static_cast<std::size_t>(i)] = static_cast<int>(i % K);
  return s;
}

ExpressionMatrix random_expression(Eigen::Index G, Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z;
  Matrix raw(G, n);
  for (Eigen::Index g = 0; g < G; ++g)
    for (Eigen::Index i = 0; i < n; ++i) raw(g, i) = z(gen);
  return standardize_genes(raw, numbered_ids("g", static_cast<std::size_t>(G)),
                           numbered_ids("s", static_cast<std::size_t>(n)));
}

/// Two well separated clusters: the first `signal` genes shift by +-delta.
struct Fixture {
  ExpressionMatrix expr;
  std::vector<int> truth;
  Vector guidance;
};

Fixture two_cluster_fixture(Eigen::Index G, Eigen::Index n, Eigen::Index signal, double delta, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> low(0.0, 0.3);
  std::normal_distribution<double> z_noise(0.0, 1.0);
  Fixture f;
  Matrix raw(G, n);
  for (Eigen::Index i = 0; i < n; ++i) f.truth.push_back(i < n / 2 ? 0 : 1);
  for (Eigen::Index g = 0; g < G; ++g)
    for (Eigen::Index i = 0; i < n; ++i)
      raw(g, i) = z(gen) + (g < signal ? (f.truth[static_cast<std::size_t>(i)] ? delta : -delta) : 0.0);
  f.expr = standardize_genes(raw, numbered_ids("g", static_cast<std::size_t>(G)),
                             numbered_ids("s", static_cast<std::size_t>(n)));
  // guidance from a subtype-driven continuous outcome, as the pipeline computes it
  ClinicalOutcome outcome;
  for (int z : f.truth) outcome.y.push_back(z + 0.5 * low(gen) + 0.5 * z_noise(gen));
  f.guidance = compute_guidance(f.expr, outcome).u;
  return f;
}

double inverse_gamma_mean(const InverseGammaDist& d) { return d.rate / (d.shape - 1.0); }

}  // namespace

TEST_CASE("initialization: clusters, determinism and unit variances") {
  const auto expr = random_expression(40, 300, 1);
  GibbsConfig cfg;
  cfg.seed = 9;
  for (auto scheme : {InitScheme::PriorCentred, InitScheme::ClusterMeans}) {
    cfg.init = scheme;
    const auto a = initialize_state(expr, cfg);
    const auto b = initialize_state(expr, cfg);
    CHECK(a.labels == b.labels);
    CHECK(a.selected == b.selected);
    CHECK(a.mu == b.mu);
    std::vector<int> sizes(3, 0);
    for (int z : a.labels) ++sizes[static_cast<std::size_t>(z)];
    for (int size : sizes) CHECK(size > 0);
    CHECK((a.sigma2.array() - 1.0).abs().maxCoeff() < 1e-10);
    CHECK(a.p == 0.5);
    CHECK(a.pi.isApprox(Vector::Constant(3, 1.0 / 3.0)));
    CHECK(a.tau2_mu0 == doctest::Approx(0.005));
    CHECK(a.tau2_mu1 == doctest::Approx(150.0));
    CHECK(a.tau2_u0 == 1.0);  // shape <= 1 falls back to 1
    CHECK_NOTHROW(a.validate());
  }
}

TEST_CASE("cluster-means initialization uses initial cluster sample means") {
  const auto expr = random_expression(5, 30, 2);
  GibbsConfig cfg;
  cfg.init = InitScheme::ClusterMeans;
  const auto s = initialize_state(expr, cfg);
  for (int k = 0; k < 3; ++k) {
    Vector sum = Vector::Zero(5);
    int count = 0;
    for (std::size_t i = 0; i < s.labels.size(); ++i)
      if (s.labels[i] == k) {
        sum += expr.values.col(static_cast<Eigen::Index>(i));
        ++count;
      }
    CHECK((s.mu.col(k) - sum / count).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("prior-centred initialization selects genes by guidance") {
  const auto expr = random_expression(4, 10, 3);
  GibbsConfig cfg;
  const auto s = initialize_state(expr, Vector(Eigen::Vector4d(0.9, 0.1, 0.51, 0.5)), cfg);
  CHECK(s.selected == std::vector<std::uint8_t>{1, 0, 1, 0});
  CHECK(s.mu.isZero());

  // without guidance both schemes start from the same state
  GibbsConfig means = cfg;
  means.init = InitScheme::ClusterMeans;
  const auto a = initialize_state(expr, cfg);
  const auto b = initialize_state(expr, means);
  CHECK(a.mu == b.mu);
  CHECK(a.selected == b.selected);
}

TEST_CASE("p conditional parameters") {
  Hyperparameters h;
  auto s = make_state(10, 4, 2);
  for (int g = 0; g < 4; ++g) s.selected[static_cast<std::size_t>(g)] = 1;
  const auto d = p_conditional(s, h);
  CHECK(d.a == 5.0);
  CHECK(d.b == 7.0);
  std::fill(s.selected.begin(), s.selected.end(), 1);
  const auto all = p_conditional(s, h);
  CHECK(all.a == h.a_p + 10);
  CHECK(all.b == h.b_p);
}

TEST_CASE("p updates match the beta moments") {
  Hyperparameters h;
  auto s = make_state(10, 4, 2);
  for (int g = 0; g < 4; ++g) s.selected[static_cast<std::size_t>(g)] = 1;
  RngStream rng(101);
  std::vector<double> draws(10000);
  for (auto& p : draws) {
    update_p(s, h, rng);
    p = s.p;
  }
  const auto m = moments(draws);
  CHECK(std::abs(m.mean - 5.0 / 12.0) < 3 * m.se);
  CHECK(std::abs(m.variance - 35.0 / (144.0 * 13.0)) < 0.05 * 35.0 / (144.0 * 13.0));
}

TEST_CASE("tau2 conditional parameters") {
  Hyperparameters h;
  auto s = make_state(1, 4, 2);
  s.selected = {1};
  s.mu << 3.0, 4.0;
  const SamplerData data(Matrix::Zero(1, 4), Vector::Ones(1));

  const auto spike = tau2_conditional(s, data, h, TauComponent::Mu0);
  CHECK(spike.shape == h.a_tau_mu0);
  CHECK(spike.rate == h.b_tau_mu0);
  const auto slab = tau2_conditional(s, data, h, TauComponent::Mu1);
  CHECK(slab.shape == h.a_tau_mu1 + 1.0);
  CHECK(slab.rate == h.b_tau_mu1 + 12.5);
  const auto u1 = tau2_conditional(s, data, h, TauComponent::U1);
  CHECK(u1.shape == h.a_tau_u1 + 0.5);
  CHECK(u1.rate == h.b_tau_u1);
  const auto u0 = tau2_conditional(s, data, h, TauComponent::U0);
  CHECK(u0.shape == h.a_tau_u0);
  CHECK(u0.rate == h.b_tau_u0);

  const SamplerData guided(Matrix::Zero(1, 4), Vector::Constant(1, 0.4));
  s.selected = {0};
  CHECK(tau2_conditional(s, guided, h, TauComponent::U0).rate == doctest::Approx(h.b_tau_u0 + 0.08));
  CHECK(tau2_conditional(s, guided, h, TauComponent::Mu0).rate == doctest::Approx(h.b_tau_mu0 + 12.5));
}

TEST_CASE("tau2 updates match the inverse gamma moments") {
  Hyperparameters h;
  h.a_tau_u0 = h.a_tau_u1 = 3.0;
  h.b_tau_u0 = h.b_tau_u1 = 2.0;
  auto s = make_state(6, 4, 3);
  std::mt19937_64 gen(4);
  std::normal_distribution<double> z;
  for (Eigen::Index g = 0; g < 6; ++g)
    for (int k = 0; k < 3; ++k) s.mu(g, k) = z(gen);
  s.selected = {1, 0, 1, 0, 0, 1};
  const SamplerData data(Matrix::Zero(6, 4), Vector(Vector::LinSpaced(6, 0.0, 1.0)));
  RngStream rng(103);
  for (auto which : {TauComponent::Mu0, TauComponent::Mu1, TauComponent::U0, TauComponent::U1}) {
    const auto d = tau2_conditional(s, data, h, which);
    std::vector<double> draws(10000);
    for (auto& v : draws) {
      update_tau2(s, data, h, which, rng);
      switch (which) {
        case TauComponent::Mu0: v = s.tau2_mu0; break;
        case TauComponent::Mu1: v = s.tau2_mu1; break;
        case TauComponent::U0: v = s.tau2_u0; break;
        case TauComponent::U1: v = s.tau2_u1; break;
      }
    }
    const auto m = moments(draws);
    CHECK(std::abs(m.mean - inverse_gamma_mean(d)) < 3 * m.se);
  }
}

TEST_CASE("guidance variances need a guidance vector") {
  Hyperparameters h;
  auto s = make_state(2, 4, 2);
  const SamplerData data(Matrix::Zero(2, 4), std::nullopt);
  RngStream rng(1);
  CHECK_THROWS_AS(update_tau2(s, data, h, TauComponent::U0, rng), Error);
}

TEST_CASE("selection probability is one half under full symmetry") {
  auto s = make_state(1, 4, 3);
  s.mu << 0.3, -1.2, 2.0;
  s.tau2_mu0 = s.tau2_mu1 = 0.7;
  s.tau2_u0 = s.tau2_u1 = 0.2;
  const SamplerData data(Matrix::Zero(1, 4), Vector::Constant(1, 0.5));
  CHECK(selection_probability(s, data, 0) == 0.5);
}

TEST_CASE("selection probability goes to 1 when U = 1 and the U spike is tiny") {
  auto s = make_state(1, 4, 3);
  s.tau2_u0 = 1e-8;
  const SamplerData data(Matrix::Zero(1, 4), Vector::Constant(1, 1.0));
  CHECK(selection_probability(s, data, 0) == 1.0);
}

TEST_CASE("log-domain selection probability matches the naive density ratio") {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto normal_pdf = [](long double x, long double mean, long double var) {
    return std::exp(-(x - mean) * (x - mean) / (2 * var)) / std::sqrt(2 * std::numbers::pi_v<long double> * var);
  };
  int compared = 0;
  for (int rep = 0; rep < 2000; ++rep) {
    const int K = 1 + rep % 4;
    auto s = make_state(1, 4, K);
    for (int k = 0; k < K; ++k) s.mu(0, k) = z(gen) * (rep < 1000 ? 0.1 : 2.0);
    s.p = unif(gen) * 0.98 + 0.01;
    s.tau2_mu0 = std::exp(z(gen) - 3.0);
    s.tau2_mu1 = std::exp(z(gen) + 1.0);
    s.tau2_u0 = std::exp(z(gen) - 1.0);
    s.tau2_u1 = std::exp(z(gen) - 1.0);
    const double u = unif(gen);
    for (bool guided : {true, false}) {
      const SamplerData data(Matrix::Zero(1, 4),
                             guided ? std::optional<Vector>(Vector::Constant(1, u)) : std::nullopt);
      long double slab = s.p, spike = 1.0L - s.p;
      for (int k = 0; k < K; ++k) {
        slab *= normal_pdf(s.mu(0, k), 0, s.tau2_mu1);
        spike *= normal_pdf(s.mu(0, k), 0, s.tau2_mu0);
      }
      if (guided) {
        slab *= normal_pdf(u, 1, s.tau2_u1);
        spike *= normal_pdf(u, 0, s.tau2_u0);
      }
      if (!std::isfinite(static_cast<double>(slab + spike)) || slab + spike == 0.0L) continue;
      const long double naive = slab / (slab + spike);
      const double tol = rep == 0 ? 1e-12 : 1e-10;
      CHECK(std::abs(static_cast<long double>(selection_probability(s, data, 0)) - naive) < tol);
      ++compared;
    }
  }
  CHECK(compared > 3000);
}

TEST_CASE("selection draws follow the conditional probability") {
  auto s = make_state(3, 4, 2);
  s.mu << 0.01, -0.02, 0.5, -0.4, 0.05, 0.1;
  s.tau2_mu0 = 0.01;
  s.tau2_mu1 = 1.0;
  s.p = 0.3;
  const SamplerData data(Matrix::Zero(3, 4), Vector(Eigen::Vector3d(0.2, 0.7, 0.5)));
  const Eigen::Vector3d prob(selection_probability(s, data, 0), selection_probability(s, data, 1),
                             selection_probability(s, data, 2));
  std::vector<std::vector<double>> hits(3, std::vector<double>(10000));
  const RngStream root(107);
  for (int t = 0; t < 10000; ++t) {
    update_gene_selection(s, data, root.child(StreamTag::Iteration, static_cast<std::uint64_t>(t)));
    for (int g = 0; g < 3; ++g) hits[static_cast<std::size_t>(g)][t] = s.selected[static_cast<std::size_t>(g)];
  }
  for (int g = 0; g < 3; ++g) {
    const double se = std::sqrt(prob[g] * (1 - prob[g]) / 10000.0);
    CHECK(std::abs(moments(hits[static_cast<std::size_t>(g)]).mean - prob[g]) < 3 * se);
  }
}

TEST_CASE("pi conditional parameters and moments") {
  Hyperparameters h;
  h.K = 2;
  auto s = make_state(1, 5, 2);
  std::fill(s.labels.begin(), s.labels.end(), 0);
  CHECK(pi_conditional(s, h) == Eigen::Vector2d(6, 1));

  auto three = make_state(1, 6, 3);
  three.labels = {0, 0, 2, 2, 2, 0};
  CHECK(pi_conditional(three, h)[1] == h.c);

  RngStream rng(109);
  std::vector<double> draws(10000);
  for (auto& v : draws) {
    update_pi(three, h, rng);
    v = three.pi[0];
  }
  const auto m = moments(draws);
  CHECK(std::abs(m.mean - (h.c + 3.0) / (3 * h.c + 6.0)) < 3 * m.se);
}

TEST_CASE("assignment with identical cluster means is a fair coin") {
  auto s = make_state(3, 1, 2);
  s.mu << 1, 1, -2, -2, 0.5, 0.5;
  const SamplerData data(Matrix(Eigen::Vector3d(0.3, -0.1, 2.0)), std::nullopt);
  const RngStream root(113);
  std::vector<double> hits(20000);
  for (std::size_t t = 0; t < hits.size(); ++t) {
    update_assignments(s, data, root.child(StreamTag::Iteration, t));
    hits[t] = s.labels[0] == 0 ? 1.0 : 0.0;
  }
  const auto m = moments(hits);
  CHECK(std::abs(m.mean - 0.5) < 3 * m.se);
}

TEST_CASE("assignment picks the matching cluster with certainty on many genes") {
  const Eigen::Index G = 1000;
  std::mt19937_64 gen(6);
  std::normal_distribution<double> z;
  Matrix x(G, 1);
  for (Eigen::Index g = 0; g < G; ++g) x(g, 0) = z(gen);
  auto s = make_state(G, 1, 2);
  s.mu.col(0) = x.col(0);
  s.mu.col(1) = x.col(0).array() + 1.0;
  const SamplerData data(x, std::nullopt);
  const RngStream root(127);
  for (int t = 0; t < 1000; ++t) {
    update_assignments(s, data, root.child(StreamTag::Iteration, static_cast<std::uint64_t>(t)));
    REQUIRE(s.labels[0] == 0);
  }
}

TEST_CASE("assignment frequencies match direct enumeration") {
  auto s = make_state(3, 2, 2);
  s.mu << 0.2, -0.5, 1.0, 0.4, -0.3, 0.1;
  s.sigma2 << 0.8, 1.5, 0.6;
  s.pi << 0.35, 0.65;
  Matrix x(3, 2);
  x << 0.1, -0.4, 0.7, 0.2, -0.2, 0.5;
  const SamplerData data(x, std::nullopt);

  std::vector<double> oracle(2);
  for (int i = 0; i < 2; ++i) {
    double w[2];
    for (int k = 0; k < 2; ++k) {
      w[k] = s.pi[k];
      for (int g = 0; g < 3; ++g)
        w[k] *= std::exp(-(x(g, i) - s.mu(g, k)) * (x(g, i) - s.mu(g, k)) / (2 * s.sigma2[g])) /
                std::sqrt(2 * std::numbers::pi * s.sigma2[g]);
    }
    oracle[static_cast<std::size_t>(i)] = w[0] / (w[0] + w[1]);

    const Vector lw = assignment_log_weights(s, data, i);
    CHECK(1.0 / (1.0 + std::exp(lw[1] - lw[0])) == doctest::Approx(oracle[static_cast<std::size_t>(i)]).epsilon(1e-12));
  }

  const RngStream root(131);
  std::vector<std::vector<double>> hits(2, std::vector<double>(100000));
  for (std::size_t t = 0; t < 100000; ++t) {
    update_assignments(s, data, root.child(StreamTag::Iteration, t));
    for (std::size_t i = 0; i < 2; ++i) hits[i][t] = s.labels[i] == 0 ? 1.0 : 0.0;
  }
  for (std::size_t i = 0; i < 2; ++i) {
    const double se = std::sqrt(oracle[i] * (1 - oracle[i]) / 100000.0);
    CHECK(std::abs(moments(hits[i]).mean - oracle[i]) < 3 * se);
  }
}

TEST_CASE("mean conditional parameters") {
  auto s = make_state(1, 4, 2);
  s.selected = {1};
  s.tau2_mu1 = 1.0;
  s.sigma2 << 1.0;
  ClusterStats stats{{4, 0}, Matrix(1, 2)};
  stats.sums << 8.0, 0.0;
  const auto d = mean_conditional(s, stats, 0, 0);
  CHECK(d.mean == doctest::Approx(1.6).epsilon(1e-15));
  CHECK(d.variance == doctest::Approx(0.2).epsilon(1e-15));

  const auto empty = mean_conditional(s, stats, 0, 1);
  CHECK(empty.mean == 0.0);
  CHECK(empty.variance == s.tau2_mu1);

  s.tau2_mu1 = 1e8;
  CHECK(std::abs(mean_conditional(s, stats, 0, 0).mean - 2.0) < 1e-4);

  s.selected = {0};
  s.tau2_mu0 = 0.5;
  CHECK(mean_conditional(s, stats, 0, 0).mean == doctest::Approx(0.5 * 8.0 / (0.5 * 4 + 1)));
}

TEST_CASE("mean updates match the normal moments, empty clusters revert to the prior") {
  auto s = make_state(1, 4, 2);
  std::fill(s.labels.begin(), s.labels.end(), 0);
  s.selected = {1};
  s.tau2_mu1 = 1.0;
  Matrix x(1, 4);
  x << 1.0, 2.0, 3.0, 2.0;
  const SamplerData data(x, std::nullopt);
  const RngStream root(137);
  std::vector<double> full(10000), empty(10000);
  for (std::size_t t = 0; t < full.size(); ++t) {
    update_means(s, data, root.child(StreamTag::Iteration, t));
    full[t] = s.mu(0, 0);
    empty[t] = s.mu(0, 1);
  }
  const auto mf = moments(full), me = moments(empty);
  CHECK(std::abs(mf.mean - 1.6) < 3 * mf.se);
  CHECK(std::abs(mf.variance - 0.2) < 0.05 * 0.2);
  CHECK(std::abs(me.mean) < 3 * me.se);
  CHECK(std::abs(me.variance - 1.0) < 0.05);
}

TEST_CASE("variance conditional parameters and moments") {
  Hyperparameters h;
  auto s = make_state(1, 4, 2);
  Matrix x(1, 4);
  x << 0.0, 0.0, 0.0, 0.0;
  const SamplerData zero(x, std::nullopt);
  const auto d0 = variance_conditional(s, zero, h, 0);
  CHECK(d0.shape == h.a_sigma + 2.0);
  CHECK(d0.rate == h.b_sigma);

  x << 1.0, -2.0, 2.0, 1.0;  // labels 0,1,0,1 with mu 0: RSS = 10
  const SamplerData data(x, std::nullopt);
  const auto d = variance_conditional(s, data, h, 0);
  CHECK(d.rate == doctest::Approx(h.b_sigma + 5.0).epsilon(1e-15));

  s.mu << 0.5, -0.5;
  const double rss = 0.25 + 2.25 + 2.25 + 2.25;
  CHECK(variance_conditional(s, data, h, 0).rate == doctest::Approx(h.b_sigma + 0.5 * rss));

  const RngStream root(139);
  std::vector<double> draws(10000);
  for (std::size_t t = 0; t < draws.size(); ++t) {
    update_variances(s, data, h, root.child(StreamTag::Iteration, t));
    draws[t] = s.sigma2[0];
  }
  const auto m = moments(draws);
  const auto dd = variance_conditional(s, data, h, 0);
  CHECK(std::abs(m.mean - inverse_gamma_mean(dd)) < 3 * m.se);
}

TEST_CASE("log posterior differences match the conditional densities") {
  const auto expr = random_expression(6, 12, 7);
  Hyperparameters h;
  h.K = 2;
  auto s = make_state(6, 12, 2);
  s.selected = {1, 0, 1, 1, 0, 0};
  std::mt19937_64 gen(8);
  std::normal_distribution<double> z;
  for (Eigen::Index g = 0; g < 6; ++g)
    for (int k = 0; k < 2; ++k) s.mu(g, k) = z(gen);
  const SamplerData data(expr.values, Vector(Vector::LinSpaced(6, 0.1, 0.9)));

  // p: the posterior ratio equals the Beta conditional density ratio
  const auto beta = p_conditional(s, h);
  auto log_beta = [&](double p) { return (beta.a - 1) * std::log(p) + (beta.b - 1) * std::log1p(-p); };
  auto s2 = s;
  s.p = 0.3;
  s2.p = 0.6;
  CHECK(log_posterior(s2, data, h) - log_posterior(s, data, h) ==
        doctest::Approx(log_beta(0.6) - log_beta(0.3)).epsilon(1e-9));

  // sigma_g^2: inverse gamma conditional
  const auto ig = variance_conditional(s, data, h, 2);
  auto log_ig = [&](double v) { return -(ig.shape + 1) * std::log(v) - ig.rate / v; };
  s2 = s;
  s2.sigma2[2] = 2.5;
  CHECK(log_posterior(s2, data, h) - log_posterior(s, data, h) ==
        doctest::Approx(log_ig(2.5) - log_ig(1.0)).epsilon(1e-9));

  // L_g: log odds
  s2 = s;
  s2.selected[1] = 1;
  CHECK(log_posterior(s2, data, h) - log_posterior(s, data, h) ==
        doctest::Approx(selection_log_odds(s, data, 1)).epsilon(1e-9));
}

namespace {

/// Draws every parameter from the prior and data given the parameters.
struct JointModel {
  Hyperparameters h;
  Eigen::Index G, n;
  bool guided;

  ModelState draw_parameters(RngStream& rng) const {
    ModelState s;
    s.p = sample_beta(rng, h.a_p, h.b_p);
    s.tau2_mu0 = sample_inverse_gamma(rng, h.a_tau_mu0, h.b_tau_mu0);
    s.tau2_mu1 = sample_inverse_gamma(rng, h.a_tau_mu1, h.b_tau_mu1);
    s.tau2_u0 = sample_inverse_gamma(rng, h.a_tau_u0, h.b_tau_u0);
    s.tau2_u1 = sample_inverse_gamma(rng, h.a_tau_u1, h.b_tau_u1);
    s.selected.resize(static_cast<std::size_t>(G));
    s.mu.resize(G, h.K);
    s.sigma2.resize(G);
    for (Eigen::Index g = 0; g < G; ++g) {
      s.selected[static_cast<std::size_t>(g)] = static_cast<std::uint8_t>(sample_bernoulli(rng, s.p));
      const double tau2 = s.selected[static_cast<std::size_t>(g)] ? s.tau2_mu1 : s.tau2_mu0;
      for (int k = 0; k < h.K; ++k) s.mu(g, k) = sample_normal(rng, 0.0, tau2);
      s.sigma2[g] = sample_inverse_gamma(rng, h.a_sigma, h.b_sigma);
    }
    s.pi = sample_dirichlet(Vector::Constant(h.K, h.c), rng);
    s.labels.resize(static_cast<std::size_t>(n));
    const std::vector<double> log_pi = [&] {
      std::vector<double> v;
      for (int k = 0; k < h.K; ++k) v.push_back(std::log(s.pi[k]));
      return v;
    }();
    for (auto& z : s.labels) z = sample_categorical_log(log_pi, rng);
    return s;
  }

  SamplerData draw_data(const ModelState& s, RngStream& rng) const {
    Matrix x(G, n);
    for (Eigen::Index g = 0; g < G; ++g)
      for (Eigen::Index i = 0; i < n; ++i)
        x(g, i) = sample_normal(rng, s.mu(g, s.labels[static_cast<std::size_t>(i)]), s.sigma2[g]);
    std::optional<Vector> u;
    if (guided) {
      u = Vector(G);
      for (Eigen::Index g = 0; g < G; ++g)
        (*u)[g] = s.selected[static_cast<std::size_t>(g)] ? sample_normal(rng, 1.0, s.tau2_u1)
                                                          : sample_normal(rng, 0.0, s.tau2_u0);
    }
    return SamplerData(x, u);
  }

  std::vector<double> statistics(const ModelState& s) const {
    double selected = 0.0, zero = 0.0;
    for (auto l : s.selected) selected += l;
    for (int z : s.labels) zero += z == 0;
    std::vector<double> out = {s.p,
                               s.tau2_mu0,
                               s.tau2_mu1,
                               s.sigma2.mean(),
                               s.mu.array().square().mean(),
                               selected / static_cast<double>(G),
                               s.pi[0],
                               zero / static_cast<double>(n)};
    if (guided) {
      out.push_back(s.tau2_u0);
      out.push_back(s.tau2_u1);
    }
    return out;
  }
};

}  // namespace

TEST_CASE("getting it right: successive conditional and forward simulation agree") {
  for (bool guided : {true, false}) {
    CAPTURE(guided);
    JointModel model;
    model.G = 5;
    model.n = 10;
    model.guided = guided;
    auto& h = model.h;
    h.K = 2;
    h.a_p = 2.0, h.b_p = 2.0;
    h.a_sigma = 6.0, h.b_sigma = 5.0;
    h.a_tau_mu0 = 6.0, h.b_tau_mu0 = 0.5;
    h.a_tau_mu1 = 6.0, h.b_tau_mu1 = 10.0;
    h.a_tau_u0 = 6.0, h.b_tau_u0 = 1.0;
    h.a_tau_u1 = 6.0, h.b_tau_u1 = 2.0;
    const int rounds = 10000;

    std::vector<std::vector<double>> forward, successive;
    RngStream fwd(guided ? 211 : 212);
    for (int r = 0; r < rounds; ++r) forward.push_back(model.statistics(model.draw_parameters(fwd)));

    RngStream data_rng(guided ? 223 : 224);
    const RngStream chain(guided ? 227 : 228);
    ModelState state = model.draw_parameters(data_rng);
    SamplerData data = model.draw_data(state, data_rng);
    for (int r = 0; r < rounds; ++r) {
      gibbs_sweep(state, data, h, chain.child(StreamTag::Iteration, static_cast<std::uint64_t>(r)));
      data = model.draw_data(state, data_rng);
      successive.push_back(model.statistics(state));
    }

    const std::size_t stats = forward[0].size();
    for (std::size_t j = 0; j < stats; ++j) {
      std::vector<double> f, s;
      for (int r = 0; r < rounds; ++r) {
        f.push_back(forward[static_cast<std::size_t>(r)][j]);
        s.push_back(successive[static_cast<std::size_t>(r)][j]);
      }
      const auto mf = moments(f);
      const auto ms = moments(s);
      const double se = std::sqrt(mf.se * mf.se + std::pow(batch_means_se(s), 2));
      CAPTURE(j);
      CAPTURE(mf.mean);
      CAPTURE(ms.mean);
      CHECK(std::abs(mf.mean - ms.mean) < 4 * se);
    }
  }
}

TEST_CASE("run_gibbs: trace length, thinning and determinism") {
  const auto expr = random_expression(10, 12, 11);
  GibbsConfig cfg;
  cfg.guided = false;
  const auto a = run_gibbs(expr, std::nullopt, cfg);
  CHECK(a.retained() == 500);
  CHECK(a.diagnostics.size() == 1000);
  CHECK(a.label_draws.size() == 500);
  const auto b = run_gibbs(expr, std::nullopt, cfg);
  CHECK(a.selection_draws == b.selection_draws);
  CHECK(a.label_draws == b.label_draws);
  CHECK(a.mu_sum == b.mu_sum);
  for (std::size_t t = 0; t < a.diagnostics.size(); ++t)
    REQUIRE(a.diagnostics[t].log_posterior == b.diagnostics[t].log_posterior);

  cfg.thin = 3;
  cfg.keep_full_draws = true;
  const auto thinned = run_gibbs(expr, std::nullopt, cfg);
  CHECK(thinned.retained() == 167);
  CHECK(thinned.mu_draws.size() == 167);
  CHECK(thinned.selection_draws[1] == a.selection_draws[3]);
}

TEST_CASE("run_gibbs output does not depend on the thread count") {
  const auto f = two_cluster_fixture(60, 40, 10, 1.5, 12);
  GibbsConfig cfg;
  cfg.hyper.K = 3;
  cfg.hyper.n_total = 200;
  cfg.hyper.n_burnin = 100;
  cfg.keep_full_draws = true;
  const auto serial = run_gibbs(f.expr, f.guidance, cfg);
  cfg.threads = 4;
  const auto parallel = run_gibbs(f.expr, f.guidance, cfg);
  CHECK(serial.selection_draws == parallel.selection_draws);
  CHECK(serial.label_draws == parallel.label_draws);
  for (std::size_t t = 0; t < serial.retained(); ++t) {
    REQUIRE(serial.mu_draws[t] == parallel.mu_draws[t]);
    REQUIRE(serial.sigma2_draws[t] == parallel.sigma2_draws[t]);
  }
}

TEST_CASE("run_gibbs rejects guidance that does not match the mode") {
  const auto expr = random_expression(4, 6, 13);
  GibbsConfig cfg;
  CHECK_THROWS_AS(run_gibbs(expr, std::nullopt, cfg), Error);
  cfg.guided = false;
  CHECK_THROWS_AS(run_gibbs(expr, Vector(Vector::Zero(4)), cfg), Error);
}

TEST_CASE("unguided chain equals a guided chain with neutral guidance terms") {
  const auto f = two_cluster_fixture(20, 30, 6, 1.2, 14);
  const Vector neutral = Vector::Constant(20, 0.5);
  GibbsConfig cfg;
  cfg.hyper.K = 2;
  cfg.hyper.n_total = 1500;
  cfg.hyper.n_burnin = 500;
  cfg.init = InitScheme::ClusterMeans;
  // tau2_U pinned at 1 by a prior with enormous shape and rate
  cfg.hyper.a_tau_u0 = cfg.hyper.a_tau_u1 = 1e9;
  cfg.hyper.b_tau_u0 = cfg.hyper.b_tau_u1 = 1e9;

  const int seeds = 8;
  std::vector<Vector> guided, unguided;
  for (int s = 0; s < seeds; ++s) {
    cfg.seed = 300 + static_cast<std::uint64_t>(s);
    cfg.guided = true;
    guided.push_back(run_gibbs(f.expr, neutral, cfg).inclusion_frequency());
    cfg.guided = false;
    unguided.push_back(run_gibbs(f.expr, std::nullopt, cfg).inclusion_frequency());
  }
  for (Eigen::Index g = 0; g < 20; ++g) {
    std::vector<double> a, b;
    for (int s = 0; s < seeds; ++s) {
      a.push_back(guided[static_cast<std::size_t>(s)][g]);
      b.push_back(unguided[static_cast<std::size_t>(s)][g]);
    }
    const auto ma = moments(a), mb = moments(b);
    CAPTURE(g);
    CHECK(std::abs(ma.mean - mb.mean) <= 4 * std::sqrt(ma.se * ma.se + mb.se * mb.se) + 0.02);
  }
}

TEST_CASE("a well separated two-cluster fixture is recovered exactly") {
  int exact = 0;
  const int seeds = 50;
  for (int s = 0; s < seeds; ++s) {
    const auto f = two_cluster_fixture(60, 40, 12, 1.5, 1000 + static_cast<std::uint64_t>(s));
    GibbsConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(s) + 1;
    cfg.hyper.K = 2;
    cfg.hyper.n_total = 300;
    cfg.hyper.n_burnin = 150;
    const auto trace = run_gibbs(f.expr, f.guidance, cfg);
    const auto labels = cluster_decision(trace).labels;
    if (adjusted_rand_index(labels, f.truth) == 1.0) ++exact;
  }
  CHECK(exact >= 50);  // at least 99% of 50
}
