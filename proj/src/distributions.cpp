#include "gbc/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "gbc/error.hpp"

namespace gbc {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

void check(bool ok, const char* what) {
  if (!ok) throw Error(ErrorKind::InvalidParameter, what);
}

double clamp_positive(double x) {
  if (!(x >= std::numeric_limits<double>::min())) return std::numeric_limits<double>::min();
  if (!(x <= std::numeric_limits<double>::max())) return std::numeric_limits<double>::max();
  return x;
}

}  // namespace

std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x;
}

RngStream::RngStream(std::uint64_t master_seed) : master_seed_(master_seed), key_(mix64(master_seed + kGolden)) {}

RngStream RngStream::child(std::uint64_t tag, std::uint64_t index) const {
  const std::uint64_t k = mix64(key_ ^ mix64(tag * kGolden + 0x632BE59BD9B4E019ULL));
  return RngStream(master_seed_, mix64(k + mix64(index ^ 0xD1B54A32D192ED03ULL)));
}

RngStream RngStream::child(StreamTag tag, std::uint64_t index) const {
  return child(static_cast<std::uint64_t>(tag), index);
}

RngStream::result_type RngStream::operator()() {
  ++counter_;
  return mix64(key_ ^ mix64(counter_ * kGolden));
}

double RngStream::uniform01() {
  // 53 random bits, offset by half an ulp so 0 is never returned
  return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
}

double sample_standard_normal(RngStream& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  return dist(rng);
}

double sample_normal(RngStream& rng, double mean, double variance) {
  check(variance > 0.0 && std::isfinite(variance) && std::isfinite(mean), "Normal: variance must be > 0");
  return mean + std::sqrt(variance) * sample_standard_normal(rng);
}

double sample_log_gamma(RngStream& rng, double shape) {
  check(shape > 0.0 && std::isfinite(shape), "Gamma: shape must be > 0");
  if (shape >= 1.0) {
    std::gamma_distribution<double> dist(shape, 1.0);
    return std::log(dist(rng));
  }
  // Gamma(a) = Gamma(a + 1) * U^(1/a), kept in log space
  std::gamma_distribution<double> dist(shape + 1.0, 1.0);
  return std::log(dist(rng)) + std::log(rng.uniform01()) / shape;
}

double sample_gamma(RngStream& rng, double shape, double scale) {
  check(scale > 0.0, "Gamma: scale must be > 0");
  return scale * std::exp(sample_log_gamma(rng, shape));
}

double sample_beta(RngStream& rng, double a, double b) {
  check(a > 0.0 && b > 0.0, "Beta: a and b must be > 0");
  const double lx = sample_log_gamma(rng, a);
  const double ly = sample_log_gamma(rng, b);
  double v = 1.0 / (1.0 + std::exp(ly - lx));
  if (v <= 0.0) v = std::numeric_limits<double>::min();
  if (v >= 1.0) v = std::nextafter(1.0, 0.0);
  return v;
}

double sample_inverse_gamma(RngStream& rng, double shape, double rate) {
  check(shape > 0.0 && rate > 0.0 && std::isfinite(rate), "InverseGamma: shape and rate must be > 0");
  return clamp_positive(std::exp(std::log(rate) - sample_log_gamma(rng, shape)));
}

int sample_bernoulli(RngStream& rng, double q) {
  check(q >= 0.0 && q <= 1.0, "Bernoulli: q must lie in [0,1]");
  return rng.uniform01() < q ? 1 : 0;
}

long sample_poisson(RngStream& rng, double lambda) {
  check(lambda > 0.0 && std::isfinite(lambda), "Poisson: lambda must be > 0");
  std::poisson_distribution<long> dist(lambda);
  return dist(rng);
}

double sample_uniform(RngStream& rng, double lo, double hi) {
  check(lo < hi && std::isfinite(lo) && std::isfinite(hi), "Uniform: need lo < hi");
  return lo + (hi - lo) * rng.uniform01();
}

double sample_uniform_union(RngStream& rng, std::span<const std::pair<double, double>> intervals) {
  check(!intervals.empty(), "Uniform union: no intervals");
  double total = 0.0;
  for (const auto& [lo, hi] : intervals) {
    check(lo < hi, "Uniform union: need lo < hi in every interval");
    total += hi - lo;
  }
  double u = rng.uniform01() * total;
  for (const auto& [lo, hi] : intervals) {
    if (u < hi - lo) return lo + u;
    u -= hi - lo;
  }
  return intervals.back().second;
}

double sample_scalar(const ScalarDistribution& dist, RngStream& rng) {
  return std::visit(
      [&rng](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, NormalDist>) return sample_normal(rng, d.mean, d.variance);
        else if constexpr (std::is_same_v<T, BetaDist>) return sample_beta(rng, d.a, d.b);
        else if constexpr (std::is_same_v<T, InverseGammaDist>) return sample_inverse_gamma(rng, d.shape, d.rate);
        else if constexpr (std::is_same_v<T, BernoulliDist>) return sample_bernoulli(rng, d.q);
        else if constexpr (std::is_same_v<T, PoissonDist>) return static_cast<double>(sample_poisson(rng, d.lambda));
        else return sample_uniform(rng, d.lo, d.hi);
      },
      dist);
}

Eigen::VectorXd sample_dirichlet(const Eigen::VectorXd& alpha, RngStream& rng) {
  check(alpha.size() >= 1, "Dirichlet: empty concentration");
  for (Eigen::Index k = 0; k < alpha.size(); ++k)
    check(alpha[k] > 0.0 && std::isfinite(alpha[k]), "Dirichlet: concentrations must be > 0");
  if (alpha.size() == 1) return Eigen::VectorXd::Ones(1);

  Eigen::VectorXd logs(alpha.size());
  for (Eigen::Index k = 0; k < alpha.size(); ++k) logs[k] = sample_log_gamma(rng, alpha[k]);
  Eigen::VectorXd out = (logs.array() - logs.maxCoeff()).exp().matrix();
  out /= out.sum();
  // keep every component strictly positive
  if ((out.array() < std::numeric_limits<double>::min()).any()) {
    out = out.cwiseMax(std::numeric_limits<double>::min());
    out /= out.sum();
  }
  return out;
}

double log_sum_exp(std::span<const double> values) {
  double top = -std::numeric_limits<double>::infinity();
  for (double v : values) top = std::max(top, v);
  if (!std::isfinite(top)) return top;
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - top);
  return top + std::log(acc);
}

int sample_categorical_log(std::span<const double> log_weights, RngStream& rng) {
  check(!log_weights.empty(), "Categorical: no weights");
  double top = -std::numeric_limits<double>::infinity();
  for (double w : log_weights) {
    check(!std::isnan(w) && w != std::numeric_limits<double>::infinity(),
          "Categorical: weights must be finite or -inf");
    top = std::max(top, w);
  }
  if (top == -std::numeric_limits<double>::infinity())
    throw Error(ErrorKind::AllWeightsNegInfinity, "every categorical log-weight is -inf");

  thread_local std::vector<double> cumulative;
  cumulative.resize(log_weights.size());
  double total = 0.0;
  for (std::size_t k = 0; k < log_weights.size(); ++k) {
    total += std::exp(log_weights[k] - top);
    cumulative[k] = total;
  }
  const double u = rng.uniform01() * total;
  for (std::size_t k = 0; k < cumulative.size(); ++k)
    if (u < cumulative[k]) return static_cast<int>(k);
  // u == total through rounding: return the last category with positive weight
  for (std::size_t k = log_weights.size(); k-- > 0;)
    if (std::exp(log_weights[k] - top) > 0.0) return static_cast<int>(k);
  return 0;
}

int sample_categorical_log(const Eigen::VectorXd& log_weights, RngStream& rng) {
  return sample_categorical_log(std::span<const double>(log_weights.data(), static_cast<std::size_t>(log_weights.size())),
                                rng);
}

namespace {

void require_symmetric(const Eigen::MatrixXd& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() < 1)
    throw Error(ErrorKind::DimensionMismatch, std::string(what) + ": matrix must be square");
  if (!m.allFinite()) throw Error(ErrorKind::NonFiniteInput, std::string(what) + ": non-finite entries");
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10)
    throw Error(ErrorKind::NotPositiveDefinite, std::string(what) + ": matrix is not symmetric");
}

Eigen::MatrixXd cholesky_lower(const Eigen::MatrixXd& m, const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success)
    throw Error(ErrorKind::NotPositiveDefinite, std::string(what) + ": Cholesky factorization failed");
  return llt.matrixL();
}

}  // namespace

MvnSampler::MvnSampler(const Eigen::MatrixXd& cov) {
  require_symmetric(cov, "MVN covariance");
  lower_ = cholesky_lower(cov, "MVN covariance");
}

Eigen::VectorXd MvnSampler::draw(const Eigen::VectorXd& mean, RngStream& rng) const {
  if (mean.size() != lower_.rows()) throw Error(ErrorKind::DimensionMismatch, "MVN mean has wrong length");
  Eigen::VectorXd z(mean.size());
  for (Eigen::Index j = 0; j < z.size(); ++j) z[j] = sample_standard_normal(rng);
  return mean + lower_.triangularView<Eigen::Lower>() * z;
}

Eigen::VectorXd sample_mvn(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, RngStream& rng) {
  return MvnSampler(cov).draw(mean, rng);
}

Eigen::MatrixXd sample_inverse_wishart(const Eigen::MatrixXd& scale, double dof, RngStream& rng) {
  require_symmetric(scale, "inverse-Wishart scale");
  const Eigen::Index d = scale.rows();
  if (!(dof > static_cast<double>(d) - 1.0))
    throw Error(ErrorKind::InvalidDof, "inverse-Wishart needs dof > d - 1 (d = " + std::to_string(d) + ")");

  Eigen::LLT<Eigen::MatrixXd> scale_llt(scale);
  if (scale_llt.info() != Eigen::Success)
    throw Error(ErrorKind::NotPositiveDefinite, "inverse-Wishart scale is not positive definite");
  const Eigen::MatrixXd inv_scale = scale_llt.solve(Eigen::MatrixXd::Identity(d, d));
  const Eigen::MatrixXd chol = cholesky_lower(0.5 * (inv_scale + inv_scale.transpose()), "inverse scale");

  // Bartlett factor: sqrt(chi2(dof - j)) on the diagonal, N(0,1) below it
  Eigen::MatrixXd bartlett = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    bartlett(j, j) = std::sqrt(2.0 * sample_gamma(rng, 0.5 * (dof - static_cast<double>(j))));
    for (Eigen::Index i = j + 1; i < d; ++i) bartlett(i, j) = sample_standard_normal(rng);
  }
  // Wishart draw W = M M^T with M = chol * bartlett; inverse(W) = M^-T M^-1
  const Eigen::MatrixXd factor = chol.triangularView<Eigen::Lower>() * bartlett;
  const Eigen::MatrixXd factor_inv =
      factor.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(d, d));
  Eigen::MatrixXd draw = factor_inv.transpose() * factor_inv;
  draw = 0.5 * (draw + draw.transpose()).eval();
  return draw;
}

double log_normal_density(double x, double mean, double variance) {
  const double r = x - mean;
  return -0.5 * (std::log(2.0 * std::numbers::pi * variance) + r * r / variance);
}

}  // namespace gbc
