#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <utility>
#include <variant>

#include <Eigen/Dense>

namespace gbc {

/// Domain tags used when deriving substreams. Values are part of the
/// reproducibility contract: changing one changes every downstream draw.
enum class StreamTag : std::uint64_t {
  Init = 1,
  Iteration = 2,
  Step = 3,
  Gene = 4,
  Sample = 5,
  Chain = 6,
  Simulation = 7,
  Module = 8,
  Confounder = 9,
  Noise = 10,
  Replicate = 11,
  ClusterCount = 12,
};

/// Counter-based random stream keyed by a master seed and a derivation path.
///
/// A stream is identified only by (master seed, path), so any two processes
/// or threads that derive the same path see the same sequence. Streams are
/// cheap to derive (a few integer mixes) and are meant to be created per
/// gene or per sample inside hot loops. Satisfies UniformRandomBitGenerator.
class RngStream {
 public:
  using result_type = std::uint64_t;

  explicit RngStream(std::uint64_t master_seed);

  /// Substream for (tag, index) below this stream's path. Does not advance
  /// this stream.
  RngStream child(StreamTag tag, std::uint64_t index) const;
  RngStream child(std::uint64_t tag, std::uint64_t index) const;

  result_type operator()();
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  /// Uniform on the open interval (0, 1).
  double uniform01();

  std::uint64_t master_seed() const { return master_seed_; }
  std::uint64_t key() const { return key_; }

 private:
  RngStream(std::uint64_t master_seed, std::uint64_t key) : master_seed_(master_seed), key_(key) {}

  std::uint64_t master_seed_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Finalizer of splitmix64; a bijection on 64-bit words.
std::uint64_t mix64(std::uint64_t x);

struct NormalDist { double mean; double variance; };
struct BetaDist { double a; double b; };
/// Shape/rate parameterization: density proportional to x^-(shape+1) exp(-rate/x).
struct InverseGammaDist { double shape; double rate; };
struct BernoulliDist { double q; };
struct PoissonDist { double lambda; };
struct UniformDist { double lo; double hi; };

using ScalarDistribution =
    std::variant<NormalDist, BetaDist, InverseGammaDist, BernoulliDist, PoissonDist, UniformDist>;

double sample_scalar(const ScalarDistribution& dist, RngStream& rng);

double sample_normal(RngStream& rng, double mean, double variance);
double sample_standard_normal(RngStream& rng);
/// log of a Gamma(shape, 1) variate; stays finite for shapes far below 1.
double sample_log_gamma(RngStream& rng, double shape);
double sample_gamma(RngStream& rng, double shape, double scale = 1.0);
double sample_beta(RngStream& rng, double a, double b);
/// Result is clamped to the positive finite doubles.
double sample_inverse_gamma(RngStream& rng, double shape, double rate);
int sample_bernoulli(RngStream& rng, double q);
long sample_poisson(RngStream& rng, double lambda);
double sample_uniform(RngStream& rng, double lo, double hi);
/// Uniform over a union of disjoint intervals, weighted by length.
double sample_uniform_union(RngStream& rng, std::span<const std::pair<double, double>> intervals);

Eigen::VectorXd sample_dirichlet(const Eigen::VectorXd& alpha, RngStream& rng);

/// 0-based index k drawn with probability softmax(log_weights)_k.
int sample_categorical_log(std::span<const double> log_weights, RngStream& rng);
int sample_categorical_log(const Eigen::VectorXd& log_weights, RngStream& rng);

/// Multivariate normal with a fixed covariance factored once.
class MvnSampler {
 public:
  explicit MvnSampler(const Eigen::MatrixXd& cov);
  Eigen::VectorXd draw(const Eigen::VectorXd& mean, RngStream& rng) const;
  Eigen::Index dim() const { return lower_.rows(); }

 private:
  Eigen::MatrixXd lower_;
};

Eigen::VectorXd sample_mvn(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, RngStream& rng);

/// Inverse-Wishart draw with scale `scale` and `dof` degrees of freedom
/// (mean scale / (dof - d - 1)), via the Bartlett factor of the Wishart with
/// scale inverse(scale).
Eigen::MatrixXd sample_inverse_wishart(const Eigen::MatrixXd& scale, double dof, RngStream& rng);

/// log N(x; mean, variance)
double log_normal_density(double x, double mean, double variance);

/// max-shifted log(sum(exp(v))); -inf for an all -inf input.
double log_sum_exp(std::span<const double> values);

}  // namespace gbc
