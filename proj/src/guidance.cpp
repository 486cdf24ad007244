#include "gbc/guidance.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>

#include "gbc/error.hpp"
#include "gbc/parallel.hpp"

namespace gbc {

namespace {

constexpr double kSeparationLimit = 15.0;
constexpr int kGlmMaxIterations = 100;
constexpr int kCoxMaxIterations = 50;
constexpr double kCoxGradientTol = 1e-8;
constexpr int kMaxHalvings = 10;

void require_same_length(std::size_t a, std::size_t b) {
  if (a != b) throw Error(ErrorKind::LengthMismatch, "predictor and outcome lengths differ");
}

/// Centred and scaled copy of x. Pseudo R^2 is location/scale invariant, so
/// fitting on this scale keeps the separation limit meaningful.
std::vector<double> standardized_predictor(std::span<const double> x) {
  const auto n = static_cast<double>(x.size());
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double ss = 0.0, scale = 0.0;
  for (double v : x) {
    ss += (v - mean) * (v - mean);
    scale = std::max(scale, std::abs(v));
  }
  const double sd = std::sqrt(ss / n);
  if (!(sd > 1e-13 * std::max(scale, 1e-300)))
    throw Error(ErrorKind::ConstantPredictor, "predictor has zero variance");
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean) / sd;
  return out;
}

double softplus(double t) { return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t))); }

double logistic(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

}  // namespace

double cox_snell_r2(double loglik_null, double loglik_model, std::size_t n) {
  const double r2 = -std::expm1((2.0 / static_cast<double>(n)) * (loglik_null - loglik_model));
  return std::clamp(r2, 0.0, 1.0);
}

double guidance_continuous(std::span<const double> x, std::span<const double> y) {
  require_same_length(x.size(), y.size());
  if (x.size() < 3) throw Error(ErrorKind::InvalidParameter, "need at least 3 observations");
  const auto n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
    scale = std::max(scale, std::abs(x[i]));
  }
  if (!(std::sqrt(sxx / n) > 1e-13 * std::max(scale, 1e-300)))
    throw Error(ErrorKind::ConstantPredictor, "predictor has zero variance");
  if (syy == 0.0) return 0.0;
  return std::clamp((sxy * sxy) / (sxx * syy), 0.0, 1.0);
}

double abs_correlation(std::span<const double> x, std::span<const double> y) {
  return std::sqrt(guidance_continuous(x, y));
}

PseudoR2 fit_logistic(std::span<const double> x_raw, std::span<const double> y) {
  require_same_length(x_raw.size(), y.size());
  const std::size_t n = y.size();
  double n1 = 0.0;
  for (double v : y) {
    if (v != 0.0 && v != 1.0) throw Error(ErrorKind::InvalidParameter, "binary outcome must be 0/1");
    n1 += v;
  }
  const double n0 = static_cast<double>(n) - n1;
  if (n1 == 0.0 || n0 == 0.0) throw Error(ErrorKind::InvalidParameter, "binary outcome needs both classes");
  const auto x = standardized_predictor(x_raw);

  auto loglik = [&](double b0, double b1) {
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double eta = b0 + b1 * x[i];
      ll -= y[i] == 1.0 ? softplus(-eta) : softplus(eta);
    }
    return ll;
  };

  PseudoR2 fit;
  fit.loglik_null = n1 * std::log(n1 / static_cast<double>(n)) + n0 * std::log(n0 / static_cast<double>(n));
  double b0 = std::log(n1 / n0), b1 = 0.0;
  double ll = loglik(b0, b1);

  bool converged = false;
  for (int it = 1; it <= kGlmMaxIterations; ++it) {
    fit.iterations = it;
    double g0 = 0.0, g1 = 0.0, h00 = 0.0, h01 = 0.0, h11 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double p = logistic(b0 + b1 * x[i]);
      const double w = p * (1.0 - p);
      g0 += y[i] - p;
      g1 += (y[i] - p) * x[i];
      h00 += w;
      h01 += w * x[i];
      h11 += w * x[i] * x[i];
    }
    if (std::max(std::abs(g0), std::abs(g1)) < 1e-10) {
      converged = true;
      break;
    }
    const double det = h00 * h11 - h01 * h01;
    if (!(det > 0.0)) {
      fit.status = FitStatus::Separation;
      break;
    }
    double d0 = (h11 * g0 - h01 * g1) / det;
    double d1 = (h00 * g1 - h01 * g0) / det;

    double next_ll = loglik(b0 + d0, b1 + d1);
    for (int h = 0; h < kMaxHalvings && !(next_ll >= ll); ++h) {
      d0 *= 0.5;
      d1 *= 0.5;
      next_ll = loglik(b0 + d0, b1 + d1);
    }
    if (std::abs(b1 + d1) > kSeparationLimit) {
      fit.status = FitStatus::Separation;
      break;
    }
    const bool tiny = std::max(std::abs(d0), std::abs(d1)) < 1e-12;
    if (next_ll >= ll) {
      b0 += d0;
      b1 += d1;
      ll = next_ll;
    }
    if (tiny) {
      converged = true;
      break;
    }
  }
  if (!converged && fit.status != FitStatus::Separation)
    throw Error(ErrorKind::NonConvergence, "logistic fit did not converge in 100 iterations");

  fit.loglik_model = std::max(ll, fit.loglik_null);
  fit.coefficient = b1;
  fit.value = cox_snell_r2(fit.loglik_null, fit.loglik_model, n);
  return fit;
}

namespace {

struct OrdinalData {
  std::vector<int> level;  // 0..J-1
  std::vector<double> counts;
  int J = 0;
};

OrdinalData encode_levels(std::span<const double> y) {
  std::map<double, int> codes;
  for (double v : y) {
    if (!std::isfinite(v)) throw Error(ErrorKind::NonFiniteInput, "ordinal outcome is not finite");
    codes.emplace(v, 0);
  }
  if (codes.size() < 2) throw Error(ErrorKind::InvalidParameter, "ordinal outcome needs >= 2 levels");
  int next = 0;
  for (auto& [value, code] : codes) code = next++;
  OrdinalData d;
  d.J = next;
  d.counts.assign(static_cast<std::size_t>(next), 0.0);
  for (double v : y) {
    const int c = codes.at(v);
    d.level.push_back(c);
    d.counts[static_cast<std::size_t>(c)] += 1.0;
  }
  return d;
}

/// Probability mass F(a) - F(b) between two cumulative logits (a > b).
double interval_mass(double a, double b) {
  if (b > 0.0) return logistic(-b) - logistic(-a);
  return logistic(a) - logistic(b);
}

}  // namespace

PseudoR2 fit_proportional_odds(std::span<const double> x_raw, std::span<const double> y) {
  require_same_length(x_raw.size(), y.size());
  const auto data = encode_levels(y);
  const auto x = standardized_predictor(x_raw);
  const std::size_t n = y.size();
  const int J = data.J;
  const int P = J;  // J-1 thresholds + slope
  const auto nd = static_cast<double>(n);
  constexpr double inf = std::numeric_limits<double>::infinity();

  PseudoR2 fit;
  fit.loglik_null = 0.0;
  for (double c : data.counts)
    if (c > 0.0) fit.loglik_null += c * std::log(c / nd);

  Eigen::VectorXd theta(P);
  double cumulative = 0.0;
  for (int j = 0; j + 1 < J; ++j) {
    cumulative += data.counts[static_cast<std::size_t>(j)];
    theta[j] = std::log(cumulative / (nd - cumulative));
  }
  theta[P - 1] = 0.0;

  auto upper = [&](const Eigen::VectorXd& t, int lvl) { return lvl == J - 1 ? inf : t[lvl]; };
  auto lower = [&](const Eigen::VectorXd& t, int lvl) { return lvl == 0 ? -inf : t[lvl - 1]; };
  auto ordered = [&](const Eigen::VectorXd& t) {
    for (int j = 1; j + 1 < J; ++j)
      if (!(t[j] > t[j - 1])) return false;
    return true;
  };
  auto loglik = [&](const Eigen::VectorXd& t) {
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double eta = t[P - 1] * x[i];
      const int lvl = data.level[i];
      ll += std::log(interval_mass(upper(t, lvl) - eta, lower(t, lvl) - eta));
    }
    return ll;
  };

  double ll = loglik(theta);
  bool converged = false;
  for (int it = 1; it <= kGlmMaxIterations; ++it) {
    fit.iterations = it;
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(P);
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(P, P);
    const double beta = theta[P - 1];
    for (std::size_t i = 0; i < n; ++i) {
      const int lvl = data.level[i];
      const double xi = x[i];
      const double a = upper(theta, lvl) - beta * xi;
      const double b = lower(theta, lvl) - beta * xi;
      const double p = interval_mass(a, b);
      // density f and its derivative f' of the logistic at both cut points
      const double Fa = std::isinf(a) ? 1.0 : logistic(a);
      const double Fb = std::isinf(b) ? 0.0 : logistic(b);
      const double fa = std::isinf(a) ? 0.0 : Fa * (1.0 - Fa);
      const double fb = std::isinf(b) ? 0.0 : Fb * (1.0 - Fb);
      const double dfa = fa * (1.0 - 2.0 * Fa);
      const double dfb = fb * (1.0 - 2.0 * Fb);
      const double D = fa - fb;
      const int ja = lvl;       // index of theta for the upper cut (if finite)
      const int jb = lvl - 1;   // index of theta for the lower cut (if finite)
      const bool has_a = lvl < J - 1;
      const bool has_b = lvl > 0;

      if (has_a) grad[ja] += fa / p;
      if (has_b) grad[jb] -= fb / p;
      grad[P - 1] -= xi * D / p;

      if (has_a) hess(ja, ja) += dfa / p - fa * fa / (p * p);
      if (has_b) hess(jb, jb) += -dfb / p - fb * fb / (p * p);
      if (has_a && has_b) {
        hess(ja, jb) += fa * fb / (p * p);
        hess(jb, ja) += fa * fb / (p * p);
      }
      if (has_a) {
        const double v = -xi * dfa / p + xi * fa * D / (p * p);
        hess(ja, P - 1) += v;
        hess(P - 1, ja) += v;
      }
      if (has_b) {
        const double v = xi * dfb / p - xi * fb * D / (p * p);
        hess(jb, P - 1) += v;
        hess(P - 1, jb) += v;
      }
      hess(P - 1, P - 1) += xi * xi * (dfa - dfb) / p - xi * xi * D * D / (p * p);
    }
    if (grad.cwiseAbs().maxCoeff() < 1e-10) {
      converged = true;
      break;
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(-hess);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
      fit.status = FitStatus::Separation;
      break;
    }
    Eigen::VectorXd step = ldlt.solve(grad);
    Eigen::VectorXd next = theta + step;
    double next_ll = ordered(next) ? loglik(next) : -inf;
    for (int h = 0; h < kMaxHalvings && !(next_ll >= ll); ++h) {
      step *= 0.5;
      next = theta + step;
      next_ll = ordered(next) ? loglik(next) : -inf;
    }
    if (std::abs(next[P - 1]) > kSeparationLimit) {
      fit.status = FitStatus::Separation;
      break;
    }
    const bool tiny = step.cwiseAbs().maxCoeff() < 1e-12;
    if (next_ll >= ll) {
      theta = next;
      ll = next_ll;
    }
    if (tiny) {
      converged = true;
      break;
    }
  }
  if (!converged && fit.status != FitStatus::Separation)
    throw Error(ErrorKind::NonConvergence, "proportional-odds fit did not converge in 100 iterations");

  fit.loglik_model = std::max(ll, fit.loglik_null);
  fit.coefficient = theta[P - 1];
  fit.value = cox_snell_r2(fit.loglik_null, fit.loglik_model, n);
  return fit;
}

namespace {

struct CoxData {
  std::vector<double> x;
  std::vector<int> events;
  /// Subject indices sorted by decreasing time.
  std::vector<std::size_t> order;
  std::vector<double> times;
};

struct CoxEval {
  double loglik = 0.0;
  double gradient = 0.0;
  double hessian = 0.0;
};

CoxEval cox_evaluate(const CoxData& d, double beta) {
  const std::size_t n = d.x.size();
  double shift = 0.0;
  for (double v : d.x) shift = std::max(shift, beta * v);

  CoxEval e;
  double s0 = 0.0, s1 = 0.0, s2 = 0.0;
  std::size_t pos = 0;
  while (pos < n) {
    // admit every subject tied at this time before scoring its events
    std::size_t end = pos;
    const double t = d.times[d.order[pos]];
    while (end < n && d.times[d.order[end]] == t) {
      const std::size_t i = d.order[end];
      const double w = std::exp(beta * d.x[i] - shift);
      s0 += w;
      s1 += w * d.x[i];
      s2 += w * d.x[i] * d.x[i];
      ++end;
    }
    for (std::size_t k = pos; k < end; ++k) {
      const std::size_t i = d.order[k];
      if (!d.events[i]) continue;
      const double m1 = s1 / s0;
      e.loglik += beta * d.x[i] - (std::log(s0) + shift);
      e.gradient += d.x[i] - m1;
      e.hessian -= s2 / s0 - m1 * m1;
    }
    pos = end;
  }
  return e;
}

CoxData make_cox_data(std::span<const double> x, std::span<const double> times, std::span<const int> events,
                      bool standardize) {
  require_same_length(x.size(), times.size());
  require_same_length(x.size(), events.size());
  CoxData d;
  int n_events = 0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!(times[i] > 0.0) || !std::isfinite(times[i]))
      throw Error(ErrorKind::InvalidParameter, "survival times must be positive");
    if (events[i] != 0 && events[i] != 1) throw Error(ErrorKind::InvalidParameter, "events must be 0/1");
    n_events += events[i];
  }
  if (n_events == 0) throw Error(ErrorKind::NoEvents, "no events in survival outcome");
  d.x = standardize ? standardized_predictor(x) : std::vector<double>(x.begin(), x.end());
  d.events.assign(events.begin(), events.end());
  d.times.assign(times.begin(), times.end());
  d.order.resize(x.size());
  std::iota(d.order.begin(), d.order.end(), std::size_t{0});
  std::stable_sort(d.order.begin(), d.order.end(),
                   [&](std::size_t a, std::size_t b) { return d.times[a] > d.times[b]; });
  return d;
}

}  // namespace

double cox_partial_loglik(std::span<const double> x, std::span<const double> times, std::span<const int> events,
                          double beta) {
  return cox_evaluate(make_cox_data(x, times, events, false), beta).loglik;
}

PseudoR2 fit_cox(std::span<const double> x, std::span<const double> times, std::span<const int> events) {
  std::vector<double> raw(x.begin(), x.end());
  // a constant predictor carries no information: beta-hat = 0 by convention
  bool constant = true;
  for (double v : raw) constant = constant && v == raw.front();
  const auto data = make_cox_data(x, times, events, !constant);

  PseudoR2 fit;
  CoxEval cur = cox_evaluate(data, 0.0);
  fit.loglik_null = cur.loglik;
  if (constant) {
    fit.loglik_model = fit.loglik_null;
    fit.value = 0.0;
    return fit;
  }

  double beta = 0.0;
  bool converged = false;
  for (int it = 1; it <= kCoxMaxIterations; ++it) {
    fit.iterations = it;
    if (std::abs(cur.gradient) < kCoxGradientTol) {
      converged = true;
      break;
    }
    if (!(cur.hessian < 0.0)) break;
    double step = -cur.gradient / cur.hessian;
    CoxEval next = cox_evaluate(data, beta + step);
    for (int h = 0; h < kMaxHalvings && !(next.loglik >= cur.loglik); ++h) {
      step *= 0.5;
      next = cox_evaluate(data, beta + step);
    }
    if (!(next.loglik >= cur.loglik)) {
      // no ascent possible at machine precision: accept if gradient is already small
      converged = std::abs(cur.gradient) < 1e-6;
      break;
    }
    beta += step;
    cur = next;
  }
  if (!converged && std::abs(cur.gradient) < kCoxGradientTol) converged = true;
  if (!converged) throw Error(ErrorKind::NonConvergence, "Cox fit did not converge in 50 iterations");

  fit.coefficient = beta;
  fit.loglik_model = std::max(cur.loglik, fit.loglik_null);
  fit.value = cox_snell_r2(fit.loglik_null, fit.loglik_model, x.size());
  return fit;
}

PseudoR2 guidance_glm(std::span<const double> x, const ClinicalOutcome& outcome) {
  switch (outcome.kind) {
    case OutcomeKind::Binary:
      return fit_logistic(x, outcome.y);
    case OutcomeKind::Ordinal:
      return fit_proportional_odds(x, outcome.y);
    default:
      throw Error(ErrorKind::InvalidParameter, "guidance_glm handles binary and ordinal outcomes only");
  }
}

PseudoR2 guidance_survival(std::span<const double> x, std::span<const double> times, std::span<const int> events) {
  return fit_cox(x, times, events);
}

Vector adjust_pseudo_r2(const Vector& raw) {
  if (raw.size() < 1) throw Error(ErrorKind::InvalidParameter, "empty guidance vector");
  if (!raw.allFinite()) throw Error(ErrorKind::NonFiniteInput, "guidance values must be finite");
  const double lo = raw.minCoeff();
  const double hi = raw.maxCoeff();
  if (!(hi - lo >= 1e-12)) throw Error(ErrorKind::DegenerateRange, "pseudo R^2 values have no spread");
  Vector out = (raw.array() - lo) / (hi - lo);
  return out.cwiseMax(0.0).cwiseMin(1.0);
}

GuidanceVector compute_guidance(const ExpressionMatrix& expr, const ClinicalOutcome& outcome,
                                const GuidanceOptions& options) {
  expr.validate();
  outcome.validate(static_cast<std::size_t>(expr.samples()));
  const Eigen::Index G = expr.genes();

  GuidanceVector result;
  result.outcome_kind = outcome.kind;
  result.raw_r2 = Vector::Zero(G);
  std::vector<std::optional<std::string>> notes(static_cast<std::size_t>(G));

  parallel_for(0, G, options.threads, [&](std::ptrdiff_t g) {
    const auto row = expr.values.row(g);
    const std::span<const double> x(row.data(), static_cast<std::size_t>(row.size()));
    const auto& id = expr.gene_ids[static_cast<std::size_t>(g)];
    try {
      switch (outcome.kind) {
        case OutcomeKind::Continuous:
          result.raw_r2[g] = options.continuous == ContinuousMeasure::RSquared ? guidance_continuous(x, outcome.y)
                                                                               : abs_correlation(x, outcome.y);
          break;
        case OutcomeKind::Binary:
        case OutcomeKind::Ordinal: {
          const auto fit = guidance_glm(x, outcome);
          result.raw_r2[g] = fit.value;
          if (fit.status == FitStatus::Separation)
            notes[static_cast<std::size_t>(g)] = id + ": SeparationDetected, value taken at last stable iterate";
          break;
        }
        case OutcomeKind::Survival:
          result.raw_r2[g] = guidance_survival(x, outcome.y, outcome.events).value;
          break;
      }
    } catch (const Error& e) {
      result.raw_r2[g] = 0.0;
      notes[static_cast<std::size_t>(g)] = id + ": " + e.what();
    }
  });

  for (auto& note : notes)
    if (note) result.warnings.push_back(std::move(*note));
  result.u = adjust_pseudo_r2(result.raw_r2);
  return result;
}

}  // namespace gbc
