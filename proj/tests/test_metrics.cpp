#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"

#include "gbc/error.hpp"
#include "gbc/metrics.hpp"

using namespace gbc;

namespace {

/// Pair-counting form of the adjusted Rand index.
double brute_ari(const std::vector<int>& a, const std::vector<int>& b) {
  double n11 = 0, n10 = 0, n01 = 0, n00 = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      const bool sa = a[i] == a[j], sb = b[i] == b[j];
      n11 += sa && sb;
      n10 += sa && !sb;
      n01 += !sa && sb;
      n00 += !sa && !sb;
    }
  const double denom = (n00 + n01) * (n01 + n11) + (n00 + n10) * (n10 + n11);
  if (denom == 0.0) return std::nan("");
  return 2.0 * (n00 * n11 - n01 * n10) / denom;
}

double brute_jaccard(const std::vector<Eigen::Index>& s1, const std::vector<Eigen::Index>& s2, int universe) {
  int both = 0, either = 0;
  for (int g = 0; g < universe; ++g) {
    const bool in1 = std::find(s1.begin(), s1.end(), g) != s1.end();
    const bool in2 = std::find(s2.begin(), s2.end(), g) != s2.end();
    both += in1 && in2;
    either += in1 || in2;
  }
  return static_cast<double>(both) / either;
}

/// ROC curve from every distinct threshold on the score 1 - P, integrated by
/// the trapezoid rule.
double brute_auc(const Vector& P, const std::vector<bool>& truth) {
  std::vector<double> thresholds;
  for (auto p : P) thresholds.push_back(1.0 - p);
  thresholds.push_back(std::numeric_limits<double>::infinity());
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  double pos = 0, neg = 0;
  for (bool t : truth) (t ? pos : neg) += 1;
  double auc = 0.0, prev_tpr = 0.0, prev_fpr = 0.0;
  for (double th : thresholds) {
    double tp = 0, fp = 0;
    for (Eigen::Index g = 0; g < P.size(); ++g)
      if (1.0 - P[g] >= th) (truth[static_cast<std::size_t>(g)] ? tp : fp) += 1;
    const double tpr = tp / pos, fpr = fp / neg;
    auc += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
    prev_tpr = tpr;
    prev_fpr = fpr;
  }
  return auc;
}

double brute_silhouette(const Matrix& x, const std::vector<int>& labels) {
  const auto n = static_cast<std::size_t>(x.cols());
  std::vector<std::vector<double>> d(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double ss = 0.0;
      for (Eigen::Index g = 0; g < x.rows(); ++g) {
        const double diff = x(g, static_cast<Eigen::Index>(i)) - x(g, static_cast<Eigen::Index>(j));
        ss += diff * diff;
      }
      d[i][j] = std::sqrt(ss);
    }
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double own = 0.0;
    int own_count = 0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i && labels[j] == labels[i]) {
        own += d[i][j];
        ++own_count;
      }
    if (own_count == 0) continue;
    const double a = own / own_count;
    double b = INFINITY;
    for (int other : labels) {
      if (other == labels[i]) continue;
      double s = 0.0;
      int c = 0;
      for (std::size_t j = 0; j < n; ++j)
        if (labels[j] == other) {
          s += d[i][j];
          ++c;
        }
      b = std::min(b, s / c);
    }
    total += (b - a) / std::max(a, b);
  }
  return total / static_cast<double>(n);
}

}  // namespace

TEST_CASE("ARI hand examples") {
  const std::vector<int> a = {1, 1, 2, 2}, b = {1, 2, 1, 2};
  CHECK(adjusted_rand_index(a, b) == doctest::Approx(-0.5).epsilon(1e-15));
  CHECK(adjusted_rand_index(a, a) == 1.0);
  const std::vector<int> renamed = {7, 7, -3, -3};
  CHECK(adjusted_rand_index(a, renamed) == 1.0);
  const std::vector<int> x = {0, 0, 1, 1, 2, 2, 0}, y = {1, 1, 1, 0, 0, 2, 2};
  const std::vector<int> xp = {2, 2, 0, 0, 1, 1, 2}, yp = {5, 5, 5, 9, 9, 4, 4};
  const double r = adjusted_rand_index(x, y);
  CHECK(adjusted_rand_index(xp, y) == doctest::Approx(r).epsilon(1e-15));
  CHECK(adjusted_rand_index(x, yp) == doctest::Approx(r).epsilon(1e-15));
  CHECK(adjusted_rand_index(y, x) == doctest::Approx(r).epsilon(1e-15));
  CHECK_THROWS_AS(adjusted_rand_index(a, std::vector<int>{1, 2}), Error);
}

TEST_CASE("ARI matches pair counting on random instances") {
  std::mt19937_64 gen(1);
  int compared = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const int n = 2 + static_cast<int>(gen() % 11);
    const int ka = 1 + static_cast<int>(gen() % 4), kb = 1 + static_cast<int>(gen() % 4);
    std::vector<int> a(static_cast<std::size_t>(n)), b(static_cast<std::size_t>(n));
    for (auto& v : a) v = static_cast<int>(gen() % static_cast<std::uint64_t>(ka));
    for (auto& v : b) v = static_cast<int>(gen() % static_cast<std::uint64_t>(kb));
    const double oracle = brute_ari(a, b);
    if (std::isnan(oracle)) continue;
    CHECK(std::abs(adjusted_rand_index(a, b) - oracle) < 1e-12);
    ++compared;
  }
  CHECK(compared > 80);
}

TEST_CASE("Jaccard hand examples") {
  const std::vector<Eigen::Index> abc = {0, 1, 2}, bcd = {1, 2, 3}, xyz = {7, 8};
  CHECK(jaccard_index(abc, bcd) == 0.5);
  CHECK(jaccard_index(abc, abc) == 1.0);
  CHECK(jaccard_index(abc, xyz) == 0.0);
  const std::vector<Eigen::Index> none;
  CHECK(jaccard_index(abc, none) == 0.0);
  try {
    jaccard_index(none, none);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::BothEmpty);
  }
}

TEST_CASE("Jaccard matches a membership count on random instances") {
  std::mt19937_64 gen(2);
  for (int rep = 0; rep < 100; ++rep) {
    const int G = 1 + static_cast<int>(gen() % 12);
    std::vector<Eigen::Index> s1, s2;
    for (int g = 0; g < G; ++g) {
      if (gen() % 2) s1.push_back(g);
      if (gen() % 2) s2.push_back(g);
    }
    if (s1.empty() && s2.empty()) s1.push_back(0);
    CHECK(std::abs(jaccard_index(s1, s2) - brute_jaccard(s1, s2, G)) < 1e-12);
  }
}

TEST_CASE("AUC hand examples") {
  const std::vector<bool> truth = {true, true, false, false, false};
  CHECK(gene_selection_auc(Vector(Eigen::VectorXd::LinSpaced(5, 0.0, 0.8)), truth) == 1.0);
  CHECK(gene_selection_auc(Vector::Constant(5, 0.3), truth) == 0.5);
  // one inversion among six genes
  const Vector P = (Vector(6) << 0.0, 0.1, 0.2, 0.3, 0.6, 0.9).finished();
  const std::vector<bool> t6 = {true, true, false, true, false, false};
  CHECK(std::abs(gene_selection_auc(P, t6) - brute_auc(P, t6)) < 1e-12);
  CHECK(gene_selection_auc(P, t6) == doctest::Approx(8.0 / 9.0));
  try {
    gene_selection_auc(P, std::vector<bool>(6, true));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::SingleClassTruth);
  }
}

TEST_CASE("AUC matches an exhaustive threshold sweep on random instances") {
  std::mt19937_64 gen(3);
  for (int rep = 0; rep < 100; ++rep) {
    const int G = 2 + static_cast<int>(gen() % 11);
    Vector P(G);
    std::vector<bool> truth(static_cast<std::size_t>(G));
    for (int g = 0; g < G; ++g) {
      P[g] = static_cast<double>(gen() % 5) / 4.0;  // coarse grid forces ties
      truth[static_cast<std::size_t>(g)] = gen() % 2;
    }
    truth[0] = true;
    truth[1] = false;
    CHECK(std::abs(gene_selection_auc(P, truth) - brute_auc(P, truth)) < 1e-12);
  }
}

TEST_CASE("silhouette hand examples") {
  Matrix square(2, 4);
  square << 0, 0, 3, 3, 0, 1, 0, 1;
  const std::vector<int> labels = {0, 0, 1, 1};
  CHECK(std::abs(silhouette_mean(square, labels) - (1.0 - 2.0 / (3.0 + std::sqrt(10.0)))) < 1e-12);

  Matrix line(1, 3);
  line << 0, 2, 4;  // the middle point is as far from its own cluster as from the other
  const std::vector<int> l3 = {0, 0, 1};
  CHECK(std::abs(silhouette_mean(line, l3) - 0.5 / 3.0) < 1e-12);

  double previous = -1.0;
  for (double sep : {1.0, 10.0, 100.0, 1e4}) {
    Matrix x(1, 4);
    x << 0, 0.1, sep, sep + 0.1;
    const double s = silhouette_mean(x, labels);
    CHECK(s > previous);
    previous = s;
  }
  CHECK(previous > 0.9999);
  CHECK_THROWS_AS(silhouette_mean(square, std::vector<int>{1, 1, 1, 1}), Error);
}

TEST_CASE("silhouette matches a distance-matrix oracle on random instances") {
  std::mt19937_64 gen(4);
  std::normal_distribution<double> z;
  for (int rep = 0; rep < 100; ++rep) {
    const int n = 3 + static_cast<int>(gen() % 10), G = 1 + static_cast<int>(gen() % 12);
    Matrix x(G, n);
    for (Eigen::Index g = 0; g < G; ++g)
      for (Eigen::Index i = 0; i < n; ++i) x(g, i) = z(gen);
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (auto& v : labels) v = static_cast<int>(gen() % 3);
    labels[0] = 0;
    labels[1] = 1;
    CHECK(std::abs(silhouette_mean(x, labels) - brute_silhouette(x, labels)) < 1e-12);
  }
}
