#include "gbc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "gbc/error.hpp"

namespace gbc {

namespace {

double choose2(double x) { return x * (x - 1.0) / 2.0; }

std::vector<int> dense_codes(std::span<const int> labels, int& count) {
  std::map<int, int> codes;
  for (int v : labels) codes.emplace(v, 0);
  count = 0;
  for (auto& [value, code] : codes) code = count++;
  std::vector<int> out;
  out.reserve(labels.size());
  for (int v : labels) out.push_back(codes.at(v));
  return out;
}

}  // namespace

double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw Error(ErrorKind::LengthMismatch, "label vectors differ in length");
  if (a.size() < 2) throw Error(ErrorKind::InvalidParameter, "ARI needs at least 2 samples");
  int ra = 0, rb = 0;
  const auto ca = dense_codes(a, ra);
  const auto cb = dense_codes(b, rb);
  std::vector<double> table(static_cast<std::size_t>(ra * rb), 0.0), rows(static_cast<std::size_t>(ra), 0.0),
      cols(static_cast<std::size_t>(rb), 0.0);
  for (std::size_t i = 0; i < ca.size(); ++i) {
    table[static_cast<std::size_t>(ca[i] * rb + cb[i])] += 1.0;
    rows[static_cast<std::size_t>(ca[i])] += 1.0;
    cols[static_cast<std::size_t>(cb[i])] += 1.0;
  }
  double index = 0.0, sum_rows = 0.0, sum_cols = 0.0;
  for (double v : table) index += choose2(v);
  for (double v : rows) sum_rows += choose2(v);
  for (double v : cols) sum_cols += choose2(v);
  const double expected = sum_rows * sum_cols / choose2(static_cast<double>(a.size()));
  const double max_index = 0.5 * (sum_rows + sum_cols);
  const double denom = max_index - expected;
  // both partitions trivial (all-one-cluster or all-singletons) and identical
  if (denom == 0.0) return index == max_index ? 1.0 : 0.0;
  return (index - expected) / denom;
}

double jaccard_index(std::span<const Eigen::Index> s1, std::span<const Eigen::Index> s2) {
  const std::set<Eigen::Index> a(s1.begin(), s1.end()), b(s2.begin(), s2.end());
  if (a.empty() && b.empty()) throw Error(ErrorKind::BothEmpty, "both gene sets are empty");
  std::size_t common = 0;
  for (auto g : a) common += b.count(g);
  return static_cast<double>(common) / static_cast<double>(a.size() + b.size() - common);
}

double gene_selection_auc(const Vector& local_fdr, const std::vector<bool>& truth) {
  if (static_cast<std::size_t>(local_fdr.size()) != truth.size())
    throw Error(ErrorKind::LengthMismatch, "scores and truth differ in length");
  const std::size_t n = truth.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  // ascending by score 1 - P, i.e. descending P
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return 1.0 - local_fdr[static_cast<Eigen::Index>(x)] < 1.0 - local_fdr[static_cast<Eigen::Index>(y)];
  });
  // midranks over tied scores
  double positives = 0.0, rank_sum = 0.0;
  std::size_t pos = 0;
  while (pos < n) {
    std::size_t end = pos;
    const double score = 1.0 - local_fdr[static_cast<Eigen::Index>(order[pos])];
    while (end < n && 1.0 - local_fdr[static_cast<Eigen::Index>(order[end])] == score) ++end;
    const double midrank = 0.5 * static_cast<double>(pos + 1 + end);
    for (std::size_t k = pos; k < end; ++k)
      if (truth[order[k]]) {
        positives += 1.0;
        rank_sum += midrank;
      }
    pos = end;
  }
  const double negatives = static_cast<double>(n) - positives;
  if (positives == 0.0 || negatives == 0.0)
    throw Error(ErrorKind::SingleClassTruth, "truth needs both intrinsic and non-intrinsic genes");
  return (rank_sum - positives * (positives + 1.0) / 2.0) / (positives * negatives);
}

double silhouette_mean(const Matrix& values, std::span<const int> labels) {
  const Eigen::Index n = values.cols();
  if (static_cast<std::size_t>(n) != labels.size())
    throw Error(ErrorKind::LengthMismatch, "label count differs from sample count");
  int K = 0;
  const auto codes = dense_codes(labels, K);
  if (K < 2) throw Error(ErrorKind::SingleCluster, "silhouette needs at least two clusters");

  std::vector<double> size(static_cast<std::size_t>(K), 0.0);
  for (int c : codes) size[static_cast<std::size_t>(c)] += 1.0;

  // column-major copy so each sample is contiguous
  const Eigen::MatrixXd cols = values;
  double total = 0.0;
  std::vector<double> dist_sum(static_cast<std::size_t>(K));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto own = static_cast<std::size_t>(codes[static_cast<std::size_t>(i)]);
    if (size[own] <= 1.0) continue;  // singleton: s_i = 0
    std::fill(dist_sum.begin(), dist_sum.end(), 0.0);
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      dist_sum[static_cast<std::size_t>(codes[static_cast<std::size_t>(j)])] += (cols.col(i) - cols.col(j)).norm();
    }
    const double a = dist_sum[own] / (size[own] - 1.0);
    double b = std::numeric_limits<double>::infinity();
    for (int k = 0; k < K; ++k)
      if (static_cast<std::size_t>(k) != own) b = std::min(b, dist_sum[static_cast<std::size_t>(k)] / size[static_cast<std::size_t>(k)]);
    const double denom = std::max(a, b);
    total += denom > 0.0 ? (b - a) / denom : 0.0;
  }
  return total / static_cast<double>(n);
}

}  // namespace gbc
