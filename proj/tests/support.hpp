#pragma once

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

namespace gbc::test {

struct Moments {
  double mean = 0.0;
  double variance = 0.0;
  double se = 0.0;  // standard error of the mean for iid samples
};

inline Moments moments(const std::vector<double>& xs) {
  Moments m;
  const double n = static_cast<double>(xs.size());
  for (double x : xs) m.mean += x;
  m.mean /= n;
  for (double x : xs) m.variance += (x - m.mean) * (x - m.mean);
  m.variance /= n - 1.0;
  m.se = std::sqrt(m.variance / n);
  return m;
}

/// Batch-means standard error for an autocorrelated series.
inline double batch_means_se(const std::vector<double>& xs, std::size_t batches = 50) {
  const std::size_t len = xs.size() / batches;
  std::vector<double> means;
  for (std::size_t b = 0; b < batches; ++b) {
    double s = 0.0;
    for (std::size_t i = b * len; i < (b + 1) * len; ++i) s += xs[i];
    means.push_back(s / static_cast<double>(len));
  }
  return moments(means).se;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("gbc_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace gbc::test
