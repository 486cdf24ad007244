#pragma once

#include <span>
#include <vector>

#include "gbc/core.hpp"

namespace gbc {

struct EvaluationReport {
  double ari = 0.0;
  double jaccard = 0.0;
  double auc = 0.0;
  double silhouette_mean = 0.0;
};

/// Hubert-Arabie adjusted Rand index from the contingency table. Labels may
/// be any integers.
double adjusted_rand_index(std::span<const int> a, std::span<const int> b);

/// |s1 ∩ s2| / |s1 ∪ s2|; duplicate entries are ignored.
double jaccard_index(std::span<const Eigen::Index> s1, std::span<const Eigen::Index> s2);

/// ROC AUC of scores 1 - P_g for detecting truth flags (Mann-Whitney, ties
/// count one half).
double gene_selection_auc(const Vector& local_fdr, const std::vector<bool>& truth);

/// Mean silhouette with Euclidean distance between columns (samples) of an
/// m x n matrix. Singleton clusters contribute 0.
double silhouette_mean(const Matrix& selected_values, std::span<const int> labels);

}  // namespace gbc
