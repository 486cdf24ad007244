#include "gbc/simulation.hpp"

#include <cmath>
#include <string>

#include "gbc/error.hpp"
#include "gbc/parallel.hpp"

namespace gbc {

namespace {

constexpr int kCorrelationAttempts = 5;
constexpr int kClusterSizeAttempts = 10;
constexpr int kModuleSizeAttempts = 1000;

struct ModulePlan {
  RngStream rng;
  Eigen::Index size = 0;
  Eigen::Index first_row = 0;
  int confounder = 0;  // 0 for intrinsic modules
  int number = 0;      // 1-based within its group
};

Eigen::Index draw_module_size(RngStream& rng, const SimulationConfig& cfg) {
  for (int attempt = 0; attempt < kModuleSizeAttempts; ++attempt) {
    const long size = sample_poisson(rng, cfg.module_size_mean);
    if (size > 0) return static_cast<Eigen::Index>(size);
  }
  throw Error(ErrorKind::InvalidParameter, "module size keeps drawing zero genes");
}

}  // namespace

void SimulationConfig::validate() const {
  if (K < 1 || modules < 1 || confounders < 0 || modules_per_confounder < 1 || noise_genes < 0)
    throw Error(ErrorKind::InvalidParameter, "simulation counts must be >= 1 (confounders/noise >= 0)");
  if (!(subjects_per_cluster_mean > 0.0) || !(module_size_mean > 0.0))
    throw Error(ErrorKind::InvalidParameter, "Poisson means must be positive");
  for (double s : {sigma0, sigma1, sigma2, sigma3})
    if (!(s > 0.0)) throw Error(ErrorKind::InvalidParameter, "all sigma values must be positive");
  if (!(0.0 < fold_change_low && fold_change_low < fold_change_high))
    throw Error(ErrorKind::InvalidParameter, "need 0 < fold_change_low < fold_change_high");
  if (!(noise_mean_low < noise_mean_high)) throw Error(ErrorKind::InvalidParameter, "noise mean range is empty");
  if (!(wishart_phi_mix > 0.0 && wishart_phi_mix <= 1.0))
    throw Error(ErrorKind::InvalidParameter, "wishart_phi_mix must lie in (0, 1]");
  if (!(wishart_nu > 0.0)) throw Error(ErrorKind::InvalidDof, "wishart_nu must be positive");
}

std::vector<Eigen::Index> SimulatedDataset::intrinsic_genes() const {
  std::vector<Eigen::Index> out;
  for (std::size_t g = 0; g < category.size(); ++g)
    if (category[g] == GeneCategory::Intrinsic) out.push_back(static_cast<Eigen::Index>(g));
  return out;
}

Eigen::MatrixXd wishart_scale(Eigen::Index dim, double mix) {
  return mix * Eigen::MatrixXd::Identity(dim, dim) + (1.0 - mix) * Eigen::MatrixXd::Ones(dim, dim);
}

Eigen::MatrixXd sample_module_correlation(Eigen::Index dim, const SimulationConfig& cfg, RngStream& rng) {
  if (!(cfg.wishart_nu > static_cast<double>(dim) - 1.0))
    throw Error(ErrorKind::InvalidDof, "wishart_nu must exceed module size - 1 (size " + std::to_string(dim) + ")");
  const Eigen::MatrixXd phi = wishart_scale(dim, cfg.wishart_phi_mix);
  for (int attempt = 0; attempt < kCorrelationAttempts; ++attempt) {
    const Eigen::MatrixXd draw = sample_inverse_wishart(phi, cfg.wishart_nu, rng);
    const Eigen::VectorXd inv_sd = draw.diagonal().cwiseSqrt().cwiseInverse();
    Eigen::MatrixXd corr = inv_sd.asDiagonal() * draw * inv_sd.asDiagonal();
    corr = 0.5 * (corr + corr.transpose()).eval();
    corr.diagonal().setOnes();
    Eigen::LLT<Eigen::MatrixXd> llt(corr);
    if (llt.info() == Eigen::Success && corr.allFinite()) return corr;
  }
  throw Error(ErrorKind::NotPositiveDefinite, "module correlation not positive definite after 5 draws");
}

Matrix simulate_correlated_module(const Eigen::VectorXd& template_per_class, Eigen::Index size,
                                  std::span<const int> labels, const SimulationConfig& cfg, RngStream& rng) {
  if (size < 1) throw Error(ErrorKind::InvalidParameter, "module size must be >= 1");
  const auto classes = template_per_class.size();
  std::vector<MvnSampler> samplers;
  samplers.reserve(static_cast<std::size_t>(classes));
  for (Eigen::Index k = 0; k < classes; ++k) samplers.emplace_back(sample_module_correlation(size, cfg, rng));

  Matrix block(size, static_cast<Eigen::Index>(labels.size()));
  const double bio_var = cfg.sigma1 * cfg.sigma1;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int k = labels[i];
    if (k < 0 || k >= classes) throw Error(ErrorKind::InvalidParameter, "class label out of range");
    const double shifted = sample_normal(rng, template_per_class[k], bio_var);
    block.col(static_cast<Eigen::Index>(i)) =
        samplers[static_cast<std::size_t>(k)].draw(Eigen::VectorXd::Constant(size, shifted), rng);
  }
  return block;
}

SimulatedDataset simulate_dataset(const SimulationConfig& cfg, int threads) {
  cfg.validate();
  const RngStream root = RngStream(cfg.seed).child(StreamTag::Simulation, 0);
  SimulatedDataset ds;

  // (a1) subtype sizes
  std::vector<long> sizes;
  {
    RngStream rng = root.child(StreamTag::Simulation, 1);
    bool ok = false;
    for (int attempt = 0; attempt < kClusterSizeAttempts && !ok; ++attempt) {
      sizes.clear();
      ok = true;
      for (int k = 0; k < cfg.K; ++k) {
        sizes.push_back(sample_poisson(rng, cfg.subjects_per_cluster_mean));
        ok = ok && sizes.back() > 0;
      }
    }
    if (!ok) throw Error(ErrorKind::DegenerateClusterSizes, "a subtype drew zero subjects 10 times");
  }
  for (int k = 0; k < cfg.K; ++k)
    for (long i = 0; i < sizes[static_cast<std::size_t>(k)]; ++i) ds.disease_labels.push_back(k);
  const auto N = static_cast<Eigen::Index>(ds.disease_labels.size());

  // (c2) confounder partitions
  for (int v = 0; v < cfg.confounders; ++v) {
    RngStream rng = root.child(StreamTag::Confounder, static_cast<std::uint64_t>(v)).child(StreamTag::Simulation, 0);
    std::vector<int> part(static_cast<std::size_t>(N));
    for (auto& z : part) z = static_cast<int>(rng() % static_cast<std::uint64_t>(cfg.K));
    ds.confounder_labels.push_back(std::move(part));
  }

  // module layout: intrinsic modules, then confounder modules
  std::vector<ModulePlan> plans;
  Eigen::Index rows = 0;
  auto plan_module = [&](RngStream rng, int confounder, int number) {
    ModulePlan p{rng, 0, rows, confounder, number};
    p.size = draw_module_size(p.rng, cfg);
    if (!(cfg.wishart_nu > static_cast<double>(p.size) - 1.0))
      throw Error(ErrorKind::InvalidDof, "module of " + std::to_string(p.size) + " genes needs wishart_nu > " +
                                             std::to_string(p.size - 1));
    rows += p.size;
    plans.push_back(p);
  };
  for (int m = 0; m < cfg.modules; ++m)
    plan_module(root.child(StreamTag::Module, static_cast<std::uint64_t>(m)), 0, m + 1);
  for (int v = 0; v < cfg.confounders; ++v)
    for (int r = 0; r < cfg.modules_per_confounder; ++r)
      plan_module(root.child(StreamTag::Confounder, static_cast<std::uint64_t>(v))
                      .child(StreamTag::Module, static_cast<std::uint64_t>(r)),
                  v + 1, r + 1);
  const Eigen::Index structured_rows = rows;
  const Eigen::Index G = structured_rows + cfg.noise_genes;

  ds.expr.values.resize(G, N);
  ds.expr.gene_ids.resize(static_cast<std::size_t>(G));
  ds.category.resize(static_cast<std::size_t>(G));
  ds.module.assign(static_cast<std::size_t>(G), 0);
  ds.confounder_of_gene.assign(static_cast<std::size_t>(G), 0);

  const std::pair<double, double> fold_intervals[] = {{-cfg.fold_change_high, -cfg.fold_change_low},
                                                      {cfg.fold_change_low, cfg.fold_change_high}};
  parallel_for(0, static_cast<std::ptrdiff_t>(plans.size()), threads, [&](std::ptrdiff_t index) {
    ModulePlan& plan = plans[static_cast<std::size_t>(index)];
    // (a3) fold change and per-class templates, then (a4-a6) the block
    const double alpha = sample_uniform_union(plan.rng, fold_intervals);
    Eigen::VectorXd templates(cfg.K);
    for (int k = 0; k < cfg.K; ++k)
      templates[k] = alpha * SimulationConfig::baseline(k) + sample_normal(plan.rng, 0.0, cfg.sigma0 * cfg.sigma0);
    const auto& labels =
        plan.confounder == 0 ? ds.disease_labels : ds.confounder_labels[static_cast<std::size_t>(plan.confounder - 1)];
    ds.expr.values.middleRows(plan.first_row, plan.size) =
        simulate_correlated_module(templates, plan.size, labels, cfg, plan.rng);
    for (Eigen::Index j = 0; j < plan.size; ++j) {
      const auto g = static_cast<std::size_t>(plan.first_row + j);
      ds.category[g] = plan.confounder == 0 ? GeneCategory::Intrinsic : GeneCategory::Confounder;
      ds.module[g] = plan.number;
      ds.confounder_of_gene[g] = plan.confounder;
      ds.expr.gene_ids[g] =
          plan.confounder == 0
              ? "int_m" + std::to_string(plan.number) + "_" + std::to_string(j + 1)
              : "conf" + std::to_string(plan.confounder) + "_m" + std::to_string(plan.number) + "_" +
                    std::to_string(j + 1);
    }
  });

  // (d) noise genes
  parallel_for(0, cfg.noise_genes, threads, [&](std::ptrdiff_t j) {
    RngStream rng = root.child(StreamTag::Noise, static_cast<std::uint64_t>(j));
    const Eigen::Index g = structured_rows + j;
    const double centre = sample_uniform(rng, cfg.noise_mean_low, cfg.noise_mean_high);
    for (Eigen::Index i = 0; i < N; ++i) ds.expr.values(g, i) = sample_normal(rng, centre, cfg.sigma3 * cfg.sigma3);
    ds.category[static_cast<std::size_t>(g)] = GeneCategory::Noise;
    ds.expr.gene_ids[static_cast<std::size_t>(g)] = "noise_" + std::to_string(j + 1);
  });

  // (b) outcome
  {
    RngStream rng = root.child(StreamTag::Simulation, 2);
    ds.outcome.reserve(static_cast<std::size_t>(N));
    for (int k : ds.disease_labels)
      ds.outcome.push_back(sample_normal(rng, SimulationConfig::baseline(k), cfg.sigma2 * cfg.sigma2));
  }

  ds.expr.sample_ids = numbered_ids("S", static_cast<std::size_t>(N));
  return ds;
}

}  // namespace gbc
