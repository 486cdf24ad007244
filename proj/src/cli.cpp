#include "gbc/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"

#include "gbc/error.hpp"
#include "gbc/io.hpp"
#include "gbc/parallel.hpp"
#include "gbc/pipeline.hpp"

namespace gbc::cli {

namespace fs = std::filesystem;
using io::json;

std::vector<Field> fields(RunConfig& c) {
  auto& s = c.sim;
  auto& h = c.hyper;
  return {
      {"seed", &c.seed, "master seed"},
      {"replicates", &c.replicates, "replicate count; replicate r uses seed + r and directory rep_<r>"},
      {"threads", &c.threads, "worker threads"},
      {"verbose", &c.verbose, "print chain progress"},
      // simulation
      {"k", &h.K, "number of clusters (also the simulated subtype count)"},
      {"subjects-mean", &s.subjects_per_cluster_mean, "Poisson mean of subjects per subtype"},
      {"modules", &s.modules, "intrinsic modules"},
      {"module-size-mean", &s.module_size_mean, "Poisson mean of genes per module"},
      {"confounders", &s.confounders, "confounding variables"},
      {"modules-per-confounder", &s.modules_per_confounder, "modules per confounder"},
      {"noise-genes", &s.noise_genes, "noise genes"},
      {"sigma0", &s.sigma0, "template noise sd"},
      {"sigma1", &s.sigma1, "biological variation sd"},
      {"sigma2", &s.sigma2, "outcome noise sd"},
      {"sigma3", &s.sigma3, "noise gene sd"},
      {"fold-low", &s.fold_change_low, "lower bound of |fold change|"},
      {"fold-high", &s.fold_change_high, "upper bound of |fold change|"},
      {"noise-mean-low", &s.noise_mean_low, "noise gene mean lower bound"},
      {"noise-mean-high", &s.noise_mean_high, "noise gene mean upper bound"},
      {"wishart-nu", &s.wishart_nu, "inverse-Wishart degrees of freedom"},
      {"wishart-phi-mix", &s.wishart_phi_mix, "weight of I in the inverse-Wishart scale"},
      // prior and chain
      {"c", &h.c, "Dirichlet concentration"},
      {"a-p", &h.a_p, "Beta prior of p"},
      {"b-p", &h.b_p, "Beta prior of p"},
      {"a-sigma", &h.a_sigma, "inverse-gamma shape of gene variances"},
      {"b-sigma", &h.b_sigma, "inverse-gamma rate of gene variances"},
      {"a-tau-mu0", &h.a_tau_mu0, "spike variance shape"},
      {"b-tau-mu0", &h.b_tau_mu0, "spike variance rate"},
      {"a-tau-mu1", &h.a_tau_mu1, "slab variance shape"},
      {"b-tau-mu1", &h.b_tau_mu1, "slab variance rate"},
      {"a-tau-u0", &h.a_tau_u0, "guidance variance shape, non-intrinsic"},
      {"b-tau-u0", &h.b_tau_u0, "guidance variance rate, non-intrinsic"},
      {"a-tau-u1", &h.a_tau_u1, "guidance variance shape, intrinsic"},
      {"b-tau-u1", &h.b_tau_u1, "guidance variance rate, intrinsic"},
      {"nt", &h.n_total, "total iterations"},
      {"nb", &h.n_burnin, "burn-in iterations"},
      {"thin", &c.thin, "keep every thin-th retained draw"},
      {"init", &c.init, "chain start: prior-centred or cluster-means"},
      // inputs
      {"data-dir", &c.data_dir, "directory with expression.tsv, outcome.tsv, truth.json"},
      {"expression", &c.expression, "expression table (genes x samples)"},
      {"outcome", &c.outcome, "clinical table"},
      {"outcome-kind", &c.outcome_kind, "continuous, binary, ordinal or survival"},
      {"outcome-column", &c.outcome_column, "outcome column (default: first after the id)"},
      {"time-column", &c.time_column, "survival time column"},
      {"event-column", &c.event_column, "survival event column"},
      {"continuous-measure", &c.continuous_measure, "r2 or abs-corr"},
      {"guidance-file", &c.guidance_file, "precomputed guidance (gene_id, u)"},
      {"no-guidance", &c.no_guidance, "unguided baseline"},
      {"filter-fraction", &c.filter_fraction, "drop this fraction of lowest-mean genes"},
      // decisions
      {"fdr", &c.fdr, "local FDR threshold"},
      {"top-m", &c.top_m, "select exactly m genes (overrides --fdr when > 0)"},
      {"bic-penalty", &c.bic_penalty, "genes (K G log G) or samples (K G log n)"},
      {"save-draws", &c.save_draws, "write full posterior draws"},
      {"k-min", &c.k_min, "smallest K for select-k"},
      {"k-max", &c.k_max, "largest K for select-k"},
      // evaluation
      {"fit-dir", &c.fit_dir, "fit output directory to evaluate"},
      {"truth", &c.truth, "truth JSON"},
      {"reference-labels", &c.reference_labels, "reference labels (sample_id, label)"},
      // sweep
      {"sweep-axis", &c.sweep_axis, "a_tau_mu0, b_tau_mu0, a_tau_mu1 or b_tau_mu1"},
      {"sweep-points", &c.sweep_points, "grid size"},
      {"sweep-min", &c.sweep_min, "grid start (nan: axis default)"},
      {"sweep-max", &c.sweep_max, "grid end (nan: axis default)"},
      {"out", &c.out, "output directory"},
  };
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw Error(ErrorKind::Usage, "expected a boolean, got '" + v + "'");
}

void assign(const FieldRef& ref, const std::string& key, const std::string& value) {
  const std::string ctx = "config key " + key;
  std::visit(
      [&](auto* p) {
        using T = std::remove_pointer_t<decltype(p)>;
        if constexpr (std::is_same_v<T, double>) {
          *p = io::parse_double(value, ctx);
        } else if constexpr (std::is_same_v<T, bool>) {
          *p = parse_bool(value);
        } else if constexpr (std::is_same_v<T, std::string>) {
          *p = value;
        } else if constexpr (std::is_same_v<T, std::uint64_t>) {
          const long long v = io::parse_integer(value, ctx);
          if (v < 0) throw Error(ErrorKind::Usage, key + " must be non-negative");
          *p = static_cast<std::uint64_t>(v);
        } else {
          *p = static_cast<T>(io::parse_integer(value, ctx));
        }
      },
      ref);
}

std::string render(const FieldRef& ref) {
  return std::visit(
      [](auto* p) -> std::string {
        using T = std::remove_pointer_t<decltype(p)>;
        if constexpr (std::is_same_v<T, double>) return io::format_double(*p);
        else if constexpr (std::is_same_v<T, bool>) return *p ? "true" : "false";
        else if constexpr (std::is_same_v<T, std::string>) return *p;
        else return std::to_string(*p);
      },
      ref);
}

std::string replicate_name(int r) {
  std::ostringstream s;
  s << "rep_" << std::setw(3) << std::setfill('0') << r;
  return s.str();
}

fs::path replicate_dir(const std::string& base, int r, int replicates) {
  return replicates > 1 ? fs::path(base) / replicate_name(r) : fs::path(base);
}

/// Config of replicate r: derived seed, per-replicate directories.
RunConfig replicate_config(const RunConfig& c, int r) {
  RunConfig rc = c;
  if (c.replicates > 1) {
    rc.seed = c.seed + static_cast<std::uint64_t>(r);
    rc.replicates = 1;
    if (!c.data_dir.empty()) rc.data_dir = replicate_dir(c.data_dir, r, c.replicates).string();
    if (!c.out.empty()) rc.out = replicate_dir(c.out, r, c.replicates).string();
    if (!c.fit_dir.empty()) rc.fit_dir = replicate_dir(c.fit_dir, r, c.replicates).string();
  }
  return rc;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw Error(ErrorKind::Usage, message);
}

void write_resolved(const fs::path& dir, const RunConfig& c, const std::string& command,
                    const std::string& name = "config.resolved") {
  io::write_text(dir / name, to_config_text(c, command));
}

fs::path expression_path(const RunConfig& c) {
  if (!c.expression.empty()) return c.expression;
  require(!c.data_dir.empty(), "need --expression or --data-dir");
  return fs::path(c.data_dir) / "expression.tsv";
}

std::optional<fs::path> outcome_path(const RunConfig& c) {
  if (!c.outcome.empty()) return fs::path(c.outcome);
  if (!c.data_dir.empty() && fs::exists(fs::path(c.data_dir) / "outcome.tsv")) return fs::path(c.data_dir) / "outcome.tsv";
  return std::nullopt;
}

std::optional<fs::path> truth_path(const RunConfig& c) {
  if (!c.truth.empty()) return fs::path(c.truth);
  if (!c.data_dir.empty() && fs::exists(fs::path(c.data_dir) / "truth.json")) return fs::path(c.data_dir) / "truth.json";
  return std::nullopt;
}

ExpressionMatrix load_standardized(const RunConfig& c) {
  ExpressionMatrix raw = io::read_expression(expression_path(c));
  if (c.filter_fraction > 0.0) raw = filter_low_expression(raw, c.filter_fraction);
  return standardize_genes(raw);
}

std::optional<ClinicalOutcome> load_outcome(const RunConfig& c, const ExpressionMatrix& expr) {
  const auto path = outcome_path(c);
  if (!path) return std::nullopt;
  io::OutcomeColumns cols{c.outcome_column, c.time_column, c.event_column};
  return io::read_outcome(*path, outcome_kind_from_string(c.outcome_kind), expr.sample_ids, cols);
}

FitOptions fit_options(const RunConfig& c) {
  FitOptions o;
  o.gibbs.hyper = c.hyper;
  o.gibbs.seed = c.seed;
  o.gibbs.guided = !c.no_guidance;
  o.gibbs.thin = c.thin;
  o.gibbs.threads = c.threads;
  o.gibbs.keep_full_draws = c.save_draws;
  if (c.init == "prior-centred") o.gibbs.init = InitScheme::PriorCentred;
  else if (c.init == "cluster-means") o.gibbs.init = InitScheme::ClusterMeans;
  else throw Error(ErrorKind::Usage, "--init must be prior-centred or cluster-means");
  if (c.continuous_measure == "r2") o.guidance.continuous = ContinuousMeasure::RSquared;
  else if (c.continuous_measure == "abs-corr") o.guidance.continuous = ContinuousMeasure::AbsCorrelation;
  else throw Error(ErrorKind::Usage, "--continuous-measure must be r2 or abs-corr");
  o.guidance.threads = c.threads;
  if (c.top_m < 0) throw Error(ErrorKind::Usage, "--top-m must be >= 0");
  if (c.top_m > 0) o.selection = TopM{static_cast<Eigen::Index>(c.top_m)};
  else o.selection = ByFdr{c.fdr};
  if (c.bic_penalty == "genes") o.penalty = BicPenalty::GeneCount;
  else if (c.bic_penalty == "samples") o.penalty = BicPenalty::SampleCount;
  else throw Error(ErrorKind::Usage, "--bic-penalty must be genes or samples");
  o.gibbs.validate();
  return o;
}

/// Guidance for a fit: none, from file, or computed from the outcome.
std::optional<Vector> resolve_guidance(const RunConfig& c, const ExpressionMatrix& expr,
                                       const std::optional<ClinicalOutcome>& outcome, const FitOptions& options,
                                       const fs::path& out_dir, std::ostream& err) {
  if (c.no_guidance) return std::nullopt;
  if (!c.guidance_file.empty()) return io::read_guidance(c.guidance_file, expr.gene_ids);
  if (!outcome) throw Error(ErrorKind::Usage, "guided fit needs --outcome, outcome.tsv in --data-dir or --guidance-file");
  const GuidanceVector gv = compute_guidance(expr, *outcome, options.guidance);
  io::write_guidance(out_dir / "guidance.tsv", expr.gene_ids, gv.u);
  if (!gv.warnings.empty()) {
    std::string text;
    for (const auto& w : gv.warnings) text += w + "\n";
    io::write_text(out_dir / "guidance_warnings.txt", text);
    err << "warning: " << gv.warnings.size() << " genes had guidance fit problems (see guidance_warnings.txt)\n";
  }
  return gv.u;
}

void progress_hook(FitOptions& o, const RunConfig& c, std::ostream& err) {
  if (!c.verbose) return;
  const int every = std::max(1, c.hyper.n_total / 20);
  o.gibbs.progress = [&err, every](const IterationDiagnostics& d) {
    if (d.iteration % every == 0)
      err << "iteration " << d.iteration << " log_posterior " << d.log_posterior << " selected " << d.n_selected
          << "\n";
  };
}

// ---------------------------------------------------------------- simulate

int cmd_simulate(const RunConfig& c, std::ostream& out) {
  require(!c.out.empty(), "simulate needs --out");
  write_resolved(c.out, c, "simulate");
  for (int r = 0; r < c.replicates; ++r) {
    const RunConfig rc = replicate_config(c, r);
    const fs::path dir = rc.out;
    if (c.replicates > 1) write_resolved(dir, rc, "simulate");
    SimulationConfig sim = rc.sim;
    sim.K = rc.hyper.K;
    sim.seed = rc.seed;
    const SimulatedDataset ds = simulate_dataset(sim, rc.threads);
    io::write_expression(dir / "expression.tsv", ds.expr);
    ClinicalOutcome outcome;
    outcome.y = ds.outcome;
    io::write_outcome(dir / "outcome.tsv", ds.expr.sample_ids, outcome);
    io::write_json(dir / "truth.json", io::truth_to_json(ds));
    out << dir.string() << ": " << ds.expr.genes() << " genes, " << ds.expr.samples() << " samples, "
        << ds.intrinsic_genes().size() << " intrinsic\n";
  }
  return 0;
}

// ---------------------------------------------------------------- guidance

int cmd_guidance(const RunConfig& c, std::ostream& out, std::ostream& err) {
  require(!c.out.empty(), "guidance needs --out");
  write_resolved(c.out, c, "guidance");
  const ExpressionMatrix expr = load_standardized(c);
  const auto outcome = load_outcome(c, expr);
  if (!outcome) throw Error(ErrorKind::Usage, "guidance needs --outcome or outcome.tsv in --data-dir");
  RunConfig guided = c;
  guided.no_guidance = false;
  guided.guidance_file.clear();
  const FitOptions o = fit_options(guided);
  resolve_guidance(guided, expr, outcome, o, c.out, err);
  out << "wrote " << (fs::path(c.out) / "guidance.tsv").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------- fit

void write_fit(const fs::path& dir, const ExpressionMatrix& expr, const FitResult& fit, bool save_draws) {
  io::write_json(dir / "summaries.json", io::summaries_to_json(expr, fit.trace));
  io::write_json(dir / "decisions.json", io::decisions_to_json(expr, fit.decision));
  io::write_diagnostics(dir / "diagnostics.tsv", fit.trace);
  std::string genes;
  for (auto g : fit.decision.genes.selected) genes += expr.gene_ids[static_cast<std::size_t>(g)] + "\n";
  io::write_text(dir / "selected_genes.txt", genes);
  io::write_labels(dir / "labels.tsv", expr.sample_ids, fit.decision.clusters.labels);
  if (save_draws) io::write_draws(dir / "draws", fit.trace);
}

int cmd_fit(const RunConfig& c, std::ostream& out, std::ostream& err) {
  require(!c.out.empty(), "fit needs --out");
  write_resolved(c.out, c, "fit");
  for (int r = 0; r < c.replicates; ++r) {
    const RunConfig rc = replicate_config(c, r);
    const fs::path dir = rc.out;
    if (c.replicates > 1) write_resolved(dir, rc, "fit");
    FitOptions o = fit_options(rc);
    progress_hook(o, rc, err);
    const ExpressionMatrix expr = load_standardized(rc);
    const auto outcome = rc.no_guidance ? std::nullopt : load_outcome(rc, expr);
    const auto u = resolve_guidance(rc, expr, outcome, o, dir, err);
    const FitResult fit = fit_standardized(expr, outcome, u, o);
    write_fit(dir, expr, fit, rc.save_draws);
    out << dir.string() << ": " << fit.decision.genes.selected.size() << " genes selected, eta "
        << io::format_double(fit.decision.genes.eta) << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------- select-k

int cmd_select_k(const RunConfig& c, std::ostream& out, std::ostream& err) {
  require(!c.out.empty(), "select-k needs --out");
  require(c.k_min >= 1 && c.k_max >= c.k_min, "need 1 <= --k-min <= --k-max");
  write_resolved(c.out, c, "select-k");
  for (int r = 0; r < c.replicates; ++r) {
    const RunConfig rc = replicate_config(c, r);
    const fs::path dir = rc.out;
    if (c.replicates > 1) write_resolved(dir, rc, "select-k");
    FitOptions o = fit_options(rc);
    const ExpressionMatrix expr = load_standardized(rc);
    const auto outcome = rc.no_guidance ? std::nullopt : load_outcome(rc, expr);
    const auto u = resolve_guidance(rc, expr, outcome, o, dir, err);
    std::vector<int> ks;
    for (int k = rc.k_min; k <= rc.k_max; ++k) ks.push_back(k);
    const int workers = std::min<int>(rc.threads, static_cast<int>(ks.size()));
    o.gibbs.threads = std::max(1, rc.threads / std::max(1, workers));
    const SelectKResult sk = select_k(expr, u, o.gibbs, ks, o.penalty, workers);

    std::string tsv = "K\tbic\tlog_likelihood\tpenalty\n";
    json rows = json::array();
    for (std::size_t j = 0; j < sk.ks.size(); ++j) {
      const double pen = bic_penalty(sk.ks[j], expr.genes(), expr.samples(), o.penalty);
      const double ll = -(sk.bic[j] - pen) / 2.0;
      tsv += std::to_string(sk.ks[j]) + "\t" + io::format_double(sk.bic[j]) + "\t" + io::format_double(ll) + "\t" +
             io::format_double(pen) + "\n";
      rows.push_back({{"K", sk.ks[j]}, {"bic", sk.bic[j]}, {"log_likelihood", ll}, {"penalty", pen}});
    }
    io::write_text(dir / "bic.tsv", tsv);
    io::write_json(dir / "select_k.json", json{{"best_k", sk.best_k}, {"bic", rows}});
    out << dir.string() << ": best K = " << sk.best_k << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------- evaluate

io::DecisionRecord read_decision(const fs::path& path, const ExpressionMatrix& expr) {
  const json j = io::read_json(path);
  io::DecisionRecord d;
  try {
    std::map<std::string, Eigen::Index> gene_index;
    for (Eigen::Index g = 0; g < expr.genes(); ++g) gene_index.emplace(expr.gene_ids[static_cast<std::size_t>(g)], g);
    const auto& genes = j.at("genes");
    if (static_cast<Eigen::Index>(genes.size()) != expr.genes())
      throw Error(ErrorKind::DimensionMismatch, "decisions and expression disagree on the gene count");
    d.genes.local_fdr = Vector::Zero(expr.genes());
    for (const auto& g : genes) {
      const auto it = gene_index.find(g.at("id").get<std::string>());
      if (it == gene_index.end()) throw Error(ErrorKind::DimensionMismatch, "unknown gene in decisions");
      d.genes.local_fdr[it->second] = g.at("local_fdr").get<double>();
      if (g.at("selected").get<bool>()) d.genes.selected.push_back(it->second);
    }
    std::sort(d.genes.selected.begin(), d.genes.selected.end());
    std::map<std::string, int> label_of;
    for (const auto& s : j.at("samples")) label_of[s.at("id").get<std::string>()] = s.at("label").get<int>() - 1;
    for (const auto& id : expr.sample_ids) {
      const auto it = label_of.find(id);
      if (it == label_of.end()) throw Error(ErrorKind::DimensionMismatch, "sample '" + id + "' missing from decisions");
      d.clusters.labels.push_back(it->second);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, path.string() + ": " + e.what());
  }
  return d;
}

json metric_json(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

int cmd_evaluate(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const std::string fit_root = c.fit_dir.empty() ? c.out : c.fit_dir;
  require(!fit_root.empty(), "evaluate needs --fit-dir");
  const fs::path out_root = c.out.empty() ? fs::path(fit_root) : fs::path(c.out);
  // evaluate usually writes into the fit directory, whose config.resolved it reads
  write_resolved(out_root, c, "evaluate", "evaluate.resolved");

  std::vector<EvaluationReport> reports;
  bool any_truth = false;
  json per_rep = json::array();
  for (int r = 0; r < c.replicates; ++r) {
    const fs::path fit_dir = replicate_dir(fit_root, r, c.replicates);
    const fs::path rep_out = replicate_dir(out_root.string(), r, c.replicates);
    // the fit's own resolved config says where its data came from
    RunConfig fc = parse_config_text(io::read_text(fit_dir / "config.resolved"));
    if (!c.expression.empty()) fc.expression = c.expression;
    if (!c.data_dir.empty()) fc.data_dir = replicate_dir(c.data_dir, r, c.replicates).string();
    const ExpressionMatrix expr = load_standardized(fc);
    const io::DecisionRecord decision = read_decision(fit_dir / "decisions.json", expr);

    RunConfig tc = fc;
    if (!c.truth.empty()) tc.truth = c.truth;
    std::optional<TruthView> truth;
    if (const auto tp = truth_path(tc)) truth = align_truth(io::read_truth(*tp), expr);
    std::optional<std::vector<int>> reference;
    if (!c.reference_labels.empty()) reference = io::read_labels(c.reference_labels, expr.sample_ids);
    if (!truth && !reference)
      err << "warning: no truth for " << fit_dir.string() << "; reporting silhouette only\n";

    const EvaluationReport rep = evaluate_decision(expr, decision, truth, reference);
    any_truth = any_truth || truth || reference;
    const bool has_truth = truth.has_value() || reference.has_value();
    io::write_json(rep_out / "report.json", io::report_to_json(rep, has_truth));
    io::write_text(rep_out / "report.tsv", io::report_to_tsv(rep, has_truth));
    reports.push_back(rep);
    per_rep.push_back({{"replicate", r},
                       {"ari", metric_json(rep.ari)},
                       {"jaccard", metric_json(rep.jaccard)},
                       {"auc", metric_json(rep.auc)},
                       {"silhouette_mean", metric_json(rep.silhouette_mean)}});
  }

  std::string tsv = "metric\tmean\tse\tn\n";
  json summary = json::object();
  auto add = [&](const std::string& name, double EvaluationReport::*member) {
    std::vector<double> v;
    for (const auto& rep : reports) v.push_back(rep.*member);
    const MeanSe m = mean_se(v);
    if (m.n == 0) return;
    tsv += name + "\t" + io::format_double(m.mean) + "\t" + io::format_double(m.se) + "\t" + std::to_string(m.n) + "\n";
    summary[name] = {{"mean", m.mean}, {"se", metric_json(m.se)}, {"n", m.n}};
    out << name << " " << io::format_double(m.mean) << " (se " << io::format_double(m.se) << ", n " << m.n << ")\n";
  };
  add("ari", &EvaluationReport::ari);
  add("jaccard", &EvaluationReport::jaccard);
  add("auc", &EvaluationReport::auc);
  add("silhouette_mean", &EvaluationReport::silhouette_mean);
  io::write_text(out_root / "evaluation.tsv", tsv);
  io::write_json(out_root / "evaluation.json", json{{"replicates", per_rep}, {"summary", summary}});
  return 0;
}

// ---------------------------------------------------------------- sweep

int cmd_sweep(const RunConfig& c, std::ostream& out) {
  require(!c.out.empty(), "sweep needs --out");
  const SweepAxis axis = sweep_axis_from_string(c.sweep_axis);
  auto [lo, hi] = default_sweep_range(axis);
  if (!std::isnan(c.sweep_min)) lo = c.sweep_min;
  if (!std::isnan(c.sweep_max)) hi = c.sweep_max;
  const std::vector<double> grid = sweep_grid(lo, hi, c.sweep_points);
  write_resolved(c.out, c, "sweep");

  const ExpressionMatrix expr = load_standardized(c);
  const auto tp = truth_path(c);
  if (!tp) throw Error(ErrorKind::Usage, "sweep needs truth.json in --data-dir or --truth");
  const TruthView truth = align_truth(io::read_truth(*tp), expr);
  FitOptions base = fit_options(c);
  const auto outcome = c.no_guidance ? std::nullopt : load_outcome(c, expr);
  std::ostringstream sink;
  const auto u = resolve_guidance(c, expr, outcome, base, c.out, sink);

  const int workers = std::min<int>(c.threads, static_cast<int>(grid.size()));
  base.gibbs.threads = std::max(1, c.threads / std::max(1, workers));
  std::vector<EvaluationReport> reports(grid.size());
  parallel_for(0, static_cast<std::ptrdiff_t>(grid.size()), workers, [&](std::ptrdiff_t j) {
    FitOptions o = base;
    hyper_field(o.gibbs.hyper, axis) = grid[static_cast<std::size_t>(j)];
    const FitResult fit = fit_standardized(expr, outcome, u, o);
    reports[static_cast<std::size_t>(j)] = evaluate_decision(expr, fit.decision, truth);
  });

  std::string tsv = "axis\tvalue\tari\tjaccard\tauc\n";
  for (std::size_t j = 0; j < grid.size(); ++j)
    tsv += to_string(axis) + "\t" + io::format_double(grid[j]) + "\t" + io::format_double(reports[j].ari) + "\t" +
           io::format_double(reports[j].jaccard) + "\t" + io::format_double(reports[j].auc) + "\n";
  io::write_text(fs::path(c.out) / "sweep.tsv", tsv);
  out << "wrote " << grid.size() << " grid points to " << (fs::path(c.out) / "sweep.tsv").string() << "\n";
  return 0;
}

const std::vector<std::string>& commands() {
  static const std::vector<std::string> names = {"simulate", "guidance", "fit", "select-k", "evaluate", "sweep"};
  return names;
}

std::string usage() {
  std::string s = "usage: gbc <command> [--config FILE] [--key value ...]\ncommands:";
  for (const auto& c : commands()) s += " " + c;
  s += "\nprecedence: built-in defaults < --config file < command-line flags\n";
  return s;
}

}  // namespace

RunConfig parse_config_text(const std::string& text, RunConfig base) {
  auto table = fields(base);
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorKind::Usage, "config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = std::find_if(table.begin(), table.end(), [&](const Field& f) { return f.key == key; });
    if (it == table.end()) throw Error(ErrorKind::Usage, "config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    assign(it->ref, key, value);
  }
  return base;
}

std::string to_config_text(const RunConfig& config, const std::string& command) {
  RunConfig copy = config;
  std::string text = "# gbc " + command + "\n";
  for (const auto& f : fields(copy)) text += f.key + " = " + render(f.ref) + "\n";
  return text;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  if (args.empty() || args[0] == "--help" || args[0] == "-h") {
    (args.empty() ? err : out) << usage();
    return args.empty() ? 1 : 0;
  }
  const std::string command = args[0];
  if (std::find(commands().begin(), commands().end(), command) == commands().end()) {
    err << "unknown command '" << command << "'\n" << usage();
    return 1;
  }
  try {
    RunConfig config;
    // the config file sits below the flags, so load it before parsing them
    for (std::size_t j = 1; j + 1 < args.size(); ++j)
      if (args[j] == "--config") config = parse_config_text(io::read_text(args[j + 1]), config);

    CLI::App app("gbc " + command, "gbc " + command);
    std::string config_path;
    app.add_option("--config", config_path, "key = value file (flags override it)");
    for (auto& f : fields(config)) {
      const std::string flag = "--" + f.key;
      std::visit(
          [&](auto* p) {
            using T = std::remove_pointer_t<decltype(p)>;
            if constexpr (std::is_same_v<T, bool>) app.add_flag(flag, *p, f.help);
            else app.add_option(flag, *p, f.help);
          },
          f.ref);
    }
    std::vector<std::string> rest(args.begin() + 1, args.end());
    std::reverse(rest.begin(), rest.end());
    try {
      app.parse(rest);
    } catch (const CLI::ParseError& e) {
      if (e.get_exit_code() == 0) {
        out << app.help();
        return 0;
      }
      err << "error: " << e.what() << "\n";
      return 1;
    }
    require(config.replicates >= 1, "--replicates must be >= 1");
    require(config.threads >= 1, "--threads must be >= 1");

    if (command == "simulate") return cmd_simulate(config, out);
    if (command == "guidance") return cmd_guidance(config, out, err);
    if (command == "fit") return cmd_fit(config, out, err);
    if (command == "select-k") return cmd_select_k(config, out, err);
    if (command == "evaluate") return cmd_evaluate(config, out, err);
    return cmd_sweep(config, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(e.category());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(ErrorCategory::Data);
  }
}

}  // namespace gbc::cli
