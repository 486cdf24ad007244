#include "gbc/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "gbc/error.hpp"

namespace gbc::io {

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& text, const std::string& context) {
  double v = 0.0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  if (!text.empty() && *begin == '+') ++begin;
  const auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc() || res.ptr != end || text.empty())
    throw Error(ErrorKind::Parse, "cannot parse number '" + text + "' (" + context + ")");
  return v;
}

long long parse_integer(const std::string& text, const std::string& context) {
  long long v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size() || text.empty())
    throw Error(ErrorKind::Parse, "cannot parse integer '" + text + "' (" + context + ")");
  return v;
}

char delimiter_for(const fs::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".csv" ? ',' : '\t';
}

namespace {

std::vector<std::string> split(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, delim)) out.push_back(cell);
  if (!line.empty() && line.back() == delim) out.emplace_back();
  return out;
}

std::string strip(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "' for writing");
  return out;
}

std::size_t column_index(const Table& t, const std::string& name, const fs::path& path) {
  const auto it = std::find(t.header.begin(), t.header.end(), name);
  if (it == t.header.end()) throw Error(ErrorKind::Parse, "column '" + name + "' not found in " + path.string());
  return static_cast<std::size_t>(it - t.header.begin());
}

std::unordered_map<std::string, std::size_t> row_lookup(const Table& t, const fs::path& path) {
  std::unordered_map<std::string, std::size_t> lookup;
  for (std::size_t r = 0; r < t.rows.size(); ++r)
    if (!lookup.emplace(t.rows[r][0], r).second)
      throw Error(ErrorKind::Parse, "duplicate id '" + t.rows[r][0] + "' in " + path.string());
  return lookup;
}

std::size_t find_row(const std::unordered_map<std::string, std::size_t>& lookup, const std::string& id,
                     const fs::path& path) {
  const auto it = lookup.find(id);
  if (it == lookup.end()) throw Error(ErrorKind::DimensionMismatch, "id '" + id + "' missing from " + path.string());
  return it->second;
}

}  // namespace

Table read_table(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "'");
  const char delim = delimiter_for(path);
  Table t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split(line, delim);
    for (auto& c : cells) c = strip(c);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size())
      throw Error(ErrorKind::Parse, path.string() + ":" + std::to_string(line_no) + ": expected " +
                                        std::to_string(t.header.size()) + " fields, found " +
                                        std::to_string(cells.size()));
    for (const auto& c : cells)
      if (c.empty() || c == "NA" || c == "NaN" || c == "nan")
        throw Error(ErrorKind::Parse, path.string() + ":" + std::to_string(line_no) + ": missing value");
    t.rows.push_back(std::move(cells));
  }
  if (t.header.empty()) throw Error(ErrorKind::Parse, path.string() + " is empty");
  return t;
}

ExpressionMatrix read_expression(const fs::path& path) {
  const Table t = read_table(path);
  if (t.header.size() < 3) throw Error(ErrorKind::Parse, "expression table needs an id column and >= 2 samples");
  ExpressionMatrix expr;
  expr.sample_ids.assign(t.header.begin() + 1, t.header.end());
  expr.values.resize(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(expr.sample_ids.size()));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    expr.gene_ids.push_back(t.rows[r][0]);
    for (std::size_t c = 1; c < t.rows[r].size(); ++c)
      expr.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c - 1)) =
          parse_double(t.rows[r][c], path.string() + " gene " + t.rows[r][0]);
  }
  expr.validate();
  return expr;
}

void write_expression(const fs::path& path, const ExpressionMatrix& expr) {
  const char d = delimiter_for(path);
  auto out = open_out(path);
  out << "gene_id";
  for (const auto& s : expr.sample_ids) out << d << s;
  out << '\n';
  std::string line;
  for (Eigen::Index g = 0; g < expr.genes(); ++g) {
    line = expr.gene_ids[static_cast<std::size_t>(g)];
    for (Eigen::Index i = 0; i < expr.samples(); ++i) {
      line += d;
      line += format_double(expr.values(g, i));
    }
    line += '\n';
    out << line;
  }
  if (!out) throw Error(ErrorKind::Io, "write failed for '" + path.string() + "'");
}

ClinicalOutcome read_outcome(const fs::path& path, OutcomeKind kind, const std::vector<std::string>& sample_ids,
                             const OutcomeColumns& columns) {
  const Table t = read_table(path);
  if (t.header.size() < 2) throw Error(ErrorKind::Parse, "clinical table needs a sample id and a value column");
  const auto lookup = row_lookup(t, path);
  ClinicalOutcome outcome;
  outcome.kind = kind;
  if (kind == OutcomeKind::Survival) {
    const auto tc = column_index(t, columns.time, path);
    const auto ec = column_index(t, columns.event, path);
    for (const auto& id : sample_ids) {
      const auto& row = t.rows[find_row(lookup, id, path)];
      outcome.y.push_back(parse_double(row[tc], "survival time of " + id));
      outcome.events.push_back(static_cast<int>(parse_integer(row[ec], "event of " + id)));
    }
  } else {
    const auto vc = columns.value.empty() ? std::size_t{1} : column_index(t, columns.value, path);
    for (const auto& id : sample_ids)
      outcome.y.push_back(parse_double(t.rows[find_row(lookup, id, path)][vc], "outcome of " + id));
  }
  outcome.validate(sample_ids.size());
  return outcome;
}

void write_outcome(const fs::path& path, const std::vector<std::string>& sample_ids, const ClinicalOutcome& outcome) {
  const char d = delimiter_for(path);
  auto out = open_out(path);
  if (outcome.kind == OutcomeKind::Survival) {
    out << "sample_id" << d << "time" << d << "event\n";
    for (std::size_t i = 0; i < sample_ids.size(); ++i)
      out << sample_ids[i] << d << format_double(outcome.y[i]) << d << outcome.events[i] << '\n';
  } else {
    out << "sample_id" << d << "outcome\n";
    for (std::size_t i = 0; i < sample_ids.size(); ++i) out << sample_ids[i] << d << format_double(outcome.y[i]) << '\n';
  }
}

void write_guidance(const fs::path& path, const std::vector<std::string>& gene_ids, const Vector& u) {
  const char d = delimiter_for(path);
  auto out = open_out(path);
  out << "gene_id" << d << "u\n";
  for (std::size_t g = 0; g < gene_ids.size(); ++g)
    out << gene_ids[g] << d << format_double(u[static_cast<Eigen::Index>(g)]) << '\n';
}

Vector read_guidance(const fs::path& path, const std::vector<std::string>& gene_ids) {
  const Table t = read_table(path);
  if (t.header.size() != 2) throw Error(ErrorKind::Parse, "guidance file must have two columns (gene_id, u)");
  const auto lookup = row_lookup(t, path);
  Vector u(static_cast<Eigen::Index>(gene_ids.size()));
  for (std::size_t g = 0; g < gene_ids.size(); ++g) {
    const double v = parse_double(t.rows[find_row(lookup, gene_ids[g], path)][1], "guidance of " + gene_ids[g]);
    if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorKind::InvalidParameter, "guidance values must lie in [0,1]");
    u[static_cast<Eigen::Index>(g)] = v;
  }
  return u;
}

void write_labels(const fs::path& path, const std::vector<std::string>& sample_ids, const std::vector<int>& labels) {
  const char d = delimiter_for(path);
  auto out = open_out(path);
  out << "sample_id" << d << "label\n";
  for (std::size_t i = 0; i < sample_ids.size(); ++i) out << sample_ids[i] << d << labels[i] + 1 << '\n';
}

std::vector<int> read_labels(const fs::path& path, const std::vector<std::string>& sample_ids) {
  const Table t = read_table(path);
  if (t.header.size() < 2) throw Error(ErrorKind::Parse, "labels file needs sample_id and label columns");
  const auto lookup = row_lookup(t, path);
  std::vector<int> labels;
  for (const auto& id : sample_ids)
    labels.push_back(static_cast<int>(parse_integer(t.rows[find_row(lookup, id, path)][1], "label of " + id)) - 1);
  return labels;
}

namespace {

std::vector<int> one_based(const std::vector<int>& v) {
  std::vector<int> out(v);
  for (auto& x : out) ++x;
  return out;
}

std::string category_name(GeneCategory c) {
  switch (c) {
    case GeneCategory::Intrinsic: return "intrinsic";
    case GeneCategory::Confounder: return "confounder";
    case GeneCategory::Noise: return "noise";
  }
  return "noise";
}

}  // namespace

json truth_to_json(const SimulatedDataset& ds) {
  json j;
  j["gene_ids"] = ds.expr.gene_ids;
  j["sample_ids"] = ds.expr.sample_ids;
  std::vector<std::string> categories, intrinsic;
  std::vector<Eigen::Index> intrinsic_idx;
  for (std::size_t g = 0; g < ds.category.size(); ++g) {
    categories.push_back(category_name(ds.category[g]));
    if (ds.category[g] == GeneCategory::Intrinsic) {
      intrinsic.push_back(ds.expr.gene_ids[g]);
      intrinsic_idx.push_back(static_cast<Eigen::Index>(g) + 1);
    }
  }
  j["gene_category"] = categories;
  j["gene_module"] = ds.module;
  j["gene_confounder"] = ds.confounder_of_gene;
  j["intrinsic_genes"] = intrinsic;
  j["intrinsic_indices"] = intrinsic_idx;
  j["disease_labels"] = one_based(ds.disease_labels);
  json conf = json::array();
  for (const auto& c : ds.confounder_labels) conf.push_back(one_based(c));
  j["confounder_labels"] = conf;
  return j;
}

Truth read_truth(const fs::path& path) {
  const json j = read_json(path);
  try {
    Truth t;
    t.gene_ids = j.at("gene_ids").get<std::vector<std::string>>();
    t.sample_ids = j.at("sample_ids").get<std::vector<std::string>>();
    t.intrinsic_genes = j.at("intrinsic_genes").get<std::vector<std::string>>();
    t.disease_labels = j.at("disease_labels").get<std::vector<int>>();
    for (auto& z : t.disease_labels) --z;
    if (j.contains("confounder_labels"))
      for (const auto& c : j.at("confounder_labels")) {
        auto labels = c.get<std::vector<int>>();
        for (auto& z : labels) --z;
        t.confounder_labels.push_back(std::move(labels));
      }
    return t;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, path.string() + ": " + e.what());
  }
}

namespace {

json matrix_rows(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::vector<double> row(m.row(r).data(), m.row(r).data() + m.cols());
    rows.push_back(row);
  }
  return rows;
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

json summaries_to_json(const ExpressionMatrix& expr, const PosteriorTrace& trace) {
  const double N = static_cast<double>(trace.retained());
  json j;
  j["retained_draws"] = trace.retained();
  j["guided"] = trace.guided;
  j["K"] = trace.K;
  j["gene_ids"] = expr.gene_ids;
  j["sample_ids"] = expr.sample_ids;
  j["inclusion_frequency"] = to_std(trace.inclusion_frequency());
  j["soft_assignment"] = matrix_rows(trace.cluster_frequency());
  json pm;
  pm["pi"] = to_std(trace.posterior_mean_pi());
  pm["mu"] = matrix_rows(trace.posterior_mean_mu());
  pm["sigma2"] = to_std(trace.posterior_mean_sigma2());
  pm["p"] = trace.p_sum / N;
  pm["tau2_mu0"] = trace.tau2_sum[0] / N;
  pm["tau2_mu1"] = trace.tau2_sum[1] / N;
  if (trace.guided) {
    pm["tau2_u0"] = trace.tau2_sum[2] / N;
    pm["tau2_u1"] = trace.tau2_sum[3] / N;
  }
  j["posterior_mean"] = pm;
  return j;
}

json decisions_to_json(const ExpressionMatrix& expr, const DecisionRecord& record) {
  json j;
  json genes = json::array();
  std::vector<bool> selected(static_cast<std::size_t>(expr.genes()), false);
  for (auto g : record.genes.selected) selected[static_cast<std::size_t>(g)] = true;
  for (Eigen::Index g = 0; g < expr.genes(); ++g)
    genes.push_back({{"id", expr.gene_ids[static_cast<std::size_t>(g)]},
                     {"local_fdr", record.genes.local_fdr[g]},
                     {"selected", static_cast<bool>(selected[static_cast<std::size_t>(g)])}});
  j["genes"] = genes;
  json samples = json::array();
  for (Eigen::Index i = 0; i < expr.samples(); ++i) {
    std::vector<double> soft(record.clusters.soft.row(i).data(),
                             record.clusters.soft.row(i).data() + record.clusters.soft.cols());
    samples.push_back({{"id", expr.sample_ids[static_cast<std::size_t>(i)]},
                       {"label", record.clusters.labels[static_cast<std::size_t>(i)] + 1},
                       {"soft", soft}});
  }
  j["samples"] = samples;
  j["selection_mode"] = record.selection_mode;
  j["eta"] = record.genes.eta;
  j["n_selected"] = record.genes.selected.size();
  j["achieved_fdr"] = record.genes.achieved_fdr ? json(*record.genes.achieved_fdr) : json(nullptr);
  json bic = json::array();
  for (std::size_t r = 0; r < record.bic_k.size(); ++r)
    bic.push_back({{"K", record.bic_k[r]},
                   {"bic", record.bic_terms[r].value()},
                   {"log_likelihood", record.bic_terms[r].log_likelihood},
                   {"penalty", record.bic_terms[r].penalty}});
  j["bic"] = bic;
  return j;
}

void write_diagnostics(const fs::path& path, const PosteriorTrace& trace) {
  auto out = open_out(path);
  out << "iteration\tlog_posterior\tp\ttau2_mu0\ttau2_mu1";
  if (trace.guided) out << "\ttau2_u0\ttau2_u1";
  out << "\tn_selected\n";
  for (const auto& d : trace.diagnostics) {
    out << d.iteration << '\t' << format_double(d.log_posterior) << '\t' << format_double(d.p) << '\t'
        << format_double(d.tau2_mu0) << '\t' << format_double(d.tau2_mu1);
    if (trace.guided) out << '\t' << format_double(d.tau2_u0) << '\t' << format_double(d.tau2_u1);
    out << '\t' << d.n_selected << '\n';
  }
}

namespace {

void write_f64(const fs::path& path, const std::vector<double>& data) {
  auto out = open_out(path, std::ios::out | std::ios::binary);
  for (double v : data) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    char bytes[8];
    std::memcpy(bytes, &bits, 8);
    out.write(bytes, 8);
  }
  if (!out) throw Error(ErrorKind::Io, "write failed for '" + path.string() + "'");
}

}  // namespace

void write_draws(const fs::path& dir, const PosteriorTrace& trace) {
  fs::create_directories(dir);
  const auto N = trace.retained();
  json arrays = json::array();
  auto add = [&](const std::string& name, const std::vector<double>& data, std::vector<std::size_t> shape) {
    const std::string file = name + ".f64";
    write_f64(dir / file, data);
    arrays.push_back({{"name", name}, {"file", file}, {"shape", shape}});
  };

  std::vector<double> buf;
  for (const auto& d : trace.selection_draws) buf.insert(buf.end(), d.begin(), d.end());
  add("selection", buf, {N, static_cast<std::size_t>(trace.G)});
  buf.clear();
  for (const auto& d : trace.label_draws)
    for (int z : d) buf.push_back(z + 1);
  add("labels", buf, {N, static_cast<std::size_t>(trace.n)});
  if (!trace.mu_draws.empty()) {
    buf.clear();
    for (const auto& d : trace.pi_draws) buf.insert(buf.end(), d.data(), d.data() + d.size());
    add("pi", buf, {N, static_cast<std::size_t>(trace.K)});
    buf.clear();
    for (const auto& d : trace.mu_draws) buf.insert(buf.end(), d.data(), d.data() + d.size());
    add("mu", buf, {N, static_cast<std::size_t>(trace.G), static_cast<std::size_t>(trace.K)});
    buf.clear();
    for (const auto& d : trace.sigma2_draws) buf.insert(buf.end(), d.data(), d.data() + d.size());
    add("sigma2", buf, {N, static_cast<std::size_t>(trace.G)});
  }
  json sidecar;
  sidecar["dtype"] = "float64";
  sidecar["byte_order"] = "little";
  sidecar["layout"] = "row-major";
  sidecar["label_base"] = 1;
  sidecar["arrays"] = arrays;
  write_json(dir / "draws.json", sidecar);
}

json report_to_json(const EvaluationReport& r, bool has_truth) {
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  json j;
  if (has_truth) {
    j["ari"] = num(r.ari);
    j["jaccard"] = num(r.jaccard);
    j["auc"] = num(r.auc);
  }
  j["silhouette_mean"] = num(r.silhouette_mean);
  return j;
}

std::string report_to_tsv(const EvaluationReport& r, bool has_truth) {
  std::string header, row;
  auto add = [&](const char* name, double v) {
    if (!header.empty()) {
      header += '\t';
      row += '\t';
    }
    header += name;
    row += format_double(v);
  };
  if (has_truth) {
    add("ari", r.ari);
    add("jaccard", r.jaccard);
    add("auc", r.auc);
  }
  add("silhouette_mean", r.silhouette_mean);
  return header + "\n" + row + "\n";
}

void write_text(const fs::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
  if (!out) throw Error(ErrorKind::Io, "write failed for '" + path.string() + "'");
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_json(const fs::path& path, const json& value) { write_text(path, value.dump(2) + "\n"); }

json read_json(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Parse, path.string() + ": " + e.what());
  }
}

}  // namespace gbc::io
