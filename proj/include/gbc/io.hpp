#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "gbc/core.hpp"
#include "gbc/guidance.hpp"
#include "gbc/inference.hpp"
#include "gbc/metrics.hpp"
#include "gbc/simulation.hpp"

namespace gbc::io {

namespace fs = std::filesystem;
using nlohmann::json;

/// Shortest decimal text that parses back to exactly `x`.
std::string format_double(double x);
double parse_double(const std::string& text, const std::string& context);
long long parse_integer(const std::string& text, const std::string& context);

/// Tab for anything but a `.csv` file.
char delimiter_for(const fs::path& path);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// Delimited text with a header row. Empty cells and NA are rejected.
Table read_table(const fs::path& path);

/// Genes in rows, first column gene id, header of sample ids.
ExpressionMatrix read_expression(const fs::path& path);
void write_expression(const fs::path& path, const ExpressionMatrix& expr);

struct OutcomeColumns {
  std::string value;  // empty: first column after the sample id
  std::string time = "time";
  std::string event = "event";
};

/// Reads a clinical table and aligns it to `sample_ids`.
ClinicalOutcome read_outcome(const fs::path& path, OutcomeKind kind, const std::vector<std::string>& sample_ids,
                             const OutcomeColumns& columns = {});
void write_outcome(const fs::path& path, const std::vector<std::string>& sample_ids, const ClinicalOutcome& outcome);

/// Two columns: gene_id, u.
void write_guidance(const fs::path& path, const std::vector<std::string>& gene_ids, const Vector& u);
Vector read_guidance(const fs::path& path, const std::vector<std::string>& gene_ids);

/// Labels file: sample_id, label (1-based in the file, 0-based in memory).
void write_labels(const fs::path& path, const std::vector<std::string>& sample_ids, const std::vector<int>& labels);
std::vector<int> read_labels(const fs::path& path, const std::vector<std::string>& sample_ids);

struct Truth {
  std::vector<std::string> gene_ids;
  std::vector<std::string> sample_ids;
  std::vector<std::string> intrinsic_genes;
  std::vector<int> disease_labels;                  // 0-based
  std::vector<std::vector<int>> confounder_labels;  // 0-based
};

json truth_to_json(const SimulatedDataset& ds);
Truth read_truth(const fs::path& path);

json summaries_to_json(const ExpressionMatrix& expr, const PosteriorTrace& trace);

struct DecisionRecord {
  GeneDecision genes;
  ClusterDecision clusters;
  std::string selection_mode;
  std::vector<int> bic_k;
  std::vector<BicTerms> bic_terms;
};

json decisions_to_json(const ExpressionMatrix& expr, const DecisionRecord& record);

void write_diagnostics(const fs::path& path, const PosteriorTrace& trace);

/// Raw little-endian float64 arrays (row-major) plus a JSON sidecar.
void write_draws(const fs::path& dir, const PosteriorTrace& trace);

json report_to_json(const EvaluationReport& report, bool has_truth);
/// Header plus one row; truth-based columns are omitted without truth.
std::string report_to_tsv(const EvaluationReport& report, bool has_truth);

void write_text(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);
void write_json(const fs::path& path, const json& value);
json read_json(const fs::path& path);

}  // namespace gbc::io
