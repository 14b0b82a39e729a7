#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "predsens/diagnostics.hpp"
#include "predsens/regressor.hpp"
#include "predsens/sensitivity.hpp"

namespace predsens {

// Insertion-ordered JSON so emitted reports are byte-stable.
using ojson = nlohmann::ordered_json;

enum class Command { predict, sensitivity, outliers, overlap, cv, crosscv };

std::string command_name(Command c);
Command parse_command(const std::string& name);

// Fully resolved invocation: one instance describes a run completely, and a
// serialized copy is embedded in every report for reproducibility.
struct RunConfig {
  Command command = Command::predict;
  std::string input_path;
  std::string outcome;
  std::string split_column;  // empty: derive split from outcome missingness
  std::string out_dir = ".";
  std::uint64_t seed = 1;

  RegressorConfig regressor;        // model for every command that fits one
  SensitivitySpec sensitivity;      // sensitivity command settings
  int bootstrap_b = 100;            // predictive draws (predict / outliers)
  double interval_level = 0.95;     // predict interval width
  BootstrapMode mode = BootstrapMode::automatic;

  OutlierRule outlier;              // outliers command
  bool pool_by_split = false;       // outlier center/spread per split
  int tree_depth = 3;               // fit-the-fit settings
  int tree_min_leaf = 30;

  double ridge = 1e-6;              // overlap command
  int folds = 10;                   // cv / crosscv
  std::string proxy;                // crosscv proxy outcome column

  double density_baseline = 0.0;    // vertical marker for the density export
  bool has_baseline = false;
  int density_bins = 30;
};

// Self-describing report: everything except `generated_at` is a pure
// function of (input bytes, config, seed).
struct ReportEnvelope {
  std::string schema_version = "1.0.0";
  std::string generated_at;  // ISO 8601 UTC
  ojson input;               // path, digest, shape, imputation counts
  ojson config;              // resolved RunConfig
  ojson payload;             // command-specific result
  std::vector<std::string> warnings;

  ojson to_json() const;
};

// Report plus the side files the command produces; file contents are built
// in memory so tests can check byte-level determinism without touching disk.
struct RunArtifacts {
  ReportEnvelope envelope;
  std::vector<std::pair<std::string, std::string>> files;  // name -> bytes
};

// FNV-1a 64-bit over the raw file bytes, rendered as "fnv1a64:<hex>".
std::string input_digest(const std::string& path);
std::string digest_bytes(const std::string& bytes);

// Loads the input, dispatches to the command pipeline and assembles the
// envelope plus side files. Throws ValidationError on bad configuration or
// data, NumericError when a numerical routine gives up.
RunArtifacts run_command(const RunConfig& config);

// Long-format curve data for a sensitivity report: one CSV row per
// (level, metric, side) with estimate and interval bounds.
std::string metrics_long_csv(const SensitivityReport& report);

// Two-split histogram over per-unit mean predictions with shared bin edges;
// optionally marks the bin containing a baseline threshold.
std::string density_csv(const std::vector<double>& means,
                        const std::vector<SplitLabel>& split, int bins,
                        const double* baseline);

ojson model_payload_json(const FittedModel& model);
ojson cv_payload_json(const CvResult& cv);

}  // namespace predsens
