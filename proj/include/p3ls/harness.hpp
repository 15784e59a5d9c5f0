#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "p3ls/simulator.hpp"
#include "p3ls/transcript.hpp"
#include "p3ls/types.hpp"

namespace p3ls::harness {

/// Disjoint 60/20/20 row partition by seeded shuffle.
struct SplitIndices {
  std::vector<Index> train;
  std::vector<Index> validation;
  std::vector<Index> test;
};

SplitIndices split_dataset(Index samples, Seed seed);

Matrix take_rows(const Matrix& mat, const std::vector<Index>& rows);

struct ExperimentConfig {
  std::string dataset_label;
  int repetitions = 100;
  Seed master_seed = 0;
  Index k_max = 10;
  std::vector<std::string> models{"cen", "local", "p3ls"};  // subset of these
};

struct ModelRecord {
  double test_r2 = 0.0;
  double fit_seconds = 0.0;
  double inference_seconds = 0.0;
  Index chosen_k = 0;
};

struct RepetitionRecord {
  int index = 0;
  std::map<std::string, ModelRecord> models;
  // Mean squared distances between sign-aligned P3LS and CenPLS components:
  // keys "T", "W", "Q", "B", and "P1".."Pg". Present when both models ran.
  std::map<std::string, double> component_distances;
};

/// Per-model count of reads of each X block, for data-assignment audits.
using BlockAccessCounts = std::map<std::string, std::vector<int>>;

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<RepetitionRecord> repetitions;
  BlockAccessCounts block_access;

  double mean_test_r2(const std::string& model) const;
  double std_test_r2(const std::string& model) const;
};

/// Runs the configured repetitions: fresh split and protocol seeds per
/// repetition, per-model k selection on the validation split, test metrics,
/// and P3LS-vs-CenPLS component distances. When `transcript_out` is given it
/// receives the transcript of the last P3LS training run.
ExperimentReport run_experiment(const sim::SimulatedDataset& dataset,
                                const ExperimentConfig& config,
                                fed::ProtocolTranscript* transcript_out = nullptr);

/// Writes report.json and summary.csv into dir.
void emit_report(const ExperimentReport& report, const std::filesystem::path& dir);

ExperimentReport load_report(const std::filesystem::path& json_path);

/// report.json content with all timing fields removed, for determinism
/// comparisons.
std::string report_without_timings(const std::filesystem::path& json_path);

}  // namespace p3ls::harness
