#pragma once

#include <filesystem>
#include <vector>

#include "p3ls/errors.hpp"
#include "p3ls/types.hpp"

namespace p3ls::sim {

/// One stage of the multistage process model: responses are a sparse
/// quadratic function of the stage's process variables plus carried
/// responses from the previous stage.
struct StageConfig {
  Index n_vars = 0;        // columns of X_i
  Index n_resp = 0;        // columns of Y_i
  Index n_carry = 0;       // leading columns of Y_{i-1} fed forward
  double lin_low = -1.0;   // uniform range for linear coefficients
  double lin_high = 1.0;
  double quad_low = -0.01;
  double quad_high = 0.01;
  double lin_sparsity = 0.0;    // probability a linear coefficient is zeroed
  double quad_sparsity = 0.999; // probability a quadratic coefficient is zeroed
  double noise_std = 0.001;
};

struct SimulatedDataset {
  std::vector<Matrix> x_blocks;        // per-stage process variables
  std::vector<Matrix> stage_responses; // per-stage Y_i
  Matrix y;                            // final-stage responses, the target
  Seed seed = 0;
  std::vector<StageConfig> config;
};

/// Low-rank process-variable block: bell-shaped singular spectrum calibrated
/// so the top 4 components explain ~90% of the variance, plus small noise.
Matrix generate_low_rank_x(Index m, Index n, Seed seed);

/// Drawn stage model coefficients. The quadratic rows are ordered over
/// column pairs (a, b) with a <= b, matching the squares-plus-pairwise-
/// products expansion of the linear terms.
struct StageCoefficients {
  Matrix linear;     // (n_vars + n_carry) x n_resp
  Matrix quadratic;  // p (p + 1) / 2 x n_resp, sparse by construction
};

StageCoefficients draw_stage_coefficients(const StageConfig& cfg, Seed seed);

/// Y_i = U_lin A + U_qd B + noise, with U_lin = [X_i | carry] and U_qd the
/// squares and pairwise products of the U_lin columns (never materialized;
/// only the non-zero quadratic coefficients contribute).
Matrix simulate_stage(const Matrix& x, const Matrix& carry, const StageConfig& cfg, Seed seed);

/// Chains the configured stages; the last stage's responses become y.
SimulatedDataset generate_dataset(const std::vector<StageConfig>& config, Index m, Seed seed);

/// The five built-in three-stage configurations (ids 1..5).
std::vector<StageConfig> builtin_config(int dataset_id);

/// Writes x1.csv..xg.csv, y.csv (headers v1..vn) and manifest.json.
void export_csv(const SimulatedDataset& dataset, const std::filesystem::path& dir);

/// Loads a dataset previously written by export_csv.
SimulatedDataset load_csv(const std::filesystem::path& dir);

}  // namespace p3ls::sim
