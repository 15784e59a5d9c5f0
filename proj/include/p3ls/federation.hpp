#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "p3ls/masking.hpp"
#include "p3ls/pls.hpp"
#include "p3ls/transcript.hpp"
#include "p3ls/transport.hpp"

namespace p3ls::fed {

struct FederationConfig {
  std::vector<Index> block_widths;  // n_1..n_g
  Index targets = 1;                // l
  Index components = 1;             // k
  Seed master_seed = 0;
  masking::OrthogonalMethod key_method = masking::OrthogonalMethod::DenseQr;
  masking::MaskingConfig masking;
  bool lc_owns_last_block = false;  // FC(g) and the LC are the same company

  int parties() const { return static_cast<int>(block_widths.size()); }
  Index features() const;
};

/// What FC-i holds after recovery (Table-visibility respecting share).
struct FcModelShare {
  Matrix scores;        // T, shared across all parties
  Matrix weights;       // W_i, n_i x k
  Matrix x_loadings;    // P_i, n_i x k
  Matrix coefficients;  // B_i, n_i x l
  Matrix x_residuals;   // Theta_i = X_i,std - T P_i^T, local only
  Standardization x_std;
  double r2_x = 0.0;
  std::optional<double> r2_xy;  // filled by the contribution phase
};

/// What the LC holds after recovery.
struct LcModelShare {
  Matrix scores;       // T
  Matrix y_loadings;   // Q, l x k
  Matrix y_scores;     // U, m x k
  Matrix y_residuals;  // Phi = Y_std - T Q^T
  Standardization y_std;
  double r2_y = 0.0;
};

struct TrainingResult {
  std::vector<FcModelShare> fc_shares;
  LcModelShare lc_share;
};

struct InferenceResult {
  Matrix scores;       // T_new, recovered by the FCs
  Matrix predictions;  // Yhat_new in original Y units, recovered by the LC
};

/// Entrywise sum of identically shaped masked blocks.
Matrix secure_aggregate(const std::vector<Matrix>& masked_blocks);

/// One federation run: a TA, a CSP, g feature contributors holding X blocks,
/// and a label contributor holding Y, wired over an in-process transport.
/// Phases follow the masked-training / recovery / contribution / inference
/// choreography; every message is transcript-logged.
class Federation {
 public:
  Federation(FederationConfig config, std::vector<Matrix> x_blocks, Matrix y);
  ~Federation();
  Federation(const Federation&) = delete;
  Federation& operator=(const Federation&) = delete;

  /// Masked training plus recovery. Shares respect the visibility table.
  TrainingResult run_training();

  /// Per-FC federated R^2 of Y against the block's own predictions.
  std::vector<double> run_contribution();

  /// Masked scoring and prediction for new (raw-unit) blocks.
  InferenceResult run_inference(const std::vector<Matrix>& new_blocks);

  const ProtocolTranscript& transcript() const { return transcript_; }
  ProtocolTranscript& transcript() { return transcript_; }
  const TrainingResult& result() const;

  /// CSP-side release gate: only components the visibility table grants to
  /// `requester` may leave the CSP. Throws VisibilityViolation otherwise.
  Matrix csp_release(Tag tag, const PartyId& requester) const;

 private:
  struct FcState;
  struct LcState;
  struct CspState;
  struct TaState;

  void training_phase();
  void recovery_phase();

  FederationConfig config_;
  ProtocolTranscript transcript_;
  std::unique_ptr<InProcessBus> bus_;
  std::unique_ptr<TaState> ta_;
  std::unique_ptr<CspState> csp_;
  std::vector<std::unique_ptr<FcState>> fcs_;
  std::unique_ptr<LcState> lc_;
  std::optional<TrainingResult> result_;
  int contribution_round_ = 0;
  int inference_round_ = 0;
};

}  // namespace p3ls::fed
