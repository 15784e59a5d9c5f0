#include "p3ls/federation.hpp"

#include <Eigen/Eigenvalues>
#include <numeric>

#include "p3ls/rng.hpp"

namespace p3ls::fed {

Index FederationConfig::features() const {
  return std::accumulate(block_widths.begin(), block_widths.end(), Index{0});
}

Matrix secure_aggregate(const std::vector<Matrix>& masked_blocks) {
  if (masked_blocks.empty()) throw WrongBlockCount("no masked blocks to aggregate");
  Matrix sum = masked_blocks.front();
  for (std::size_t i = 1; i < masked_blocks.size(); ++i) {
    if (masked_blocks[i].rows() != sum.rows() || masked_blocks[i].cols() != sum.cols())
      throw DimensionMismatch("masked block " + std::to_string(i) + " shape differs");
    sum += masked_blocks[i];
  }
  return sum;
}

struct Federation::TaState {
  masking::MaskKeySet keys;
};

struct Federation::FcState {
  int index = 0;  // 1-based
  Matrix x_raw;
  Standardization x_std;
  Matrix x;           // standardized block, m x n_i
  Matrix key_a;       // m x m
  Matrix h_split_t;   // n x n_i
  masking::InvertibleMask c;  // local recovery mask C_i
  FcModelShare share;
};

struct Federation::LcState {
  Matrix y_raw;
  Standardization y_std;
  Matrix y;  // standardized, m x l
  Matrix key_a;
  Matrix key_g;
  LcModelShare share;
};

struct Federation::CspState {
  Matrix x_masked;
  Matrix y_masked;
  PlsModel masked;  // primed components, masked space only
  std::vector<Matrix> masked_his;  // [H_i]^{C_i}, n_i x n
  Matrix masked_gt;                // [G^T]^N, l x l
  bool trained = false;
};

namespace {

Message matrix_message(Phase phase, PartyId from, PartyId to, Tag tag, Matrix payload,
                       int owner = -1) {
  Message msg;
  msg.meta = {from, to, tag, payload.rows(), payload.cols(), phase, owner};
  msg.payload = std::move(payload);
  return msg;
}

Message scalar_message(Phase phase, PartyId from, PartyId to, Tag tag, double value,
                       int owner = -1) {
  Message msg;
  msg.meta = {from, to, tag, 1, 1, phase, owner};
  msg.scalar = value;
  return msg;
}

}  // namespace

Federation::Federation(FederationConfig config, std::vector<Matrix> x_blocks, Matrix y)
    : config_(std::move(config)) {
  const int g = config_.parties();
  if (g < 1) throw InvalidDim("need at least one feature contributor");
  if (static_cast<int>(x_blocks.size()) != g)
    throw WrongBlockCount("expected " + std::to_string(g) + " X blocks, got " +
                          std::to_string(x_blocks.size()));
  const Index m = y.rows();
  for (int i = 0; i < g; ++i) {
    if (x_blocks[i].rows() != m)
      throw DimensionMismatch("block " + std::to_string(i + 1) + " row count differs from Y");
    if (x_blocks[i].cols() != config_.block_widths[i])
      throw DimensionMismatch("block " + std::to_string(i + 1) + " width " +
                              std::to_string(x_blocks[i].cols()) + " != configured " +
                              std::to_string(config_.block_widths[i]));
  }
  if (y.cols() != config_.targets)
    throw DimensionMismatch("Y has " + std::to_string(y.cols()) + " columns, configured " +
                            std::to_string(config_.targets));
  if (config_.components < 1 || config_.components > std::min(m - 1, config_.features()))
    throw DimensionMismatch("k = " + std::to_string(config_.components) +
                            " outside [1, min(m-1, n)]");

  bus_ = std::make_unique<InProcessBus>(transcript_);
  ta_ = std::make_unique<TaState>();
  csp_ = std::make_unique<CspState>();
  for (int i = 0; i < g; ++i) {
    auto fc = std::make_unique<FcState>();
    fc->index = i + 1;
    fc->x_raw = std::move(x_blocks[i]);
    fcs_.push_back(std::move(fc));
  }
  lc_ = std::make_unique<LcState>();
  lc_->y_raw = std::move(y);
}

Federation::~Federation() = default;

const TrainingResult& Federation::result() const {
  if (!result_) throw NotTrained();
  return *result_;
}

TrainingResult Federation::run_training() {
  training_phase();
  recovery_phase();
  TrainingResult result;
  for (const auto& fc : fcs_) result.fc_shares.push_back(fc->share);
  result.lc_share = lc_->share;
  result_ = result;
  return result;
}

void Federation::training_phase() {
  const Phase phase = Phase::Training;
  const Index m = lc_->y_raw.rows();
  const Index l = config_.targets;

  // TA: key generation and distribution.
  ta_->keys = masking::generate_keys(m, config_.block_widths, l,
                                     rng::derive(config_.master_seed, "training-keys"),
                                     config_.key_method, config_.masking);
  for (const auto& fc : fcs_) {
    bus_->send(matrix_message(phase, PartyId::ta(), PartyId::fc(fc->index), Tag::KeyA,
                              ta_->keys.a.mat));
    bus_->send(matrix_message(phase, PartyId::ta(), PartyId::fc(fc->index), Tag::KeyHi,
                              ta_->keys.h_splits[fc->index - 1], fc->index));
  }
  bus_->send(matrix_message(phase, PartyId::ta(), PartyId::lc(), Tag::KeyA, ta_->keys.a.mat));
  bus_->send(matrix_message(phase, PartyId::ta(), PartyId::lc(), Tag::KeyG, ta_->keys.g.mat));

  // FCs: local standardization and masking.
  for (const auto& fc : fcs_) {
    fc->key_a = bus_->receive(PartyId::fc(fc->index), Tag::KeyA).payload;
    fc->h_split_t = bus_->receive(PartyId::fc(fc->index), Tag::KeyHi).payload;
    std::tie(fc->x, fc->x_std) = standardize(fc->x_raw);
    fc->share.x_std = fc->x_std;
    Matrix masked = masking::mask_features(fc->x, fc->key_a, fc->h_split_t);
    bus_->send(matrix_message(phase, PartyId::fc(fc->index), PartyId::csp(), Tag::MaskedX,
                              std::move(masked), fc->index));
  }

  // LC: standardize Y and mask with A, G.
  lc_->key_a = bus_->receive(PartyId::lc(), Tag::KeyA).payload;
  lc_->key_g = bus_->receive(PartyId::lc(), Tag::KeyG).payload;
  std::tie(lc_->y, lc_->y_std) = standardize(lc_->y_raw);
  lc_->share.y_std = lc_->y_std;
  bus_->send(matrix_message(phase, PartyId::lc(), PartyId::csp(), Tag::MaskedY,
                            masking::mask_targets(lc_->y, lc_->key_a, lc_->key_g)));

  // CSP: aggregation and masked sequential fit.
  std::vector<Matrix> masked_blocks;
  for (const auto& fc : fcs_)
    masked_blocks.push_back(bus_->receive(PartyId::csp(), Tag::MaskedX).payload);
  csp_->x_masked = secure_aggregate(masked_blocks);
  csp_->y_masked = bus_->receive(PartyId::csp(), Tag::MaskedY).payload;
  csp_->masked = fit(csp_->x_masked, csp_->y_masked, config_.components);
  csp_->trained = true;
}

Matrix Federation::csp_release(Tag tag, const PartyId& requester) const {
  if (!csp_->trained) throw NotTrained();
  auto deny = [&](const char* what) {
    throw VisibilityViolation(std::string(what) + " not released to " + to_string(requester));
  };
  switch (tag) {
    case Tag::MaskedT:
      if (requester.role != Role::Fc && requester.role != Role::Lc) deny("T'");
      return csp_->masked.scores;
    case Tag::MaskedQ:
      if (requester.role != Role::Lc) deny("Q'");
      return csp_->masked.y_loadings;
    case Tag::MaskedU:
      if (requester.role != Role::Lc) deny("U'");
      return csp_->masked.y_scores;
    case Tag::MaskedWi:
    case Tag::MaskedPi:
    case Tag::MaskedBi: {
      if (requester.role != Role::Fc) deny("per-FC share");
      const auto& masked_hi = csp_->masked_his.at(requester.index - 1);
      if (tag == Tag::MaskedWi) return masked_hi * csp_->masked.weights;
      if (tag == Tag::MaskedPi) return masked_hi * csp_->masked.x_loadings;
      return masked_hi * csp_->masked.coefficients * csp_->masked_gt;
    }
    default:
      throw VisibilityViolation(std::string(to_string(tag)) + " is not a releasable component");
  }
}

void Federation::recovery_phase() {
  const Phase phase = Phase::Recovery;
  const Index m = lc_->y.rows();
  const Index n = config_.features();
  const Index l = config_.targets;

  // TA: common random key N (invertible, l x l).
  masking::InvertibleMask key_n =
      masking::generate_invertible(l, rng::derive(config_.master_seed, "recovery-N"));
  for (const auto& fc : fcs_)
    bus_->send(matrix_message(phase, PartyId::ta(), PartyId::fc(fc->index), Tag::KeyN, key_n.mat));
  bus_->send(matrix_message(phase, PartyId::ta(), PartyId::lc(), Tag::KeyN, key_n.mat));

  // FCs: locally masked H_i splits.
  for (const auto& fc : fcs_) {
    fc->c = masking::generate_invertible(
        fc->x.cols(), rng::derive(config_.master_seed, "recovery-C-" + std::to_string(fc->index)));
    Matrix masked_hi = fc->c.mat * fc->h_split_t.transpose();  // C_i H_i, n_i x n
    bus_->send(matrix_message(phase, PartyId::fc(fc->index), PartyId::csp(), Tag::MaskedHi,
                              std::move(masked_hi), fc->index));
  }

  // LC: G^T masked with the common key.
  Matrix lc_n = bus_->receive(PartyId::lc(), Tag::KeyN).payload;
  bus_->send(matrix_message(phase, PartyId::lc(), PartyId::csp(), Tag::MaskedGt,
                            lc_->key_g.transpose() * lc_n));

  // CSP: apply received masks to the primed components and distribute.
  csp_->masked_his.clear();
  for (std::size_t i = 0; i < fcs_.size(); ++i)
    csp_->masked_his.push_back(bus_->receive(PartyId::csp(), Tag::MaskedHi).payload);
  csp_->masked_gt = bus_->receive(PartyId::csp(), Tag::MaskedGt).payload;
  for (const auto& fc : fcs_) {
    const PartyId dest = PartyId::fc(fc->index);
    bus_->send(matrix_message(phase, PartyId::csp(), dest, Tag::MaskedWi,
                              csp_release(Tag::MaskedWi, dest), fc->index));
    bus_->send(matrix_message(phase, PartyId::csp(), dest, Tag::MaskedPi,
                              csp_release(Tag::MaskedPi, dest), fc->index));
    bus_->send(matrix_message(phase, PartyId::csp(), dest, Tag::MaskedBi,
                              csp_release(Tag::MaskedBi, dest), fc->index));
    bus_->send(matrix_message(phase, PartyId::csp(), dest, Tag::MaskedT,
                              csp_release(Tag::MaskedT, dest)));
  }
  bus_->send(matrix_message(phase, PartyId::csp(), PartyId::lc(), Tag::MaskedQ,
                            csp_release(Tag::MaskedQ, PartyId::lc())));
  bus_->send(matrix_message(phase, PartyId::csp(), PartyId::lc(), Tag::MaskedU,
                            csp_release(Tag::MaskedU, PartyId::lc())));
  bus_->send(matrix_message(phase, PartyId::csp(), PartyId::lc(), Tag::MaskedT,
                            csp_release(Tag::MaskedT, PartyId::lc())));

  // FCs: unmask their shares and recover the shared scores.
  for (const auto& fc : fcs_) {
    const PartyId self = PartyId::fc(fc->index);
    Matrix fc_n = bus_->receive(self, Tag::KeyN).payload;
    Matrix masked_wi = bus_->receive(self, Tag::MaskedWi).payload;
    Matrix masked_pi = bus_->receive(self, Tag::MaskedPi).payload;
    Matrix masked_bi = bus_->receive(self, Tag::MaskedBi).payload;
    Matrix t_masked = bus_->receive(self, Tag::MaskedT).payload;

    Eigen::PartialPivLU<Matrix> n_lu(fc_n);
    if (n_lu.rcond() < 1e-12) throw SingularLocalMask();
    fc->share.weights = fc->c.inverse * masked_wi;
    fc->share.x_loadings = fc->c.inverse * masked_pi;
    fc->share.coefficients = fc->c.inverse * masked_bi * n_lu.inverse();
    fc->share.scores = fc->key_a.transpose() * t_masked;
    fc->share.x_residuals = fc->x - fc->share.scores * fc->share.x_loadings.transpose();
    fc->share.r2_x = explained_variance_x(fc->share.x_loadings, m, n);
  }

  // LC: recover Q, U, T and the Y residuals.
  lc_->share.y_loadings = lc_->key_g * bus_->receive(PartyId::lc(), Tag::MaskedQ).payload;
  lc_->share.y_scores = lc_->key_a.transpose() * bus_->receive(PartyId::lc(), Tag::MaskedU).payload;
  lc_->share.scores = lc_->key_a.transpose() * bus_->receive(PartyId::lc(), Tag::MaskedT).payload;
  lc_->share.y_residuals = lc_->y - lc_->share.scores * lc_->share.y_loadings.transpose();
  lc_->share.r2_y = explained_variance_y(lc_->share.y_loadings, m, l);
}

std::vector<double> Federation::run_contribution() {
  if (!result_) throw NotTrained();
  const Phase phase = Phase::Contribution;
  const Index m = lc_->y.rows();
  const Index l = config_.targets;
  const std::string round = std::to_string(contribution_round_++);

  // TA: fresh orthogonal masks for this round.
  Matrix key_m = masking::generate_orthogonal(
                     m, rng::derive(config_.master_seed, "contribution-M-" + round),
                     config_.key_method, config_.masking)
                     .mat;
  Matrix key_n = masking::generate_orthogonal(
                     l, rng::derive(config_.master_seed, "contribution-N-" + round),
                     config_.key_method, config_.masking)
                     .mat;
  for (const auto& fc : fcs_) {
    bus_->send(matrix_message(phase, PartyId::ta(), PartyId::fc(fc->index), Tag::KeyM, key_m));
    bus_->send(matrix_message(phase, PartyId::ta(), PartyId::fc(fc->index), Tag::KeyN, key_n));
  }
  bus_->send(matrix_message(phase, PartyId::ta(), PartyId::lc(), Tag::KeyM, key_m));
  bus_->send(matrix_message(phase, PartyId::ta(), PartyId::lc(), Tag::KeyN, key_n));

  // FCs: masked local predictions.
  for (const auto& fc : fcs_) {
    const PartyId self = PartyId::fc(fc->index);
    Matrix fc_m = bus_->receive(self, Tag::KeyM).payload;
    Matrix fc_n = bus_->receive(self, Tag::KeyN).payload;
    Matrix yhat_masked = fc_m * (fc->x * fc->share.coefficients) * fc_n;
    bus_->send(matrix_message(phase, self, PartyId::csp(), Tag::MaskedYhat,
                              std::move(yhat_masked), fc->index));
  }

  // LC: masked targets.
  Matrix lc_m = bus_->receive(PartyId::lc(), Tag::KeyM).payload;
  Matrix lc_n = bus_->receive(PartyId::lc(), Tag::KeyN).payload;
  bus_->send(matrix_message(phase, PartyId::lc(), PartyId::csp(), Tag::MaskedY,
                            lc_m * lc_->y * lc_n));

  // CSP: residual sum of squares via the eigenvalues of E'^T E'.
  std::vector<Matrix> yhats;
  for (std::size_t i = 0; i < fcs_.size(); ++i)
    yhats.push_back(bus_->receive(PartyId::csp(), Tag::MaskedYhat).payload);
  Matrix y_masked = bus_->receive(PartyId::csp(), Tag::MaskedY).payload;
  for (const auto& fc : fcs_) {
    Matrix residual = y_masked - yhats[fc->index - 1];
    Eigen::SelfAdjointEigenSolver<Matrix> eig(residual.transpose() * residual,
                                              Eigen::EigenvaluesOnly);
    const double ss = eig.eigenvalues().sum();
    bus_->send(scalar_message(phase, PartyId::csp(), PartyId::fc(fc->index), Tag::SsResidual, ss,
                              fc->index));
  }

  // FCs: final metric.
  std::vector<double> out;
  for (const auto& fc : fcs_) {
    const double ss = bus_->receive(PartyId::fc(fc->index), Tag::SsResidual).scalar;
    const double r2 = 1.0 - ss / (double(m) * double(l));
    fc->share.r2_xy = r2;
    (*result_).fc_shares[fc->index - 1].r2_xy = r2;
    out.push_back(r2);
  }
  return out;
}

InferenceResult Federation::run_inference(const std::vector<Matrix>& new_blocks) {
  if (!result_) throw NotTrained();
  const Phase phase = Phase::Inference;
  if (new_blocks.size() != fcs_.size())
    throw WrongBlockCount("expected " + std::to_string(fcs_.size()) + " new blocks");
  const Index m_new = new_blocks.front().rows();
  for (const auto& fc : fcs_) {
    const Matrix& block = new_blocks[fc->index - 1];
    if (block.rows() != m_new)
      throw DimensionMismatch("new block " + std::to_string(fc->index) + " row count differs");
    if (block.cols() != fc->x.cols())
      throw DimensionMismatch("new block " + std::to_string(fc->index) + " width " +
                              std::to_string(block.cols()) + " != " +
                              std::to_string(fc->x.cols()));
  }
  const std::string round = std::to_string(inference_round_++);

  // TA: invertible mask for the new sample rows.
  masking::InvertibleMask key_m = masking::generate_invertible(
      m_new, rng::derive(config_.master_seed, "inference-M-" + round));
  for (const auto& fc : fcs_)
    bus_->send(matrix_message(phase, PartyId::ta(), PartyId::fc(fc->index), Tag::KeyM, key_m.mat));
  bus_->send(matrix_message(phase, PartyId::ta(), PartyId::lc(), Tag::KeyM, key_m.mat));

  // FCs: masked local predictions and masked new data.
  for (const auto& fc : fcs_) {
    const PartyId self = PartyId::fc(fc->index);
    Matrix fc_m = bus_->receive(self, Tag::KeyM).payload;
    Matrix x_new = fc->x_std.apply(new_blocks[fc->index - 1]);
    bus_->send(matrix_message(phase, self, PartyId::csp(), Tag::MaskedYhat,
                              fc_m * (x_new * fc->share.coefficients), fc->index));
    bus_->send(matrix_message(phase, self, PartyId::csp(), Tag::MaskedX,
                              fc_m * masking::mask_features(x_new, Matrix::Identity(m_new, m_new),
                                                            fc->h_split_t),
                              fc->index));
  }

  // CSP: aggregate and compute masked global scores.
  std::vector<Matrix> yhat_blocks;
  std::vector<Matrix> x_blocks;
  for (std::size_t i = 0; i < fcs_.size(); ++i) {
    yhat_blocks.push_back(bus_->receive(PartyId::csp(), Tag::MaskedYhat).payload);
    x_blocks.push_back(bus_->receive(PartyId::csp(), Tag::MaskedX).payload);
  }
  Matrix yhat_masked = secure_aggregate(yhat_blocks);
  Matrix t_masked = secure_aggregate(x_blocks) * csp_->masked.rotations;
  for (const auto& fc : fcs_)
    bus_->send(matrix_message(phase, PartyId::csp(), PartyId::fc(fc->index), Tag::MaskedT,
                              t_masked));
  bus_->send(matrix_message(phase, PartyId::csp(), PartyId::lc(), Tag::MaskedYhat,
                            std::move(yhat_masked)));

  // FCs: recover the shared scores (all FCs get identical copies).
  InferenceResult result;
  for (const auto& fc : fcs_) {
    Matrix t_prime = bus_->receive(PartyId::fc(fc->index), Tag::MaskedT).payload;
    result.scores = key_m.inverse * t_prime;
  }

  // LC: recover and de-standardize the predictions.
  Matrix lc_m = bus_->receive(PartyId::lc(), Tag::KeyM).payload;
  Matrix yhat_std = key_m.inverse * bus_->receive(PartyId::lc(), Tag::MaskedYhat).payload;
  result.predictions = lc_->y_std.restore(yhat_std);
  return result;
}

}  // namespace p3ls::fed
