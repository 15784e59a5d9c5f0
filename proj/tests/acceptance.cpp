// Acceptance gate: ten end-to-end criteria with pinned tolerances. Each
// prints one PASS/FAIL line; the exit code is non-zero when anything fails.

#include <Eigen/SVD>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "p3ls/federation.hpp"
#include "p3ls/harness.hpp"
#include "p3ls/masking.hpp"
#include "p3ls/pls.hpp"
#include "p3ls/rng.hpp"
#include "p3ls/simulator.hpp"
#include "oracle_nipals.hpp"

using namespace p3ls;
namespace fs = std::filesystem;

namespace {

struct RandomInstance {
  fed::FederationConfig config;
  std::vector<Matrix> blocks;
  Matrix x;
  Matrix y;
};

RandomInstance random_instance(Seed seed, Index m, std::vector<Index> widths, Index l, Index k) {
  RandomInstance inst;
  inst.config.block_widths = widths;
  inst.config.targets = l;
  inst.config.components = k;
  inst.config.master_seed = rng::derive(seed, "protocol");

  Index n = 0;
  for (Index w : widths) n += w;
  Matrix latent = rng::gaussian(m, k, rng::derive(seed, "latent"));
  inst.x = latent * rng::gaussian(n, k, rng::derive(seed, "lx")).transpose() +
           0.05 * rng::gaussian(m, n, rng::derive(seed, "nx"));
  inst.y = latent * rng::gaussian(l, k, rng::derive(seed, "ly")).transpose() +
           0.05 * rng::gaussian(m, l, rng::derive(seed, "ny"));
  Index at = 0;
  for (Index w : widths) {
    inst.blocks.push_back(inst.x.middleCols(at, w));
    at += w;
  }
  return inst;
}

Vector align_signs(const Matrix& reference, const Matrix& candidate) {
  Vector signs(candidate.cols());
  for (Index j = 0; j < candidate.cols(); ++j)
    signs(j) = reference.col(j).dot(candidate.col(j)) < 0 ? -1.0 : 1.0;
  return signs;
}

double max_abs(const Matrix& a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

// ---------------------------------------------------------------------------

bool criterion_losslessness(std::string& detail) {
  sim::SimulatedDataset data = sim::generate_dataset(sim::builtin_config(1), 1000, 20260101);
  harness::ExperimentConfig cfg;
  cfg.dataset_label = "dataset-1";
  cfg.repetitions = 10;
  cfg.master_seed = 1;
  cfg.k_max = 10;
  cfg.models = {"cen", "p3ls"};

  harness::ExperimentReport report = harness::run_experiment(data, cfg);
  double worst_dist = 0.0, worst_r2 = 0.0;
  for (const auto& rep : report.repetitions) {
    for (const auto& [key, value] : rep.component_distances)
      worst_dist = std::max(worst_dist, value);
    worst_r2 = std::max(worst_r2, std::abs(rep.models.at("p3ls").test_r2 -
                                           rep.models.at("cen").test_r2));
  }
  std::ostringstream os;
  os << "max component MSD " << worst_dist << ", max |dR2| " << worst_r2;
  detail = os.str();
  return worst_dist < 1e-12 && worst_r2 < 1e-8;
}

bool criterion_oracle(std::string& detail) {
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    Seed seed = rng::derive(2, "oracle-" + std::to_string(i));
    auto eng = rng::engine(seed);
    std::uniform_int_distribution<Index> md(8, 20), nd(3, 8), ld(1, 3), kd(1, 3);
    Index m = md(eng), n = nd(eng), l = ld(eng), k = std::min(kd(eng), std::min(m - 1, n));
    Matrix x = rng::gaussian(m, n, rng::derive(seed, "x"));
    Matrix y = rng::gaussian(m, l, rng::derive(seed, "y"));
    PlsModel model = fit(x, y, k);
    oracle::NipalsModel ref = oracle::nipals_fit(x, y, k);
    worst = std::max(worst, max_abs(model.coefficients - ref.coefficients));
  }
  std::ostringstream os;
  os << "max |B - B_oracle| " << worst << " over 50 instances";
  detail = os.str();
  return worst < 1e-8;
}

bool criterion_beats_local(std::string& detail) {
  std::ostringstream os;
  bool ok = true;
  for (int dataset = 1; dataset <= 3; ++dataset) {
    double mean_p3ls = 0.0, mean_local = 0.0;
    for (Seed seed = 1; seed <= 5; ++seed) {
      sim::SimulatedDataset data =
          sim::generate_dataset(sim::builtin_config(dataset), 1000, rng::derive(3, "d" + std::to_string(dataset) + "s" + std::to_string(seed)));
      harness::ExperimentConfig cfg;
      cfg.dataset_label = "dataset-" + std::to_string(dataset);
      cfg.repetitions = 1;
      cfg.master_seed = seed;
      cfg.k_max = 6;
      cfg.models = {"local", "p3ls"};
      harness::ExperimentReport report = harness::run_experiment(data, cfg);
      double r2p = report.repetitions[0].models.at("p3ls").test_r2;
      double r2l = report.repetitions[0].models.at("local").test_r2;
      ok = ok && r2p > r2l;
      mean_p3ls += r2p / 5.0;
      mean_local += r2l / 5.0;
    }
    ok = ok && mean_p3ls > mean_local;
    os << "D" << dataset << " " << mean_p3ls << ">" << mean_local << " ";
  }
  detail = os.str();
  return ok;
}

bool criterion_recovery(std::string& detail) {
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    Seed seed = rng::derive(4, "recovery-" + std::to_string(i));
    auto eng = rng::engine(seed);
    std::uniform_int_distribution<Index> gd(1, 3), wd(2, 5), ld(1, 3);
    std::vector<Index> widths;
    Index g = gd(eng);
    Index n = 0;
    for (Index b = 0; b < g; ++b) {
      widths.push_back(wd(eng));
      n += widths.back();
    }
    Index l = ld(eng);
    Index m = 12 + Index(i % 7);
    Index k = std::min<Index>(3, std::min(m - 1, n));
    RandomInstance inst = random_instance(seed, m, widths, l, k);

    // The masked-recovery path (local C_i masks plus the common N) runs
    // inside the federation; the recovered shares must reproduce the
    // centralized fit, which is exactly the stack of Eqs. W_i = H_i W',
    // P_i = H_i P', B_i = H_i B' G^T, Q = G Q', T = A^T T'.
    fed::Federation federation(inst.config, inst.blocks, inst.y);
    fed::TrainingResult res = federation.run_training();
    PlsModel cen = fit_standardizing(inst.x, inst.y, k);
    Vector signs = align_signs(cen.scores, res.fc_shares[0].scores);

    Index at = 0;
    for (const auto& share : res.fc_shares) {
      Index ni = share.weights.rows();
      worst = std::max(worst, max_abs(share.weights * signs.asDiagonal() -
                                      cen.weights.middleRows(at, ni)));
      worst = std::max(worst, max_abs(share.x_loadings * signs.asDiagonal() -
                                      cen.x_loadings.middleRows(at, ni)));
      worst = std::max(worst, max_abs(share.coefficients - cen.coefficients.middleRows(at, ni)));
      at += ni;
    }
    worst = std::max(worst, max_abs(res.fc_shares[0].scores * signs.asDiagonal() - cen.scores));
    worst = std::max(worst,
                     max_abs(res.lc_share.y_loadings * signs.asDiagonal() - cen.y_loadings));
  }
  std::ostringstream os;
  os << "max recovery error " << worst << " over 100 instances";
  detail = os.str();
  return worst < 1e-8;
}

bool criterion_contribution(std::string& detail) {
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    Seed seed = rng::derive(5, "contrib-" + std::to_string(i));
    Index m = 15 + Index(i % 10);
    RandomInstance inst = random_instance(seed, m, {3, 4}, 2, 2);
    fed::Federation federation(inst.config, inst.blocks, inst.y);
    fed::TrainingResult res = federation.run_training();
    std::vector<double> federated = federation.run_contribution();

    Matrix y_std = res.lc_share.y_std.apply(inst.y);
    for (std::size_t b = 0; b < 2; ++b) {
      const auto& share = res.fc_shares[b];
      Matrix yhat = share.x_std.apply(inst.blocks[b]) * share.coefficients;
      double plain = r2_block_y(y_std, yhat, m, 2);
      worst = std::max(worst, std::abs(federated[b] - plain));
    }
  }

  // B_i = 0 baseline: standardized Y against an all-zero prediction.
  const Index m0 = 40, l0 = 3;
  Matrix y0 = standardize(rng::gaussian(m0, l0, 55)).first;
  double baseline = r2_block_y(y0, Matrix::Zero(m0, l0), m0, l0);
  double expected = 1.0 - double(m0 - 1) / double(m0);
  double base_err = std::abs(baseline - expected);

  std::ostringstream os;
  os << "max |federated - plaintext| " << worst << ", zero-B baseline error " << base_err;
  detail = os.str();
  return worst < 1e-8 && base_err < 1e-9;
}

bool criterion_inference(std::string& detail) {
  double worst_y = 0.0, worst_t = 0.0;
  for (int i = 0; i < 50; ++i) {
    Seed seed = rng::derive(6, "infer-" + std::to_string(i));
    Index m = 18 + Index(i % 8);
    RandomInstance inst = random_instance(seed, m, {3, 4}, 2, 3);
    fed::Federation federation(inst.config, inst.blocks, inst.y);
    fed::TrainingResult res = federation.run_training();
    PlsModel cen = fit_standardizing(inst.x, inst.y, 3);

    Index m_new = (i % 5 == 0) ? 1 : 4;
    Matrix x_new = rng::gaussian(m_new, 7, rng::derive(seed, "new"));
    std::vector<Matrix> new_blocks{x_new.leftCols(3), x_new.rightCols(4)};
    fed::InferenceResult inf = federation.run_inference(new_blocks);

    worst_y = std::max(worst_y, max_abs(inf.predictions - predict(cen, x_new)));
    Matrix t_cen = transform(cen, x_new);
    Vector signs = align_signs(cen.scores, res.fc_shares[0].scores);
    worst_t = std::max(worst_t, max_abs(inf.scores * signs.asDiagonal() - t_cen));
  }
  std::ostringstream os;
  os << "max |Yhat| error " << worst_y << ", max |T| error " << worst_t;
  detail = os.str();
  return worst_y < 1e-8 && worst_t < 1e-8;
}

bool criterion_audit(std::string& detail) {
  std::size_t honest_violations = 0;
  for (Seed seed = 1; seed <= 20; ++seed) {
    RandomInstance inst = random_instance(rng::derive(7, "audit-" + std::to_string(seed)),
                                          16, {3, 4}, 2, 2);
    fed::Federation federation(inst.config, inst.blocks, inst.y);
    federation.run_training();
    federation.run_contribution();
    federation.run_inference(inst.blocks);
    honest_violations += fed::audit_views(federation.transcript()).size();
  }

  // Ten seeded fault injections, each a message the visibility table forbids.
  using fed::PartyId;
  using fed::Tag;
  struct Fault {
    PartyId sender, receiver;
    Tag tag;
    int owner;
  };
  const std::vector<Fault> faults = {
      {PartyId::ta(), PartyId::csp(), Tag::KeyA, -1},
      {PartyId::ta(), PartyId::csp(), Tag::KeyG, -1},
      {PartyId::csp(), PartyId::fc(1), Tag::MaskedQ, -1},
      {PartyId::csp(), PartyId::fc(1), Tag::MaskedU, -1},
      {PartyId::csp(), PartyId::fc(2), Tag::MaskedWi, 1},
      {PartyId::csp(), PartyId::fc(2), Tag::MaskedBi, 1},
      {PartyId::ta(), PartyId::fc(2), Tag::KeyHi, 1},
      {PartyId::csp(), PartyId::lc(), Tag::MaskedX, -1},
      {PartyId::csp(), PartyId::lc(), Tag::MaskedWi, 1},
      {PartyId::fc(1), PartyId::ta(), Tag::MaskedX, -1},
  };
  std::size_t flagged = 0;
  for (const Fault& f : faults) {
    fed::ProtocolTranscript t;
    fed::TranscriptRecord r;
    r.sender = f.sender;
    r.receiver = f.receiver;
    r.tag = f.tag;
    r.owner = f.owner;
    r.rows = 4;
    r.cols = 4;
    t.append(r);
    if (!fed::audit_views(t).empty()) ++flagged;
  }
  std::ostringstream os;
  os << honest_violations << " violations over 20 honest runs, " << flagged
     << "/10 injected faults flagged";
  detail = os.str();
  return honest_violations == 0 && flagged == faults.size();
}

bool criterion_masks(std::string& detail) {
  double worst_orth = 0.0, worst_sv = 0.0;
  for (Seed seed = 1; seed <= 10; ++seed) {
    for (Index dim : {1, 2, 17, 64, 130}) {
      for (auto method :
           {masking::OrthogonalMethod::DenseQr, masking::OrthogonalMethod::BlockBased}) {
        Seed qseed = rng::derive(8, "q" + std::to_string(seed) + "-" + std::to_string(dim));
        Matrix q = masking::generate_orthogonal(dim, qseed, method).mat;
        worst_orth = std::max(
            worst_orth,
            max_abs(q.transpose() * q - Matrix::Identity(dim, dim)));
      }
    }
    masking::MaskKeySet keys = masking::generate_keys(25, {6}, 3, rng::derive(8, "k" + std::to_string(seed)));
    worst_orth = std::max(worst_orth, max_abs(keys.a.mat.transpose() * keys.a.mat -
                                              Matrix::Identity(25, 25)));
    worst_orth = std::max(worst_orth, max_abs(keys.g.mat.transpose() * keys.g.mat -
                                              Matrix::Identity(3, 3)));
    Matrix x = rng::gaussian(25, 6, rng::derive(8, "x" + std::to_string(seed)));
    Matrix masked = masking::mask_features(x, keys.a.mat, keys.h_splits[0]);
    Eigen::JacobiSVD<Matrix> plain(x), primed(masked);
    worst_sv = std::max(worst_sv,
                        (plain.singularValues() - primed.singularValues()).cwiseAbs().maxCoeff());
  }
  std::ostringstream os;
  os << "max orthogonality defect " << worst_orth << ", max singular-value shift " << worst_sv;
  detail = os.str();
  return worst_orth < 1e-10 && worst_sv < 1e-8;
}

bool criterion_simulator(std::string& detail) {
  sim::SimulatedDataset data = sim::generate_dataset(sim::builtin_config(1), 1000, 99);
  bool shapes = data.x_blocks.size() == 3 && data.x_blocks[0].rows() == 1000 &&
                data.x_blocks[0].cols() == 10 && data.x_blocks[1].cols() == 20 &&
                data.x_blocks[2].cols() == 20 && data.y.rows() == 1000 && data.y.cols() == 7;

  double lo = 1.0, hi = 0.0;
  for (const Matrix& block : data.x_blocks) {
    Matrix centered = block.rowwise() - block.colwise().mean();
    Eigen::JacobiSVD<Matrix> svd(centered);
    Vector s2 = svd.singularValues().array().square();
    double frac = s2.head(std::min<Index>(4, s2.size())).sum() / s2.sum();
    lo = std::min(lo, frac);
    hi = std::max(hi, frac);
  }
  std::ostringstream os;
  os << "top-4 energy in [" << lo << ", " << hi << "], shapes "
     << (shapes ? "match" : "MISMATCH");
  detail = os.str();
  return shapes && lo > 0.87 && hi < 0.93;
}

bool criterion_determinism(std::string& detail) {
  const std::string cli = P3LS_CLI_PATH;
  fs::path base = fs::temp_directory_path() / "p3ls-acceptance-cli";
  fs::remove_all(base);
  fs::create_directories(base);
  fs::path data = base / "data", out_a = base / "a", out_b = base / "b";

  auto run = [&](const std::string& args) {
    std::string cmd = cli + " " + args + " >/dev/null 2>&1";
    return std::system(cmd.c_str()) == 0;
  };
  bool ok = run("gen --dataset 1 --seed 77 --samples 300 --out " + data.string());
  ok = ok && run("run --data " + data.string() +
                 " --models cen,local,p3ls --reps 3 --kmax 4 --seed 77 --out " + out_a.string());
  ok = ok && run("run --data " + data.string() +
                 " --models cen,local,p3ls --reps 3 --kmax 4 --seed 77 --out " + out_b.string());
  if (!ok) {
    detail = "CLI invocation failed";
    fs::remove_all(base);
    return false;
  }
  std::string a = harness::report_without_timings(out_a / "report.json");
  std::string b = harness::report_without_timings(out_b / "report.json");
  detail = a == b ? "reports byte-identical outside timings" : "reports differ";
  fs::remove_all(base);
  return a == b;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    bool (*check)(std::string&);
  };
  const std::vector<Criterion> criteria = {
      {"1 losslessness vs centralized", criterion_losslessness},
      {"2 oracle equivalence", criterion_oracle},
      {"3 federation beats local", criterion_beats_local},
      {"4 recovery algebra", criterion_recovery},
      {"5 contribution metric", criterion_contribution},
      {"6 inference protocol", criterion_inference},
      {"7 privacy-view audit", criterion_audit},
      {"8 mask quality", criterion_masks},
      {"9 simulator calibration", criterion_simulator},
      {"10 run determinism", criterion_determinism},
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    auto start = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = false;
    try {
      ok = c.check(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << (ok ? "[PASS]" : "[FAIL]") << " criterion " << c.name << " — " << detail
              << " (" << seconds << " s)" << std::endl;
    if (!ok) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
