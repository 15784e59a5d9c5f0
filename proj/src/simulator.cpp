#include "p3ls/simulator.hpp"

#include <Eigen/QR>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>

#include "p3ls/rng.hpp"

namespace p3ls::sim {

namespace {

// Fraction of total spectral energy in the top 4 components for sigma_j^2 =
// exp(-(j-1)^2 / tau^2). Monotonically decreasing in tau.
double top4_fraction(double tau, Index rank) {
  double top = 0.0, total = 0.0;
  for (Index j = 0; j < rank; ++j) {
    const double energy = std::exp(-double(j * j) / (tau * tau));
    total += energy;
    if (j < 4) top += energy;
  }
  return top / total;
}

double calibrate_tau(Index rank) {
  if (rank <= 4) return 1.0;  // everything already in the top 4
  double lo = 0.5, hi = 50.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (top4_fraction(mid, rank) > 0.90)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

Matrix orthonormal_columns(Index rows, Index cols, Seed seed) {
  Matrix draw = rng::gaussian(rows, cols, seed);
  Eigen::HouseholderQR<Matrix> qr(draw);
  return Matrix(qr.householderQ()).leftCols(cols);
}

std::string csv_block_name(std::size_t i) { return "x" + std::to_string(i + 1) + ".csv"; }

void write_csv(const std::filesystem::path& path, const Matrix& mat) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out.precision(17);
  for (Index j = 0; j < mat.cols(); ++j) out << (j ? "," : "") << "v" << (j + 1);
  out << '\n';
  for (Index i = 0; i < mat.rows(); ++i) {
    for (Index j = 0; j < mat.cols(); ++j) out << (j ? "," : "") << mat(i, j);
    out << '\n';
  }
}

Matrix read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  std::string line;
  std::getline(in, line);  // header
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      const std::size_t next = line.find(',', pos);
      const std::string cell = line.substr(pos, next == std::string::npos ? next : next - pos);
      row.push_back(std::stod(cell));
      if (next == std::string::npos) break;
      pos = next + 1;
    }
    rows.push_back(std::move(row));
  }
  Matrix mat(static_cast<Index>(rows.size()), rows.empty() ? 0 : static_cast<Index>(rows[0].size()));
  for (Index i = 0; i < mat.rows(); ++i)
    for (Index j = 0; j < mat.cols(); ++j) mat(i, j) = rows[i][j];
  return mat;
}

nlohmann::json stage_to_json(const StageConfig& s) {
  return {{"n_vars", s.n_vars},       {"n_resp", s.n_resp},
          {"n_carry", s.n_carry},     {"lin_low", s.lin_low},
          {"lin_high", s.lin_high},   {"quad_low", s.quad_low},
          {"quad_high", s.quad_high}, {"lin_sparsity", s.lin_sparsity},
          {"quad_sparsity", s.quad_sparsity}, {"noise_std", s.noise_std}};
}

StageConfig stage_from_json(const nlohmann::json& j) {
  StageConfig s;
  s.n_vars = j.at("n_vars").get<Index>();
  s.n_resp = j.at("n_resp").get<Index>();
  s.n_carry = j.at("n_carry").get<Index>();
  s.lin_low = j.at("lin_low").get<double>();
  s.lin_high = j.at("lin_high").get<double>();
  s.quad_low = j.at("quad_low").get<double>();
  s.quad_high = j.at("quad_high").get<double>();
  s.lin_sparsity = j.at("lin_sparsity").get<double>();
  s.quad_sparsity = j.at("quad_sparsity").get<double>();
  s.noise_std = j.at("noise_std").get<double>();
  return s;
}

}  // namespace

Matrix generate_low_rank_x(Index m, Index n, Seed seed) {
  if (m < 2 || n < 1) throw InvalidDim("low-rank block needs m >= 2, n >= 1");
  const Index rank = std::min(m, n);
  const double tau = calibrate_tau(rank);
  Vector sigma(rank);
  for (Index j = 0; j < rank; ++j) sigma(j) = std::exp(-double(j * j) / (2.0 * tau * tau));

  Matrix u = orthonormal_columns(m, rank, rng::derive(seed, "low-rank-U"));
  Matrix v = orthonormal_columns(n, rank, rng::derive(seed, "low-rank-V"));
  Matrix x = std::sqrt(double(m)) * u * sigma.asDiagonal() * v.transpose();
  // Small isotropic noise; kept well below the spectral floor so the top-4
  // energy fraction stays within the calibration band.
  x += 1e-4 * std::sqrt(double(m)) * rng::gaussian(m, n, rng::derive(seed, "low-rank-noise"));
  return x;
}

Matrix simulate_stage(const Matrix& x, const Matrix& carry, const StageConfig& cfg, Seed seed) {
  if (carry.cols() != cfg.n_carry)
    throw DimensionMismatch("carry has " + std::to_string(carry.cols()) +
                            " columns, configured n_carry = " + std::to_string(cfg.n_carry));
  if (x.cols() != cfg.n_vars)
    throw DimensionMismatch("x has " + std::to_string(x.cols()) +
                            " columns, configured n_vars = " + std::to_string(cfg.n_vars));
  if (cfg.n_carry > 0 && carry.rows() != x.rows())
    throw DimensionMismatch("carry row count differs from x");

  const Index m = x.rows();
  const Index p = cfg.n_vars + cfg.n_carry;
  Matrix u_lin(m, p);
  u_lin << x, carry;

  StageCoefficients coef = draw_stage_coefficients(cfg, seed);
  Matrix y = u_lin * coef.linear;
  // Stream the quadratic contributions; the coefficient matrix is sparse so
  // only the surviving (a, b) product columns are ever formed.
  Index row = 0;
  for (Index a = 0; a < p; ++a)
    for (Index b = a; b < p; ++b, ++row) {
      if (coef.quadratic.row(row).isZero()) continue;
      Vector product = u_lin.col(a).cwiseProduct(u_lin.col(b));
      y.noalias() += product * coef.quadratic.row(row);
    }
  y += cfg.noise_std * rng::gaussian(m, cfg.n_resp, rng::derive(seed, "stage-noise"));
  return y;
}

StageCoefficients draw_stage_coefficients(const StageConfig& cfg, Seed seed) {
  const Index p = cfg.n_vars + cfg.n_carry;
  const Index pq = p * (p + 1) / 2;
  auto gen = rng::engine(rng::derive(seed, "stage-coefficients"));
  std::uniform_real_distribution<double> lin_dist(cfg.lin_low, cfg.lin_high);
  std::uniform_real_distribution<double> quad_dist(cfg.quad_low, cfg.quad_high);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  StageCoefficients coef;
  coef.linear.resize(p, cfg.n_resp);
  for (Index i = 0; i < p; ++i)
    for (Index j = 0; j < cfg.n_resp; ++j) {
      const double value = lin_dist(gen);
      coef.linear(i, j) = unit(gen) < cfg.lin_sparsity ? 0.0 : value;
    }
  coef.quadratic.resize(pq, cfg.n_resp);
  for (Index i = 0; i < pq; ++i)
    for (Index j = 0; j < cfg.n_resp; ++j) {
      const double value = quad_dist(gen);
      coef.quadratic(i, j) = unit(gen) < cfg.quad_sparsity ? 0.0 : value;
    }
  return coef;
}

SimulatedDataset generate_dataset(const std::vector<StageConfig>& config, Index m, Seed seed) {
  if (config.empty()) throw InvalidDim("need at least one stage");
  SimulatedDataset ds;
  ds.seed = seed;
  ds.config = config;
  Matrix prev_responses;
  for (std::size_t i = 0; i < config.size(); ++i) {
    const StageConfig& cfg = config[i];
    if (cfg.n_carry > 0 && (i == 0 || prev_responses.cols() < cfg.n_carry))
      throw DimensionMismatch("stage " + std::to_string(i + 1) +
                              " carry exceeds previous stage responses");
    Matrix x = generate_low_rank_x(m, cfg.n_vars, rng::derive(seed, "stage-x-" + std::to_string(i)));
    Matrix carry = cfg.n_carry > 0 ? Matrix(prev_responses.leftCols(cfg.n_carry))
                                   : Matrix(m, 0);
    Matrix y = simulate_stage(x, carry, cfg, rng::derive(seed, "stage-y-" + std::to_string(i)));
    ds.x_blocks.push_back(std::move(x));
    ds.stage_responses.push_back(y);
    prev_responses = std::move(y);
  }
  ds.y = ds.stage_responses.back();
  return ds;
}

std::vector<StageConfig> builtin_config(int dataset_id) {
  if (dataset_id < 1 || dataset_id > 5) throw UnknownDataset(dataset_id);
  static const Index multipliers[] = {1, 2, 5, 10, 20};
  const Index mult = multipliers[dataset_id - 1];
  StageConfig s1{10 * mult, 5, 0, -1.0, 2.0, -0.01, 0.02, 0.15, 0.999, 0.001};
  StageConfig s2{20 * mult, 6, 3, -3.0, 3.0, -0.03, 0.03, 0.20, 0.999, 0.001};
  StageConfig s3{20 * mult, 7, 3, -3.0, 2.0, -0.03, 0.02, 0.25, 0.999, 0.001};
  return {s1, s2, s3};
}

void export_csv(const SimulatedDataset& dataset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < dataset.x_blocks.size(); ++i)
    write_csv(dir / csv_block_name(i), dataset.x_blocks[i]);
  write_csv(dir / "y.csv", dataset.y);

  nlohmann::json manifest;
  manifest["seed"] = dataset.seed;
  manifest["samples"] = dataset.y.rows();
  manifest["stages"] = nlohmann::json::array();
  for (const StageConfig& s : dataset.config) manifest["stages"].push_back(stage_to_json(s));
  manifest["shapes"] = nlohmann::json::array();
  for (const Matrix& x : dataset.x_blocks)
    manifest["shapes"].push_back({{"rows", x.rows()}, {"cols", x.cols()}});
  manifest["y_shape"] = {{"rows", dataset.y.rows()}, {"cols", dataset.y.cols()}};
  std::ofstream out(dir / "manifest.json");
  if (!out) throw Error("cannot write manifest.json in " + dir.string());
  out << manifest.dump(2) << '\n';
}

SimulatedDataset load_csv(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw Error("cannot read manifest.json in " + dir.string());
  nlohmann::json manifest = nlohmann::json::parse(in);
  SimulatedDataset ds;
  ds.seed = manifest.value("seed", Seed{0});
  for (const auto& j : manifest.at("stages")) ds.config.push_back(stage_from_json(j));
  for (std::size_t i = 0; i < ds.config.size(); ++i)
    ds.x_blocks.push_back(read_csv(dir / csv_block_name(i)));
  ds.y = read_csv(dir / "y.csv");
  ds.stage_responses.assign(ds.config.size(), Matrix());
  ds.stage_responses.back() = ds.y;
  return ds;
}

}  // namespace p3ls::sim
