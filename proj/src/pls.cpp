#include "p3ls/pls.hpp"

#include <Eigen/SVD>
#include <cmath>

namespace p3ls {

namespace {

void check_finite(const Matrix& x, const char* name) {
  if (!x.allFinite()) throw Error(std::string(name) + " contains NaN/Inf");
}

}  // namespace

Standardization Standardization::identity(Index cols) {
  Standardization s;
  s.mean = Vector::Zero(cols);
  s.scale = Vector::Ones(cols);
  return s;
}

Matrix Standardization::apply(const Matrix& x) const {
  if (x.cols() != cols())
    throw DimensionMismatch("expected " + std::to_string(cols()) + " columns, got " +
                            std::to_string(x.cols()));
  return (x.rowwise() - mean.transpose()).array().rowwise() /
         scale.transpose().array();
}

Matrix Standardization::restore(const Matrix& x) const {
  if (x.cols() != cols())
    throw DimensionMismatch("expected " + std::to_string(cols()) + " columns, got " +
                            std::to_string(x.cols()));
  return (x.array().rowwise() * scale.transpose().array()).matrix().rowwise() +
         mean.transpose();
}

std::pair<Matrix, Standardization> standardize(const Matrix& x) {
  check_finite(x, "x");
  const Index m = x.rows();
  if (m < 2) throw TooFewRows(m);
  Standardization s;
  s.mean = x.colwise().mean();
  Matrix centered = x.rowwise() - s.mean.transpose();
  s.scale = (centered.array().square().colwise().sum() / double(m - 1)).sqrt();
  for (Index j = 0; j < x.cols(); ++j)
    if (s.scale(j) <= 0.0) throw ZeroVarianceColumn(j);
  return {centered.array().rowwise() / s.scale.transpose().array(), s};
}

PlsModel fit(const Matrix& x, const Matrix& y, Index k) {
  check_finite(x, "x");
  check_finite(y, "y");
  const Index m = x.rows();
  const Index n = x.cols();
  const Index l = y.cols();
  if (y.rows() != m)
    throw DimensionMismatch("x has " + std::to_string(m) + " rows, y has " +
                            std::to_string(y.rows()));
  if (k < 1 || k > std::min(m - 1, n))
    throw DimensionMismatch("k = " + std::to_string(k) + " outside [1, min(m-1, n)] = [1, " +
                            std::to_string(std::min(m - 1, n)) + "]");

  Matrix e = x;  // deflated X
  Matrix f = y;  // deflated Y
  PlsModel model;
  model.weights.resize(n, k);
  model.scores.resize(m, k);
  model.x_loadings.resize(n, k);
  model.y_loadings.resize(l, k);
  model.y_scores.resize(m, k);
  model.components = k;
  model.x_std = Standardization::identity(n);
  model.y_std = Standardization::identity(l);

  const double s0_norm = (e.transpose() * f).norm();
  for (Index j = 0; j < k; ++j) {
    Matrix s = e.transpose() * f;  // n x l cross-product
    Eigen::JacobiSVD<Matrix> svd(s, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.singularValues()(0) <= 1e-12 * std::max(1.0, s0_norm))
      throw RankDeficient(j);
    Vector w = svd.matrixU().col(0);
    Vector v = svd.matrixV().col(0);

    // Deterministic sign: largest-magnitude entry of w positive, v flipped jointly.
    Index imax;
    w.cwiseAbs().maxCoeff(&imax);
    if (w(imax) < 0.0) {
      w = -w;
      v = -v;
    }

    Vector t = e * w;
    const double t_norm = t.norm();
    if (t_norm <= 1e-12 * std::max(1.0, e.norm())) throw RankDeficient(j);
    t /= t_norm;  // unit-length scores; loadings absorb the scale
    Vector u = f * v;
    Vector p = e.transpose() * t;
    Vector q = f.transpose() * t;

    e.noalias() -= t * p.transpose();
    f.noalias() -= t * q.transpose();

    model.weights.col(j) = w;
    model.scores.col(j) = t;
    model.x_loadings.col(j) = p;
    model.y_loadings.col(j) = q;
    model.y_scores.col(j) = u;
  }

  Matrix ptw = model.x_loadings.transpose() * model.weights;
  Eigen::PartialPivLU<Matrix> lu(ptw);
  if (lu.rcond() < 1e-12) throw SingularRotation();
  model.rotations = model.weights * lu.inverse();
  model.coefficients = model.rotations * model.y_loadings.transpose();
  return model;
}

PlsModel fit_standardizing(const Matrix& x, const Matrix& y, Index k) {
  auto [xs, x_std] = standardize(x);
  auto [ys, y_std] = standardize(y);
  PlsModel model = fit(xs, ys, k);
  model.x_std = x_std;
  model.y_std = y_std;
  return model;
}

Matrix predict(const PlsModel& model, const Matrix& x_new) {
  if (x_new.cols() != model.inputs())
    throw DimensionMismatch("x_new has " + std::to_string(x_new.cols()) +
                            " columns, model expects " + std::to_string(model.inputs()));
  return model.y_std.restore(model.x_std.apply(x_new) * model.coefficients);
}

Matrix transform(const PlsModel& model, const Matrix& x_new) {
  if (x_new.cols() != model.inputs())
    throw DimensionMismatch("x_new has " + std::to_string(x_new.cols()) +
                            " columns, model expects " + std::to_string(model.inputs()));
  return model.x_std.apply(x_new) * model.rotations;
}

double r2_score(const Matrix& y, const Matrix& yhat) {
  if (y.rows() != yhat.rows() || y.cols() != yhat.cols())
    throw DimensionMismatch("y and yhat shapes differ");
  const double ss_res = (y - yhat).squaredNorm();
  Matrix centered = y.rowwise() - y.colwise().mean();
  const double ss_tot = centered.squaredNorm();
  if (ss_tot == 0.0) return ss_res == 0.0 ? 1.0 : -std::numeric_limits<double>::infinity();
  return 1.0 - ss_res / ss_tot;
}

Vector r2_per_column(const Matrix& y, const Matrix& yhat) {
  if (y.rows() != yhat.rows() || y.cols() != yhat.cols())
    throw DimensionMismatch("y and yhat shapes differ");
  Vector out(y.cols());
  for (Index j = 0; j < y.cols(); ++j) out(j) = r2_score(y.col(j), yhat.col(j));
  return out;
}

double explained_variance_x(const Matrix& p_block, Index m, Index n) {
  if (m < 2 || n < 1) throw DimensionMismatch("need m >= 2 and n >= 1");
  return p_block.squaredNorm() / (double(m - 1) * double(n));
}

double explained_variance_y(const Matrix& q, Index m, Index l) {
  if (m < 2 || l < 1) throw DimensionMismatch("need m >= 2 and l >= 1");
  return q.squaredNorm() / (double(m - 1) * double(l));
}

double r2_block_y(const Matrix& y, const Matrix& yhat_block, Index m, Index l) {
  if (y.rows() != yhat_block.rows() || y.cols() != yhat_block.cols())
    throw DimensionMismatch("y and yhat shapes differ");
  return 1.0 - (y - yhat_block).squaredNorm() / (double(m) * double(l));
}

MonitoringStats monitoring_stats(const PlsModel& model, const Matrix& x_new) {
  Matrix t_new = transform(model, x_new);
  const Index m_train = model.scores.rows();
  MonitoringStats stats;
  stats.t2 = Vector::Zero(x_new.rows());
  for (Index j = 0; j < model.components; ++j) {
    // Score columns are unit-norm and centered, so the training variance
    // reduces to ||t_j||^2 / (m-1); kept explicit for clarity.
    const double lambda = model.scores.col(j).squaredNorm() / double(m_train - 1);
    stats.t2 += t_new.col(j).array().square().matrix() / lambda;
  }
  Matrix residual = model.x_std.apply(x_new) - t_new * model.x_loadings.transpose();
  stats.spe = residual.array().square().rowwise().sum();
  return stats;
}

Index select_k(const Matrix& x_train, const Matrix& y_train, const Matrix& x_val,
               const Matrix& y_val, Index k_max) {
  if (k_max < 1) throw DimensionMismatch("k_max must be >= 1");
  Index best_k = 1;
  double best_r2 = -std::numeric_limits<double>::infinity();
  const Index cap = std::min<Index>(k_max, std::min(x_train.rows() - 1, x_train.cols()));
  for (Index k = 1; k <= cap; ++k) {
    PlsModel model;
    try {
      model = fit_standardizing(x_train, y_train, k);
    } catch (const RankDeficient&) {
      break;  // signal exhausted; larger k cannot be extracted
    }
    const double r2 = r2_per_column(y_val, predict(model, x_val)).mean();
    if (r2 > best_r2 + 1e-10) {
      best_r2 = r2;
      best_k = k;
    }
  }
  return best_k;
}

}  // namespace p3ls
