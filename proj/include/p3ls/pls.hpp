#pragma once

#include <utility>

#include "p3ls/errors.hpp"
#include "p3ls/types.hpp"

namespace p3ls {

/// Per-column centering and scaling parameters (sample std, denominator m-1).
struct Standardization {
  Vector mean;
  Vector scale;

  static Standardization identity(Index cols);
  Index cols() const { return mean.size(); }

  /// Center and scale new data with the stored parameters.
  Matrix apply(const Matrix& x) const;
  /// Map standardized data back to original units.
  Matrix restore(const Matrix& x) const;
};

/// Column-wise standardization to zero mean, unit sample variance.
std::pair<Matrix, Standardization> standardize(const Matrix& x);

/// Fitted SVD-based PLS-2 model. Component columns: weights W, scores T,
/// X-loadings P, Y-loadings Q, rotations R = W (P^T W)^{-1}, coefficients
/// B = R Q^T. Scores are normalized to unit Euclidean length per component.
struct PlsModel {
  Matrix weights;       // W, n x k
  Matrix scores;        // T, m x k, unit-norm columns
  Matrix x_loadings;    // P, n x k
  Matrix y_loadings;    // Q, l x k
  Matrix y_scores;      // U, m x k, un-normalized
  Matrix rotations;     // R, n x k
  Matrix coefficients;  // B, n x l
  Index components = 0;
  Standardization x_std;  // identity when fit on pre-standardized data
  Standardization y_std;

  Index inputs() const { return coefficients.rows(); }
  Index outputs() const { return coefficients.cols(); }
};

/// Fit on already-standardized x (m x n) and y (m x l) with k components.
PlsModel fit(const Matrix& x, const Matrix& y, Index k);

/// Convenience: standardize both matrices and keep the parameters on the model.
PlsModel fit_standardizing(const Matrix& x, const Matrix& y, Index k);

/// Predictions in the original units of y.
Matrix predict(const PlsModel& model, const Matrix& x_new);

/// Latent scores for new data, m_new x k.
Matrix transform(const PlsModel& model, const Matrix& x_new);

/// Pooled coefficient of determination, column-mean baseline.
double r2_score(const Matrix& y, const Matrix& yhat);

/// Per-column R^2, column-mean baseline.
Vector r2_per_column(const Matrix& y, const Matrix& yhat);

/// Variance in an X block explained by the model: SS(P_i) / ((m-1) n).
double explained_variance_x(const Matrix& p_block, Index m, Index n);

/// Variance in Y explained by the model: SS(Q) / ((m-1) l).
double explained_variance_y(const Matrix& q, Index m, Index l);

/// Block-wise predictive R^2: 1 - SS(Y - Yhat_i) / (m l).
double r2_block_y(const Matrix& y, const Matrix& yhat_block, Index m, Index l);

struct MonitoringStats {
  Vector t2;   // Hotelling T^2 per sample
  Vector spe;  // squared prediction error per sample
};

/// T^2 against per-component training score variance; SPE against T_new P^T.
MonitoringStats monitoring_stats(const PlsModel& model, const Matrix& x_new);

/// Number of components maximizing mean per-column validation R^2 over
/// k in [1, k_max]; ties (within 1e-10) go to the smaller k.
Index select_k(const Matrix& x_train, const Matrix& y_train, const Matrix& x_val,
               const Matrix& y_val, Index k_max);

}  // namespace p3ls
