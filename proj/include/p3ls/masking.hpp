#pragma once

#include <vector>

#include "p3ls/errors.hpp"
#include "p3ls/types.hpp"

namespace p3ls::masking {

enum class OrthogonalMethod { DenseQr, BlockBased };

struct MaskingConfig {
  Index block_size = 64;  // block-based generation block size
};

struct OrthogonalMatrix {
  Matrix mat;
  Seed seed = 0;
  OrthogonalMethod method = OrthogonalMethod::DenseQr;

  Index dim() const { return mat.rows(); }
};

/// Random orthogonal matrix, deterministic per (dim, seed, method).
/// DenseQr: QR of a Gaussian draw with sign correction (Haar-like).
/// BlockBased: dense-QR diagonal blocks composed with a seeded row permutation.
OrthogonalMatrix generate_orthogonal(Index dim, Seed seed,
                                     OrthogonalMethod method = OrthogonalMethod::DenseQr,
                                     const MaskingConfig& config = {});

/// TA key material: A (m x m), G (l x l), and H^T split into per-party
/// column blocks of widths n_i (each split is n x n_i).
struct MaskKeySet {
  OrthogonalMatrix a;
  OrthogonalMatrix g;
  std::vector<Matrix> h_splits;
  std::vector<Index> block_widths;

  /// Re-concatenates the splits into the full H^T (n x n).
  Matrix h_transpose() const;
};

MaskKeySet generate_keys(Index m, const std::vector<Index>& block_widths, Index l, Seed seed,
                         OrthogonalMethod method = OrthogonalMethod::DenseQr,
                         const MaskingConfig& config = {});

/// X'_i = A X_i H_i, where h_split_t is the party's H_i^T block (n x n_i).
Matrix mask_features(const Matrix& x_block, const Matrix& a, const Matrix& h_split_t);

/// Y' = A Y G.
Matrix mask_targets(const Matrix& y, const Matrix& a, const Matrix& g);

struct InvertibleMask {
  Matrix mat;
  Matrix inverse;
  double condition = 0.0;
  Seed seed = 0;

  Index dim() const { return mat.rows(); }
};

/// Gaussian invertible mask, redrawn until the condition estimate is <= 1e6.
InvertibleMask generate_invertible(Index dim, Seed seed);

}  // namespace p3ls::masking
