#include "p3ls/masking.hpp"

#include <Eigen/QR>
#include <numeric>

#include "p3ls/rng.hpp"

namespace p3ls::masking {

namespace {

Matrix dense_qr_orthogonal(Index dim, Seed seed) {
  Matrix draw = rng::gaussian(dim, dim, seed);
  Eigen::HouseholderQR<Matrix> qr(draw);
  Matrix q = qr.householderQ();
  Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < dim; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  return q;
}

Matrix block_based_orthogonal(Index dim, Seed seed, Index block_size) {
  Matrix q = Matrix::Zero(dim, dim);
  Index offset = 0;
  int block_index = 0;
  while (offset < dim) {
    const Index b = std::min(block_size, dim - offset);
    q.block(offset, offset, b, b) =
        dense_qr_orthogonal(b, rng::derive(seed, "block-" + std::to_string(block_index)));
    offset += b;
    ++block_index;
  }
  // Seeded Fisher-Yates row permutation, drawn without std::shuffle so the
  // result is stable across standard library implementations.
  std::vector<Index> perm(static_cast<std::size_t>(dim));
  std::iota(perm.begin(), perm.end(), Index{0});
  auto gen = rng::engine(rng::derive(seed, "row-permutation"));
  for (Index i = dim - 1; i > 0; --i) {
    const Index j = static_cast<Index>(gen() % static_cast<std::uint64_t>(i + 1));
    std::swap(perm[i], perm[j]);
  }
  Matrix out(dim, dim);
  for (Index i = 0; i < dim; ++i) out.row(i) = q.row(perm[i]);
  return out;
}

}  // namespace

OrthogonalMatrix generate_orthogonal(Index dim, Seed seed, OrthogonalMethod method,
                                     const MaskingConfig& config) {
  if (dim < 1) throw InvalidDim("orthogonal dim must be >= 1, got " + std::to_string(dim));
  OrthogonalMatrix out;
  out.seed = seed;
  out.method = method;
  out.mat = method == OrthogonalMethod::DenseQr
                ? dense_qr_orthogonal(dim, seed)
                : block_based_orthogonal(dim, seed, std::max<Index>(1, config.block_size));
  return out;
}

Matrix MaskKeySet::h_transpose() const {
  const Index n = h_splits.empty() ? 0 : h_splits.front().rows();
  Matrix ht(n, n);
  Index col = 0;
  for (const Matrix& split : h_splits) {
    ht.middleCols(col, split.cols()) = split;
    col += split.cols();
  }
  return ht;
}

MaskKeySet generate_keys(Index m, const std::vector<Index>& block_widths, Index l, Seed seed,
                         OrthogonalMethod method, const MaskingConfig& config) {
  if (block_widths.empty()) throw InvalidDim("need at least one block width");
  for (Index w : block_widths)
    if (w < 1) throw InvalidDim("block widths must be >= 1");
  const Index n = std::accumulate(block_widths.begin(), block_widths.end(), Index{0});

  MaskKeySet keys;
  keys.block_widths = block_widths;
  keys.a = generate_orthogonal(m, rng::derive(seed, "key-A"), method, config);
  keys.g = generate_orthogonal(l, rng::derive(seed, "key-G"), method, config);
  OrthogonalMatrix h = generate_orthogonal(n, rng::derive(seed, "key-H"), method, config);
  Matrix ht = h.mat.transpose();
  Index col = 0;
  for (Index w : block_widths) {
    keys.h_splits.push_back(ht.middleCols(col, w));
    col += w;
  }
  return keys;
}

Matrix mask_features(const Matrix& x_block, const Matrix& a, const Matrix& h_split_t) {
  if (a.rows() != a.cols() || a.rows() != x_block.rows())
    throw DimensionMismatch("A must be m x m with m = rows of X block");
  if (h_split_t.cols() != x_block.cols())
    throw DimensionMismatch("H_i^T must have n_i = " + std::to_string(x_block.cols()) +
                            " columns, got " + std::to_string(h_split_t.cols()));
  // H_i = (H_i^T)^T, so X'_i = A X_i H_i has shape m x n.
  return a * x_block * h_split_t.transpose();
}

Matrix mask_targets(const Matrix& y, const Matrix& a, const Matrix& g) {
  if (a.rows() != a.cols() || a.rows() != y.rows())
    throw DimensionMismatch("A must be m x m with m = rows of Y");
  if (g.rows() != g.cols() || g.rows() != y.cols())
    throw DimensionMismatch("G must be l x l with l = cols of Y");
  return a * y * g;
}

InvertibleMask generate_invertible(Index dim, Seed seed) {
  if (dim < 1) throw InvalidDim("invertible dim must be >= 1, got " + std::to_string(dim));
  constexpr int kMaxAttempts = 64;
  constexpr double kMaxCondition = 1e6;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    Matrix draw = rng::gaussian(dim, dim, rng::derive(seed, "attempt-" + std::to_string(attempt)));
    Eigen::PartialPivLU<Matrix> lu(draw);
    const double rcond = lu.rcond();
    if (rcond <= 0.0 || 1.0 / rcond > kMaxCondition) continue;
    InvertibleMask mask;
    mask.mat = draw;
    mask.inverse = lu.inverse();
    mask.condition = 1.0 / rcond;
    mask.seed = seed;
    return mask;
  }
  throw MaskGenerationFailed("no well-conditioned draw within " +
                             std::to_string(kMaxAttempts) + " attempts for dim " +
                             std::to_string(dim));
}

}  // namespace p3ls::masking
