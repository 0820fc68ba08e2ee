#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace stkrl {

using Vec = std::vector<double>;
using ConstSpan = std::span<const double>;
using MutSpan = std::span<double>;

// Dense row-major matrix of doubles. Embedding tables are stored as one
// Matrix with one row per id.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  MutSpan row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  ConstSpan row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  MutSpan values() { return data_; }
  ConstSpan values() const { return data_; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

enum class NormKind { L1, L2 };

double dot(ConstSpan a, ConstSpan b);
double l2_norm(ConstSpan v);

// L1: sum |v_i|.  L2: Euclidean length (not squared).
double norm_score(ConstSpan v, NormKind kind);

// L1: sign(v_i) with sign(0) = 0.  L2: v / |v|, and 0 at v = 0.
Vec norm_subgradient(ConstSpan v, NormKind kind);

// out += scale * norm_subgradient(v, kind), without allocating.
void add_norm_subgradient(ConstSpan v, NormKind kind, double scale, MutSpan out);

// Cosine similarity; 0 when either vector has zero length.
double cosine(ConstSpan a, ConstSpan b);

// Gradients of cosine(a, b) scaled by `scale`, accumulated into da / db.
void add_cosine_gradient(ConstSpan a, ConstSpan b, double scale, MutSpan da, MutSpan db);

// y += alpha * x
void axpy(double alpha, ConstSpan x, MutSpan y);

// y += A x
void gemv_add(const Matrix& a, ConstSpan x, MutSpan y);

// y += A^T x
void gemv_t_add(const Matrix& a, ConstSpan x, MutSpan y);

// A += u v^T
void outer_add(Matrix& a, ConstSpan u, ConstSpan v);

double sigmoid(double x);

bool all_finite(ConstSpan v);

// Project v onto the L2 ball of the given radius.
void project_to_ball(MutSpan v, double radius = 1.0);

// ---------------------------------------------------------------------------
// Finite-difference gradient checking.

struct ParamBlockView {
  std::string name;
  MutSpan values;
  ConstSpan analytic;
};

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  // Coordinates probed per block (all of them when the block is smaller).
  std::size_t coords_per_block = 32;
  std::uint64_t seed = 0;
};

struct BlockCheck {
  std::string name;
  std::size_t coords = 0;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  // Same maximum restricted to coordinates whose gradient is large enough
  // for the difference quotient to resolve it (see GradCheckReport).
  double max_rel_error_resolved = 0.0;
  std::size_t unresolved = 0;
};

struct GradCheckReport {
  std::vector<BlockCheck> blocks;
  double max_rel_error = 0.0;
  double step = 0.0;
  double tolerance = 0.0;
  bool pass = true;  // max_rel_error < tolerance
  // Rounding floor of the difference quotient, eps * sum|parts| / 2h. A
  // coordinate counts as resolved when max(|analytic|, |numeric|) is at
  // least noise_floor / tolerance.
  double noise_floor = 0.0;
  double max_rel_error_resolved = 0.0;
  std::size_t unresolved = 0;

  std::vector<std::string> failing_blocks() const;
};

double relative_error(double analytic, double numeric);

// Central differences (f(x+h) - f(x-h)) / 2h on a sampled coordinate
// subset of each block. The loss reads the parameters through the spans in
// `blocks`; every probed coordinate is restored bit-exactly afterwards.
// Throws NumericError if the loss is non-finite at any probe.
GradCheckReport finite_diff_check(const std::function<double()>& loss,
                                  std::span<const ParamBlockView> blocks,
                                  const GradCheckOptions& options);

// Same check for a loss given as a sum of parts; the difference is taken
// part by part, so parts a probe does not touch contribute exactly zero.
GradCheckReport finite_diff_check(const std::function<Vec()>& parts,
                                  std::span<const ParamBlockView> blocks,
                                  const GradCheckOptions& options);

}  // namespace stkrl
