#include "stkrl/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "stkrl/error.hpp"
#include "stkrl/rng.hpp"

namespace stkrl {

double dot(ConstSpan a, ConstSpan b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2_norm(ConstSpan v) { return std::sqrt(dot(v, v)); }

double norm_score(ConstSpan v, NormKind kind) {
  if (kind == NormKind::L2) return l2_norm(v);
  double s = 0.0;
  for (double x : v) s += std::fabs(x);
  return s;
}

Vec norm_subgradient(ConstSpan v, NormKind kind) {
  Vec g(v.size(), 0.0);
  add_norm_subgradient(v, kind, 1.0, g);
  return g;
}

void add_norm_subgradient(ConstSpan v, NormKind kind, double scale, MutSpan out) {
  if (kind == NormKind::L1) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (v[i] > 0.0) {
        out[i] += scale;
      } else if (v[i] < 0.0) {
        out[i] -= scale;
      }
    }
    return;
  }
  const double n = l2_norm(v);
  if (n == 0.0) return;
  const double f = scale / n;
  for (std::size_t i = 0; i < v.size(); ++i) out[i] += f * v[i];
}

double cosine(ConstSpan a, ConstSpan b) {
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  const double c = dot(a, b) / (na * nb);
  return std::clamp(c, -1.0, 1.0);
}

void add_cosine_gradient(ConstSpan a, ConstSpan b, double scale, MutSpan da, MutSpan db) {
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) return;
  const double c = dot(a, b) / (na * nb);
  const double inv = 1.0 / (na * nb);
  for (std::size_t i = 0; i < a.size(); ++i) {
    da[i] += scale * (b[i] * inv - c * a[i] / (na * na));
    db[i] += scale * (a[i] * inv - c * b[i] / (nb * nb));
  }
}

void axpy(double alpha, ConstSpan x, MutSpan y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

void gemv_add(const Matrix& a, ConstSpan x, MutSpan y) {
  for (std::size_t r = 0; r < a.rows(); ++r) y[r] += dot(a.row(r), x);
}

void gemv_t_add(const Matrix& a, ConstSpan x, MutSpan y) {
  for (std::size_t r = 0; r < a.rows(); ++r) axpy(x[r], a.row(r), y);
}

void outer_add(Matrix& a, ConstSpan u, ConstSpan v) {
  for (std::size_t r = 0; r < a.rows(); ++r) axpy(u[r], v, a.row(r));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

bool all_finite(ConstSpan v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

void project_to_ball(MutSpan v, double radius) {
  const double n = l2_norm(v);
  if (n <= radius) return;
  const double f = radius / n;
  for (double& x : v) x *= f;
}

std::vector<std::string> GradCheckReport::failing_blocks() const {
  std::vector<std::string> out;
  for (const auto& b : blocks) {
    if (b.max_rel_error >= tolerance) out.push_back(b.name);
  }
  return out;
}

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-12});
  return std::fabs(analytic - numeric) / denom;
}

GradCheckReport finite_diff_check(const std::function<Vec()>& parts,
                                  std::span<const ParamBlockView> blocks,
                                  const GradCheckOptions& options) {
  if (!(options.step > 0.0)) throw ArgumentError("finite_diff_check: step must be positive");
  GradCheckReport report;
  report.step = options.step;
  report.tolerance = options.tolerance;
  Rng rng(options.seed);
  {
    const Vec base = parts();
    double mass = 0.0;
    for (double v : base) mass += std::abs(v);
    report.noise_floor = std::numeric_limits<double>::epsilon() * mass / (2.0 * options.step);
  }
  const double resolved_at = report.noise_floor / options.tolerance;

  auto probe = [&](const std::string& name, std::size_t index) {
    Vec f = parts();
    if (!all_finite(f)) {
      std::ostringstream msg;
      msg << "non-finite loss while probing " << name << "[" << index << "]";
      throw NumericError(msg.str());
    }
    return f;
  };

  for (const auto& block : blocks) {
    if (block.values.size() != block.analytic.size()) {
      throw ArgumentError("finite_diff_check: gradient size mismatch for " + block.name);
    }
    const std::size_t n = block.values.size();
    const std::size_t take = std::min(n, options.coords_per_block);
    if (take == 0) continue;

    // Partial Fisher-Yates: the first `take` entries are a uniform sample.
    std::vector<std::size_t> index(n);
    for (std::size_t i = 0; i < n; ++i) index[i] = i;
    for (std::size_t i = 0; i < take; ++i) {
      std::swap(index[i], index[i + rng.below(n - i)]);
    }

    BlockCheck check;
    check.name = block.name;
    check.coords = take;
    for (std::size_t s = 0; s < take; ++s) {
      const std::size_t i = index[s];
      const double saved = block.values[i];
      block.values[i] = saved + options.step;
      const Vec plus = probe(block.name, i);
      block.values[i] = saved - options.step;
      const Vec minus = probe(block.name, i);
      block.values[i] = saved;
      if (plus.size() != minus.size()) {
        throw ArgumentError("finite_diff_check: loss part count changed while probing " +
                            block.name);
      }
      double diff = 0.0;
      for (std::size_t j = 0; j < plus.size(); ++j) diff += plus[j] - minus[j];
      const double numeric = diff / (2.0 * options.step);
      const double err = relative_error(block.analytic[i], numeric);
      if (err > check.max_rel_error || s == 0) {
        check.max_rel_error = err;
        check.worst_index = i;
        check.worst_analytic = block.analytic[i];
        check.worst_numeric = numeric;
      }
      if (std::max(std::abs(block.analytic[i]), std::abs(numeric)) >= resolved_at) {
        check.max_rel_error_resolved = std::max(check.max_rel_error_resolved, err);
      } else {
        ++check.unresolved;
      }
    }
    report.max_rel_error = std::max(report.max_rel_error, check.max_rel_error);
    report.max_rel_error_resolved =
        std::max(report.max_rel_error_resolved, check.max_rel_error_resolved);
    report.unresolved += check.unresolved;
    report.blocks.push_back(std::move(check));
  }
  report.pass = report.max_rel_error < options.tolerance;
  return report;
}

GradCheckReport finite_diff_check(const std::function<double()>& loss,
                                  std::span<const ParamBlockView> blocks,
                                  const GradCheckOptions& options) {
  return finite_diff_check([&] { return Vec{loss()}; }, blocks, options);
}

}  // namespace stkrl
