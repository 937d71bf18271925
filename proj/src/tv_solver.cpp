#include "ubss/tv_solver.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <optional>
#include <string>

#include "ubss/error.hpp"

namespace ubss {

namespace {

void diff_into(std::span<const double> u, std::size_t w, std::size_t h, std::span<double> dx,
               std::span<double> dy) {
  for (std::size_t r = 0; r < h; ++r) {
    const double* row = u.data() + r * w;
    double* ox = dx.data() + r * w;
    double* oy = dy.data() + r * w;
    for (std::size_t c = 0; c + 1 < w; ++c) ox[c] = row[c + 1] - row[c];
    ox[w - 1] = 0.0;
    if (r + 1 < h) {
      const double* next = row + w;
      for (std::size_t c = 0; c < w; ++c) oy[c] = next[c] - row[c];
    } else {
      std::fill(oy, oy + w, 0.0);
    }
  }
}

// out = -D^T (gx, gy)
void div_into(std::span<const double> gx, std::span<const double> gy, std::size_t w, std::size_t h,
              std::span<double> out) {
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const std::size_t i = r * w + c;
      double v = 0.0;
      if (c + 1 < w) v += gx[i];
      if (c > 0) v -= gx[i - 1];
      if (r + 1 < h) v += gy[i];
      if (r > 0) v -= gy[i - w];
      out[i] = v;
    }
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

bool all_finite(std::span<const double> a) {
  return std::all_of(a.begin(), a.end(), [](double v) { return std::isfinite(v); });
}

void shrink_into(std::span<const double> vx, std::span<const double> vy, double t,
                 std::span<double> wx, std::span<double> wy) {
  for (std::size_t i = 0; i < vx.size(); ++i) {
    const double mag = std::hypot(vx[i], vy[i]);
    if (mag <= t) {
      wx[i] = 0.0;
      wy[i] = 0.0;
    } else {
      const double s = (mag - t) / mag;
      wx[i] = s * vx[i];
      wy[i] = s * vy[i];
    }
  }
}

}  // namespace

void SolverParams::validate() const {
  if (!(mu > 0.0) || !(beta > 0.0) || !(outer_tol > 0.0) || max_outer < 1)
    throw Error(Errc::invalid_config, "solver parameters must be positive");
}

GradientField forward_diff(const Raster& u) {
  if (u.width == 0 || u.height == 0 || u.values.size() != u.width * u.height)
    throw Error(Errc::shape_mismatch, "raster");
  GradientField g(u.width, u.height);
  diff_into(u.values, u.width, u.height, g.dx, g.dy);
  return g;
}

Raster divergence_adjoint(const GradientField& g) {
  if (g.dx.size() != g.width * g.height || g.dy.size() != g.dx.size())
    throw Error(Errc::shape_mismatch, "gradient field");
  Raster out(g.width, g.height);
  div_into(g.dx, g.dy, g.width, g.height, out.values);
  return out;
}

GradientField shrink2(const GradientField& v, double t) {
  if (t < 0.0) throw Error(Errc::negative_threshold, std::to_string(t));
  GradientField w(v.width, v.height);
  shrink_into(v.dx, v.dy, t, w.dx, w.dy);
  return w;
}

double tv_norm(const Raster& u) {
  const auto g = forward_diff(u);
  double sum = 0.0;
  for (std::size_t i = 0; i < g.dx.size(); ++i) sum += std::hypot(g.dx[i], g.dy[i]);
  return sum;
}

USubproblem::USubproblem(const MixingMatrix& matrix, std::span<const double> b,
                         const GradientField& w, const MultiplierState& multipliers, double mu,
                         double beta)
    : a_(matrix), b_(b), w_(w), mult_(multipliers), mu_(mu), beta_(beta) {}

double USubproblem::value(const Raster& u) const {
  const auto du = forward_diff(u);
  double q = 0.0;
  for (std::size_t i = 0; i < du.dx.size(); ++i) {
    const double rx = du.dx[i] - w_.dx[i] - mult_.nu.dx[i] / beta_;
    const double ry = du.dy[i] - w_.dy[i] - mult_.nu.dy[i] / beta_;
    q += 0.5 * beta_ * (rx * rx + ry * ry);
  }
  std::vector<double> au(a_.rows());
  a_.apply(u.values, au);
  for (std::size_t i = 0; i < au.size(); ++i) {
    const double r = au[i] - b_[i] - mult_.lambda[i] / mu_;
    q += 0.5 * mu_ * r * r;
  }
  return q;
}

Raster USubproblem::gradient(const Raster& u) const {
  auto du = forward_diff(u);
  for (std::size_t i = 0; i < du.dx.size(); ++i) {
    du.dx[i] = beta_ * (du.dx[i] - w_.dx[i] - mult_.nu.dx[i] / beta_);
    du.dy[i] = beta_ * (du.dy[i] - w_.dy[i] - mult_.nu.dy[i] / beta_);
  }
  Raster g = divergence_adjoint(du);
  for (auto& v : g.values) v = -v;

  std::vector<double> r(a_.rows());
  a_.apply(u.values, r);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = mu_ * (r[i] - b_[i] - mult_.lambda[i] / mu_);
  std::vector<double> at(u.values.size());
  a_.apply_transpose(r, at);
  for (std::size_t i = 0; i < at.size(); ++i) g.values[i] += at[i];
  return g;
}

namespace {

/// Row-pivoted LU of a square A. When m = k the constraint set {u : A u = b}
/// is a single point, so the TV problem is solved exactly by A^-1 b; square
/// Gaussian matrices are too ill-conditioned for the iterative path to get
/// there in a sensible number of iterations.
class SquareLu {
 public:
  static std::optional<SquareLu> factor(const MixingMatrix& matrix) {
    const std::size_t k = matrix.cols();
    if (matrix.rows() != k) return std::nullopt;
    SquareLu f;
    f.k_ = k;
    f.lu_.assign(matrix.entries().begin(), matrix.entries().end());
    f.perm_.resize(k);
    std::iota(f.perm_.begin(), f.perm_.end(), std::size_t{0});
    double largest = 0.0;
    for (double v : f.lu_) largest = std::max(largest, std::abs(v));
    auto& a = f.lu_;
    for (std::size_t c = 0; c < k; ++c) {
      std::size_t pivot = c;
      for (std::size_t r = c + 1; r < k; ++r)
        if (std::abs(a[r * k + c]) > std::abs(a[pivot * k + c])) pivot = r;
      if (!(std::abs(a[pivot * k + c]) > 1e-12 * largest)) return std::nullopt;  // singular
      if (pivot != c) {
        std::swap_ranges(a.begin() + static_cast<std::ptrdiff_t>(c * k),
                         a.begin() + static_cast<std::ptrdiff_t>((c + 1) * k),
                         a.begin() + static_cast<std::ptrdiff_t>(pivot * k));
        std::swap(f.perm_[c], f.perm_[pivot]);
      }
      const double inv = 1.0 / a[c * k + c];
      for (std::size_t r = c + 1; r < k; ++r) {
        const double l = a[r * k + c] * inv;
        a[r * k + c] = l;
        if (l == 0.0) continue;
        for (std::size_t j = c + 1; j < k; ++j) a[r * k + j] -= l * a[c * k + j];
      }
    }
    return f;
  }

  void solve(std::span<const double> b, std::span<double> x) const {
    for (std::size_t i = 0; i < k_; ++i) {
      double s = b[perm_[i]];
      for (std::size_t j = 0; j < i; ++j) s -= lu_[i * k_ + j] * x[j];
      x[i] = s;
    }
    for (std::size_t i = k_; i-- > 0;) {
      double s = x[i];
      for (std::size_t j = i + 1; j < k_; ++j) s -= lu_[i * k_ + j] * x[j];
      x[i] = s / lu_[i * k_ + i];
    }
  }

 private:
  std::size_t k_ = 0;
  std::vector<double> lu_;
  std::vector<std::size_t> perm_;
};

SolverResult solve_tv_impl(const MixingMatrix& matrix, std::span<const double> b,
                           std::size_t side, const SolverParams& params, const SquareLu* lu);

}  // namespace

SolverResult solve_tv(const MixingMatrix& matrix, std::span<const double> b, std::size_t side,
                      const SolverParams& params) {
  const auto lu = matrix.rows() == side * side ? SquareLu::factor(matrix) : std::nullopt;
  return solve_tv_impl(matrix, b, side, params, lu ? &*lu : nullptr);
}

namespace {

SolverResult solve_tv_impl(const MixingMatrix& matrix, std::span<const double> b,
                           std::size_t side, const SolverParams& params, const SquareLu* lu) {
  params.validate();
  const std::size_t k = side * side;
  const std::size_t m = matrix.rows();
  if (side == 0 || matrix.cols() != k || b.size() != m)
    throw Error(Errc::shape_mismatch, "matrix " + std::to_string(m) + "x" +
                                          std::to_string(matrix.cols()) + ", side " +
                                          std::to_string(side) + ", " + std::to_string(b.size()) +
                                          " measurements");

  const double mu = params.mu;
  const double beta = params.beta;
  // Zhang-Hager averaging weight and Armijo constant for the nonmonotone test
  constexpr double kEta = 0.85;
  constexpr double kArmijo = 1e-4;
  constexpr int kMaxBacktracks = 30;

  SolverResult result;
  result.u = Raster(side, side);
  auto& u = result.u.values;
  matrix.apply_transpose(b, u);

  if (lu) {
    std::vector<double> au(m);
    matrix.apply(u, au);
    for (std::size_t i = 0; i < m; ++i) au[i] -= b[i];
    result.initial_fidelity = norm(au);
    lu->solve(b, u);
    if (!all_finite(u)) throw Error(Errc::non_finite, "direct solve of a square system");
    matrix.apply(u, au);
    for (std::size_t i = 0; i < m; ++i) au[i] -= b[i];
    result.final_fidelity = norm(au);
    return result;
  }

  // Work on a normalized problem so the fixed penalties see unit-scale
  // data; the solve is then exactly covariant under b -> c b.
  double scale = 0.0;
  for (double v : u) scale = std::max(scale, std::abs(v));
  if (scale == 0.0) scale = 1.0;
  std::vector<double> bs(b.begin(), b.end());
  for (auto& v : bs) v /= scale;
  for (auto& v : u) v /= scale;
  b = bs;

  std::vector<double> u_prev(k), au(m), ra(m), lambda(m, 0.0), ad(m);
  std::vector<double> dux(k), duy(k), wx(k), wy(k), nux(k, 0.0), nuy(k, 0.0);
  std::vector<double> rdx(k), rdy(k), g(k), d(k), ddx(k), ddy(k), hd(k), tmp(k);

  matrix.apply(u, au);
  for (std::size_t i = 0; i < m; ++i) ra[i] = au[i] - b[i];
  result.initial_fidelity = norm(ra) * scale;

  double alpha = 0.0;  // carried across outer iterations
  double rel_change = 0.0;
  std::size_t outer = 0;
  while (outer < params.max_outer) {
    ++outer;
    u_prev = u;

    // w-step
    diff_into(u, side, side, dux, duy);
    for (std::size_t i = 0; i < k; ++i) {
      tmp[i] = dux[i] - nux[i] / beta;
      hd[i] = duy[i] - nuy[i] / beta;
    }
    shrink_into(tmp, hd, 1.0 / beta, wx, wy);

    // u-step on Q
    matrix.apply(u, au);
    double q = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      ra[i] = au[i] - b[i] - lambda[i] / mu;
      q += 0.5 * mu * ra[i] * ra[i];
    }
    for (std::size_t i = 0; i < k; ++i) {
      rdx[i] = dux[i] - wx[i] - nux[i] / beta;
      rdy[i] = duy[i] - wy[i] - nuy[i] / beta;
      q += 0.5 * beta * (rdx[i] * rdx[i] + rdy[i] * rdy[i]);
    }
    div_into(rdx, rdy, side, side, tmp);
    matrix.apply_transpose(ra, g);
    for (std::size_t i = 0; i < k; ++i) g[i] = mu * g[i] - beta * tmp[i];

    double reference = q;
    double weight = 1.0;
    for (std::size_t inner = 0; inner < params.max_inner; ++inner) {
      const double gg = dot(g, g);
      if (gg == 0.0) break;
      for (std::size_t i = 0; i < k; ++i) d[i] = -g[i];
      matrix.apply(d, ad);
      diff_into(d, side, side, ddx, ddy);
      const double dhd = beta * (dot(ddx, ddx) + dot(ddy, ddy)) + mu * dot(ad, ad);
      if (!(dhd > 0.0)) break;
      if (alpha <= 0.0) alpha = gg / dhd;

      // Q is quadratic along d, so trial values are exact and cost nothing.
      double q_trial = q;
      for (int bt = 0; bt < kMaxBacktracks; ++bt) {
        q_trial = q - alpha * gg + 0.5 * alpha * alpha * dhd;
        if (q_trial <= reference - kArmijo * alpha * gg) break;
        alpha *= 0.5;
      }

      for (std::size_t i = 0; i < k; ++i) u[i] += alpha * d[i];
      q = q_trial;

      // g += alpha * H d, H = beta D^T D + mu A^T A
      div_into(ddx, ddy, side, side, tmp);
      matrix.apply_transpose(ad, hd);
      for (std::size_t i = 0; i < k; ++i) g[i] += alpha * (mu * hd[i] - beta * tmp[i]);

      // BB1: s = alpha d, y = alpha H d  =>  s's / s'y = |d|^2 / d'Hd
      alpha = gg / dhd;

      const double next_weight = kEta * weight + 1.0;
      reference = (kEta * weight * reference + q) / next_weight;
      weight = next_weight;
    }

    // multipliers
    diff_into(u, side, side, dux, duy);
    matrix.apply(u, au);
    for (std::size_t i = 0; i < k; ++i) {
      nux[i] -= beta * (dux[i] - wx[i]);
      nuy[i] -= beta * (duy[i] - wy[i]);
    }
    for (std::size_t i = 0; i < m; ++i) lambda[i] -= mu * (au[i] - b[i]);

    if (!all_finite(u) || !all_finite(lambda))
      throw Error(Errc::non_finite, "solver diverged at outer iteration " + std::to_string(outer));

    double change = 0.0;
    for (std::size_t i = 0; i < k; ++i) change += (u[i] - u_prev[i]) * (u[i] - u_prev[i]);
    rel_change = std::sqrt(change) / std::max(norm(u_prev), 1e-12);
    if (rel_change < params.outer_tol) break;
  }

  for (auto& v : u) v *= scale;
  matrix.apply(u, au);
  for (std::size_t i = 0; i < m; ++i) ra[i] = au[i] - b[i] * scale;
  result.final_fidelity = norm(ra);
  result.outer_iterations = outer;
  result.final_rel_change = rel_change;
  return result;
}

}  // namespace

CompositeBlock decode_composite(const MixingMatrix& matrix, const MeasurementVector& b,
                                std::size_t side, std::size_t block_size,
                                const SolverParams& params) {
  auto solved = solve_tv(matrix, b.values, side, params);
  CompositeBlock block;
  block.side = side;
  block.block_size = block_size;
  block.position = b.position;
  block.values = std::move(solved.u.values);
  return block;
}

std::vector<CompositeBlock> decode_composites(const MixingMatrix& matrix,
                                              std::span<const MeasurementVector> measurements,
                                              std::size_t side, std::size_t block_size,
                                              const SolverParams& params, Exec exec) {
  std::vector<CompositeBlock> out(measurements.size());
  const std::size_t k = side * side;
  if (side == 0 || matrix.cols() != k)
    throw Error(Errc::shape_mismatch, "composite side does not match the matrix");
  const auto lu = matrix.rows() == k ? SquareLu::factor(matrix) : std::nullopt;
  const auto count = static_cast<std::ptrdiff_t>(measurements.size());
  // exceptions cannot leave an OpenMP region; collect the first one
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic) if (exec == Exec::parallel)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    try {
      const auto& mv = measurements[static_cast<std::size_t>(i)];
      auto& block = out[static_cast<std::size_t>(i)];
      block.side = side;
      block.block_size = block_size;
      block.position = mv.position;
      block.values = solve_tv_impl(matrix, mv.values, side, params, lu ? &*lu : nullptr).u.values;
    } catch (...) {
#pragma omp critical(ubss_decode_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace ubss
