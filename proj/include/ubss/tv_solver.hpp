#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ubss/exec.hpp"
#include "ubss/mixing.hpp"

namespace ubss {

/// Real-valued row-major raster.
struct Raster {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> values;

  Raster() = default;
  Raster(std::size_t w, std::size_t h) : width(w), height(h), values(w * h, 0.0) {}
  Raster(std::size_t w, std::size_t h, std::vector<double> v) : width(w), height(h), values(std::move(v)) {}
};

/// Per-pixel forward differences (dx, dy).
struct GradientField {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> dx;
  std::vector<double> dy;

  GradientField() = default;
  GradientField(std::size_t w, std::size_t h) : width(w), height(h), dx(w * h, 0.0), dy(w * h, 0.0) {}
};

/// Defaults are mu = 2^8, beta = 2^5, fixed (no continuation).
struct SolverParams {
  double mu = 256.0;         // fidelity penalty on A u = b
  double beta = 32.0;        // splitting penalty on D u = w
  double outer_tol = 1e-4;   // relative change of u between outer iterations
  std::size_t max_outer = 300;
  std::size_t max_inner = 5;  // gradient steps on the u-subproblem per outer iteration

  void validate() const;
};

struct MultiplierState {
  GradientField nu;            // for D u = w
  std::vector<double> lambda;  // for A u = b
};

struct SolverResult {
  Raster u;
  std::size_t outer_iterations = 0;
  double initial_fidelity = 0.0;  // ||A u0 - b||, u0 = A^T b
  double final_fidelity = 0.0;    // ||A u - b||
  double final_rel_change = 0.0;
};

/// dx[r,c] = u[r,c+1] - u[r,c], dy[r,c] = u[r+1,c] - u[r,c]; zero on the
/// last column / row (replicate boundary).
GradientField forward_diff(const Raster& u);

/// Discrete divergence, i.e. -D^T g for the forward_diff operator D.
Raster divergence_adjoint(const GradientField& g);

/// Isotropic shrinkage: max(|v| - t, 0) v / |v| per pixel.
GradientField shrink2(const GradientField& v, double t);

/// Isotropic total variation: sum of |(dx, dy)| over pixels.
double tv_norm(const Raster& u);

/// The smooth u-subproblem of the augmented Lagrangian at fixed (w, nu, lambda):
///   Q(u) = beta/2 |D u - w - nu/beta|^2 + mu/2 |A u - b - lambda/mu|^2
class USubproblem {
 public:
  USubproblem(const MixingMatrix& matrix, std::span<const double> b, const GradientField& w,
              const MultiplierState& multipliers, double mu, double beta);

  double value(const Raster& u) const;
  Raster gradient(const Raster& u) const;

 private:
  const MixingMatrix& a_;
  std::span<const double> b_;
  const GradientField& w_;
  const MultiplierState& mult_;
  double mu_;
  double beta_;
};

/// Equality-constrained TV recovery, min TV(u) s.t. A u = b, by augmented
/// Lagrangian alternating minimization: shrinkage w-step, Barzilai-Borwein
/// gradient u-step with a nonmonotone (Zhang-Hager) Armijo safeguard, then
/// multiplier updates. Deterministic; throws Errc::non_finite on divergence.
SolverResult solve_tv(const MixingMatrix& matrix, std::span<const double> b, std::size_t side,
                      const SolverParams& params = {});

/// solve_tv wrapped into a composite; values are left unclamped.
CompositeBlock decode_composite(const MixingMatrix& matrix, const MeasurementVector& b,
                                std::size_t side, std::size_t block_size,
                                const SolverParams& params = {});

/// Decodes independent composites, optionally across OpenMP threads.
std::vector<CompositeBlock> decode_composites(const MixingMatrix& matrix,
                                              std::span<const MeasurementVector> measurements,
                                              std::size_t side, std::size_t block_size,
                                              const SolverParams& params = {},
                                              Exec exec = Exec::parallel);

}  // namespace ubss
