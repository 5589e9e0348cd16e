#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "magweyl/kernels.hpp"
#include "magweyl/types.hpp"

namespace magweyl::perturbation {

enum class Basis { oscillator_tensor, fourier_grid, generic };

struct OperatorMeta {
  double mu{0.0};
  double h{0.0};
  double L{0.0};
  int n_grid{0};
};

struct OperatorMatrix {
  Eigen::MatrixXcd entries;
  bool hermitian{false};
  Basis basis{Basis::generic};
  OperatorMeta meta;

  [[nodiscard]] Eigen::Index dim() const { return entries.rows(); }
  /// Builds from a square matrix; hermitian is set when ||M - M*||_max <= 1e-12 ||M||_max.
  static OperatorMatrix from(const Eigen::MatrixXcd& m, Basis b = Basis::generic);
};

/// Spectral norm.
double op_norm(const Eigen::MatrixXcd& m);

/// Z = hD_2 + i mu x_2 and its adjoint on n1 oscillator levels (tensor the
/// identity on n2 transverse modes when n2 > 1). In the Hermite basis
/// Z = i sqrt(2 mu h) a^+, so [Z*, Z] = 2 mu h on all levels but the last and
/// Z* kills the ground state. InvalidInput unless n1 >= 2, n2 >= 1.
std::pair<OperatorMatrix, OperatorMatrix> build_ladder(int n1, int n2, double mu, double h);

/// exp(i t A / h) via the Hermitian eigendecomposition. InvalidInput unless A is Hermitian.
OperatorMatrix propagator(const OperatorMatrix& A, double t, double h);

struct DuhamelTerm {
  int k{0};
  Eigen::MatrixXcd value;
  double bound{0.0};  // (nu |t| / h)^k / k!, nu = ||B||
};

struct DuhamelResult {
  OperatorMatrix approx;          // S_K(t)
  std::vector<DuhamelTerm> terms;  // k = 0..K, S_K = sum of values
  int quadrature_order{0};         // Gauss-Legendre points per axis at acceptance
};

/// S_K(t) = sum_{k <= K} (i/h)^k int_{t > s_1 > ... > s_k > 0}
///          U0(t - s_1) B U0(s_1 - s_2) B ... B U0(s_k) ds,
/// computed in the interaction picture with nested Gauss-Legendre rules
/// (order 24 per axis, doubled until S_K moves by at most 1e-9 max(1, ||S_K||)).
/// Errors: InvalidInput for non-Hermitian input, K > 4 or mismatched sizes;
/// AccuracyError when the doubling does not settle within the node budget.
DuhamelResult duhamel_series(const OperatorMatrix& A0, const OperatorMatrix& B, double t, double h, int K);

struct RemainderCheck {
  bool smallness{false};  // T nu <= h^{1 + delta}
  double bound{0.0};      // (nu T / h)^{K+1} / (K+1)!
};

RemainderCheck remainder_check(double nu, double T, double h, int K, double delta);

/// U0(t) X U0(-t).
OperatorMatrix heisenberg_evolve(const OperatorMatrix& A0, const OperatorMatrix& X, double t, double h);

/// Seeded random Hermitian matrix with spectral norm `norm`.
OperatorMatrix random_hermitian(int dim, double norm, std::uint64_t seed);

/// Discretized model operator
///   (1/2)((h D_2)^2 + (h D_1 - mu x_2)^2 - W - 2 v x_2)
/// on [-L, L]^2, periodic in x_1 (n_grid Fourier modes) and Dirichlet in x_2
/// (sine basis with n_grid functions). The operator is block diagonal in the
/// x_1 mode; each block is a real symmetric n_grid x n_grid matrix.
struct DiscreteModel {
  kernels::ModelParams params;
  double L{1.0};
  int n_grid{0};
  std::vector<double> wavenumbers;        // k_1 of each block
  std::vector<Eigen::MatrixXd> blocks;    // in the sine basis
  std::vector<Eigen::VectorXd> eigenvalues;
  std::vector<Eigen::MatrixXd> eigenvectors;  // columns: sine-basis coefficients

  /// All eigenvalues, ascending.
  [[nodiscard]] std::vector<double> spectrum() const;
  /// Spectral projector kernel onto eigenvalues <= tau at (x, y).
  [[nodiscard]] Complex projector_kernel(const Vec2& x, const Vec2& y, double tau = 0.0) const;
  /// Dense operator in the (mode, sine) product basis; MemoryGuardError above `guard_bytes`.
  [[nodiscard]] OperatorMatrix to_operator(std::size_t guard_bytes = kDefaultGuard) const;

  static constexpr std::size_t kDefaultGuard = std::size_t{256} << 20;
};

/// Builds and diagonalizes the blocks. InvalidInput unless 4 <= n_grid <= 96 and
/// L > 0; MemoryGuardError if the block storage would exceed `guard_bytes`.
DiscreteModel discretize_model(const kernels::ModelParams& p, double L, int n_grid,
                               std::size_t guard_bytes = DiscreteModel::kDefaultGuard);

}  // namespace magweyl::perturbation
