#include "magweyl/perturbation.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "magweyl/errors.hpp"
#include "magweyl/specfun.hpp"

namespace magweyl::perturbation {

namespace {

bool is_hermitian(const Eigen::MatrixXcd& m) {
  if (m.rows() != m.cols()) return false;
  const double scale = m.cwiseAbs().maxCoeff();
  return (m - m.adjoint()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(scale, 1e-300);
}

void require_hermitian(const OperatorMatrix& m, const char* what) {
  if (m.dim() == 0 || !is_hermitian(m.entries)) throw InvalidInput(std::string(what) + ": operator must be Hermitian");
}

struct Eig {
  Eigen::VectorXd values;
  Eigen::MatrixXcd vectors;
};

Eig eig(const OperatorMatrix& A) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(A.entries);
  if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
  return {es.eigenvalues(), es.eigenvectors()};
}

Eigen::VectorXcd phases(const Eigen::VectorXd& lambda, double t, double h) {
  Eigen::VectorXcd d(lambda.size());
  for (Eigen::Index i = 0; i < lambda.size(); ++i) d[i] = std::polar(1.0, t * lambda[i] / h);
  return d;
}

// Interaction-picture ordered integrals in the eigenbasis of A0.
class OrderedIntegrals {
 public:
  OrderedIntegrals(const Eigen::VectorXd& lambda, const Eigen::MatrixXcd& b, double h, int order)
      : lambda_(lambda), b_(b), h_(h), rule_(specfun::cached_rule(specfun::RuleKind::gauss_legendre, order)) {}

  // int_{tau > s_1 > ... > s_k > 0} B_I(s_1) ... B_I(s_k) ds
  Eigen::MatrixXcd nested(int k, double tau) const {
    const auto n = b_.rows();
    if (k == 0) return Eigen::MatrixXcd::Identity(n, n);
    Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(n, n);
    for (std::size_t q = 0; q < rule_.size(); ++q) {
      const double s = 0.5 * tau * (rule_.nodes[q] + 1.0);
      acc.noalias() += (0.5 * tau * rule_.weights[q]) * (interaction(s) * nested(k - 1, s));
    }
    return acc;
  }

 private:
  Eigen::MatrixXcd interaction(double s) const {
    const auto n = b_.rows();
    Eigen::MatrixXcd out(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index i = 0; i < n; ++i) out(i, j) = b_(i, j) * std::polar(1.0, -s * (lambda_[i] - lambda_[j]) / h_);
    }
    return out;
  }

  const Eigen::VectorXd& lambda_;
  const Eigen::MatrixXcd& b_;
  double h_;
  const specfun::QuadratureRule& rule_;
};

double factorial(int k) { return std::tgamma(k + 1.0); }

}  // namespace

OperatorMatrix OperatorMatrix::from(const Eigen::MatrixXcd& m, Basis b) {
  if (m.rows() != m.cols()) throw InvalidInput("OperatorMatrix: matrix must be square");
  OperatorMatrix out;
  out.entries = m;
  out.basis = b;
  out.hermitian = is_hermitian(m);
  return out;
}

double op_norm(const Eigen::MatrixXcd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m);
  return svd.singularValues()[0];
}

std::pair<OperatorMatrix, OperatorMatrix> build_ladder(int n1, int n2, double mu, double h) {
  if (n1 < 2 || n2 < 1) throw InvalidInput("build_ladder: need n1 >= 2 and n2 >= 1");
  if (!(mu > 0.0) || !(h > 0.0)) throw InvalidInput("build_ladder: mu and h must be positive");
  Eigen::MatrixXcd raise = Eigen::MatrixXcd::Zero(n1, n1);
  for (int j = 0; j + 1 < n1; ++j) raise(j + 1, j) = std::sqrt(static_cast<double>(j + 1));
  const Eigen::MatrixXcd z1 = Complex(0.0, std::sqrt(2.0 * mu * h)) * raise;
  Eigen::MatrixXcd z = z1;
  if (n2 > 1) {
    z = Eigen::MatrixXcd::Zero(n1 * n2, n1 * n2);
    for (int a = 0; a < n1; ++a) {
      for (int b = 0; b < n1; ++b) {
        if (z1(a, b) == Complex(0.0)) continue;
        for (int m = 0; m < n2; ++m) z(a * n2 + m, b * n2 + m) = z1(a, b);
      }
    }
  }
  auto Z = OperatorMatrix::from(z, Basis::oscillator_tensor);
  auto Zs = OperatorMatrix::from(z.adjoint(), Basis::oscillator_tensor);
  Z.meta.mu = Zs.meta.mu = mu;
  Z.meta.h = Zs.meta.h = h;
  return {Z, Zs};
}

OperatorMatrix propagator(const OperatorMatrix& A, double t, double h) {
  require_hermitian(A, "propagator");
  if (!(h > 0.0) || !std::isfinite(t)) throw InvalidInput("propagator: need h > 0 and finite t");
  const auto e = eig(A);
  OperatorMatrix U = OperatorMatrix::from(e.vectors * phases(e.values, t, h).asDiagonal() * e.vectors.adjoint(), A.basis);
  U.meta = A.meta;
  return U;
}

DuhamelResult duhamel_series(const OperatorMatrix& A0, const OperatorMatrix& B, double t, double h, int K) {
  require_hermitian(A0, "duhamel_series");
  require_hermitian(B, "duhamel_series");
  if (A0.dim() != B.dim()) throw InvalidInput("duhamel_series: A0 and B differ in size");
  if (K < 0 || K > 4) throw InvalidInput("duhamel_series: K must lie in 0..4");
  if (!(h > 0.0) || !std::isfinite(t)) throw InvalidInput("duhamel_series: need h > 0 and finite t");
  const auto e = eig(A0);
  const Eigen::MatrixXcd bt = e.vectors.adjoint() * B.entries * e.vectors;
  const Eigen::VectorXcd u0 = phases(e.values, t, h);
  const double nu = op_norm(B.entries);

  auto terms_at = [&](int order) {
    OrderedIntegrals oi(e.values, bt, h, order);
    std::vector<Eigen::MatrixXcd> out;
    Complex factor(1.0, 0.0);
    for (int k = 0; k <= K; ++k) {
      out.push_back(factor * (e.vectors * (u0.asDiagonal() * oi.nested(k, t)) * e.vectors.adjoint()));
      factor *= Complex(0.0, 1.0 / h);
    }
    return out;
  };
  auto total = [](const std::vector<Eigen::MatrixXcd>& v) {
    Eigen::MatrixXcd s = v.front();
    for (std::size_t i = 1; i < v.size(); ++i) s += v[i];
    return s;
  };

  const double budget = 6e6;
  int order = 24;
  auto coarse = terms_at(order);
  for (;;) {
    const int finer = 2 * order;
    if (std::pow(static_cast<double>(finer), K) > budget || finer > 4096) {
      throw AccuracyError("duhamel_series: simplex quadrature did not settle within the node budget");
    }
    auto fine = terms_at(finer);
    const Eigen::MatrixXcd sc = total(coarse), sf = total(fine);
    const double change = (sf - sc).cwiseAbs().maxCoeff();
    coarse = std::move(fine);
    order = finer;
    if (K == 0 || change <= 1e-9 * std::max(1.0, sf.cwiseAbs().maxCoeff())) break;
  }

  DuhamelResult res;
  res.quadrature_order = order;
  for (int k = 0; k <= K; ++k) {
    DuhamelTerm term;
    term.k = k;
    term.value = coarse[static_cast<std::size_t>(k)];
    term.bound = std::pow(nu * std::abs(t) / h, k) / factorial(k);
    res.terms.push_back(std::move(term));
  }
  res.approx = OperatorMatrix::from(total(coarse), A0.basis);
  res.approx.meta = A0.meta;
  return res;
}

RemainderCheck remainder_check(double nu, double T, double h, int K, double delta) {
  if (!(nu >= 0.0) || !(T >= 0.0) || !(h > 0.0) || K < 0 || !(delta >= 0.0)) {
    throw InvalidInput("remainder_check: need nu, T >= 0, h > 0, K >= 0, delta >= 0");
  }
  RemainderCheck r;
  r.smallness = T * nu <= std::pow(h, 1.0 + delta);
  r.bound = std::pow(nu * T / h, K + 1) / factorial(K + 1);
  return r;
}

OperatorMatrix heisenberg_evolve(const OperatorMatrix& A0, const OperatorMatrix& X, double t, double h) {
  if (A0.dim() != X.dim()) throw InvalidInput("heisenberg_evolve: size mismatch");
  const auto U = propagator(A0, t, h);
  auto out = OperatorMatrix::from(U.entries * X.entries * U.entries.adjoint(), X.basis);
  out.meta = X.meta;
  return out;
}

OperatorMatrix random_hermitian(int dim, double norm, std::uint64_t seed) {
  if (dim < 1 || !(norm >= 0.0)) throw InvalidInput("random_hermitian: need dim >= 1 and norm >= 0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXcd m(dim, dim);
  for (int j = 0; j < dim; ++j) {
    for (int i = 0; i < dim; ++i) m(i, j) = Complex(g(rng), g(rng));
  }
  Eigen::MatrixXcd hm = 0.5 * (m + m.adjoint());
  const double n = op_norm(hm);
  if (n > 0.0) hm *= norm / n;
  hm = 0.5 * (hm + hm.adjoint()).eval();
  return OperatorMatrix::from(hm);
}

std::vector<double> DiscreteModel::spectrum() const {
  std::vector<double> out;
  for (const auto& ev : eigenvalues) out.insert(out.end(), ev.data(), ev.data() + ev.size());
  std::sort(out.begin(), out.end());
  return out;
}

Complex DiscreteModel::projector_kernel(const Vec2& x, const Vec2& y, double tau) const {
  const int n = n_grid;
  Eigen::VectorXd sx(n), sy(n);
  for (int j = 0; j < n; ++j) {
    const double k = (j + 1) * kPi / (2.0 * L);
    sx[j] = std::sin(k * (x.y() + L)) / std::sqrt(L);
    sy[j] = std::sin(k * (y.y() + L)) / std::sqrt(L);
  }
  Complex total(0.0, 0.0);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    double sum = 0.0;
    for (Eigen::Index m = 0; m < eigenvalues[b].size(); ++m) {
      if (eigenvalues[b][m] > tau) break;
      sum += eigenvectors[b].col(m).dot(sx) * eigenvectors[b].col(m).dot(sy);
    }
    if (sum != 0.0) total += std::polar(sum / (2.0 * L), wavenumbers[b] * (x.x() - y.x()));
  }
  return total;
}

OperatorMatrix DiscreteModel::to_operator(std::size_t guard_bytes) const {
  const auto dim = static_cast<std::size_t>(n_grid) * static_cast<std::size_t>(n_grid);
  if (dim * dim * sizeof(Complex) > guard_bytes) throw MemoryGuardError("discretized operator exceeds the memory guard");
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto off = static_cast<Eigen::Index>(b) * n_grid;
    m.block(off, off, n_grid, n_grid) = blocks[b].cast<Complex>();
  }
  auto op = OperatorMatrix::from(m, Basis::fourier_grid);
  op.meta = {params.mu, params.h, L, n_grid};
  return op;
}

DiscreteModel discretize_model(const kernels::ModelParams& p, double L, int n_grid, std::size_t guard_bytes) {
  p.validate();
  if (!(L > 0.0) || !std::isfinite(L)) throw InvalidInput("discretize_model: L must be positive");
  if (n_grid < 4 || n_grid > 96) throw InvalidInput("discretize_model: n_grid must lie in 4..96");
  const auto n = static_cast<std::size_t>(n_grid);
  if (3 * n * n * n * sizeof(double) > guard_bytes) throw MemoryGuardError("discretize_model: blocks exceed the memory guard");

  // Sine basis chi_j(x) = sin(j pi (x + L) / 2L) / sqrt(L); <x> and <x^2> by Gauss-Legendre.
  const auto& rule = specfun::cached_rule(specfun::RuleKind::gauss_legendre, 4 * n_grid + 64);
  Eigen::MatrixXd basis(static_cast<Eigen::Index>(rule.size()), n_grid);
  Eigen::VectorXd xs(static_cast<Eigen::Index>(rule.size())), ws(static_cast<Eigen::Index>(rule.size()));
  for (std::size_t q = 0; q < rule.size(); ++q) {
    const auto r = static_cast<Eigen::Index>(q);
    xs[r] = L * rule.nodes[q];
    ws[r] = L * rule.weights[q];
    for (int j = 0; j < n_grid; ++j) basis(r, j) = std::sin((j + 1) * kPi * (xs[r] + L) / (2.0 * L)) / std::sqrt(L);
  }
  const Eigen::MatrixXd x1 = basis.transpose() * (ws.cwiseProduct(xs)).asDiagonal() * basis;
  const Eigen::MatrixXd x2 = basis.transpose() * (ws.cwiseProduct(xs).cwiseProduct(xs)).asDiagonal() * basis;
  Eigen::VectorXd kinetic(n_grid);
  for (int j = 0; j < n_grid; ++j) {
    const double k = p.h * (j + 1) * kPi / (2.0 * L);
    kinetic[j] = k * k;
  }

  DiscreteModel dm;
  dm.params = p;
  dm.L = L;
  dm.n_grid = n_grid;
  for (int m = -n_grid / 2; m < n_grid - n_grid / 2; ++m) {
    const double k1 = kPi * m / L;
    const double hk = p.h * k1;
    Eigen::MatrixXd blk = 0.5 * (p.mu * p.mu * x2 - 2.0 * (hk * p.mu + p.v) * x1);
    blk.diagonal() += 0.5 * (kinetic.array() + hk * hk - p.W).matrix();
    blk = 0.5 * (blk + blk.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(blk);
    if (es.info() != Eigen::Success) throw NumericalError("discretize_model: eigensolver failed");
    dm.wavenumbers.push_back(k1);
    dm.blocks.push_back(std::move(blk));
    dm.eigenvalues.push_back(es.eigenvalues());
    dm.eigenvectors.push_back(es.eigenvectors());
  }
  return dm;
}

}  // namespace magweyl::perturbation
