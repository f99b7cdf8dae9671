#pragma once

// The infinitesimal generator applied to quadratic Lyapunov candidates
//
//   V(x) = (x - x0)ᵀ R (x - x0)   or, with y0 = R x0 and the constant dropped,
//   V(x) = xᵀ R x - 2 y0ᵀ x,
//
// gives another quadratic QV(x) = xᵀ T x + 2 uᵀ x + β. For affine rates
// q_k(x) = a_kᵀx + c_k with drift Σ q_k r_k = Ax + B:
//
//   T = AᵀR + RA
//   u = RB - Aᵀy0 + ½ Σ_k (r_kᵀ R r_k) a_k
//   β = -2 y0ᵀB + Σ_k c_k (r_kᵀ R r_k)
//
// Order-2 transitions contribute q_b(x)(2 r_bᵀR x + r_bᵀR r_b - 2 y0ᵀ r_b),
// which vanishes identically when R r_b = 0 and y0ᵀ r_b = 0.

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "driftbound/error.hpp"
#include "driftbound/network.hpp"

namespace driftbound {

enum class GeneratorErrc { NonVanishingNonlinear, NegativeState, SingularT, DimensionMismatch };

using GeneratorError = KindedError<GeneratorErrc>;

/// f(x) = xᵀ T x + 2 uᵀ x + β with T kept exactly symmetric.
struct QuadraticForm {
  Eigen::MatrixXd T;
  Eigen::VectorXd u;
  double beta = 0.0;

  QuadraticForm() = default;
  QuadraticForm(Eigen::MatrixXd t, Eigen::VectorXd lin, double constant)
      : T(0.5 * (t + t.transpose())), u(std::move(lin)), beta(constant) {
    if (T.rows() != u.size()) {
      throw GeneratorError(GeneratorErrc::DimensionMismatch, "quadratic form: T and u sizes differ");
    }
  }

  static QuadraticForm zero(Eigen::Index n) {
    return {Eigen::MatrixXd::Zero(n, n), Eigen::VectorXd::Zero(n), 0.0};
  }
  static QuadraticForm constant(Eigen::Index n, double c) {
    return {Eigen::MatrixXd::Zero(n, n), Eigen::VectorXd::Zero(n), c};
  }
  /// x_i
  static QuadraticForm coordinate(Eigen::Index n, Eigen::Index i) {
    QuadraticForm f = zero(n);
    f.u(i) = 0.5;
    return f;
  }
  /// x_i x_j (x_i² when i == j)
  static QuadraticForm product(Eigen::Index n, Eigen::Index i, Eigen::Index j) {
    QuadraticForm f = zero(n);
    f.T(i, j) += 0.5;
    f.T(j, i) += 0.5;
    return f;
  }

  Eigen::Index dimension() const { return u.size(); }

  double operator()(const Eigen::VectorXd& x) const { return x.dot(T * x) + 2.0 * u.dot(x) + beta; }

  template <typename Count>
  double at(std::span<const Count> x) const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i) v(static_cast<Eigen::Index>(i)) = static_cast<double>(x[i]);
    return (*this)(v);
  }

  QuadraticForm operator+(const QuadraticForm& o) const { return {T + o.T, u + o.u, beta + o.beta}; }
  QuadraticForm operator-(const QuadraticForm& o) const { return {T - o.T, u - o.u, beta - o.beta}; }
  QuadraticForm operator-() const { return {-T, -u, -beta}; }
  QuadraticForm operator*(double s) const { return {s * T, s * u, s * beta}; }
  friend QuadraticForm operator*(double s, const QuadraticForm& f) { return f * s; }

  bool operator==(const QuadraticForm& o) const { return T == o.T && u == o.u && beta == o.beta; }
};

/// Relative eigenvalue threshold below which R counts as singular and x0 is
/// not recovered.
inline constexpr double kCenterRecoveryThreshold = 1e-6;

/// Parameters (R, y0) of a quadratic Lyapunov candidate, with the center x0
/// when R is invertible.
struct LyapunovSpec {
  Eigen::MatrixXd R;
  Eigen::VectorXd y0;
  std::optional<Eigen::VectorXd> x0;

  Eigen::Index dimension() const { return y0.size(); }

  static LyapunovSpec centered(const Eigen::MatrixXd& R, const Eigen::VectorXd& x0) {
    Eigen::MatrixXd sym = 0.5 * (R + R.transpose());
    Eigen::VectorXd y0 = sym * x0;
    return {sym, y0, x0};
  }

  /// Builds from (R, y0); recovers x0 = R⁻¹y0 when λ_min(R) > 1e-6·λ_max(R).
  static LyapunovSpec from_linear(const Eigen::MatrixXd& R, const Eigen::VectorXd& y0) {
    LyapunovSpec spec{0.5 * (R + R.transpose()), y0, std::nullopt};
    if (spec.R.size() == 0) return spec;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(spec.R);
    const double lmax = eig.eigenvalues().maxCoeff();
    const double lmin = eig.eigenvalues().minCoeff();
    if (lmax > 0.0 && lmin > kCenterRecoveryThreshold * lmax) {
      spec.x0 = eig.eigenvectors() *
                (eig.eigenvalues().cwiseInverse().asDiagonal() * (eig.eigenvectors().transpose() * y0));
    }
    return spec;
  }

  /// V(x). Uses the centered form when x0 is known.
  double value(const Eigen::VectorXd& x) const {
    if (x0) {
      const Eigen::VectorXd d = x - *x0;
      return d.dot(R * d);
    }
    return x.dot(R * x) - 2.0 * y0.dot(x);
  }
};

/// QV restricted to the affine transitions. Linear in (R, y0); no check on the
/// order-2 transitions, which is what the SDP assembly needs when it evaluates
/// the map on basis matrices.
inline QuadraticForm generator_affine_part(const ReactionNetwork& net, const Eigen::MatrixXd& R,
                                           const Eigen::VectorXd& y0) {
  const auto n = static_cast<Eigen::Index>(net.dimension());
  if (R.rows() != n || R.cols() != n || y0.size() != n) {
    throw GeneratorError(GeneratorErrc::DimensionMismatch, "R and y0 must match the species count");
  }
  const DriftPair drift = drift_matrices(net);
  Eigen::MatrixXd T = drift.A.transpose() * R + R * drift.A;
  Eigen::VectorXd u = R * drift.B - drift.A.transpose() * y0;
  double beta = -2.0 * y0.dot(drift.B);
  for (const auto& t : net.transitions()) {
    if (!t.is_affine()) continue;
    const Eigen::VectorXd r = t.change.cast<double>();
    const double jump = r.dot(R * r);
    const auto [a, c] = t.affine_coefficients(n);
    u += 0.5 * jump * a;
    beta += c * jump;
  }
  return {T, u, beta};
}

/// Default tolerance for the order-2 elimination check.
inline constexpr double kEqualityTolerance = 1e-8;

/// Residual max(‖R r_b‖∞, |y0ᵀ r_b|) over the order-2 transitions.
inline double nonlinear_residual(const ReactionNetwork& net, const LyapunovSpec& spec) {
  double worst = 0.0;
  for (const auto& t : net.transitions()) {
    if (t.is_affine()) continue;
    const Eigen::VectorXd r = t.change.cast<double>();
    worst = std::max(worst, (spec.R * r).lpNorm<Eigen::Infinity>());
    worst = std::max(worst, std::abs(spec.y0.dot(r)));
  }
  return worst;
}

/// Symbolic drift QV of the candidate. Order-2 transitions must be eliminated
/// (R r_b = 0 and y0ᵀr_b = 0 within tol), otherwise QV would be cubic.
inline QuadraticForm apply_generator(const ReactionNetwork& net, const LyapunovSpec& spec,
                                     double tol = kEqualityTolerance) {
  const double residual = nonlinear_residual(net, spec);
  if (residual > tol) {
    throw GeneratorError(GeneratorErrc::NonVanishingNonlinear,
                         "order-2 transition does not vanish under R (residual " + std::to_string(residual) + ")");
  }
  return generator_affine_part(net, spec.R, spec.y0);
}

/// Σ_k q_k(x) (V(x + r_k) - V(x)) evaluated term by term, in the y0 form.
template <typename Count>
double evaluate_direct(const ReactionNetwork& net, const LyapunovSpec& spec, std::span<const Count> state) {
  if (state.size() != net.dimension()) {
    throw GeneratorError(GeneratorErrc::DimensionMismatch, "state dimension does not match species count");
  }
  Eigen::VectorXd x(static_cast<Eigen::Index>(state.size()));
  for (std::size_t i = 0; i < state.size(); ++i) {
    if (state[i] < 0) throw GeneratorError(GeneratorErrc::NegativeState, "state has a negative component");
    x(static_cast<Eigen::Index>(i)) = static_cast<double>(state[i]);
  }
  // V(x + r) - V(x) = rᵀR(2x + r) - 2y0ᵀr, which avoids differencing two
  // large values of V
  double total = 0.0;
  for (const auto& t : net.transitions()) {
    const double q = t.rate(state);
    if (q == 0.0) continue;
    const Eigen::VectorXd r = t.change.cast<double>();
    const Eigen::VectorXd Rr = spec.R * r;
    total += q * (Rr.dot(2.0 * x + r) - 2.0 * spec.y0.dot(r));
  }
  return total;
}

inline double evaluate_direct(const ReactionNetwork& net, const LyapunovSpec& spec,
                              const std::vector<std::int64_t>& state) {
  return evaluate_direct(net, spec, std::span<const std::int64_t>(state));
}

/// [[T, u], [uᵀ, β]]; f ≥ 0 on ℝⁿ iff this matrix is PSD.
inline Eigen::MatrixXd psd_embedding(const QuadraticForm& f) {
  const Eigen::Index n = f.dimension();
  Eigen::MatrixXd M(n + 1, n + 1);
  M.topLeftCorner(n, n) = f.T;
  M.topRightCorner(n, 1) = f.u;
  M.bottomLeftCorner(1, n) = f.u.transpose();
  M(n, n) = f.beta;
  return M;
}

/// Inverse of psd_embedding.
inline QuadraticForm from_embedding(const Eigen::MatrixXd& M) {
  const Eigen::Index n = M.rows() - 1;
  return {M.topLeftCorner(n, n), 0.5 * (M.topRightCorner(n, 1) + M.bottomLeftCorner(1, n).transpose()), M(n, n)};
}

inline double min_eigenvalue(const Eigen::MatrixXd& M) {
  if (M.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (M + M.transpose()), Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

/// The matrix pencil emb(main) - λ·emb(region). With λ ≥ 0 and the pencil PSD,
/// main(x) ≥ 0 wherever region(x) ≥ 0.
struct LmiTemplate {
  Eigen::MatrixXd base;
  Eigen::MatrixXd slope;

  Eigen::MatrixXd at(double lambda) const { return base + lambda * slope; }
};

inline LmiTemplate s_procedure_combine(const QuadraticForm& main, const QuadraticForm& region) {
  if (main.dimension() != region.dimension()) {
    throw GeneratorError(GeneratorErrc::DimensionMismatch, "S-procedure: dimension mismatch");
  }
  return {psd_embedding(main), -psd_embedding(region)};
}

/// {x : (x - center)ᵀ shape (x - center) ≤ radius2}
struct Ellipsoid {
  Eigen::VectorXd center;
  Eigen::MatrixXd shape;
  double radius2 = 0.0;

  bool contains(const Eigen::VectorXd& x, double tol = 0.0) const {
    const Eigen::VectorXd d = x - center;
    return d.dot(shape * d) <= radius2 * (1.0 + tol) + tol;
  }

  /// Semi-axis lengths (ascending) and their directions as columns.
  std::pair<Eigen::VectorXd, Eigen::MatrixXd> axes() const {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(shape);
    Eigen::VectorXd lengths = (radius2 / eig.eigenvalues().array()).sqrt().reverse();
    Eigen::MatrixXd dirs = eig.eigenvectors().rowwise().reverse();
    return {lengths, dirs};
  }
};

struct EmptyLevelSet {};
struct UnboundedLevelSet {};

using LevelSet = std::variant<Ellipsoid, EmptyLevelSet, UnboundedLevelSet>;

/// Super-level set {x : qv(x) ≥ c}. Throws SingularT when the largest
/// eigenvalue of T is zero within tol·‖T‖.
inline LevelSet level_set_ellipsoid(const QuadraticForm& qv, double c, double tol = 1e-8) {
  const Eigen::Index n = qv.dimension();
  if (n == 0) return UnboundedLevelSet{};
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(qv.T);
  const double lmax = eig.eigenvalues().maxCoeff();
  const double scale = eig.eigenvalues().cwiseAbs().maxCoeff();
  if (std::abs(lmax) <= tol * scale || scale == 0.0) {
    throw GeneratorError(GeneratorErrc::SingularT, "level set: T is singular to working tolerance");
  }
  if (lmax > 0.0) return UnboundedLevelSet{};
  // T ≺ 0: qv(x) = peak - (x - center)ᵀ(-T)(x - center)
  const Eigen::VectorXd center = -eig.eigenvectors() * (eig.eigenvalues().cwiseInverse().asDiagonal() *
                                                        (eig.eigenvectors().transpose() * qv.u));
  const double peak = qv.beta + qv.u.dot(center);
  if (peak < c) return EmptyLevelSet{};
  return Ellipsoid{center, -qv.T, peak - c};
}

}  // namespace driftbound
