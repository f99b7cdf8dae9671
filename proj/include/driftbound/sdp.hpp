#pragma once

// Small dense semidefinite programs
//
//   minimize    cᵀz
//   subject to  F0_b + Σ_i z_i F_ib ⪰ 0   for every block b
//               E z = g
//
// solved by a primal-dual interior-point method (HKM direction, Mehrotra
// predictor-corrector, infeasible start). The problem sizes this library
// produces are tiny (blocks of order ≤ n + 2, at most a few dozen variables),
// so everything is dense.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "driftbound/error.hpp"

namespace driftbound::sdp {

enum class SdpErrc { DimensionMismatch, UnknownVariable };

using SdpError = KindedError<SdpErrc>;

using VarId = std::size_t;

/// F0 + Σ z_i F_i, required PSD.
struct LmiBlock {
  std::string name;
  Eigen::MatrixXd constant;
  std::vector<std::pair<VarId, Eigen::MatrixXd>> terms;

  Eigen::Index dim() const { return constant.rows(); }

  void add_term(VarId var, const Eigen::MatrixXd& coeff) {
    for (auto& [v, m] : terms) {
      if (v == var) {
        m += coeff;
        return;
      }
    }
    terms.emplace_back(var, coeff);
  }

  Eigen::MatrixXd evaluate(const Eigen::VectorXd& z) const {
    Eigen::MatrixXd out = constant;
    for (const auto& [v, m] : terms) out += z(static_cast<Eigen::Index>(v)) * m;
    return out;
  }
};

struct LinearEquality {
  std::string name;
  std::vector<std::pair<VarId, double>> coefficients;
  double rhs = 0.0;
};

class SdpProblem {
 public:
  VarId add_variable(std::string name) {
    names_.push_back(std::move(name));
    objective_.conservativeResize(static_cast<Eigen::Index>(names_.size()));
    objective_(objective_.size() - 1) = 0.0;
    return names_.size() - 1;
  }

  /// A variable constrained ≥ 0, encoded as a 1×1 block.
  VarId add_nonnegative(std::string name) {
    const VarId v = add_variable(name);
    LmiBlock block{name + " >= 0", Eigen::MatrixXd::Zero(1, 1), {}};
    block.add_term(v, Eigen::MatrixXd::Ones(1, 1));
    add_block(std::move(block));
    return v;
  }

  void set_objective(VarId v, double coefficient) {
    check(v);
    objective_(static_cast<Eigen::Index>(v)) = coefficient;
  }

  void add_block(LmiBlock block) {
    for (const auto& [v, m] : block.terms) check(v);
    blocks_.push_back(std::move(block));
  }

  void add_equality(LinearEquality eq) {
    for (const auto& [v, c] : eq.coefficients) check(v);
    equalities_.push_back(std::move(eq));
  }

  std::size_t num_variables() const { return names_.size(); }
  const std::vector<std::string>& variable_names() const { return names_; }
  const Eigen::VectorXd& objective() const { return objective_; }
  const std::vector<LmiBlock>& blocks() const { return blocks_; }
  const std::vector<LinearEquality>& equalities() const { return equalities_; }

  Eigen::MatrixXd equality_matrix() const {
    Eigen::MatrixXd E = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(equalities_.size()),
                                              static_cast<Eigen::Index>(names_.size()));
    for (std::size_t r = 0; r < equalities_.size(); ++r) {
      for (const auto& [v, c] : equalities_[r].coefficients) {
        E(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(v)) += c;
      }
    }
    return E;
  }

  Eigen::VectorXd equality_rhs() const {
    Eigen::VectorXd g(static_cast<Eigen::Index>(equalities_.size()));
    for (std::size_t r = 0; r < equalities_.size(); ++r) g(static_cast<Eigen::Index>(r)) = equalities_[r].rhs;
    return g;
  }

  /// Throws DimensionMismatch on non-square, asymmetric or inconsistently
  /// sized block data.
  void validate() const {
    for (const auto& b : blocks_) {
      if (b.constant.rows() != b.constant.cols()) {
        throw SdpError(SdpErrc::DimensionMismatch, "block '" + b.name + "': constant is not square");
      }
      for (const auto& [v, m] : b.terms) {
        if (m.rows() != b.dim() || m.cols() != b.dim()) {
          throw SdpError(SdpErrc::DimensionMismatch,
                         "block '" + b.name + "': coefficient of '" + names_[v] + "' has wrong size");
        }
        if (!m.isApprox(m.transpose(), 1e-12) && (m - m.transpose()).norm() > 1e-12 * (1.0 + m.norm())) {
          throw SdpError(SdpErrc::DimensionMismatch,
                         "block '" + b.name + "': coefficient of '" + names_[v] + "' is not symmetric");
        }
      }
      if ((b.constant - b.constant.transpose()).norm() > 1e-12 * (1.0 + b.constant.norm())) {
        throw SdpError(SdpErrc::DimensionMismatch, "block '" + b.name + "': constant is not symmetric");
      }
    }
  }

 private:
  void check(VarId v) const {
    if (v >= names_.size()) throw SdpError(SdpErrc::UnknownVariable, "unknown variable id");
  }

  std::vector<std::string> names_;
  Eigen::VectorXd objective_;
  std::vector<LmiBlock> blocks_;
  std::vector<LinearEquality> equalities_;
};

enum class SdpStatus { Optimal, Infeasible, Unbounded, NumericalFailure };

inline const char* to_string(SdpStatus s) {
  switch (s) {
    case SdpStatus::Optimal: return "optimal";
    case SdpStatus::Infeasible: return "infeasible";
    case SdpStatus::Unbounded: return "unbounded";
    case SdpStatus::NumericalFailure: return "numerical_failure";
  }
  return "unknown";
}

struct Residuals {
  std::vector<double> block_min_eigenvalues;
  double min_eigenvalue = 0.0;      // over all blocks; 0 when there are none
  double equality_residual = 0.0;   // ‖Ez - g‖∞
  double duality_gap = 0.0;         // Σ_b ⟨F_b(z), X_b⟩
  double dual_residual = 0.0;       // ‖c - A*(X) - Eᵀν‖∞ with ν by least squares
  double dual_min_eigenvalue = 0.0;
};

struct SdpSolution {
  SdpStatus status = SdpStatus::NumericalFailure;
  Eigen::VectorXd z;
  double objective = 0.0;
  Residuals residuals;
  std::vector<Eigen::MatrixXd> dual;  // one matrix per block
  std::optional<Eigen::VectorXd> certificate;
  int iterations = 0;
  std::string message;

  double value(VarId v) const { return z(static_cast<Eigen::Index>(v)); }
};

struct SolverOptions {
  double tolerance = 1e-8;
  int max_iterations = 200;
  bool scaling = true;
  std::ostream* log = nullptr;  // per-iteration trace
};

/// Adapter point for an external conic solver.
using SolverFunction = std::function<SdpSolution(const SdpProblem&, const SolverOptions&)>;

/// Recomputes every residual of `solution` from the problem data alone.
inline Residuals check_solution(const SdpProblem& problem, const SdpSolution& solution) {
  Residuals r;
  const Eigen::VectorXd& z = solution.z;
  const auto m = static_cast<Eigen::Index>(problem.num_variables());
  if (z.size() != m) throw SdpError(SdpErrc::DimensionMismatch, "solution has wrong number of variables");

  double gap = 0.0;
  Eigen::VectorXd adjoint = Eigen::VectorXd::Zero(m);
  bool have_dual = solution.dual.size() == problem.blocks().size();
  r.dual_min_eigenvalue = 0.0;
  for (std::size_t b = 0; b < problem.blocks().size(); ++b) {
    const auto& block = problem.blocks()[b];
    const Eigen::MatrixXd F = block.evaluate(z);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (F + F.transpose()), Eigen::EigenvaluesOnly);
    const double lmin = block.dim() > 0 ? eig.eigenvalues().minCoeff() : 0.0;
    r.block_min_eigenvalues.push_back(lmin);
    if (b == 0 || lmin < r.min_eigenvalue) r.min_eigenvalue = lmin;
    if (have_dual) {
      const Eigen::MatrixXd& X = solution.dual[b];
      if (X.rows() != block.dim()) {
        have_dual = false;
        continue;
      }
      gap += (F.cwiseProduct(X)).sum();
      for (const auto& [v, c] : block.terms) adjoint(static_cast<Eigen::Index>(v)) += c.cwiseProduct(X).sum();
      if (block.dim() > 0) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ex(0.5 * (X + X.transpose()), Eigen::EigenvaluesOnly);
        r.dual_min_eigenvalue = std::min(r.dual_min_eigenvalue, ex.eigenvalues().minCoeff());
      }
    }
  }
  const Eigen::MatrixXd E = problem.equality_matrix();
  if (E.rows() > 0) r.equality_residual = (E * z - problem.equality_rhs()).lpNorm<Eigen::Infinity>();
  if (have_dual) {
    r.duality_gap = gap;
    Eigen::VectorXd resid = problem.objective() - adjoint;
    if (E.rows() > 0) {
      const Eigen::VectorXd nu = E.transpose().completeOrthogonalDecomposition().solve(resid);
      resid -= E.transpose() * nu;
    }
    r.dual_residual = m > 0 ? resid.lpNorm<Eigen::Infinity>() : 0.0;
  }
  return r;
}

namespace detail {

// Problem after scaling, elimination and facial reduction:
//   min cᵀw + offset   s.t.   G0_b + Σ w_i G_ib ⪰ 0
struct Reduced {
  std::vector<Eigen::MatrixXd> G0;
  std::vector<std::vector<Eigen::MatrixXd>> G;  // G[b][i], dense (possibly zero)
  Eigen::VectorXd c;
  Eigen::Index nvars = 0;
};

struct Iterate {
  Eigen::VectorXd w;
  std::vector<Eigen::MatrixXd> S;
  std::vector<Eigen::MatrixXd> X;
};

inline double inner(const std::vector<Eigen::MatrixXd>& A, const std::vector<Eigen::MatrixXd>& B) {
  double s = 0.0;
  for (std::size_t b = 0; b < A.size(); ++b) s += A[b].cwiseProduct(B[b]).sum();
  return s;
}

inline double frob(const std::vector<Eigen::MatrixXd>& A) {
  double s = 0.0;
  for (const auto& m : A) s += m.squaredNorm();
  return std::sqrt(s);
}

inline Eigen::MatrixXd sym(const Eigen::MatrixXd& m) { return 0.5 * (m + m.transpose()); }

// Largest α ≤ cap with P + α dP ⪰ 0, given a Cholesky factor of P ≻ 0.
inline double max_step(const Eigen::LLT<Eigen::MatrixXd>& chol, const Eigen::MatrixXd& dP) {
  if (dP.rows() == 0) return std::numeric_limits<double>::infinity();
  const Eigen::MatrixXd L = chol.matrixL();
  Eigen::MatrixXd tmp = L.triangularView<Eigen::Lower>().solve(dP);
  Eigen::MatrixXd W = L.triangularView<Eigen::Lower>().solve(tmp.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym(W), Eigen::EigenvaluesOnly);
  const double lmin = eig.eigenvalues().minCoeff();
  return lmin < 0.0 ? -1.0 / lmin : std::numeric_limits<double>::infinity();
}

enum class Outcome { Converged, PrimalInfeasible, DualInfeasible, Diverging, Stalled, IterationLimit, Breakdown };

struct IpmResult {
  Outcome outcome = Outcome::Breakdown;
  Iterate it;
  int iterations = 0;
  Eigen::VectorXd ray;  // w-direction for DualInfeasible
};

class InteriorPoint {
 public:
  InteriorPoint(const Reduced& p, double tol, int max_iter, double objective_scale, double offset, std::ostream* log)
      : p_(p), tol_(tol), max_iter_(max_iter), kappa_(objective_scale), offset_(offset), log_(log) {
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(p.nvars, p.nvars);
    for (std::size_t b = 0; b < p.G.size(); ++b) {
      for (Eigen::Index i = 0; i < p.nvars; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
          gram(i, j) += p.G[b][static_cast<std::size_t>(i)].cwiseProduct(p.G[b][static_cast<std::size_t>(j)]).sum();
        }
      }
    }
    gram = gram.selfadjointView<Eigen::Lower>();
    gram_.compute(gram);
  }

  IpmResult run() const {
    const std::size_t nb = p_.G0.size();
    const Eigen::Index m = p_.nvars;
    double total_dim = 0.0;
    for (const auto& g : p_.G0) total_dim += static_cast<double>(g.rows());

    // Starting point after Helmberg-Rendl-Vanderbei-Wolkowicz.
    double max_g = frob(p_.G0);
    double xi = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      double gi = 0.0;
      for (std::size_t b = 0; b < nb; ++b) gi += p_.G[b][static_cast<std::size_t>(i)].squaredNorm();
      gi = std::sqrt(gi);
      max_g = std::max(max_g, gi);
      xi = std::max(xi, (1.0 + std::abs(p_.c(i))) / (1.0 + gi));
    }
    const double alpha0 = 10.0 * std::max(1.0, total_dim * xi);
    const double beta0 = 10.0 * std::max(1.0, (1.0 + max_g) / std::sqrt(std::max(1.0, total_dim)));

    IpmResult res;
    Iterate& it = res.it;
    it.w = Eigen::VectorXd::Zero(m);
    for (std::size_t b = 0; b < nb; ++b) {
      const Eigen::Index d = p_.G0[b].rows();
      it.S.push_back(beta0 * Eigen::MatrixXd::Identity(d, d));
      it.X.push_back(alpha0 * Eigen::MatrixXd::Identity(d, d));
    }

    const double g0_norm = frob(p_.G0);
    const double c_norm = p_.c.size() > 0 ? p_.c.norm() : 0.0;
    int stalls = 0;
    // Weak infeasibility has no Farkas ray; the only symptom is a primal
    // objective running off to +∞ while the dual one stays put.
    double last_pobj = 0.0, last_dobj = 0.0;
    auto diverged = [&] { return last_pobj > 1e10 && last_pobj > 1e6 * (1.0 + std::abs(last_dobj)); };

    for (int iter = 0; iter <= max_iter_; ++iter) {
      res.iterations = iter;
      // Residuals.
      std::vector<Eigen::MatrixXd> Rp(nb);
      for (std::size_t b = 0; b < nb; ++b) {
        Rp[b] = p_.G0[b] - it.S[b];
        for (Eigen::Index i = 0; i < m; ++i) Rp[b] += it.w(i) * p_.G[b][static_cast<std::size_t>(i)];
      }
      Eigen::VectorXd AX = adjoint(it.X);
      const Eigen::VectorXd rd = p_.c - AX;
      const double mu = total_dim > 0 ? inner(it.X, it.S) / total_dim : 0.0;
      const double pobj = p_.c.dot(it.w);
      const double dobj = -inner(p_.G0, it.X);

      const double pres = frob(Rp) / (1.0 + g0_norm);
      const double dres = m > 0 ? rd.norm() / (1.0 + c_norm) : 0.0;
      const double gap = std::max(inner(it.X, it.S), std::abs(pobj - dobj));
      last_pobj = pobj;
      last_dobj = dobj;
      const double obj_orig = kappa_ * pobj + offset_;
      if (log_) {
        *log_ << "iter " << iter << " pobj " << pobj << " dobj " << dobj << " pres " << pres << " dres " << dres
              << " gap " << gap << " mu " << mu << '\n';
      }
      if (pres <= tol_ && dres <= tol_ && kappa_ * gap <= tol_ * (1.0 + std::abs(obj_orig))) {
        res.outcome = Outcome::Converged;
        return res;
      }

      // Infeasibility rays.
      if (dobj > 0.0) {
        const double ratio = (m > 0 ? AX.norm() : 0.0) / dobj;
        if (ratio <= tol_ && dobj * tol_ > 1.0 + c_norm) {
          res.outcome = Outcome::PrimalInfeasible;
          return res;
        }
      }
      if (pobj < 0.0 && m > 0) {
        double drift = 0.0;
        for (std::size_t b = 0; b < nb; ++b) drift += (Rp[b] - p_.G0[b]).squaredNorm();
        const double ratio = std::sqrt(drift) / -pobj;
        if (ratio <= tol_ && -pobj * tol_ > 1.0 + g0_norm) {
          res.outcome = Outcome::DualInfeasible;
          res.ray = it.w / -pobj;
          return res;
        }
      }
      if (iter == max_iter_) break;

      // Factorizations.
      std::vector<Eigen::LLT<Eigen::MatrixXd>> cholS(nb), cholX(nb);
      std::vector<Eigen::MatrixXd> Sinv(nb);
      for (std::size_t b = 0; b < nb; ++b) {
        cholS[b].compute(it.S[b]);
        cholX[b].compute(it.X[b]);
        if (cholS[b].info() != Eigen::Success || cholX[b].info() != Eigen::Success) {
          res.outcome = Outcome::Breakdown;
          return res;
        }
        Sinv[b] = cholS[b].solve(Eigen::MatrixXd::Identity(it.S[b].rows(), it.S[b].cols()));
        Sinv[b] = sym(Sinv[b]);
      }

      // Schur complement M_ij = Σ_b tr(G_i X G_j S⁻¹).
      Eigen::MatrixXd M = Eigen::MatrixXd::Zero(m, m);
      for (std::size_t b = 0; b < nb; ++b) {
        if (it.X[b].rows() == 0) continue;
        for (Eigen::Index j = 0; j < m; ++j) {
          const Eigen::MatrixXd& Gj = p_.G[b][static_cast<std::size_t>(j)];
          if (Gj.isZero(0.0)) continue;
          const Eigen::MatrixXd P = it.X[b] * Gj * Sinv[b];
          for (Eigen::Index i = j; i < m; ++i) {
            const Eigen::MatrixXd& Gi = p_.G[b][static_cast<std::size_t>(i)];
            if (Gi.isZero(0.0)) continue;
            M(i, j) += Gi.cwiseProduct(P).sum();
          }
        }
      }
      M = M.selfadjointView<Eigen::Lower>();
      Eigen::LDLT<Eigen::MatrixXd> schur(M);
      if (schur.info() != Eigen::Success) {
        res.outcome = Outcome::Breakdown;
        return res;
      }

      auto direction = [&](double sigma, const std::vector<Eigen::MatrixXd>* corr, Eigen::VectorXd& dw,
                           std::vector<Eigen::MatrixXd>& dS, std::vector<Eigen::MatrixXd>& dX) {
        // Target per block: σμS⁻¹ - X - X Rp S⁻¹ - C
        std::vector<Eigen::MatrixXd> target(nb);
        for (std::size_t b = 0; b < nb; ++b) {
          target[b] = sigma * mu * Sinv[b] - it.X[b] - it.X[b] * Rp[b] * Sinv[b];
          if (corr) target[b] -= (*corr)[b];
        }
        Eigen::VectorXd h = adjoint(target) - rd;
        dw = schur.solve(h);
        dw += schur.solve(h - M * dw);
        dS.resize(nb);
        dX.resize(nb);
        for (std::size_t b = 0; b < nb; ++b) {
          dS[b] = Rp[b];
          for (Eigen::Index i = 0; i < m; ++i) dS[b] += dw(i) * p_.G[b][static_cast<std::size_t>(i)];
          dS[b] = sym(dS[b]);
          Eigen::MatrixXd rhs = sigma * mu * Sinv[b] - it.X[b] - it.X[b] * dS[b] * Sinv[b];
          if (corr) rhs -= (*corr)[b];
          dX[b] = sym(rhs);
        }
        // Cancellation in the formula above grows like 1/μ; restore
        // A*(dX) = rd by a least-squares correction in span{G_i}.
        const Eigen::VectorXd nu = gram_.solve(rd - adjoint(dX));
        for (std::size_t b = 0; b < nb; ++b) {
          for (Eigen::Index i = 0; i < m; ++i) dX[b] += nu(i) * p_.G[b][static_cast<std::size_t>(i)];
        }
      };
      auto steps = [&](const std::vector<Eigen::MatrixXd>& dS, const std::vector<Eigen::MatrixXd>& dX) {
        double ap = std::numeric_limits<double>::infinity();
        double ad = std::numeric_limits<double>::infinity();
        for (std::size_t b = 0; b < nb; ++b) {
          ap = std::min(ap, max_step(cholS[b], dS[b]));
          ad = std::min(ad, max_step(cholX[b], dX[b]));
        }
        return std::pair{ap, ad};
      };

      // Predictor.
      Eigen::VectorXd dw;
      std::vector<Eigen::MatrixXd> dS, dX;
      direction(0.0, nullptr, dw, dS, dX);
      auto [ap_max, ad_max] = steps(dS, dX);
      const double ap_aff = std::min(1.0, ap_max);
      const double ad_aff = std::min(1.0, ad_max);
      double mu_aff = 0.0;
      for (std::size_t b = 0; b < nb; ++b) {
        mu_aff += (it.X[b] + ad_aff * dX[b]).cwiseProduct(it.S[b] + ap_aff * dS[b]).sum();
      }
      mu_aff /= std::max(1.0, total_dim);
      double sigma = mu > 0.0 ? std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3) : 0.0;

      // Corrector.
      std::vector<Eigen::MatrixXd> corr(nb);
      for (std::size_t b = 0; b < nb; ++b) corr[b] = dX[b] * dS[b] * Sinv[b];
      direction(sigma, &corr, dw, dS, dX);
      std::tie(ap_max, ad_max) = steps(dS, dX);
      const double ap = std::min(1.0, 0.99 * ap_max);
      const double ad = std::min(1.0, 0.99 * ad_max);

      it.w += ap * dw;
      for (std::size_t b = 0; b < nb; ++b) {
        it.S[b] = sym(it.S[b] + ap * dS[b]);
        it.X[b] = sym(it.X[b] + ad * dX[b]);
      }
      stalls = (ap < 1e-10 && ad < 1e-10) ? stalls + 1 : 0;
      if (stalls >= 5) {
        res.outcome = diverged() ? Outcome::Diverging : Outcome::Stalled;
        return res;
      }
    }
    res.outcome = diverged() ? Outcome::Diverging : Outcome::IterationLimit;
    return res;
  }

 private:
  Eigen::VectorXd adjoint(const std::vector<Eigen::MatrixXd>& Y) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(p_.nvars);
    for (std::size_t b = 0; b < Y.size(); ++b) {
      for (Eigen::Index i = 0; i < p_.nvars; ++i) {
        out(i) += p_.G[b][static_cast<std::size_t>(i)].cwiseProduct(Y[b]).sum();
      }
    }
    return out;
  }

  const Reduced& p_;
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> gram_;
  double tol_;
  int max_iter_;
  double kappa_;
  double offset_;
  std::ostream* log_;
};

// Orthonormal basis of the common null space of a set of symmetric matrices.
inline Eigen::MatrixXd common_null_space(const std::vector<const Eigen::MatrixXd*>& mats, Eigen::Index dim) {
  Eigen::MatrixXd stack(static_cast<Eigen::Index>(mats.size()) * dim, dim);
  for (std::size_t k = 0; k < mats.size(); ++k) stack.middleRows(static_cast<Eigen::Index>(k) * dim, dim) = *mats[k];
  if (stack.rows() == 0) return Eigen::MatrixXd::Identity(dim, dim);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(stack, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  const double smax = s.size() > 0 ? s(0) : 0.0;
  Eigen::Index rank = 0;
  for (Eigen::Index k = 0; k < s.size(); ++k) {
    if (s(k) > 1e-12 * std::max(smax, 1e-300)) ++rank;
  }
  if (smax == 0.0) rank = 0;
  return svd.matrixV().rightCols(dim - rank);
}

}  // namespace detail

/// Interior-point solve. Status Optimal guarantees (in the problem's own
/// units) gap ≤ tol·(1 + |objective|), block eigenvalues ≥ -tol and
/// ‖Ez - g‖ ≤ tol.
inline SdpSolution solve(const SdpProblem& problem, const SolverOptions& options = {}) {
  problem.validate();
  using Eigen::Index;
  using Eigen::MatrixXd;
  using Eigen::VectorXd;

  const auto m = static_cast<Index>(problem.num_variables());
  const auto& blocks = problem.blocks();
  const std::size_t nb = blocks.size();
  const double tol = options.tolerance;

  SdpSolution sol;
  sol.z = VectorXd::Zero(m);

  // Dense coefficient tables F[b][i].
  std::vector<MatrixXd> F0(nb);
  std::vector<std::vector<MatrixXd>> F(nb);
  for (std::size_t b = 0; b < nb; ++b) {
    const Index d = blocks[b].dim();
    F0[b] = detail::sym(blocks[b].constant);
    F[b].assign(static_cast<std::size_t>(m), MatrixXd::Zero(d, d));
    for (const auto& [v, c] : blocks[b].terms) F[b][v] += detail::sym(c);
  }
  VectorXd c = problem.objective();
  MatrixXd E = problem.equality_matrix();
  VectorXd g = problem.equality_rhs();

  // Ruiz equilibration: variable scales e_i and per-block diagonal
  // congruences D_b (PSD-preserving).
  VectorXd e = VectorXd::Ones(m);
  std::vector<VectorXd> D(nb);
  for (std::size_t b = 0; b < nb; ++b) D[b] = VectorXd::Ones(blocks[b].dim());
  if (options.scaling) {
    for (int pass = 0; pass < 25; ++pass) {
      for (std::size_t b = 0; b < nb; ++b) {
        const Index d = blocks[b].dim();
        VectorXd rowmax = VectorXd::Zero(d);
        auto scan = [&](const MatrixXd& mat, double s) {
          for (Index p = 0; p < d; ++p) {
            for (Index q = 0; q < d; ++q) {
              rowmax(p) = std::max(rowmax(p), std::abs(s * D[b](p) * mat(p, q) * D[b](q)));
            }
          }
        };
        scan(F0[b], 1.0);
        for (Index i = 0; i < m; ++i) scan(F[b][static_cast<std::size_t>(i)], e(i));
        for (Index p = 0; p < d; ++p) {
          if (rowmax(p) > 0.0) D[b](p) /= std::sqrt(rowmax(p));
        }
      }
      for (Index i = 0; i < m; ++i) {
        double colmax = 0.0;
        for (std::size_t b = 0; b < nb; ++b) {
          const MatrixXd& mat = F[b][static_cast<std::size_t>(i)];
          colmax = std::max(colmax, (D[b].asDiagonal() * mat * D[b].asDiagonal()).cwiseAbs().maxCoeff() * e(i));
        }
        if (colmax > 0.0) e(i) /= std::sqrt(colmax);
      }
    }
  }
  std::vector<MatrixXd> Fs0(nb);
  std::vector<std::vector<MatrixXd>> Fs(nb);
  for (std::size_t b = 0; b < nb; ++b) {
    const auto Db = D[b].asDiagonal();
    Fs0[b] = Db * F0[b] * Db;
    Fs[b].resize(static_cast<std::size_t>(m));
    for (Index i = 0; i < m; ++i) Fs[b][static_cast<std::size_t>(i)] = e(i) * (Db * F[b][static_cast<std::size_t>(i)] * Db);
  }
  VectorXd cs = c.cwiseProduct(e);
  MatrixXd Es = E * e.asDiagonal();
  VectorXd gs = g;
  for (Index r = 0; r < Es.rows(); ++r) {
    const double rn = Es.row(r).lpNorm<Eigen::Infinity>();
    if (rn > 0.0) {
      Es.row(r) /= rn;
      gs(r) /= rn;
    }
  }

  // Equality elimination: scaled z = zp + N w.
  VectorXd zp = VectorXd::Zero(m);
  MatrixXd N = MatrixXd::Identity(m, m);
  if (Es.rows() > 0 && m > 0) {
    Eigen::JacobiSVD<MatrixXd> svd(Es, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& s = svd.singularValues();
    const double smax = s.size() > 0 ? s(0) : 0.0;
    Index rank = 0;
    for (Index k = 0; k < s.size(); ++k) {
      if (s(k) > 1e-12 * std::max(1.0, smax)) ++rank;
    }
    if (rank > 0) {
      const MatrixXd U = svd.matrixU().leftCols(rank);
      const MatrixXd V = svd.matrixV().leftCols(rank);
      zp = V * (s.head(rank).cwiseInverse().asDiagonal() * (U.transpose() * gs));
    }
    N = svd.matrixV().rightCols(m - rank);
    const double consistency = (Es * zp - gs).lpNorm<Eigen::Infinity>();
    if (consistency > tol * (1.0 + gs.lpNorm<Eigen::Infinity>())) {
      sol.status = SdpStatus::Infeasible;
      sol.message = "equality constraints are inconsistent";
      sol.z = zp.cwiseProduct(e);
      sol.residuals = check_solution(problem, sol);
      return sol;
    }
  }

  detail::Reduced red;
  red.nvars = N.cols();
  std::vector<MatrixXd> basis(nb);  // facial reduction bases per block
  for (std::size_t b = 0; b < nb; ++b) {
    const Index d = blocks[b].dim();
    MatrixXd G0 = Fs0[b];
    for (Index j = 0; j < m; ++j) {
      if (zp(j) != 0.0) G0 += zp(j) * Fs[b][static_cast<std::size_t>(j)];
    }
    std::vector<MatrixXd> G(static_cast<std::size_t>(red.nvars), MatrixXd::Zero(d, d));
    for (Index k = 0; k < red.nvars; ++k) {
      for (Index j = 0; j < m; ++j) {
        if (N(j, k) != 0.0) G[static_cast<std::size_t>(k)] += N(j, k) * Fs[b][static_cast<std::size_t>(j)];
      }
    }
    // Directions annihilated by every coefficient are fixed at zero; the
    // block is PSD iff its restriction to the complement is.
    std::vector<const MatrixXd*> all{&G0};
    for (const auto& gk : G) all.push_back(&gk);
    const MatrixXd null = detail::common_null_space(all, d);
    if (null.cols() > 0 && d > 0) {
      Eigen::JacobiSVD<MatrixXd> comp(null, Eigen::ComputeFullU);
      const MatrixXd Q = comp.matrixU().rightCols(d - null.cols());
      G0 = Q.transpose() * G0 * Q;
      for (auto& gk : G) gk = Q.transpose() * gk * Q;
      basis[b] = Q;
    } else {
      basis[b] = MatrixXd::Identity(d, d);
    }
    red.G0.push_back(detail::sym(G0));
    red.G.push_back(std::move(G));
  }
  VectorXd cred = N.transpose() * cs;
  const double offset = cs.dot(zp);
  double kappa = cred.size() > 0 ? cred.lpNorm<Eigen::Infinity>() : 0.0;
  if (!(kappa > 0.0)) kappa = 1.0;
  red.c = cred / kappa;

  auto finish = [&](const VectorXd& w, const std::vector<MatrixXd>* Xred) {
    sol.z = (zp + N * w).cwiseProduct(e);
    sol.objective = c.dot(sol.z);
    sol.dual.clear();
    if (Xred) {
      for (std::size_t b = 0; b < nb; ++b) {
        const MatrixXd Xb = basis[b] * (*Xred)[b] * basis[b].transpose();
        sol.dual.push_back(kappa * (D[b].asDiagonal() * Xb * D[b].asDiagonal()));
      }
    }
    sol.residuals = check_solution(problem, sol);
  };

  if (red.nvars == 0) {
    // Nothing to optimize: feasibility of the fixed point decides.
    finish(VectorXd::Zero(0), nullptr);
    bool ok = true;
    for (const auto& G0 : red.G0) {
      if (G0.rows() > 0 && detail::sym(G0).selfadjointView<Eigen::Lower>().eigenvalues().minCoeff() < -tol) ok = false;
    }
    sol.status = ok ? SdpStatus::Optimal : SdpStatus::Infeasible;
    sol.dual.clear();
    for (std::size_t b = 0; b < nb; ++b) sol.dual.push_back(MatrixXd::Zero(blocks[b].dim(), blocks[b].dim()));
    sol.residuals = check_solution(problem, sol);
    return sol;
  }

  detail::InteriorPoint ipm(red, tol, options.max_iterations, kappa, offset, options.log);
  detail::IpmResult run = ipm.run();
  sol.iterations = run.iterations;
  finish(run.it.w, &run.it.X);

  switch (run.outcome) {
    case detail::Outcome::Converged: {
      // The promise is made in the caller's units, so hold it to the
      // recomputed residuals rather than the scaled ones.
      const Residuals& r = sol.residuals;
      const bool feasible = r.min_eigenvalue >= -tol && r.equality_residual <= tol * (1.0 + g.lpNorm<Eigen::Infinity>());
      const bool tight = std::abs(r.duality_gap) <= tol * (1.0 + std::abs(sol.objective)) * 10.0;
      sol.status = feasible && tight ? SdpStatus::Optimal : SdpStatus::NumericalFailure;
      if (!(feasible && tight)) sol.message = "converged in scaled units but residuals exceed tolerance";
      break;
    }
    case detail::Outcome::PrimalInfeasible:
      sol.status = SdpStatus::Infeasible;
      sol.message = "dual ray found: no point satisfies the LMIs";
      break;
    case detail::Outcome::DualInfeasible:
      sol.status = SdpStatus::Unbounded;
      sol.message = "objective is unbounded below along a feasible ray";
      sol.certificate = (N * run.ray).cwiseProduct(e);
      break;
    case detail::Outcome::Diverging:
      sol.status = SdpStatus::Infeasible;
      sol.message = "weakly infeasible: the objective diverges as the LMIs are approached";
      break;
    case detail::Outcome::Stalled:
      sol.status = SdpStatus::NumericalFailure;
      sol.message = "step lengths collapsed";
      break;
    case detail::Outcome::IterationLimit:
      sol.status = SdpStatus::NumericalFailure;
      sol.message = "iteration limit reached";
      break;
    case detail::Outcome::Breakdown:
      sol.status = SdpStatus::NumericalFailure;
      sol.message = "factorization breakdown";
      break;
  }
  return sol;
}

/// Problem dump for diffing against external solvers. Matrices are arrays of
/// rows.
inline nlohmann::json to_json(const SdpProblem& problem) {
  auto mat = [](const Eigen::MatrixXd& M) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
      rows.push_back(row);
    }
    return rows;
  };
  nlohmann::json j;
  j["variables"] = problem.variable_names();
  j["objective"] = std::vector<double>(problem.objective().data(),
                                       problem.objective().data() + problem.objective().size());
  j["blocks"] = nlohmann::json::array();
  for (const auto& b : problem.blocks()) {
    nlohmann::json jb;
    jb["name"] = b.name;
    jb["constant"] = mat(b.constant);
    jb["terms"] = nlohmann::json::array();
    for (const auto& [v, m] : b.terms) {
      jb["terms"].push_back({{"variable", problem.variable_names()[v]}, {"matrix", mat(m)}});
    }
    j["blocks"].push_back(jb);
  }
  j["equalities"] = nlohmann::json::array();
  for (const auto& eq : problem.equalities()) {
    nlohmann::json je;
    je["name"] = eq.name;
    je["rhs"] = eq.rhs;
    je["coefficients"] = nlohmann::json::array();
    for (const auto& [v, c] : eq.coefficients) {
      je["coefficients"].push_back({{"variable", problem.variable_names()[v]}, {"value", c}});
    }
    j["equalities"].push_back(je);
  }
  return j;
}

}  // namespace driftbound::sdp
