#pragma once

// Lyapunov synthesis by semidefinite programming and the certificates derived
// from it: stationary level sets with guaranteed mass, and moment bounds.
//
// Level-set problem, V(x) = xᵀRx - 2y0ᵀx:
//
//   minimize b'  s.t.  b' - QV(x) ≥ 0              everywhere
//                      -QV(x) - 1 - λ_j g_j(x) ≥ 0  everywhere, λ_j ≥ 0
//                      R ⪰ 0,  R r_b = 0,  y0ᵀ r_b = 0  (order-2 r_b)
//
// where D = {g ≤ 0}. Each "≥ 0 everywhere" becomes a PSD embedding. In
// orthant mode the embedding E is only required to dominate a matrix N with
// nonnegative off-diagonal entries, which certifies (x,1)ᵀE(x,1) ≥ 0 for
// x ≥ 0 only. That is the relevant domain for counts, and the only one where
// order-2 networks can be certified: R r_b = 0 makes QV constant along r_b.

#include <chrono>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "driftbound/error.hpp"
#include "driftbound/generator.hpp"
#include "driftbound/network.hpp"
#include "driftbound/sdp.hpp"

namespace driftbound {

enum class AnalysisErrc {
  Infeasible,
  NumericalFailure,
  CertificationImpossible,
  UnsupportedDegree,
  UnboundedBelow,
  EmptySet,
  InvalidArgument,
  MalformedCertificate,
};

using AnalysisError = KindedError<AnalysisErrc>;

/// The compact set D outside which the drift must be ≤ -1.
struct RegionD {
  enum class Kind { Ball, Box };
  enum class BoxEncoding { EnclosingBall, PerFace };

  Kind kind = Kind::Ball;
  Eigen::VectorXd center;  // Ball
  double radius2 = 0.0;    // Ball
  Eigen::VectorXd lower;   // Box
  Eigen::VectorXd upper;   // Box
  BoxEncoding encoding = BoxEncoding::EnclosingBall;

  static RegionD ball(Eigen::VectorXd center, double radius2) {
    if (!(radius2 > 0.0) || !std::isfinite(radius2)) {
      throw AnalysisError(AnalysisErrc::InvalidArgument, "ball region needs a positive radius²");
    }
    RegionD d;
    d.kind = Kind::Ball;
    d.center = std::move(center);
    d.radius2 = radius2;
    return d;
  }

  static RegionD box(Eigen::VectorXd lower, Eigen::VectorXd upper, BoxEncoding encoding = BoxEncoding::EnclosingBall) {
    if (lower.size() != upper.size()) {
      throw AnalysisError(AnalysisErrc::InvalidArgument, "box bounds have different lengths");
    }
    for (Eigen::Index i = 0; i < lower.size(); ++i) {
      if (!(lower(i) < upper(i))) {
        throw AnalysisError(AnalysisErrc::InvalidArgument, "box needs lower < upper on every axis");
      }
    }
    RegionD d;
    d.kind = Kind::Box;
    d.lower = std::move(lower);
    d.upper = std::move(upper);
    d.encoding = encoding;
    return d;
  }

  Eigen::Index dimension() const { return kind == Kind::Ball ? center.size() : lower.size(); }

  bool contains(const Eigen::VectorXd& x) const {
    if (kind == Kind::Ball) return (x - center).squaredNorm() <= radius2;
    return (x.array() >= lower.array()).all() && (x.array() <= upper.array()).all();
  }

  /// Quadratics g_j, one S-procedure multiplier each. Every x outside D has
  /// g_j(x) > 0 for some j.
  std::vector<QuadraticForm> quadratics() const {
    const Eigen::Index n = dimension();
    auto ball_form = [n](const Eigen::VectorXd& c, double r2) {
      return QuadraticForm(Eigen::MatrixXd::Identity(n, n), -c, c.squaredNorm() - r2);
    };
    if (kind == Kind::Ball) return {ball_form(center, radius2)};
    if (encoding == BoxEncoding::EnclosingBall) {
      const Eigen::VectorXd mid = 0.5 * (lower + upper);
      return {ball_form(mid, (0.5 * (upper - lower)).squaredNorm())};
    }
    // (x_i - lo_i)(x_i - hi_i) ≤ 0 per axis
    std::vector<QuadraticForm> out;
    for (Eigen::Index i = 0; i < n; ++i) {
      QuadraticForm g = QuadraticForm::zero(n);
      g.T(i, i) = 1.0;
      g.u(i) = -0.5 * (lower(i) + upper(i));
      g.beta = lower(i) * upper(i);
      out.push_back(g);
    }
    return out;
  }
};

enum class Domain { Auto, Global, Orthant };

inline const char* to_string(Domain d) {
  switch (d) {
    case Domain::Auto: return "auto";
    case Domain::Global: return "global";
    case Domain::Orthant: return "orthant";
  }
  return "auto";
}

struct AnalysisOptions {
  sdp::SolverOptions solver;
  Domain domain = Domain::Auto;
  sdp::SolverFunction backend;  // empty: built-in interior-point solver
};

struct SolverStats {
  std::string status;
  int iterations = 0;
  double seconds = 0.0;
  double min_block_eigenvalue = 0.0;
  double equality_residual = 0.0;
  double duality_gap = 0.0;
};

struct LyapunovCertificate {
  std::vector<std::string> species;
  LyapunovSpec spec;
  double b_prime = 0.0;
  RegionD region;
  std::vector<double> lambda;
  QuadraticForm qv;
  Domain domain = Domain::Global;  // resolved, never Auto
  /// Orthant mode: the off-diagonal slack N of each LMI, drift ceiling first,
  /// then one per region quadratic.
  std::vector<Eigen::MatrixXd> orthant_multipliers;
  double tolerance = 1e-8;
  SolverStats stats;

  double b() const { return b_prime + 1.0; }
};

struct MomentBound {
  QuadraticForm f;
  double bound = 0.0;
  LyapunovSpec spec;
  Domain domain = Domain::Global;
  std::optional<Eigen::MatrixXd> orthant_multiplier;
  SolverStats stats;
};

enum class LevelSetGeometry { Ellipsoid, Unbounded, Degenerate };

/// {x : qv(x) ≥ threshold} with stationary mass at least 1 - ε.
struct MassLevelSet {
  double epsilon = 0.0;
  double delta = 0.0;
  double threshold = 0.0;
  QuadraticForm qv;
  std::optional<Ellipsoid> ellipsoid;
  LevelSetGeometry geometry = LevelSetGeometry::Degenerate;

  double guaranteed_mass() const { return 1.0 - epsilon; }
  bool contains(const Eigen::VectorXd& x) const { return qv(x) >= threshold; }
};

/// One order-2 transition to eliminate: R r_b = 0 and y0ᵀ r_b = 0.
struct EliminationConstraint {
  std::size_t transition = 0;
  Eigen::VectorXd r_b;
};

inline std::vector<EliminationConstraint> nonlinear_constraints(const ReactionNetwork& net) {
  std::vector<EliminationConstraint> out;
  const auto& ts = net.transitions();
  for (std::size_t k = 0; k < ts.size(); ++k) {
    if (ts[k].is_affine()) continue;
    if ((ts[k].change.array() >= 0).all()) {
      throw AnalysisError(AnalysisErrc::CertificationImpossible,
                          "order-2 transition " + std::to_string(k + 1) +
                              " has a nonnegative change vector; no quadratic V can cancel it");
    }
    out.push_back({k, ts[k].change.cast<double>()});
  }
  return out;
}

namespace detail {

inline Domain resolve_domain(const ReactionNetwork& net, Domain requested) {
  if (requested != Domain::Auto) return requested;
  return classify_rates(net).nonlinear.empty() ? Domain::Global : Domain::Orthant;
}

// Decision variables R (upper triangle) and y0 with the linear map to QV.
struct LyapunovVariables {
  Eigen::Index n = 0;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> r_index;
  std::vector<sdp::VarId> r_vars;
  std::vector<sdp::VarId> y_vars;

  LyapunovVariables(sdp::SdpProblem& p, Eigen::Index dim) : n(dim) {
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = i; j < n; ++j) {
        r_index.emplace_back(i, j);
        r_vars.push_back(p.add_variable("R[" + std::to_string(i) + "," + std::to_string(j) + "]"));
      }
    }
    for (Eigen::Index i = 0; i < n; ++i) y_vars.push_back(p.add_variable("y0[" + std::to_string(i) + "]"));
  }

  Eigen::MatrixXd r_basis(std::size_t k) const {
    Eigen::MatrixXd E = Eigen::MatrixXd::Zero(n, n);
    const auto [i, j] = r_index[k];
    E(i, j) = 1.0;
    E(j, i) = 1.0;
    return E;
  }

  Eigen::MatrixXd R(const sdp::SdpSolution& s) const {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t k = 0; k < r_vars.size(); ++k) {
      const auto [i, j] = r_index[k];
      out(i, j) = s.value(r_vars[k]);
      out(j, i) = s.value(r_vars[k]);
    }
    return out;
  }

  Eigen::VectorXd y0(const sdp::SdpSolution& s) const {
    Eigen::VectorXd out(n);
    for (Eigen::Index i = 0; i < n; ++i) out(i) = s.value(y_vars[static_cast<std::size_t>(i)]);
    return out;
  }

  /// (variable, QV of its basis element)
  std::vector<std::pair<sdp::VarId, QuadraticForm>> qv_terms(const ReactionNetwork& net) const {
    std::vector<std::pair<sdp::VarId, QuadraticForm>> out;
    for (std::size_t k = 0; k < r_vars.size(); ++k) {
      out.emplace_back(r_vars[k], generator_affine_part(net, r_basis(k), Eigen::VectorXd::Zero(n)));
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      out.emplace_back(y_vars[static_cast<std::size_t>(i)],
                       generator_affine_part(net, Eigen::MatrixXd::Zero(n, n), Eigen::VectorXd::Unit(n, i)));
    }
    return out;
  }

  void add_psd_block(sdp::SdpProblem& p) const {
    sdp::LmiBlock block{"R", Eigen::MatrixXd::Zero(n, n), {}};
    for (std::size_t k = 0; k < r_vars.size(); ++k) block.add_term(r_vars[k], r_basis(k));
    p.add_block(std::move(block));
  }

  void add_elimination(sdp::SdpProblem& p, const std::vector<EliminationConstraint>& cons) const {
    for (const auto& c : cons) {
      for (Eigen::Index row = 0; row < n; ++row) {
        sdp::LinearEquality eq{"R r_b[" + std::to_string(row) + "]", {}, 0.0};
        for (std::size_t k = 0; k < r_vars.size(); ++k) {
          const double coeff = r_basis(k).row(row).dot(c.r_b);
          if (coeff != 0.0) eq.coefficients.emplace_back(r_vars[k], coeff);
        }
        if (!eq.coefficients.empty()) p.add_equality(std::move(eq));
      }
      sdp::LinearEquality eq{"y0 r_b", {}, 0.0};
      for (Eigen::Index i = 0; i < n; ++i) {
        if (c.r_b(i) != 0.0) eq.coefficients.emplace_back(y_vars[static_cast<std::size_t>(i)], c.r_b(i));
      }
      p.add_equality(std::move(eq));
    }
  }
};

// Off-diagonal nonnegative slack N of a block of order m: adds -N to it.
inline std::vector<sdp::VarId> add_orthant_slack(sdp::SdpProblem& p, sdp::LmiBlock& block, const std::string& tag) {
  const Eigen::Index m = block.dim();
  std::vector<sdp::VarId> ids;
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i + 1; j < m; ++j) {
      const sdp::VarId v =
          p.add_nonnegative(tag + ".N[" + std::to_string(i) + "," + std::to_string(j) + "]");
      Eigen::MatrixXd E = Eigen::MatrixXd::Zero(m, m);
      E(i, j) = -1.0;
      E(j, i) = -1.0;
      block.add_term(v, E);
      ids.push_back(v);
    }
  }
  return ids;
}

inline Eigen::MatrixXd slack_matrix(const std::vector<sdp::VarId>& ids, Eigen::Index m, const sdp::SdpSolution& s) {
  Eigen::MatrixXd N = Eigen::MatrixXd::Zero(m, m);
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i + 1; j < m; ++j) {
      N(i, j) = N(j, i) = s.value(ids[k++]);
    }
  }
  return N;
}

inline SolverStats make_stats(const sdp::SdpSolution& s, double seconds) {
  return {sdp::to_string(s.status), s.iterations, seconds, s.residuals.min_eigenvalue, s.residuals.equality_residual,
          s.residuals.duality_gap};
}

inline sdp::SdpSolution run_solver(const sdp::SdpProblem& p, const AnalysisOptions& o, double& seconds) {
  const auto start = std::chrono::steady_clock::now();
  sdp::SdpSolution s = o.backend ? o.backend(p, o.solver) : sdp::solve(p, o.solver);
  seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return s;
}

inline void require_optimal(const sdp::SdpSolution& s, const std::string& what) {
  switch (s.status) {
    case sdp::SdpStatus::Optimal:
      return;
    case sdp::SdpStatus::Infeasible:
    case sdp::SdpStatus::Unbounded:
      throw AnalysisError(AnalysisErrc::Infeasible,
                          what + ": no quadratic certificate found (solver: " + sdp::to_string(s.status) + ")");
    case sdp::SdpStatus::NumericalFailure:
      throw AnalysisError(AnalysisErrc::NumericalFailure, what + ": solver failed (" + s.message + ")");
  }
}

}  // namespace detail

/// Minimal drift ceiling b' over quadratic V with QV ≤ -1 outside D.
inline LyapunovCertificate solve_levelset_problem(const ReactionNetwork& net, const RegionD& region,
                                                  const AnalysisOptions& options = {}) {
  const auto n = static_cast<Eigen::Index>(net.dimension());
  if (region.dimension() != n) {
    throw AnalysisError(AnalysisErrc::InvalidArgument, "region dimension does not match the species count");
  }
  const auto elimination = nonlinear_constraints(net);
  const Domain domain = detail::resolve_domain(net, options.domain);

  sdp::SdpProblem p;
  detail::LyapunovVariables vars(p, n);
  const sdp::VarId bp = p.add_variable("b'");
  p.set_objective(bp, 1.0);
  vars.add_psd_block(p);
  vars.add_elimination(p, elimination);
  const auto terms = vars.qv_terms(net);

  Eigen::MatrixXd corner = Eigen::MatrixXd::Zero(n + 1, n + 1);
  corner(n, n) = 1.0;
  std::vector<std::vector<sdp::VarId>> slacks;

  // b' - QV ≥ 0
  sdp::LmiBlock ceiling{"drift ceiling", Eigen::MatrixXd::Zero(n + 1, n + 1), {}};
  ceiling.add_term(bp, corner);
  for (const auto& [v, q] : terms) ceiling.add_term(v, -psd_embedding(q));
  if (domain == Domain::Orthant) slacks.push_back(detail::add_orthant_slack(p, ceiling, "ceiling"));
  p.add_block(std::move(ceiling));

  // -QV - 1 - λ_j g_j ≥ 0
  const auto gs = region.quadratics();
  std::vector<sdp::VarId> lambdas;
  for (std::size_t j = 0; j < gs.size(); ++j) {
    const sdp::VarId lam = p.add_nonnegative("lambda[" + std::to_string(j) + "]");
    lambdas.push_back(lam);
    sdp::LmiBlock outside{"outside D[" + std::to_string(j) + "]", -corner, {}};
    for (const auto& [v, q] : terms) outside.add_term(v, -psd_embedding(q));
    outside.add_term(lam, -psd_embedding(gs[j]));
    if (domain == Domain::Orthant) {
      slacks.push_back(detail::add_orthant_slack(p, outside, "outside" + std::to_string(j)));
    }
    p.add_block(std::move(outside));
  }

  double seconds = 0.0;
  const sdp::SdpSolution s = detail::run_solver(p, options, seconds);
  detail::require_optimal(s, "level-set problem");

  LyapunovCertificate cert;
  cert.species = net.species_names();
  cert.spec = LyapunovSpec::from_linear(vars.R(s), vars.y0(s));
  cert.b_prime = s.value(bp);
  cert.region = region;
  for (const auto lam : lambdas) cert.lambda.push_back(s.value(lam));
  cert.qv = generator_affine_part(net, cert.spec.R, cert.spec.y0);
  cert.domain = domain;
  for (const auto& ids : slacks) cert.orthant_multipliers.push_back(detail::slack_matrix(ids, n + 1, s));
  cert.tolerance = options.solver.tolerance;
  cert.stats = detail::make_stats(s, seconds);
  return cert;
}

namespace detail {

// Detects f unbounded below on the orthant along axes and coordinate planes.
inline void require_bounded_below(const QuadraticForm& f) {
  const Eigen::Index n = f.dimension();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (f.T(i, i) < 0.0 || (f.T(i, i) == 0.0 && f.u(i) < 0.0)) {
      throw AnalysisError(AnalysisErrc::UnboundedBelow, "moment function is unbounded below on the orthant");
    }
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (f.T(i, j) < -std::sqrt(f.T(i, i) * f.T(j, j)) * (1.0 + 1e-12)) {
        throw AnalysisError(AnalysisErrc::UnboundedBelow, "moment function is unbounded below on the orthant");
      }
    }
  }
}

}  // namespace detail

/// Upper bound on the stationary expectation of f.
inline MomentBound solve_moment_problem(const ReactionNetwork& net, const QuadraticForm& f,
                                        const AnalysisOptions& options = {}) {
  const auto n = static_cast<Eigen::Index>(net.dimension());
  if (f.dimension() != n) {
    throw AnalysisError(AnalysisErrc::InvalidArgument, "moment function dimension does not match the species count");
  }
  detail::require_bounded_below(f);
  const auto elimination = nonlinear_constraints(net);
  const Domain domain = detail::resolve_domain(net, options.domain);

  sdp::SdpProblem p;
  detail::LyapunovVariables vars(p, n);
  const sdp::VarId bp = p.add_variable("b'");
  p.set_objective(bp, 1.0);
  vars.add_psd_block(p);
  vars.add_elimination(p, elimination);

  Eigen::MatrixXd corner = Eigen::MatrixXd::Zero(n + 1, n + 1);
  corner(n, n) = 1.0;
  // b' - QV - f ≥ 0
  sdp::LmiBlock block{"moment", -psd_embedding(f), {}};
  block.add_term(bp, corner);
  for (const auto& [v, q] : vars.qv_terms(net)) block.add_term(v, -psd_embedding(q));
  std::vector<sdp::VarId> slack;
  if (domain == Domain::Orthant) slack = detail::add_orthant_slack(p, block, "moment");
  p.add_block(std::move(block));

  double seconds = 0.0;
  const sdp::SdpSolution s = detail::run_solver(p, options, seconds);
  detail::require_optimal(s, "moment problem");

  MomentBound out;
  out.f = f;
  out.bound = s.value(bp);
  out.spec = LyapunovSpec::from_linear(vars.R(s), vars.y0(s));
  out.domain = domain;
  if (domain == Domain::Orthant) out.orthant_multiplier = detail::slack_matrix(slack, n + 1, s);
  out.stats = detail::make_stats(s, seconds);
  return out;
}

/// E[x_i]
inline QuadraticForm mean_of(Eigen::Index n, Eigen::Index i) { return QuadraticForm::coordinate(n, i); }
/// E[x_i²]
inline QuadraticForm second_moment_of(Eigen::Index n, Eigen::Index i) { return QuadraticForm::product(n, i, i); }
/// E[x_i x_j]
inline QuadraticForm cross_moment_of(Eigen::Index n, Eigen::Index i, Eigen::Index j) {
  return QuadraticForm::product(n, i, j);
}

/// π({QV ≥ -1}) ≥ 1/b
inline double probability_bound(const LyapunovCertificate& cert) { return 1.0 / cert.b(); }

inline double shift_for_mass(double b, double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw AnalysisError(AnalysisErrc::InvalidArgument, "mass parameter must lie in (0, 1)");
  }
  return (1.0 - (1.0 - epsilon) * b) / epsilon;
}

/// Level set {QV ≥ -1 + δ} holding stationary mass ≥ 1 - ε.
inline MassLevelSet shift_for_mass(const LyapunovCertificate& cert, double epsilon) {
  MassLevelSet out;
  out.epsilon = epsilon;
  out.delta = shift_for_mass(cert.b(), epsilon);
  out.threshold = -1.0 + out.delta;
  out.qv = cert.qv;
  LevelSet geometry;
  try {
    geometry = level_set_ellipsoid(cert.qv, out.threshold);
  } catch (const GeneratorError&) {
    out.geometry = LevelSetGeometry::Degenerate;
    return out;
  }
  if (std::holds_alternative<EmptyLevelSet>(geometry)) {
    throw AnalysisError(AnalysisErrc::EmptySet, "level set {QV ≥ " + std::to_string(out.threshold) + "} is empty");
  }
  if (std::holds_alternative<UnboundedLevelSet>(geometry)) {
    out.geometry = LevelSetGeometry::Unbounded;
    return out;
  }
  out.geometry = LevelSetGeometry::Ellipsoid;
  out.ellipsoid = std::get<Ellipsoid>(geometry);
  return out;
}

/// Min eigenvalues of every LMI of a certificate, rebuilt from (R, y0, b', λ)
/// and the orthant slack alone.
struct CertificateCheck {
  double r_min_eigenvalue = 0.0;
  double ceiling_min_eigenvalue = 0.0;
  std::vector<double> outside_min_eigenvalues;
  double multiplier_min = 0.0;  // min over λ and slack entries
  double elimination_residual = 0.0;
  double qv_mismatch = 0.0;  // stored qv vs recomputed, max abs entry
};

inline CertificateCheck check_certificate(const ReactionNetwork& net, const LyapunovCertificate& cert) {
  const auto n = static_cast<Eigen::Index>(net.dimension());
  if (cert.spec.R.rows() != n || cert.spec.y0.size() != n) {
    throw AnalysisError(AnalysisErrc::MalformedCertificate, "certificate dimension does not match the network");
  }
  CertificateCheck c;
  c.r_min_eigenvalue = min_eigenvalue(cert.spec.R);
  const QuadraticForm qv = generator_affine_part(net, cert.spec.R, cert.spec.y0);
  c.qv_mismatch = std::abs(qv.beta - cert.qv.beta);
  if (n > 0) {
    c.qv_mismatch = std::max({c.qv_mismatch, (qv.T - cert.qv.T).cwiseAbs().maxCoeff(),
                              (qv.u - cert.qv.u).cwiseAbs().maxCoeff()});
  }
  c.elimination_residual = nonlinear_residual(net, cert.spec);
  const bool orthant = cert.domain == Domain::Orthant;
  const auto gs = cert.region.quadratics();
  if (cert.lambda.size() != gs.size() || (orthant && cert.orthant_multipliers.size() != gs.size() + 1)) {
    throw AnalysisError(AnalysisErrc::MalformedCertificate, "certificate multipliers do not match its region");
  }
  auto slack = [&](std::size_t k) -> Eigen::MatrixXd {
    if (!orthant) return Eigen::MatrixXd::Zero(n + 1, n + 1);
    return cert.orthant_multipliers[k];
  };
  c.multiplier_min = 0.0;
  for (const double l : cert.lambda) c.multiplier_min = std::min(c.multiplier_min, l);
  if (orthant) {
    for (const auto& N : cert.orthant_multipliers) {
      for (Eigen::Index i = 0; i < N.rows(); ++i) {
        for (Eigen::Index j = i + 1; j < N.cols(); ++j) c.multiplier_min = std::min(c.multiplier_min, N(i, j));
      }
    }
  }
  c.ceiling_min_eigenvalue = min_eigenvalue(psd_embedding(QuadraticForm::constant(n, cert.b_prime) - qv) - slack(0));
  for (std::size_t j = 0; j < gs.size(); ++j) {
    const QuadraticForm main = -qv - QuadraticForm::constant(n, 1.0) - cert.lambda[j] * gs[j];
    c.outside_min_eigenvalues.push_back(min_eigenvalue(psd_embedding(main) - slack(j + 1)));
  }
  return c;
}

struct ErgodicityReport {
  bool psd_ok = false;
  bool drift_ok = false;
  bool radially_unbounded = false;
  bool nonlinear_eliminated = false;
  bool lemma1_ok = false;
  std::vector<std::string> failures;

  bool passed() const { return psd_ok && drift_ok && radially_unbounded && nonlinear_eliminated && lemma1_ok; }
};

/// null(R) ∩ ℝⁿ₊ = {0}, decided by maximizing 1ᵀNc over Nc ≥ 0, |c| ≤ 1.
inline bool radially_unbounded_on_orthant(const Eigen::MatrixXd& R, double tol = 1e-9) {
  const Eigen::Index n = R.rows();
  if (n == 0) return true;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (R + R.transpose()));
  const double scale = eig.eigenvalues().cwiseAbs().maxCoeff();
  std::vector<Eigen::Index> cols;
  for (Eigen::Index k = 0; k < n; ++k) {
    if (eig.eigenvalues()(k) <= kCenterRecoveryThreshold * scale || scale == 0.0) cols.push_back(k);
  }
  if (cols.empty()) return true;
  Eigen::MatrixXd N(n, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) N.col(static_cast<Eigen::Index>(k)) = eig.eigenvectors().col(cols[k]);

  sdp::SdpProblem lp;
  std::vector<sdp::VarId> c;
  for (Eigen::Index k = 0; k < N.cols(); ++k) c.push_back(lp.add_variable("c" + std::to_string(k)));
  const Eigen::VectorXd colsum = N.colwise().sum().transpose();
  for (Eigen::Index k = 0; k < N.cols(); ++k) lp.set_objective(c[static_cast<std::size_t>(k)], -colsum(k));
  const Eigen::MatrixXd one = Eigen::MatrixXd::Ones(1, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    sdp::LmiBlock row{"(Nc)_" + std::to_string(i) + " >= 0", Eigen::MatrixXd::Zero(1, 1), {}};
    for (Eigen::Index k = 0; k < N.cols(); ++k) row.add_term(c[static_cast<std::size_t>(k)], N(i, k) * one);
    lp.add_block(std::move(row));
  }
  for (Eigen::Index k = 0; k < N.cols(); ++k) {
    lp.add_block({"c <= 1", one, {{c[static_cast<std::size_t>(k)], -one}}});
    lp.add_block({"c >= -1", one, {{c[static_cast<std::size_t>(k)], one}}});
  }
  const sdp::SdpSolution s = sdp::solve(lp);
  if (s.status != sdp::SdpStatus::Optimal) return false;
  return -s.objective <= tol;
}

inline ErgodicityReport ergodicity_certificate(const LyapunovCertificate& cert, const ReactionNetwork& net,
                                               double tol = 1e-6) {
  ErgodicityReport r;
  const CertificateCheck c = check_certificate(net, cert);
  r.psd_ok = c.r_min_eigenvalue >= -tol;
  if (!r.psd_ok) r.failures.push_back("R is not positive semidefinite (min eigenvalue " + std::to_string(c.r_min_eigenvalue) + ")");
  bool lmis = c.ceiling_min_eigenvalue >= -tol && c.multiplier_min >= -tol;
  for (const double e : c.outside_min_eigenvalues) lmis = lmis && e >= -tol;
  r.drift_ok = lmis;
  if (!r.drift_ok) r.failures.push_back("drift LMIs are violated at the stored solution");
  r.radially_unbounded = radially_unbounded_on_orthant(cert.spec.R);
  if (!r.radially_unbounded) r.failures.push_back("V is not radially unbounded on the orthant");
  r.nonlinear_eliminated = c.elimination_residual <= kEqualityTolerance;
  for (const auto& t : net.transitions()) {
    if (!t.is_affine() && (t.change.array() >= 0).all()) r.nonlinear_eliminated = false;
  }
  if (!r.nonlinear_eliminated) r.failures.push_back("order-2 transitions are not eliminated");
  r.lemma1_ok = cert.b_prime >= -tol;
  if (!r.lemma1_ok) r.failures.push_back("Lemma 1 violated: b' = " + std::to_string(cert.b_prime) + " < 0, so b < 1");
  return r;
}

// JSON --------------------------------------------------------------------

namespace detail {

inline nlohmann::json matrix_json(const Eigen::MatrixXd& M) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline nlohmann::json vector_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

inline Eigen::MatrixXd json_matrix(const nlohmann::json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows > 0 ? static_cast<Eigen::Index>(j.at(0).size()) : 0;
  Eigen::MatrixXd M(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (static_cast<Eigen::Index>(j.at(static_cast<std::size_t>(i)).size()) != cols) {
      throw AnalysisError(AnalysisErrc::MalformedCertificate, "ragged matrix");
    }
    for (Eigen::Index k = 0; k < cols; ++k) M(i, k) = j.at(static_cast<std::size_t>(i)).at(static_cast<std::size_t>(k)).get<double>();
  }
  return M;
}

inline Eigen::VectorXd json_vector(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace detail

inline nlohmann::json region_to_json(const RegionD& d) {
  if (d.kind == RegionD::Kind::Ball) {
    return {{"kind", "ball"}, {"center", detail::vector_json(d.center)}, {"radius2", d.radius2}};
  }
  return {{"kind", "box"},
          {"lower", detail::vector_json(d.lower)},
          {"upper", detail::vector_json(d.upper)},
          {"encoding", d.encoding == RegionD::BoxEncoding::EnclosingBall ? "enclosing_ball" : "per_face"}};
}

inline RegionD region_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "ball") return RegionD::ball(detail::json_vector(j.at("center")), j.at("radius2").get<double>());
  if (kind == "box") {
    const auto enc = j.value("encoding", std::string("enclosing_ball")) == "per_face" ? RegionD::BoxEncoding::PerFace
                                                                                       : RegionD::BoxEncoding::EnclosingBall;
    return RegionD::box(detail::json_vector(j.at("lower")), detail::json_vector(j.at("upper")), enc);
  }
  throw AnalysisError(AnalysisErrc::MalformedCertificate, "unknown region kind '" + kind + "'");
}

inline nlohmann::json certificate_to_json(const LyapunovCertificate& c) {
  nlohmann::json j;
  j["schema"] = 1;
  j["species"] = c.species;
  j["R"] = detail::matrix_json(c.spec.R);
  j["y0"] = detail::vector_json(c.spec.y0);
  j["x0"] = c.spec.x0 ? detail::vector_json(*c.spec.x0) : nlohmann::json(nullptr);
  j["b_prime"] = c.b_prime;
  j["lambda"] = c.lambda;
  j["region"] = region_to_json(c.region);
  j["qv"] = {{"T", detail::matrix_json(c.qv.T)}, {"u", detail::vector_json(c.qv.u)}, {"beta", c.qv.beta}};
  j["domain"] = to_string(c.domain);
  j["orthant_multipliers"] = nlohmann::json::array();
  for (const auto& N : c.orthant_multipliers) j["orthant_multipliers"].push_back(detail::matrix_json(N));
  j["tolerances"] = {{"solver", c.tolerance}, {"equality", kEqualityTolerance}};
  j["solver_stats"] = {{"status", c.stats.status},
                       {"iterations", c.stats.iterations},
                       {"seconds", c.stats.seconds},
                       {"min_block_eigenvalue", c.stats.min_block_eigenvalue},
                       {"equality_residual", c.stats.equality_residual},
                       {"duality_gap", c.stats.duality_gap}};
  return j;
}

inline LyapunovCertificate certificate_from_json(const nlohmann::json& j) {
  try {
    if (j.at("schema").get<int>() != 1) {
      throw AnalysisError(AnalysisErrc::MalformedCertificate, "unsupported certificate schema");
    }
    LyapunovCertificate c;
    c.species = j.at("species").get<std::vector<std::string>>();
    const Eigen::MatrixXd R = detail::json_matrix(j.at("R"));
    const Eigen::VectorXd y0 = detail::json_vector(j.at("y0"));
    const auto n = static_cast<Eigen::Index>(c.species.size());
    if (R.rows() != n || R.cols() != n || y0.size() != n) {
      throw AnalysisError(AnalysisErrc::MalformedCertificate, "R/y0 sizes do not match the species list");
    }
    c.spec = LyapunovSpec::from_linear(R, y0);
    c.b_prime = j.at("b_prime").get<double>();
    c.lambda = j.at("lambda").get<std::vector<double>>();
    c.region = region_from_json(j.at("region"));
    const auto& q = j.at("qv");
    c.qv = QuadraticForm(detail::json_matrix(q.at("T")), detail::json_vector(q.at("u")), q.at("beta").get<double>());
    const std::string dom = j.value("domain", std::string("global"));
    c.domain = dom == "orthant" ? Domain::Orthant : Domain::Global;
    if (j.contains("orthant_multipliers")) {
      for (const auto& N : j.at("orthant_multipliers")) c.orthant_multipliers.push_back(detail::json_matrix(N));
    }
    if (j.contains("tolerances")) c.tolerance = j.at("tolerances").value("solver", 1e-8);
    if (j.contains("solver_stats")) {
      const auto& s = j.at("solver_stats");
      c.stats.status = s.value("status", std::string());
      c.stats.iterations = s.value("iterations", 0);
      c.stats.seconds = s.value("seconds", 0.0);
      c.stats.min_block_eigenvalue = s.value("min_block_eigenvalue", 0.0);
      c.stats.equality_residual = s.value("equality_residual", 0.0);
      c.stats.duality_gap = s.value("duality_gap", 0.0);
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw AnalysisError(AnalysisErrc::MalformedCertificate, std::string("certificate JSON: ") + e.what());
  } catch (const GeneratorError& e) {
    throw AnalysisError(AnalysisErrc::MalformedCertificate, std::string("certificate JSON: ") + e.what());
  }
}

inline void save_certificate(const LyapunovCertificate& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw AnalysisError(AnalysisErrc::InvalidArgument, "cannot write '" + path + "'");
  out << certificate_to_json(c).dump(2) << '\n';
}

inline LyapunovCertificate load_certificate(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw AnalysisError(AnalysisErrc::InvalidArgument, "cannot read '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw AnalysisError(AnalysisErrc::MalformedCertificate, std::string("certificate JSON: ") + e.what());
  }
  return certificate_from_json(j);
}

}  // namespace driftbound
