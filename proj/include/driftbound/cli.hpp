#pragma once

// driftbound <analyze|levelset|moments|simulate|verify> MODEL [flags]
//
// Exit codes: 0 success, 1 no certificate found or verification FAIL,
// 2 input error, 3 numerical failure or absorbed/overflowing simulation.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "driftbound/analysis.hpp"
#include "driftbound/moment_expr.hpp"
#include "driftbound/network.hpp"
#include "driftbound/reaction_dsl.hpp"
#include "driftbound/ssa.hpp"

namespace driftbound::cli {

enum ExitCode : int { kOk = 0, kInfeasible = 1, kInputError = 2, kNumericalFailure = 3 };

/// Thrown for malformed flags and unreadable files.
class InputError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

inline double number(const std::string& text, const std::string& flag) {
  const auto v = driftbound::detail::parse_real(text);
  if (!v || !std::isfinite(*v)) throw InputError(flag + ": '" + text + "' is not a number");
  return *v;
}

inline std::vector<double> numbers(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  for (const auto& part : split(text, ',')) out.push_back(number(part, flag));
  return out;
}

inline std::string vec(const Eigen::VectorXd& v, int precision = 6) {
  std::ostringstream os;
  os << std::setprecision(precision) << '(';
  for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v(i) + 0.0;
  os << ')';
  return os.str();
}

inline ReactionNetwork load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read model file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_model(buf.str(), path);
}

struct RegionFlags {
  std::string ball;
  double radius2 = 0.0;
  std::string box;
  bool per_face = false;
  std::string domain = "auto";

  void attach(CLI::App* app) {
    app->add_option("--ball", ball, "ball center c1,c2,...");
    app->add_option("--radius2", radius2, "squared ball radius");
    app->add_option("--box", box, "lo:hi per axis (comma separated), or lo,hi for every axis");
    app->add_flag("--per-face", per_face, "one S-procedure multiplier per box axis");
    app->add_option("--domain", domain, "auto, global or orthant")->check(CLI::IsMember({"auto", "global", "orthant"}));
  }

  RegionD region(const ReactionNetwork& net) const {
    const auto n = static_cast<Eigen::Index>(net.dimension());
    if (!ball.empty() && !box.empty()) throw InputError("--ball and --box are mutually exclusive");
    if (!ball.empty()) {
      const auto c = numbers(ball, "--ball");
      if (static_cast<Eigen::Index>(c.size()) != n) throw InputError("--ball needs one coordinate per species");
      if (!(radius2 > 0.0)) throw InputError("--ball needs --radius2 > 0");
      return RegionD::ball(Eigen::Map<const Eigen::VectorXd>(c.data(), n), radius2);
    }
    if (!box.empty()) {
      Eigen::VectorXd lo(n), hi(n);
      if (box.find(':') != std::string::npos) {
        const auto axes = split(box, ',');
        if (static_cast<Eigen::Index>(axes.size()) != n) throw InputError("--box needs one lo:hi per species");
        for (Eigen::Index i = 0; i < n; ++i) {
          const auto lh = split(axes[static_cast<std::size_t>(i)], ':');
          if (lh.size() != 2) throw InputError("--box: expected lo:hi, got '" + axes[static_cast<std::size_t>(i)] + "'");
          lo(i) = number(lh[0], "--box");
          hi(i) = number(lh[1], "--box");
        }
      } else {
        const auto lh = numbers(box, "--box");
        if (lh.size() != 2) throw InputError("--box: expected lo,hi or lo:hi per axis");
        lo.setConstant(lh[0]);
        hi.setConstant(lh[1]);
      }
      return RegionD::box(lo, hi, per_face ? RegionD::BoxEncoding::PerFace : RegionD::BoxEncoding::EnclosingBall);
    }
    // Default: ball at the deterministic fixed point.
    const DriftPair d = drift_matrices(net);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(d.A);
    if (n == 0 || !lu.isInvertible()) {
      throw InputError("drift matrix A is singular; pass --ball or --box to choose the region D");
    }
    const Eigen::VectorXd c = -lu.solve(d.B);
    const double r2 = 10.0 * c.squaredNorm();
    if (!(r2 > 0.0)) throw InputError("fixed point is the origin; pass --ball or --box to choose the region D");
    return RegionD::ball(c, r2);
  }

  Domain parsed_domain() const {
    if (domain == "global") return Domain::Global;
    if (domain == "orthant") return Domain::Orthant;
    return Domain::Auto;
  }
};

inline std::string describe(const RegionD& d) {
  std::ostringstream os;
  if (d.kind == RegionD::Kind::Ball) {
    os << "ball center " << vec(d.center) << " radius2 " << d.radius2;
  } else {
    os << "box " << vec(d.lower) << " to " << vec(d.upper)
       << (d.encoding == RegionD::BoxEncoding::PerFace ? " (per-face multipliers)" : " (enclosing ball)");
  }
  return os.str();
}

inline AnalysisOptions analysis_options(const RegionFlags& flags) {
  AnalysisOptions o;
  o.domain = flags.parsed_domain();
  if (const char* env = std::getenv("DRIFTBOUND_TOL")) {
    const auto v = driftbound::detail::parse_real(env);
    if (!v || !(*v > 0.0) || !std::isfinite(*v)) throw InputError(std::string("DRIFTBOUND_TOL: bad value '") + env + "'");
    o.solver.tolerance = *v;
  }
  return o;
}

inline void print_certificate(std::ostream& out, const LyapunovCertificate& c, const ReactionNetwork& net) {
  out << std::setprecision(6);
  out << "domain: " << to_string(c.domain) << '\n';
  out << "region: " << describe(c.region) << '\n';
  out << "b' = " << c.b_prime << '\n';
  out << "b = " << std::setprecision(10) << c.b() << std::setprecision(6) << '\n';
  out << "P(QV >= -1) >= " << std::setprecision(10) << probability_bound(c) << std::setprecision(6) << '\n';
  if (c.spec.x0) {
    out << "x0 = " << vec(*c.spec.x0) << '\n';
  } else {
    out << "x0 unavailable (R singular); y0 = R x0 = " << vec(c.spec.y0) << '\n';
  }
  out << "R =\n";
  for (Eigen::Index i = 0; i < c.spec.R.rows(); ++i) out << "  " << vec(c.spec.R.row(i).transpose()) << '\n';
  const ErgodicityReport r = ergodicity_certificate(c, net);
  out << "ergodicity: " << (r.passed() ? "PASS" : "FAIL") << " (psd " << (r.psd_ok ? "ok" : "fail") << ", drift "
      << (r.drift_ok ? "ok" : "fail") << ", radially unbounded " << (r.radially_unbounded ? "ok" : "fail")
      << ", nonlinear eliminated " << (r.nonlinear_eliminated ? "ok" : "fail") << ", b >= 1 "
      << (r.lemma1_ok ? "ok" : "fail") << ")\n";
  for (const auto& f : r.failures) out << "  " << f << '\n';
  out << "solver: " << c.stats.status << ", " << c.stats.iterations << " iterations, " << c.stats.seconds << " s\n";
}

struct GridAxis {
  double lo, hi, step;
  std::size_t count() const { return static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1; }
};

inline std::vector<GridAxis> parse_grid(const std::string& spec, std::size_t dim) {
  std::vector<GridAxis> axes;
  for (const auto& part : split(spec, ',')) {
    const auto f = split(part, ':');
    if (f.size() != 3) throw InputError("--grid: expected lo:hi:step per axis, got '" + part + "'");
    GridAxis a{number(f[0], "--grid"), number(f[1], "--grid"), number(f[2], "--grid")};
    if (!(a.step > 0.0) || !(a.hi >= a.lo)) throw InputError("--grid: need step > 0 and hi >= lo");
    axes.push_back(a);
  }
  if (axes.size() != dim) throw InputError("--grid needs one lo:hi:step per species");
  return axes;
}

inline std::size_t write_grid(const std::string& path, const std::vector<GridAxis>& axes, const QuadraticForm& qv,
                              const std::vector<std::string>& names) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << std::setprecision(12);
  for (const auto& name : names) out << name << ',';
  out << "qv\n";
  std::vector<std::size_t> idx(axes.size(), 0);
  std::size_t rows = 0;
  Eigen::VectorXd x(static_cast<Eigen::Index>(axes.size()));
  while (true) {
    for (std::size_t i = 0; i < axes.size(); ++i) {
      x(static_cast<Eigen::Index>(i)) = axes[i].lo + static_cast<double>(idx[i]) * axes[i].step;
      out << x(static_cast<Eigen::Index>(i)) << ',';
    }
    out << qv(x) << '\n';
    ++rows;
    std::size_t k = axes.size();
    while (k > 0) {
      --k;
      if (++idx[k] < axes[k].count()) break;
      idx[k] = 0;
      if (k == 0) return rows;
    }
    if (axes.empty()) return rows;
  }
}

inline std::vector<std::int64_t> default_initial_state(const ReactionNetwork& net) {
  const auto n = static_cast<Eigen::Index>(net.dimension());
  std::vector<std::int64_t> x(static_cast<std::size_t>(n), 0);
  const DriftPair d = drift_matrices(net);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(d.A);
  if (n > 0 && lu.isInvertible()) {
    const Eigen::VectorXd c = -lu.solve(d.B);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (std::isfinite(c(i)) && c(i) > 0.0 && c(i) < 1e12) x[static_cast<std::size_t>(i)] = std::llround(c(i));
    }
  }
  return x;
}

struct SimFlags {
  std::uint64_t seed = 1;
  double burnin = 100.0;
  std::size_t samples = 10000;
  double dt = 1.0;
  std::size_t trajectories = 1;
  bool parallel = false;

  void attach(CLI::App* app) {
    app->add_option("--seed", seed, "RNG seed");
    app->add_option("--burnin", burnin, "burn-in time");
    app->add_option("--samples", samples, "number of recorded states");
    app->add_option("--dt", dt, "recording interval");
    app->add_option("--trajectories", trajectories, "independent trajectories (seed xor index)");
    app->add_flag("--parallel", parallel, "run trajectories on threads");
  }

  SimulationConfig config(const ReactionNetwork& net) const {
    SimulationConfig c;
    c.seed = seed;
    c.burn_in = burnin;
    c.samples = samples;
    c.dt = dt;
    c.trajectories = trajectories;
    c.parallel = parallel;
    c.initial_state = default_initial_state(net);
    return c;
  }
};

inline std::vector<std::pair<std::string, QuadraticForm>> parse_functions(const std::string& list,
                                                                          const ReactionNetwork& net) {
  std::vector<std::pair<std::string, QuadraticForm>> out;
  for (const auto& e : split(list, ',')) out.emplace_back(e, parse_moment_expression(e, net));
  return out;
}

inline std::vector<double> parse_masses(const std::string& list) {
  std::vector<double> out;
  for (const auto& e : split(list, ',')) {
    const double v = number(e, "--mass");
    if (!(v > 0.0 && v < 1.0)) throw InputError("--mass: guaranteed mass must lie in (0, 1), got " + e);
    out.push_back(v);
  }
  return out;
}

}  // namespace detail

/// Runs one command; args exclude the program name.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Quadratic Lyapunov certificates for reaction networks", "driftbound"};
  app.require_subcommand(1);
  std::string model;
  detail::RegionFlags region;
  detail::SimFlags sim;

  auto* analyze = app.add_subcommand("analyze", "solve the level-set problem and report the certificate");
  analyze->add_option("model", model, "model file")->required();
  region.attach(analyze);
  bool json = false;
  std::string cert_out;
  analyze->add_flag("--json", json, "print the certificate as JSON");
  analyze->add_option("--certificate", cert_out, "write the certificate JSON here");

  auto* levelset = app.add_subcommand("levelset", "level sets with guaranteed stationary mass");
  levelset->add_option("model", model, "model file")->required();
  region.attach(levelset);
  std::string masses = "0.5,0.8,0.9";
  std::string grid, grid_out = "levelset_grid.csv";
  levelset->add_option("--mass", masses, "guaranteed masses 1-eps, comma separated");
  levelset->add_option("--grid", grid, "lo:hi:step per axis");
  levelset->add_option("--grid-out", grid_out, "CSV path for --grid");

  auto* moments = app.add_subcommand("moments", "upper bounds on stationary moments");
  moments->add_option("model", model, "model file")->required();
  std::string fs;
  moments->add_option("--f", fs, "functions, e.g. m,p,m^2,m*p")->required();
  moments->add_flag("--json", json, "print JSON");
  std::string moments_domain = "auto";
  moments->add_option("--domain", moments_domain, "auto, global or orthant")
      ->check(CLI::IsMember({"auto", "global", "orthant"}));

  auto* simulate = app.add_subcommand("simulate", "stochastic simulation");
  simulate->add_option("model", model, "model file")->required();
  sim.attach(simulate);
  std::string samples_out = "samples.csv";
  simulate->add_option("--out", samples_out, "sample CSV path (a .json sidecar is written next to it)");

  auto* verify = app.add_subcommand("verify", "certify, simulate and compare");
  verify->add_option("model", model, "model file")->required();
  region.attach(verify);
  sim.attach(verify);
  double verify_mass = 0.8;
  std::string verify_fs;
  std::string cert_in;
  verify->add_option("--mass", verify_mass, "guaranteed mass 1-eps");
  verify->add_option("--f", verify_fs, "moment functions to check (default: every species mean)");
  verify->add_option("--certificate", cert_in, "check this certificate instead of solving");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInputError;
  }

  try {
    if (verify->parsed() && verify->count("--samples") == 0) sim.samples = 100000;
    if (verify->parsed() && verify->count("--trajectories") == 0) {
      sim.trajectories = 4;
      sim.parallel = true;
    }

    const ReactionNetwork net = detail::load_model(model);
    const auto names = net.species_names();

    if (analyze->parsed()) {
      const AnalysisOptions opt = detail::analysis_options(region);
      const LyapunovCertificate cert = solve_levelset_problem(net, region.region(net), opt);
      if (!cert_out.empty()) save_certificate(cert, cert_out);
      if (json) {
        out << certificate_to_json(cert).dump(2) << '\n';
      } else {
        out << "model: " << model << " (" << net.dimension() << " species, " << net.reactions().size()
            << " reactions)\n";
        detail::print_certificate(out, cert, net);
      }
      return kOk;
    }

    if (levelset->parsed()) {
      const auto mass_list = detail::parse_masses(masses);
      std::vector<detail::GridAxis> axes;
      if (!grid.empty()) axes = detail::parse_grid(grid, net.dimension());
      const AnalysisOptions opt = detail::analysis_options(region);
      const LyapunovCertificate cert = solve_levelset_problem(net, region.region(net), opt);
      out << std::setprecision(6) << "b' = " << cert.b_prime << ", b = " << std::setprecision(10) << cert.b()
          << std::setprecision(6) << '\n';
      std::vector<MassLevelSet> sets;
      for (const double m : mass_list) {
        const MassLevelSet s = shift_for_mass(cert, 1.0 - m);
        sets.push_back(s);
        out << "mass >= " << m << ": delta = " << s.delta << ", set {QV >= " << s.threshold << "}";
        if (s.ellipsoid) {
          const auto [lengths, dirs] = s.ellipsoid->axes();
          out << "\n  center " << detail::vec(s.ellipsoid->center) << ", radius2 " << s.ellipsoid->radius2
              << ", semi-axes " << detail::vec(lengths);
        } else {
          out << "\n  " << (s.geometry == LevelSetGeometry::Unbounded ? "unbounded in R^n" : "degenerate (T singular)")
              << "; bounded within the orthant only if V is radially unbounded there";
        }
        out << '\n';
      }
      // Smaller guaranteed mass means a higher threshold, hence a subset.
      bool nested = true;
      for (std::size_t i = 0; i < sets.size(); ++i) {
        for (std::size_t j = 0; j < sets.size(); ++j) {
          if (mass_list[i] < mass_list[j] && sets[i].threshold < sets[j].threshold) nested = false;
        }
      }
      out << "nested: " << (nested ? "yes" : "no") << '\n';
      if (!axes.empty()) {
        const std::size_t rows = detail::write_grid(grid_out, axes, cert.qv, names);
        out << "grid: " << rows << " rows written to " << grid_out << '\n';
      }
      return nested ? kOk : kNumericalFailure;
    }

    if (moments->parsed()) {
      const auto funcs = detail::parse_functions(fs, net);
      detail::RegionFlags dom;
      dom.domain = moments_domain;
      const AnalysisOptions opt = detail::analysis_options(dom);
      nlohmann::json j = nlohmann::json::array();
      if (!json) out << std::left << std::setw(16) << "function" << "upper bound\n";
      for (const auto& [name, f] : funcs) {
        const MomentBound b = solve_moment_problem(net, f, opt);
        if (json) {
          j.push_back({{"function", name}, {"bound", b.bound}, {"domain", to_string(b.domain)},
                       {"iterations", b.stats.iterations}, {"seconds", b.stats.seconds}});
        } else {
          out << std::left << std::setw(16) << name << std::setprecision(10) << b.bound << '\n';
        }
      }
      if (json) out << j.dump(2) << '\n';
      return kOk;
    }

    if (simulate->parsed()) {
      const SampleSet s = driftbound::simulate(net, sim.config(net));
      write_samples_csv(s, samples_out);
      out << "samples: " << s.size() << " written to " << samples_out << '\n';
      const auto n = static_cast<Eigen::Index>(net.dimension());
      for (Eigen::Index i = 0; i < n; ++i) {
        const Estimate e = empirical_moments(s, mean_of(n, i));
        out << "mean " << names[static_cast<std::size_t>(i)] << " = " << std::setprecision(8) << e.estimate
            << " +- " << std::setprecision(3) << e.std_error << '\n';
      }
      return kOk;
    }

    if (verify->parsed()) {
      if (!(verify_mass > 0.0 && verify_mass < 1.0)) throw InputError("--mass must lie in (0, 1)");
      const auto n = static_cast<Eigen::Index>(net.dimension());
      std::vector<std::pair<std::string, QuadraticForm>> funcs;
      if (verify_fs.empty()) {
        for (Eigen::Index i = 0; i < n; ++i) funcs.emplace_back(names[static_cast<std::size_t>(i)], mean_of(n, i));
      } else {
        funcs = detail::parse_functions(verify_fs, net);
      }
      const AnalysisOptions opt = detail::analysis_options(region);
      bool pass = true;
      LyapunovCertificate cert;
      if (!cert_in.empty()) {
        cert = load_certificate(cert_in);
        if (cert.species != names) throw InputError("certificate species do not match the model");
        const ErgodicityReport r = ergodicity_certificate(cert, net);
        if (!r.passed()) {
          out << "certificate: FAIL\n";
          for (const auto& f : r.failures) out << "  " << f << '\n';
          out << "verify: FAIL\n";
          return kInfeasible;
        }
        out << "certificate: loaded, checks PASS\n";
      } else {
        cert = solve_levelset_problem(net, region.region(net), opt);
      }
      out << std::setprecision(6) << "b' = " << cert.b_prime << '\n';
      const MassLevelSet set = shift_for_mass(cert, 1.0 - verify_mass);
      const SampleSet s = driftbound::simulate(net, sim.config(net));
      std::vector<double> inside(s.size());
      for (std::size_t i = 0; i < s.size(); ++i) inside[i] = cert.qv.at(s.state(i)) >= set.threshold ? 1.0 : 0.0;
      const Estimate mass = batch_means(inside);
      const bool mass_ok = mass.estimate + 3.0 * mass.std_error >= verify_mass;
      pass = pass && mass_ok;
      out << "level set {QV >= " << set.threshold << "}: guaranteed " << verify_mass << ", empirical "
          << mass.estimate << " +- " << mass.std_error << (mass_ok ? "  ok" : "  VIOLATED") << '\n';
      for (const auto& [name, f] : funcs) {
        const MomentBound b = solve_moment_problem(net, f, opt);
        const Estimate e = empirical_moments(s, f);
        const bool ok = e.estimate - 3.0 * e.std_error <= b.bound * (1.0 + 1e-9) + 1e-9;
        pass = pass && ok;
        out << "E[" << name << "]: bound " << std::setprecision(10) << b.bound << ", empirical " << e.estimate
            << " +- " << std::setprecision(4) << e.std_error << (ok ? "  ok" : "  VIOLATED") << std::setprecision(6)
            << '\n';
      }
      out << "verify: " << (pass ? "PASS" : "FAIL") << '\n';
      return pass ? kOk : kInfeasible;
    }
  } catch (const driftbound::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const ExprError& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const NetworkError& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const AnalysisError& e) {
    err << "error: " << e.what() << '\n';
    switch (e.kind()) {
      case AnalysisErrc::Infeasible:
      case AnalysisErrc::CertificationImpossible:
      case AnalysisErrc::EmptySet:
        return kInfeasible;
      case AnalysisErrc::NumericalFailure:
        return kNumericalFailure;
      default:
        return kInputError;
    }
  } catch (const SimulationError& e) {
    err << "error: " << e.what();
    if (!e.state().empty()) {
      err << " at state (";
      for (std::size_t i = 0; i < e.state().size(); ++i) err << (i ? ", " : "") << e.state()[i];
      err << ")";
    }
    err << '\n';
    return e.kind() == SsaErrc::InvalidConfig ? kInputError : kNumericalFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kNumericalFailure;
  }
  return kInputError;
}

}  // namespace driftbound::cli
