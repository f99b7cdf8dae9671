#pragma once

// Gillespie direct-method simulation, recorded on a time grid after burn-in so
// that sample averages estimate stationary expectations without hold-time
// weighting.

#include <cmath>
#include <cstdint>
#include <exception>
#include <fstream>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "driftbound/error.hpp"
#include "driftbound/generator.hpp"
#include "driftbound/network.hpp"

namespace driftbound {

enum class SsaErrc { AbsorbedState, Overflow, EmptySampleSet, InvalidConfig };

class SimulationError : public KindedError<SsaErrc> {
 public:
  SimulationError(SsaErrc kind, const std::string& message, std::vector<std::int64_t> state = {}, double time = 0.0)
      : KindedError(kind, message), state_(std::move(state)), time_(time) {}

  const std::vector<std::int64_t>& state() const noexcept { return state_; }
  double time() const noexcept { return time_; }

 private:
  std::vector<std::int64_t> state_;
  double time_;
};

struct SimulationConfig {
  std::uint64_t seed = 0;
  double burn_in = 100.0;
  double dt = 1.0;
  std::size_t samples = 10000;  // total, split across trajectories
  std::vector<std::int64_t> initial_state;  // empty: all zeros
  std::size_t trajectories = 1;
  bool parallel = false;

  void validate(std::size_t dim) const {
    if (!(burn_in >= 0.0) || !std::isfinite(burn_in)) {
      throw SimulationError(SsaErrc::InvalidConfig, "burn-in must be finite and ≥ 0");
    }
    if (!(dt > 0.0) || !std::isfinite(dt)) throw SimulationError(SsaErrc::InvalidConfig, "dt must be positive");
    if (samples == 0) throw SimulationError(SsaErrc::InvalidConfig, "sample count must be positive");
    if (trajectories == 0 || trajectories > samples) {
      throw SimulationError(SsaErrc::InvalidConfig, "trajectory count must lie in [1, samples]");
    }
    if (!initial_state.empty() && initial_state.size() != dim) {
      throw SimulationError(SsaErrc::InvalidConfig, "initial state has the wrong dimension");
    }
    for (const auto v : initial_state) {
      if (v < 0) throw SimulationError(SsaErrc::InvalidConfig, "initial state has a negative component");
    }
  }

  std::size_t samples_for(std::size_t trajectory) const {
    return samples / trajectories + (trajectory < samples % trajectories ? 1 : 0);
  }
};

/// Recorded states, row-major, in trajectory order.
struct SampleSet {
  std::vector<std::string> species;
  std::size_t dimension = 0;
  std::vector<std::int64_t> data;
  std::vector<double> times;
  std::vector<std::size_t> trajectory;
  SimulationConfig config;

  std::size_t size() const { return times.size(); }
  bool empty() const { return times.empty(); }

  std::span<const std::int64_t> state(std::size_t i) const { return {data.data() + i * dimension, dimension}; }

  Eigen::VectorXd point(std::size_t i) const {
    Eigen::VectorXd x(static_cast<Eigen::Index>(dimension));
    for (std::size_t k = 0; k < dimension; ++k) x(static_cast<Eigen::Index>(k)) = static_cast<double>(data[i * dimension + k]);
    return x;
  }

  bool operator==(const SampleSet& o) const {
    return species == o.species && data == o.data && times == o.times && trajectory == o.trajectory;
  }
};

namespace detail {

inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

struct TrajectoryResult {
  std::vector<std::int64_t> data;
  std::vector<double> times;
};

inline TrajectoryResult run_trajectory(const ReactionNetwork& net, const SimulationConfig& cfg, std::size_t index) {
  const std::size_t n = net.dimension();
  const auto& ts = net.transitions();
  const std::size_t want = cfg.samples_for(index);
  std::mt19937_64 rng(cfg.seed ^ static_cast<std::uint64_t>(index));

  std::vector<std::int64_t> x = cfg.initial_state.empty() ? std::vector<std::int64_t>(n, 0) : cfg.initial_state;
  std::vector<double> q(ts.size());
  TrajectoryResult out;
  out.data.reserve(want * n);
  out.times.reserve(want);

  double t = 0.0;
  std::size_t recorded = 0;
  double next = cfg.burn_in;
  while (recorded < want) {
    double total = 0.0;
    for (std::size_t k = 0; k < ts.size(); ++k) {
      q[k] = ts[k].rate(std::span<const std::int64_t>(x));
      total += q[k];
    }
    if (!(total > 0.0)) {
      throw SimulationError(SsaErrc::AbsorbedState, "chain absorbed: every propensity is zero", x, t);
    }
    const double t_jump = t - std::log(1.0 - uniform01(rng)) / total;
    while (recorded < want && next < t_jump) {
      out.data.insert(out.data.end(), x.begin(), x.end());
      out.times.push_back(next);
      ++recorded;
      next = cfg.burn_in + static_cast<double>(recorded) * cfg.dt;
    }
    if (recorded == want) break;
    t = t_jump;

    const double pick = uniform01(rng) * total;
    double acc = 0.0;
    std::size_t k = 0;
    for (; k + 1 < ts.size(); ++k) {
      acc += q[k];
      if (pick < acc) break;
    }
    while (q[k] == 0.0) --k;  // rounding at the top end
    for (std::size_t i = 0; i < n; ++i) {
      const int change = ts[k].change(static_cast<Eigen::Index>(i));
      if (__builtin_add_overflow(x[i], static_cast<std::int64_t>(change), &x[i]) ||
          x[i] > (std::int64_t{1} << 53)) {
        throw SimulationError(SsaErrc::Overflow, "species count exceeds the representable range", x, t);
      }
    }
  }
  return out;
}

}  // namespace detail

/// Trajectory i draws from mt19937_64(seed ⊕ i); output is identical for
/// serial and parallel runs.
inline SampleSet simulate(const ReactionNetwork& net, const SimulationConfig& config) {
  config.validate(net.dimension());
  std::vector<detail::TrajectoryResult> parts(config.trajectories);
  if (config.parallel && config.trajectories > 1) {
    std::vector<std::exception_ptr> errors(config.trajectories);
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < config.trajectories; ++i) {
      pool.emplace_back([&, i] {
        try {
          parts[i] = detail::run_trajectory(net, config, i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  } else {
    for (std::size_t i = 0; i < config.trajectories; ++i) parts[i] = detail::run_trajectory(net, config, i);
  }
  SampleSet s;
  s.species = net.species_names();
  s.dimension = net.dimension();
  s.config = config;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    s.data.insert(s.data.end(), parts[i].data.begin(), parts[i].data.end());
    s.times.insert(s.times.end(), parts[i].times.begin(), parts[i].times.end());
    s.trajectory.insert(s.trajectory.end(), parts[i].times.size(), i);
  }
  return s;
}

struct Estimate {
  double estimate = 0.0;
  double std_error = 0.0;
};

/// Mean with a batch-means standard error over ⌈√N⌉ contiguous batches.
inline Estimate batch_means(const std::vector<double>& values) {
  const std::size_t N = values.size();
  if (N == 0) throw SimulationError(SsaErrc::EmptySampleSet, "no samples");
  double total = 0.0;
  for (const double v : values) total += v;
  Estimate e{total / static_cast<double>(N), 0.0};
  const auto B = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(N))));
  if (B < 2) return e;
  std::vector<double> means;
  for (std::size_t j = 0; j < B; ++j) {
    const std::size_t lo = j * N / B;
    const std::size_t hi = (j + 1) * N / B;
    if (hi <= lo) continue;
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += values[i];
    means.push_back(s / static_cast<double>(hi - lo));
  }
  if (means.size() < 2) return e;
  double mbar = 0.0;
  for (const double m : means) mbar += m;
  mbar /= static_cast<double>(means.size());
  double var = 0.0;
  for (const double m : means) var += (m - mbar) * (m - mbar);
  var /= static_cast<double>(means.size() - 1);
  e.std_error = std::sqrt(var / static_cast<double>(means.size()));
  return e;
}

inline Estimate empirical_moments(const SampleSet& samples, const QuadraticForm& f) {
  if (samples.empty()) throw SimulationError(SsaErrc::EmptySampleSet, "no samples");
  if (static_cast<std::size_t>(f.dimension()) != samples.dimension) {
    throw SimulationError(SsaErrc::InvalidConfig, "function dimension does not match the samples");
  }
  std::vector<double> values(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) values[i] = f.at(samples.state(i));
  return batch_means(values);
}

/// Fraction of samples with qv(x) ≥ threshold.
inline double empirical_mass(const SampleSet& samples, const QuadraticForm& qv, double threshold) {
  if (samples.empty()) throw SimulationError(SsaErrc::EmptySampleSet, "no samples");
  std::size_t inside = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (qv.at(samples.state(i)) >= threshold) ++inside;
  }
  return static_cast<double>(inside) / static_cast<double>(samples.size());
}

inline nlohmann::json config_to_json(const SimulationConfig& c) {
  return {{"seed", c.seed},
          {"burn_in", c.burn_in},
          {"dt", c.dt},
          {"samples", c.samples},
          {"trajectories", c.trajectories},
          {"initial_state", c.initial_state},
          {"stream_rule", "mt19937_64(seed xor trajectory)"}};
}

/// CSV `t,<species...>` plus `<path>.json` with the configuration.
inline void write_samples_csv(const SampleSet& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw SimulationError(SsaErrc::InvalidConfig, "cannot write '" + path + "'");
  out << 't';
  for (const auto& name : s.species) out << ',' << name;
  out << '\n';
  for (std::size_t i = 0; i < s.size(); ++i) {
    out << s.times[i];
    for (const auto v : s.state(i)) out << ',' << v;
    out << '\n';
  }
  std::ofstream side(path + ".json");
  if (!side) throw SimulationError(SsaErrc::InvalidConfig, "cannot write '" + path + ".json'");
  nlohmann::json j = config_to_json(s.config);
  j["species"] = s.species;
  j["count"] = s.size();
  side << j.dump(2) << '\n';
}

}  // namespace driftbound
