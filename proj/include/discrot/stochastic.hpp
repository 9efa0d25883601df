#ifndef DISCROT_STOCHASTIC_HPP
#define DISCROT_STOCHASTIC_HPP

// Finite-N jump process on empirical distributions. Each particle in arc k
// jumps to arc k+1 at rate c(k, L_N), with c the limiting rates evaluated at
// the current empirical measure.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "discrot/consistency.hpp"
#include "discrot/core.hpp"
#include "discrot/dynamics.hpp"
#include "discrot/simplex.hpp"

namespace discrot {

struct OccupationState {
  std::vector<long> counts;
  long n_total = 0;

  static OccupationState from_counts(std::vector<long> counts) {
    long n = 0;
    for (long c : counts) {
      if (c < 0) throw InvalidInput("stochastic", "occupation counts must be nonnegative");
      n += c;
    }
    if (counts.empty() || n < 1) throw InvalidInput("stochastic", "need at least one particle");
    return {std::move(counts), n};
  }

  SimplexVector empirical() const {
    std::vector<double> w(counts.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = static_cast<double>(counts[i]) / n_total;
    return SimplexVector::normalized(std::move(w));
  }

  bool operator==(const OccupationState&) const = default;
};

/// Largest-remainder rounding of N * nu to integer counts; ties go to the
/// lowest arc index.
inline OccupationState round_to_counts(const SimplexVector& nu, long n) {
  if (n < 1) throw InvalidInput("stochastic", "N must be at least 1");
  const std::size_t q = static_cast<std::size_t>(nu.size());
  std::vector<long> counts(q);
  std::vector<double> rem(q);
  long assigned = 0;
  for (std::size_t i = 0; i < q; ++i) {
    const double target = nu[i] * static_cast<double>(n);
    counts[i] = static_cast<long>(std::floor(target));
    rem[i] = target - static_cast<double>(counts[i]);
    assigned += counts[i];
  }
  std::vector<std::size_t> order(q);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
  for (long left = n - assigned, j = 0; left > 0; --left, ++j) ++counts[order[j % q]];
  return {std::move(counts), n};
}

/// Counter-based generator: draw i is splitmix64(seed + i * golden gamma).
/// Identical (seed, counter) pairs give identical draws on every platform.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = seed_ + (++counter_) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  /// Standard exponential variate.
  double exponential() { return -std::log1p(-uniform()); }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

struct JumpPath {
  std::vector<double> event_times;  // event_times[0] = 0 is the initial state
  std::vector<OccupationState> states;
  std::uint64_t seed = 0;
};

struct SimulationOptions {
  bool lazy = false;
  /// Lazy mode re-solves the magnetization once the empirical measure has
  /// moved this far in TV since the last solve; 0 selects 1/(2N).
  double lazy_threshold = 0.0;
};

class SimulationError : public Error {
 public:
  SimulationError(const std::string& what, JumpPath partial)
      : Error(ErrorKind::Convergence, "stochastic", what), partial_(std::move(partial)) {}
  const JumpPath& partial_path() const noexcept { return partial_; }

 private:
  JumpPath partial_;
};

/// Gillespie simulation up to t_final. `observer(t, state)` is called for the
/// initial state and after every jump. Returns the number of jumps.
inline long simulate(const Model& model, const OccupationState& initial, double t_final,
                     std::uint64_t seed,
                     const std::function<void(double, const OccupationState&)>& observer,
                     const SimulationOptions& opts = {}) {
  const int q = model.q();
  if (static_cast<int>(initial.counts.size()) != q)
    throw InvalidInput("stochastic", "occupation length does not match q");
  if (initial.n_total < 1) throw InvalidInput("stochastic", "N must be at least 1");
  if (!(t_final > 0.0) || !std::isfinite(t_final))
    throw InvalidInput("stochastic", "t_final must be positive");

  OccupationState state = initial;
  const double n = static_cast<double>(state.n_total);
  const double lazy_threshold = opts.lazy_threshold > 0.0 ? opts.lazy_threshold : 0.5 / n;
  CounterRng rng(seed);

  std::vector<double> w(static_cast<std::size_t>(q));
  const auto refresh_weights = [&] {
    for (int i = 0; i < q; ++i) w[i] = static_cast<double>(state.counts[i]) / n;
  };
  refresh_weights();
  Magnetization m = solve_magnetization(model, w).m;
  std::vector<double> solved_at = w;
  std::vector<double> c = rates_for_magnetization(model, m);

  double t = 0.0;
  long jumps = 0;
  observer(t, state);
  for (;;) {
    double total = 0.0;
    for (int i = 0; i < q; ++i) total += static_cast<double>(state.counts[i]) * c[i];
    if (!(total > 0.0)) break;
    t += rng.exponential() / total;
    if (t > t_final) break;
    const double pick = rng.uniform() * total;
    double acc = 0.0;
    int k = q - 1;
    for (int i = 0; i < q; ++i) {
      if (state.counts[i] == 0) continue;
      acc += static_cast<double>(state.counts[i]) * c[i];
      if (pick < acc) {
        k = i;
        break;
      }
    }
    while (state.counts[k] == 0) k = (k + q - 1) % q;  // roundoff at the top of the cumulative sum
    --state.counts[k];
    ++state.counts[(k + 1) % q];
    ++jumps;
    refresh_weights();
    if (!opts.lazy || tv_distance(w, solved_at) >= lazy_threshold) {
      m = solve_magnetization(model, w, m).m;
      solved_at = w;
      c = rates_for_magnetization(model, m);
    }
    observer(t, state);
  }
  return jumps;
}

inline JumpPath simulate_path(const Model& model, const OccupationState& initial, double t_final,
                              std::uint64_t seed, const SimulationOptions& opts = {}) {
  JumpPath path;
  path.seed = seed;
  try {
    simulate(
        model, initial, t_final, seed,
        [&](double t, const OccupationState& s) {
          path.event_times.push_back(t);
          path.states.push_back(s);
        },
        opts);
  } catch (const ConvergenceError& e) {
    throw SimulationError(e.what(), std::move(path));
  }
  return path;
}

struct LlnRow {
  long n = 0;
  std::uint64_t seed = 0;
  double sup_tv = 0.0;
};

/// Grid spacing on which sup_t TV(X^N_t, phi(t, nu0)) is evaluated.
inline constexpr double kLlnGridStep = 1e-2;

/// sup-TV distance between the empirical process and the flow for every
/// (N, seed) pair, evaluated on a time grid of spacing kLlnGridStep. Rows are
/// sorted by N, then seed.
inline std::vector<LlnRow> lln_error(const Model& model, const SimplexVector& initial,
                                     std::span<const long> n_list, double t_final,
                                     std::span<const std::uint64_t> seeds,
                                     const SimulationOptions& opts = {}) {
  if (initial.size() != model.q()) throw InvalidInput("stochastic", "profile length does not match q");
  const auto flow = integrate_flow(model, initial, t_final, kLlnGridStep);
  const auto& grid = flow.times;

  std::vector<LlnRow> rows;
  for (long n : n_list) {
    const OccupationState start = round_to_counts(initial, n);
    for (std::uint64_t seed : seeds) {
      double sup = 0.0;
      std::size_t next = 0;
      std::vector<double> current(static_cast<std::size_t>(model.q()));
      const auto flush_until = [&](double t_limit, bool inclusive) {
        while (next < grid.size() && (grid[next] < t_limit || (inclusive && grid[next] <= t_limit))) {
          sup = std::max(sup, tv_distance(current, flow.states[next].weights()));
          ++next;
        }
      };
      simulate(
          model, start, t_final, seed,
          [&](double t, const OccupationState& s) {
            flush_until(t, false);
            for (std::size_t i = 0; i < current.size(); ++i)
              current[i] = static_cast<double>(s.counts[i]) / static_cast<double>(s.n_total);
          },
          opts);
      flush_until(t_final, true);
      rows.push_back({n, seed, sup});
    }
  }
  std::sort(rows.begin(), rows.end(), [](const LlnRow& a, const LlnRow& b) {
    return a.n != b.n ? a.n < b.n : a.seed < b.seed;
  });
  return rows;
}

inline double median(std::vector<double> values) {
  if (values.empty()) throw InvalidInput("stochastic", "median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t h = values.size() / 2;
  return values.size() % 2 ? values[h] : 0.5 * (values[h - 1] + values[h]);
}

}  // namespace discrot

#endif  // DISCROT_STOCHASTIC_HPP
