#ifndef DISCROT_ENERGY_HPP
#define DISCROT_ENERGY_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "discrot/consistency.hpp"
#include "discrot/core.hpp"
#include "discrot/simplex.hpp"

namespace discrot {

/// Unnormalized discrete free energy
///   psi'(nu') = S(nu'|uniform) + (beta/2)|M|^2 - sum_k nu'(k) log(q Z_k(beta M)).
/// The global infimum is not subtracted; `GibbsOrbit::psi_offset` supplies it.
struct FreeEnergyValue {
  double value = 0.0;
  double entropy_term = 0.0;
  double magnetization_term = 0.0;
  double log_partition_term = 0.0;
  Magnetization m;
};

inline FreeEnergyValue free_energy(const Model& model, const SimplexVector& nu,
                                   std::optional<Magnetization> warm = std::nullopt) {
  if (nu.size() != model.q()) throw InvalidInput("energy", "profile length does not match q");
  const int q = model.q();
  const Magnetization m = solve_magnetization(model, nu, warm).m;
  const Vec2 x = model.beta() * m;
  FreeEnergyValue out;
  out.m = m;
  for (int k = 1; k <= q; ++k) {
    const double w = nu(k);
    if (w == 0.0) continue;
    out.entropy_term += w * std::log(q * w);
    out.log_partition_term += w * (std::log(static_cast<double>(q)) + model.arc_log_partition(k, x));
  }
  out.magnetization_term = 0.5 * model.beta() * dot(m, m);
  out.value = out.entropy_term + out.magnetization_term - out.log_partition_term;
  return out;
}

/// Extended real for d psi'/dt: either finite or the -infinity sentinel.
struct FreeEnergyRate {
  bool minus_infinity = false;
  double value = 0.0;

  static FreeEnergyRate negative_infinity() { return {true, 0.0}; }
  double as_double() const {
    return minus_infinity ? -std::numeric_limits<double>::infinity() : value;
  }
};

/// d/dt psi'(phi(t, nu'))|_{t=0}
///   = sum_k c(k) nu'(k) log[nu'(k+1) Z_k / (nu'(k) Z_{k+1})].
/// Terms with nu'(k) = 0 vanish; nu'(k) > 0 with nu'(k+1) = 0 gives -infinity.
inline FreeEnergyRate free_energy_rate(const Model& model, const SimplexVector& nu,
                                       std::optional<Magnetization> warm = std::nullopt) {
  if (nu.size() != model.q()) throw InvalidInput("energy", "profile length does not match q");
  const int q = model.q();
  const Magnetization m = solve_magnetization(model, nu, warm).m;
  const Vec2 x = model.beta() * m;
  std::vector<double> log_z(static_cast<std::size_t>(q));
  for (int k = 1; k <= q; ++k) log_z[k - 1] = model.arc_log_partition(k, x);
  double total = 0.0;
  for (int k = 1; k <= q; ++k) {
    const double w = nu(k);
    if (w == 0.0) continue;
    const int next = model.wrap(k + 1);
    const double wn = nu(next);
    if (wn == 0.0) return FreeEnergyRate::negative_infinity();
    const double log_c = model.beta() * dot(model.boundary_direction(k), m) - log_z[k - 1];
    total += std::exp(log_c) * w *
             (std::log(wn) - std::log(w) + log_z[k - 1] - log_z[next - 1]);
  }
  return {false, total};
}

struct OrbitPoint {
  double theta = 0.0;
  SimplexVector nu;
  Magnetization m;
};

/// The circle of discretized continuous Gibbs measures,
///   nu_theta(k) = int_{S_k} e^{beta m* cos(w - theta)} dw / int e^{beta m* cos(w - theta)} dw.
/// For beta <= 2 it collapses onto the equidistribution.
class GibbsOrbit {
 public:
  explicit GibbsOrbit(const Model& model, int mstar_resolution = 512)
      : model_(&model), mstar_(continuous_mstar(model.beta(), mstar_resolution)) {}

  double mstar() const noexcept { return mstar_; }
  int default_samples() const noexcept { return 64 * model_->q(); }

  OrbitPoint point(double theta) const {
    theta = std::fmod(theta, kTwoPi);
    if (theta < 0.0) theta += kTwoPi;
    const int q = model_->q();
    if (mstar_ == 0.0) return {theta, SimplexVector::uniform(q), {0.0, 0.0}};
    const Vec2 m = mstar_ * unit_vector(theta);
    const Vec2 x = model_->beta() * m;
    std::vector<double> log_z(static_cast<std::size_t>(q));
    for (int k = 1; k <= q; ++k) log_z[k - 1] = model_->arc_log_partition(k, x);
    const double top = *std::max_element(log_z.begin(), log_z.end());
    std::vector<double> w(log_z.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(log_z[i] - top);
    return {theta, SimplexVector::normalized(std::move(w)), m};
  }

  /// psi'(orbit point): the minimum of psi' for beta > 2 (psi'(eq) otherwise).
  double psi_offset() const { return free_energy(*model_, point(0.0).nu).value; }

  /// Minimum TV distance from nu to the orbit points at theta_j = 2 pi j / n.
  /// With `refine`, the best sample is polished by golden-section search over
  /// its two neighbouring intervals; the result never exceeds the sampled one.
  double distance(const SimplexVector& nu, int theta_samples, bool refine = true) const {
    if (theta_samples < model_->q())
      throw InvalidInput("energy", "theta_samples must be at least q");
    const auto dist = [&](double theta) { return tv_distance(nu, point(theta).nu); };
    const double step = kTwoPi / theta_samples;
    double best = std::numeric_limits<double>::infinity();
    int best_j = 0;
    for (int j = 0; j < theta_samples; ++j) {
      const double d = dist(step * j);
      if (d < best) {
        best = d;
        best_j = j;
      }
    }
    if (!refine || mstar_ == 0.0) return best;
    constexpr double inv_phi = 0.6180339887498949;
    double lo = step * (best_j - 1), hi = step * (best_j + 1);
    double x1 = hi - inv_phi * (hi - lo), x2 = lo + inv_phi * (hi - lo);
    double f1 = dist(x1), f2 = dist(x2);
    while (hi - lo > 1e-12) {
      if (f1 < f2) {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - inv_phi * (hi - lo);
        f1 = dist(x1);
      } else {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + inv_phi * (hi - lo);
        f2 = dist(x2);
      }
    }
    return std::min({best, f1, f2});
  }

 private:
  const Model* model_;
  double mstar_;
};

inline OrbitPoint discretize_gibbs(const Model& model, double theta) {
  return GibbsOrbit(model).point(theta);
}

inline double orbit_distance(const Model& model, const SimplexVector& nu, int theta_samples,
                             bool refine = true) {
  return GibbsOrbit(model).distance(nu, theta_samples, refine);
}

struct LyapunovSample {
  double s = 0.0;
  double psi = 0.0;
  FreeEnergyRate rate;
};

/// psi' and d psi'/dt along nu(s) = from + s (to - from) for `samples` equally
/// spaced s in [s_min, s_max]. Points outside the simplex are dropped; when the
/// line leaves the simplex inside the range, the exit point (a weight exactly
/// zero) is appended.
inline std::vector<LyapunovSample> lyapunov_scan(const Model& model, const SimplexVector& from,
                                                 const SimplexVector& to, double s_min,
                                                 double s_max, int samples) {
  if (samples < 2) throw InvalidInput("energy", "need at least two scan samples");
  if (!(s_max > s_min)) throw InvalidInput("energy", "empty scan range");
  const std::size_t q = static_cast<std::size_t>(model.q());

  // Exit parameters of the line through the simplex, on either side.
  double s_exit_hi = std::numeric_limits<double>::infinity();
  double s_exit_lo = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < q; ++i) {
    const double d = to[i] - from[i];
    if (d < 0.0) s_exit_hi = std::min(s_exit_hi, from[i] / -d);
    if (d > 0.0) s_exit_lo = std::max(s_exit_lo, -from[i] / d);
  }
  const auto profile_at = [&](double s, std::optional<std::size_t> zero_at) {
    std::vector<double> w(q);
    for (std::size_t i = 0; i < q; ++i) w[i] = std::max(0.0, from[i] + s * (to[i] - from[i]));
    if (zero_at) w[*zero_at] = 0.0;
    return SimplexVector::normalized(std::move(w));
  };
  const auto exit_index = [&](double s_exit, bool upper) {
    std::size_t best = 0;
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < q; ++i) {
      const double d = to[i] - from[i];
      if ((upper && d < 0.0) || (!upper && d > 0.0)) {
        const double g = std::abs(from[i] + s_exit * d);
        if (g < gap) {
          gap = g;
          best = i;
        }
      }
    }
    return best;
  };

  std::vector<double> grid;
  for (int i = 0; i < samples; ++i) grid.push_back(s_min + (s_max - s_min) * i / (samples - 1));

  std::vector<LyapunovSample> out;
  const auto emit = [&](double s, std::optional<std::size_t> zero_at) {
    const SimplexVector nu = profile_at(s, zero_at);
    const auto fe = free_energy(model, nu);
    out.push_back({s, fe.value, free_energy_rate(model, nu, fe.m)});
  };
  if (s_exit_lo >= s_min && s_exit_lo <= s_max) emit(s_exit_lo, exit_index(s_exit_lo, false));
  for (double s : grid) {
    if (s > s_exit_lo && s < s_exit_hi) emit(s, std::nullopt);
  }
  if (s_exit_hi >= s_min && s_exit_hi <= s_max) emit(s_exit_hi, exit_index(s_exit_hi, true));
  return out;
}

}  // namespace discrot

#endif  // DISCROT_ENERGY_HPP
