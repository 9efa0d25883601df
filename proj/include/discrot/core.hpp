#ifndef DISCROT_CORE_HPP
#define DISCROT_CORE_HPP

// Model parameters, equal-arc geometry and the per-arc Gibbs integrals
//   Z_k(x)   = int_{S_k} exp<e_w, x> dw
//   m_k(x)   = int_{S_k} e_w exp<e_w, x> dw / Z_k(x)
//   Cov_k(x) = covariance of (cos w, sin w) under the same weight
// evaluated by composite Gauss-Legendre quadrature.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "discrot/error.hpp"

namespace discrot {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend Vec2 operator*(Vec2 a, double s) { return {s * a.x, s * a.y}; }
  Vec2& operator+=(Vec2 o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  friend bool operator==(Vec2, Vec2) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline Vec2 unit_vector(double angle) { return {std::cos(angle), std::sin(angle)}; }
inline Vec2 rotate(Vec2 a, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {c * a.x - s * a.y, s * a.x + c * a.y};
}
inline bool is_finite(Vec2 a) { return std::isfinite(a.x) && std::isfinite(a.y); }

/// Order parameter: planar mean of the spin direction, a point of the unit disk.
using Magnetization = Vec2;

/// Entries of the symmetric 2x2 covariance [[a, b], [b, c]] of (cos w, sin w).
struct ArcCovariance {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
};

struct ModelParams {
  double beta = 1.0;
  int q = 10;
  int nodes_per_arc = 32;

  void validate() const {
    if (!(beta > 0.0) || !std::isfinite(beta))
      throw InvalidInput("core-model", "beta must be a positive finite number");
    if (q < 3) throw InvalidInput("core-model", "q must be at least 3");
    if (nodes_per_arc < 8) throw InvalidInput("core-model", "nodes_per_arc must be at least 8");
  }
};

/// Arc S_k = [lo, hi) with k in 1..q.
struct Arc {
  int index = 1;
  double lo = 0.0;
  double hi = 0.0;
};

struct GaussLegendreRule {
  std::vector<double> nodes;    // on [-1, 1], ascending
  std::vector<double> weights;
};

/// Gauss-Legendre rule of order n by Newton iteration on P_n.
inline GaussLegendreRule gauss_legendre(int n) {
  if (n < 1) throw InvalidInput("core-model", "Gauss-Legendre order must be positive");
  GaussLegendreRule rule;
  rule.nodes.assign(n, 0.0);
  rule.weights.assign(n, 0.0);
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 1; j <= n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    // Recompute the derivative at the converged node for the weight.
    double p0 = 1.0, p1 = 0.0;
    for (int j = 1; j <= n; ++j) {
      const double p2 = p1;
      p1 = p0;
      p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
    }
    dp = n * (z * p0 - p1) / (z * z - 1.0);
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    rule.nodes[i] = -z;
    rule.nodes[n - 1 - i] = z;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

/// All Gibbs integrals of one arc, on a log scale for Z.
struct ArcMoments {
  double log_z = 0.0;
  Vec2 mean;
  ArcCovariance cov;
};

/// Immutable model: parameters plus precomputed quadrature nodes for every arc.
/// All evaluation methods are const and thread-safe.
class Model {
 public:
  explicit Model(ModelParams params) : params_(params) {
    params_.validate();
    rule_ = gauss_legendre(params_.nodes_per_arc);
    const int q = params_.q;
    const int n = params_.nodes_per_arc;
    width_ = kTwoPi / q;
    cos_.resize(static_cast<std::size_t>(q) * n);
    sin_.resize(cos_.size());
    weights_.resize(cos_.size());
    boundary_.resize(q);
    for (int k = 1; k <= q; ++k) {
      const Arc a = arc(k);
      const double mid = 0.5 * (a.lo + a.hi), half = 0.5 * width_;
      for (int i = 0; i < n; ++i) {
        const double w = mid + half * rule_.nodes[i];
        const std::size_t idx = static_cast<std::size_t>(k - 1) * n + i;
        cos_[idx] = std::cos(w);
        sin_[idx] = std::sin(w);
        weights_[idx] = half * rule_.weights[i];
      }
      boundary_[k - 1] = unit_vector(a.hi);
    }
  }

  const ModelParams& params() const noexcept { return params_; }
  double beta() const noexcept { return params_.beta; }
  int q() const noexcept { return params_.q; }
  double arc_width() const noexcept { return width_; }

  /// Wraps any integer onto 1..q.
  int wrap(int k) const noexcept {
    const int q = params_.q;
    return ((k - 1) % q + q) % q + 1;
  }

  Arc arc(int k) const {
    check_index(k);
    return {k, width_ * (k - 1), width_ * k};
  }

  /// e at the right endpoint 2*pi*k/q, the boundary crossed by a k -> k+1 jump.
  Vec2 boundary_direction(int k) const {
    check_index(k);
    return boundary_[k - 1];
  }

  double arc_partition_value(int k, Vec2 x) const {
    return std::exp(arc_moments(k, x, false).log_z);
  }
  double arc_log_partition(int k, Vec2 x) const { return arc_moments(k, x, false).log_z; }
  Vec2 arc_mean(int k, Vec2 x) const { return arc_moments(k, x, false).mean; }
  ArcCovariance arc_covariance(int k, Vec2 x) const { return arc_moments(k, x, true).cov; }

  ArcMoments arc_moments(int k, Vec2 x, bool with_covariance) const {
    check_index(k);
    if (!is_finite(x)) throw InvalidInput("core-model", "arc integrand parameter must be finite");
    const int panels = panel_count(x);
    if (panels == 1) return moments_on_nodes(k, x, with_covariance);
    return moments_on_panels(k, x, with_covariance, panels);
  }

  /// Closed-form int_{S_k} e_w dw (the weight-free arc integral).
  Vec2 arc_integral_of_direction(int k) const {
    const Arc a = arc(k);
    return {std::sin(a.hi) - std::sin(a.lo), std::cos(a.lo) - std::cos(a.hi)};
  }

 private:
  void check_index(int k) const {
    if (k < 1 || k > params_.q) throw InvalidInput("core-model", "arc index out of range");
  }

  // A single Gauss-Legendre panel resolves exp(|x| cos) well while the arc
  // spans a few Laplace widths 1/sqrt(|x|); wider arcs get split.
  int panel_count(Vec2 x) const {
    const double spread = width_ * std::sqrt(norm(x));
    return std::max(1, static_cast<int>(std::ceil(spread / 16.0)));
  }

  static ArcMoments finish(double shift, double s0, double s1, double s2, double s11, double s22,
                           double s12, bool with_covariance) {
    ArcMoments out;
    out.log_z = shift + std::log(s0);
    out.mean = {s1 / s0, s2 / s0};
    if (with_covariance) {
      const double a = s11 / s0 - out.mean.x * out.mean.x;
      const double c = s22 / s0 - out.mean.y * out.mean.y;
      const double b = s12 / s0 - out.mean.x * out.mean.y;
      out.cov = {std::max(a, 0.0), b, std::max(c, 0.0)};
    }
    return out;
  }

  ArcMoments moments_on_nodes(int k, Vec2 x, bool with_covariance) const {
    const int n = params_.nodes_per_arc;
    const std::size_t base = static_cast<std::size_t>(k - 1) * n;
    // Exponents are shifted by their maximum so Z stays representable for large |x|.
    double shift = -INFINITY;
    for (int i = 0; i < n; ++i)
      shift = std::max(shift, x.x * cos_[base + i] + x.y * sin_[base + i]);
    double s0 = 0, s1 = 0, s2 = 0, s11 = 0, s22 = 0, s12 = 0;
    for (int i = 0; i < n; ++i) {
      const double c = cos_[base + i], s = sin_[base + i];
      const double f = weights_[base + i] * std::exp(x.x * c + x.y * s - shift);
      s0 += f;
      s1 += f * c;
      s2 += f * s;
      if (with_covariance) {
        s11 += f * c * c;
        s22 += f * s * s;
        s12 += f * c * s;
      }
    }
    return finish(shift, s0, s1, s2, s11, s22, s12, with_covariance);
  }

  ArcMoments moments_on_panels(int k, Vec2 x, bool with_covariance, int panels) const {
    const int n = params_.nodes_per_arc;
    const Arc a = arc(k);
    const double pw = width_ / panels;
    std::vector<double> expo(static_cast<std::size_t>(panels) * n), cs(expo.size()),
        sn(expo.size()), wt(expo.size());
    double shift = -INFINITY;
    for (int p = 0; p < panels; ++p) {
      const double mid = a.lo + (p + 0.5) * pw;
      for (int i = 0; i < n; ++i) {
        const std::size_t idx = static_cast<std::size_t>(p) * n + i;
        const double w = mid + 0.5 * pw * rule_.nodes[i];
        cs[idx] = std::cos(w);
        sn[idx] = std::sin(w);
        wt[idx] = 0.5 * pw * rule_.weights[i];
        expo[idx] = x.x * cs[idx] + x.y * sn[idx];
        shift = std::max(shift, expo[idx]);
      }
    }
    double s0 = 0, s1 = 0, s2 = 0, s11 = 0, s22 = 0, s12 = 0;
    for (std::size_t idx = 0; idx < expo.size(); ++idx) {
      const double f = wt[idx] * std::exp(expo[idx] - shift);
      s0 += f;
      s1 += f * cs[idx];
      s2 += f * sn[idx];
      if (with_covariance) {
        s11 += f * cs[idx] * cs[idx];
        s22 += f * sn[idx] * sn[idx];
        s12 += f * cs[idx] * sn[idx];
      }
    }
    return finish(shift, s0, s1, s2, s11, s22, s12, with_covariance);
  }

  ModelParams params_;
  GaussLegendreRule rule_;
  double width_ = 0.0;
  std::vector<double> cos_, sin_, weights_;
  std::vector<Vec2> boundary_;
};

}  // namespace discrot

#endif  // DISCROT_CORE_HPP
