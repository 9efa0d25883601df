#ifndef DISCROT_SIMPLEX_HPP
#define DISCROT_SIMPLEX_HPP

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "discrot/error.hpp"

namespace discrot {

inline constexpr double kSimplexSumTolerance = 1e-12;

/// Probability vector on the arcs {1..q}. Stored 0-based; arc k lives at index k-1.
class SimplexVector {
 public:
  SimplexVector() = default;

  /// Validates nonnegativity and unit mass (to 1e-12). No renormalization.
  explicit SimplexVector(std::vector<double> weights) : w_(std::move(weights)) {
    if (w_.empty()) throw InvalidInput("consistency", "simplex vector must not be empty");
    double total = 0.0;
    for (double v : w_) {
      if (!std::isfinite(v) || v < 0.0)
        throw InvalidInput("consistency", "simplex weights must be finite and nonnegative");
      total += v;
    }
    if (std::abs(total - 1.0) > kSimplexSumTolerance)
      throw InvalidInput("consistency", "simplex weights must sum to 1");
  }

  /// Scales nonnegative weights to unit mass.
  static SimplexVector normalized(std::vector<double> weights) {
    double total = 0.0;
    for (double v : weights) {
      if (!std::isfinite(v) || v < 0.0)
        throw InvalidInput("consistency", "simplex weights must be finite and nonnegative");
      total += v;
    }
    if (!(total > 0.0)) throw InvalidInput("consistency", "simplex weights have zero mass");
    for (double& v : weights) v /= total;
    return SimplexVector(std::move(weights));
  }

  static SimplexVector uniform(int q) {
    return SimplexVector(std::vector<double>(static_cast<std::size_t>(q), 1.0 / q));
  }

  static SimplexVector dirac(int q, int k) {
    if (k < 1 || k > q) throw InvalidInput("consistency", "dirac arc index out of range");
    std::vector<double> w(static_cast<std::size_t>(q), 0.0);
    w[k - 1] = 1.0;
    return SimplexVector(std::move(w));
  }

  int size() const noexcept { return static_cast<int>(w_.size()); }
  /// Weight of arc k, 1-based.
  double operator()(int k) const { return w_[k - 1]; }
  double operator[](std::size_t i) const { return w_[i]; }
  std::span<const double> weights() const noexcept { return w_; }
  const std::vector<double>& vector() const noexcept { return w_; }

  double min_weight() const { return *std::min_element(w_.begin(), w_.end()); }
  bool interior() const { return min_weight() > 0.0; }

  /// nu'(k) -> nu'(k - shift): moves mass `shift` arcs forward.
  SimplexVector cyclic_shift(int shift) const {
    const int q = size();
    std::vector<double> out(w_.size());
    for (int i = 0; i < q; ++i) out[((i + shift) % q + q) % q] = w_[i];
    return SimplexVector(std::move(out));
  }

 private:
  std::vector<double> w_;
};

/// Half the l1 distance.
inline double tv_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return 0.5 * s;
}

inline double tv_distance(const SimplexVector& a, const SimplexVector& b) {
  return tv_distance(a.weights(), b.weights());
}

/// (1 - t) a + t b, renormalized against roundoff.
inline SimplexVector mix(const SimplexVector& a, const SimplexVector& b, double t) {
  std::vector<double> w(a.vector().size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::max(0.0, (1.0 - t) * a[i] + t * b[i]);
  return SimplexVector::normalized(std::move(w));
}

}  // namespace discrot

#endif  // DISCROT_SIMPLEX_HPP
