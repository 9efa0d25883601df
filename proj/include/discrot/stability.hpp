#ifndef DISCROT_STABILITY_HPP
#define DISCROT_STABILITY_HPP

// Linearization of the flow. The general Jacobian follows from implicit
// differentiation of the consistency equation,
//     dM/d rho = [I - sum_k nu'(k) W(k, M)]^{-1} sum_l rho(l) m_l,  W = beta Cov,
// and at the equidistribution it reduces to a circulant matrix whose spectrum
// is known in closed form.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "discrot/consistency.hpp"
#include "discrot/core.hpp"
#include "discrot/dynamics.hpp"
#include "discrot/simplex.hpp"

namespace discrot {

class SingularityError : public Error {
 public:
  SingularityError(const std::string& what, double determinant)
      : Error(ErrorKind::Singular, "stability", what), determinant_(determinant) {}
  double determinant() const noexcept { return determinant_; }

 private:
  double determinant_;
};

/// dF acting on perturbations rho; rows index the output arc, columns the
/// perturbed arc. Mass conservation: the column sums vanish.
struct JacobianMatrix {
  Eigen::MatrixXd entries;
};

using Complex = std::complex<double>;

inline JacobianMatrix jacobian_at(const Model& model, const SimplexVector& nu) {
  const int q = model.q();
  if (nu.size() != q) throw InvalidInput("stability", "profile length does not match q");
  const double beta = model.beta();
  const Magnetization m = solve_magnetization(model, nu).m;
  const Vec2 x = beta * m;

  std::vector<ArcMoments> mo(static_cast<std::size_t>(q));
  std::vector<double> c(mo.size());
  Eigen::Matrix2d a = Eigen::Matrix2d::Identity();
  for (int k = 1; k <= q; ++k) {
    mo[k - 1] = model.arc_moments(k, x, true);
    c[k - 1] = std::exp(beta * dot(model.boundary_direction(k), m) - mo[k - 1].log_z);
    const auto& cv = mo[k - 1].cov;
    a(0, 0) -= nu(k) * beta * cv.a;
    a(0, 1) -= nu(k) * beta * cv.b;
    a(1, 0) -= nu(k) * beta * cv.b;
    a(1, 1) -= nu(k) * beta * cv.c;
  }
  const double det = a.determinant();
  const Eigen::JacobiSVD<Eigen::Matrix2d> svd(a);
  const double smax = svd.singularValues()(0), smin = svd.singularValues()(1);
  // The ratio test alone misses the isotropic case (A = a I at the
  // equidistribution), so smin is also measured against the scale of A's terms.
  const double scale = 1.0 + (Eigen::Matrix2d::Identity() - a).norm();
  if (!(smin > 1e-12 * scale) || smax / smin > 1e12)
    throw SingularityError("I - sum_k nu(k) W(k, M) is numerically singular", det);
  const Eigen::Matrix2d a_inv = a.inverse();

  // dM per unit perturbation of arc l, and gradient of c_k with respect to M.
  std::vector<Eigen::Vector2d> dm(mo.size()), grad_c(mo.size());
  for (int k = 1; k <= q; ++k) {
    const Vec2 mk = mo[k - 1].mean;
    dm[k - 1] = a_inv * Eigen::Vector2d(mk.x, mk.y);
    const Vec2 e = model.boundary_direction(k);
    grad_c[k - 1] = beta * c[k - 1] * Eigen::Vector2d(e.x - mk.x, e.y - mk.y);
  }
  JacobianMatrix jac{Eigen::MatrixXd::Zero(q, q)};
  for (int k = 1; k <= q; ++k) {
    const int prev = model.wrap(k - 1);
    for (int l = 1; l <= q; ++l) {
      jac.entries(k - 1, l - 1) = nu(prev) * grad_c[prev - 1].dot(dm[l - 1]) -
                                  nu(k) * grad_c[k - 1].dot(dm[l - 1]);
    }
    jac.entries(k - 1, prev - 1) += c[prev - 1];
    jac.entries(k - 1, k - 1) -= c[k - 1];
  }
  return jac;
}

struct EqCoefficients {
  double c1 = 0.0;
  double c2 = 0.0;
};

/// c1 = 4 beta pi s^2 / D, c2 = 2 beta q s^2 / D with s = sin(pi/q),
/// D = 2 pi^2 - beta pi^2 + beta q^2 s^2. D = 0 exactly when
/// beta (1 - (q/pi)^2 s^2) = 2, where the linearization does not exist.
inline EqCoefficients eq_coefficients(const Model& model) {
  const double beta = model.beta();
  const int q = model.q();
  constexpr double pi = std::numbers::pi;
  const double s2 = std::pow(std::sin(pi / q), 2);
  const double den = 2.0 * pi * pi - beta * pi * pi + beta * q * q * s2;
  if (std::abs(den) <= 1e-12 * (2.0 * pi * pi + beta * pi * pi))
    throw SingularityError("beta (1 - (q/pi)^2 sin^2(pi/q)) = 2: linearization undefined", den);
  return {4.0 * beta * pi * s2 / den, 2.0 * beta * q * s2 / den};
}

/// Closed-form Jacobian at the equidistribution,
///   M(i,j) = q/(2 pi) [d_{j=i-1} - d_{j=i} + c1 sin(2 pi (i-j)/q)
///                      + c2 (cos(2 pi (i-j)/q) - cos(2 pi (i-j-1)/q))].
inline JacobianMatrix eq_matrix(const Model& model) {
  const int q = model.q();
  const auto [c1, c2] = eq_coefficients(model);
  const double scale = q / kTwoPi;
  JacobianMatrix out{Eigen::MatrixXd::Zero(q, q)};
  for (int i = 1; i <= q; ++i) {
    for (int j = 1; j <= q; ++j) {
      const double d = kTwoPi / q * (i - j);
      double v = c1 * std::sin(d) + c2 * (std::cos(d) - std::cos(d - kTwoPi / q));
      if (j == model.wrap(i - 1)) v += 1.0;
      if (j == i) v -= 1.0;
      out.entries(i - 1, j - 1) = scale * v;
    }
  }
  return out;
}

/// The same matrix assembled from the weight-free arc integrals:
///   dF(rho)(k) = q/(2 pi) (rho(k-1) - rho(k)) + beta/(2 pi) <v(k), dM>,
///   dM = q / (2 pi - beta pi (1 - (q/pi)^2 sin^2(pi/q))) sum_l rho(l) int_{S_l} e.
inline JacobianMatrix eq_matrix_from_arc_integrals(const Model& model) {
  const int q = model.q();
  const double beta = model.beta();
  constexpr double pi = std::numbers::pi;
  eq_coefficients(model);  // singularity guard
  const double s = q / pi * std::sin(pi / q);
  const double gain = q / (2.0 * pi - beta * pi * (1.0 - s * s));
  const double scale = q / kTwoPi;
  std::vector<Vec2> v(static_cast<std::size_t>(q));
  for (int k = 1; k <= q; ++k) {
    const Vec2 ik = model.arc_integral_of_direction(k);
    const Vec2 ip = model.arc_integral_of_direction(model.wrap(k - 1));
    v[k - 1] = {scale * (ik.x - ip.x) + ik.y, scale * (ik.y - ip.y) - ik.x};
  }
  JacobianMatrix out{Eigen::MatrixXd::Zero(q, q)};
  for (int k = 1; k <= q; ++k) {
    for (int l = 1; l <= q; ++l)
      out.entries(k - 1, l - 1) =
          beta / kTwoPi * gain * dot(v[k - 1], model.arc_integral_of_direction(l));
    out.entries(k - 1, model.wrap(k - 1) - 1) += scale;
    out.entries(k - 1, k - 1) -= scale;
  }
  return out;
}

/// Closed-form spectrum of eq_matrix. eigenvalues[j-1] belongs to the Fourier
/// mode u_j(l) = exp(2 pi i j l / q) / sqrt(q), j = 1..q (j = q is the
/// constant mode with eigenvalue 0).
struct SpectrumResult {
  std::vector<Complex> eigenvalues;
  double c1 = 0.0;
  double c2 = 0.0;
};

inline SpectrumResult eq_eigenvalues(const Model& model) {
  const int q = model.q();
  const auto [c1, c2] = eq_coefficients(model);
  const double scale = q / kTwoPi;
  const double t1 = kTwoPi / q;
  const double g = c2 * q / 2.0 - 1.0;
  SpectrumResult out{std::vector<Complex>(static_cast<std::size_t>(q)), c1, c2};
  const Complex lambda1 =
      scale * Complex(g * (1.0 - std::cos(t1)), g * std::sin(t1) - c1 * q / 2.0);
  out.eigenvalues[0] = lambda1;
  for (int j = 2; j <= q - 2; ++j) {
    const double tj = t1 * j;
    out.eigenvalues[j - 1] = scale * Complex(std::cos(tj) - 1.0, -std::sin(tj));
  }
  out.eigenvalues[q - 2] = std::conj(lambda1);
  out.eigenvalues[q - 1] = 0.0;
  return out;
}

inline std::vector<Complex> numeric_eigenvalues(const Eigen::MatrixXd& m) {
  Eigen::EigenSolver<Eigen::MatrixXd> solver(m, false);
  if (solver.info() != Eigen::Success)
    throw Error(ErrorKind::Convergence, "stability", "eigenvalue iteration failed");
  const auto& ev = solver.eigenvalues();
  return std::vector<Complex>(ev.data(), ev.data() + ev.size());
}

/// Minimum-cost perfect matching on a square cost matrix (Hungarian method).
/// Returns assignment[row] = column.
inline std::vector<int> min_cost_assignment(const std::vector<std::vector<double>>& cost) {
  const int n = static_cast<int>(cost.size());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> assignment(n, -1);
  for (int j = 1; j <= n; ++j)
    if (p[j] > 0) assignment[p[j] - 1] = j - 1;
  return assignment;
}

struct SpectrumMatch {
  std::vector<int> numeric_index;  // numeric_index[j] matches analytic[j]
  double max_mismatch = 0.0;
};

inline SpectrumMatch match_spectra(const std::vector<Complex>& analytic,
                                   const std::vector<Complex>& numeric) {
  if (analytic.size() != numeric.size())
    throw InvalidInput("stability", "spectra differ in size");
  std::vector<std::vector<double>> cost(analytic.size(), std::vector<double>(numeric.size()));
  for (std::size_t i = 0; i < analytic.size(); ++i)
    for (std::size_t j = 0; j < numeric.size(); ++j) cost[i][j] = std::abs(analytic[i] - numeric[j]);
  SpectrumMatch out;
  out.numeric_index = min_cost_assignment(cost);
  for (std::size_t i = 0; i < analytic.size(); ++i)
    out.max_mismatch = std::max(out.max_mismatch, cost[i][out.numeric_index[i]]);
  return out;
}

struct UnstableModeReport {
  bool not_purely_attractive = false;  // (q/2) c2 > 1
  double half_q_c2 = 0.0;
  bool equivalent_criterion = false;   // 2 > beta (1 - (q/pi)^2 sin^2(pi/q))
  double re_lambda1 = 0.0;             // analytic
  double max_numeric_real_part = 0.0;  // over the numeric spectrum of eq_matrix
  bool spectral = false;               // max_numeric_real_part > 0
};

/// Whether the lowest Fourier modes are expanded at the equidistribution.
/// Requires beta > 2.
inline UnstableModeReport unstable_mode_check(const Model& model) {
  if (!(model.beta() > 2.0))
    throw RegimeViolation("stability", "unstable-mode analysis assumes beta > 2");
  const auto spec = eq_eigenvalues(model);
  UnstableModeReport out;
  out.half_q_c2 = 0.5 * model.q() * spec.c2;
  out.not_purely_attractive = out.half_q_c2 > 1.0;
  out.equivalent_criterion = 2.0 > attractivity_indicator(model.beta(), model.q());
  out.re_lambda1 = spec.eigenvalues[0].real();
  double top = -std::numeric_limits<double>::infinity();
  for (const Complex& z : numeric_eigenvalues(eq_matrix(model).entries)) top = std::max(top, z.real());
  out.max_numeric_real_part = top;
  // The zero eigenvalue of the constant mode carries roundoff of order 1e-15.
  out.spectral = top > 1e-10;
  return out;
}

/// Orthogonal projectors on zero-sum perturbations: `unstable` keeps Fourier
/// modes 1 and q-1, `stable` keeps modes 2..q-2. stable + unstable equals the
/// projector onto zero-sum vectors.
struct ModeProjector {
  Eigen::MatrixXd stable;
  Eigen::MatrixXd unstable;
};

inline ModeProjector stable_manifold_projector(const Model& model) {
  const int q = model.q();
  if (q < 5) throw InvalidInput("stability", "mode projector needs q >= 5");
  ModeProjector out{Eigen::MatrixXd(q, q), Eigen::MatrixXd(q, q)};
  for (int k = 0; k < q; ++k) {
    for (int l = 0; l < q; ++l) {
      const double pu = 2.0 / q * std::cos(kTwoPi * (k - l) / q);
      out.unstable(k, l) = pu;
      out.stable(k, l) = (k == l ? 1.0 : 0.0) - 1.0 / q - pu;
    }
  }
  return out;
}

}  // namespace discrot

#endif  // DISCROT_STABILITY_HPP
