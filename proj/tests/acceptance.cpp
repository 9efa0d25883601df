// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "discrot/discrot.hpp"
#include "oracles.hpp"

using namespace discrot;

namespace {

Model make(double beta, int q) { return Model(ModelParams{beta, q, 32}); }

struct Outcome {
  bool ok = true;
  std::ostringstream detail;

  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      detail << " [failed: " << what << "]";
    }
  }
};

int failures = 0;

void criterion(int id, const std::string& name, double time_limit_s, const std::function<void(Outcome&)>& body) {
  Outcome out;
  const auto start = std::chrono::steady_clock::now();
  try {
    body(out);
  } catch (const std::exception& e) {
    out.ok = false;
    out.detail << " [exception: " << e.what() << "]";
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (time_limit_s > 0 && secs >= time_limit_s) {
    out.ok = false;
    out.detail << " [runtime limit " << time_limit_s << " s exceeded]";
  }
  if (!out.ok) ++failures;
  std::printf("%s criterion %d: %s (%.2f s)%s\n", out.ok ? "PASS" : "FAIL", id, name.c_str(), secs,
              out.detail.str().c_str());
  std::fflush(stdout);
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

int main() {
  criterion(1, "equidistribution is a fixed point of the flow", 1.0, [](Outcome& o) {
    for (auto [beta, q] : {std::pair{2.3, 10}, {3.0, 10}, {50.0, 100}}) {
      const double f = max_abs(vector_field(make(beta, q), SimplexVector::uniform(q)));
      o.detail << " |F|=" << f;
      o.require(f <= 1e-12, "sup norm of F at equidistribution");
    }
  });

  criterion(2, "closed-form eigenvalues match the numeric spectrum", 5.0, [](Outcome& o) {
    for (auto [beta, q] : {std::pair{3.0, 10}, {50.0, 100}}) {
      const Model m = make(beta, q);
      const auto sp = eq_eigenvalues(m);
      const double mismatch = match_spectra(sp.eigenvalues, numeric_eigenvalues(eq_matrix(m).entries)).max_mismatch;
      o.detail << " mismatch(" << beta << "," << q << ")=" << mismatch;
      o.require(mismatch <= 1e-8, "spectrum match");
      o.require(sp.eigenvalues.back() == Complex(0.0, 0.0), "last eigenvalue is zero");
      if (q == 100) {
        int positive = 0;
        for (const auto& z : sp.eigenvalues) positive += z.real() > 0.0;
        o.detail << " positive=" << positive;
        o.require(positive == 2, "two eigenvalues with positive real part");
      }
    }
  });

  criterion(3, "Jacobian agrees with finite differences", 0.0, [](Outcome& o) {
    const Model m = make(3.0, 10);
    const auto compare = [&](const SimplexVector& nu, const Eigen::MatrixXd& jac) {
      const auto fd = oracle::fd_jacobian_zero_sum(m, nu, 1e-6);
      double err = 0.0;
      for (int l = 0; l < 9; ++l) err = std::max(err, (jac.col(l) - jac.col(9) - fd.col(l)).cwiseAbs().maxCoeff());
      return err;
    };
    const double eq_err = compare(SimplexVector::uniform(10), eq_matrix(m).entries);
    o.detail << " eq=" << eq_err;
    o.require(eq_err <= 1e-5, "closed-form matrix at equidistribution");
    std::mt19937_64 rng(301);
    double worst = 0.0;
    for (int i = 0; i < 5; ++i) {
      const auto nu = oracle::random_simplex(10, rng);
      worst = std::max(worst, compare(nu, jacobian_at(m, nu).entries));
    }
    o.detail << " random=" << worst;
    o.require(worst <= 1e-5, "general-point Jacobian");
  });

  criterion(4, "free energy is a Lyapunov function", 120.0, [](Outcome& o) {
    for (double beta : {2.3, 3.0}) {
      const Model m = make(beta, 10);
      std::mt19937_64 rng(401);
      double worst = -INFINITY;
      for (int i = 0; i < 1000; ++i) {
        const auto r = free_energy_rate(m, oracle::random_simplex(10, rng));
        worst = std::max(worst, r.as_double());
      }
      o.detail << " max_rate(" << beta << ")=" << worst;
      o.require(worst <= 1e-10, "rate nonpositive at random interior points");
      double zero_set = std::abs(free_energy_rate(m, SimplexVector::uniform(10)).as_double());
      const GibbsOrbit orbit(m);
      for (int j = 0; j < 20; ++j)
        zero_set = std::max(zero_set, std::abs(free_energy_rate(m, orbit.point(kTwoPi * j / 20).nu).as_double()));
      o.detail << " zero_set=" << zero_set;
      o.require(zero_set <= 1e-8, "rate vanishes at equidistribution and on the orbit");
    }
    const Model m = make(3.0, 10);
    std::mt19937_64 rng(402);
    const double h = 1e-4;
    double worst_rel = 0.0;
    for (int i = 0; i < 3; ++i) {
      const auto traj = integrate_flow(m, oracle::random_simplex(10, rng), 0.5, h, {1e-13, 1e-13, 1e-16, 50'000'000});
      for (std::size_t j : {1000u, 2500u, 4000u}) {
        const double fd = (free_energy(m, traj.states[j + 1]).value - free_energy(m, traj.states[j - 1]).value) /
                          (traj.times[j + 1] - traj.times[j - 1]);
        worst_rel = std::max(worst_rel, std::abs(fd / free_energy_rate(m, traj.states[j]).value - 1.0));
      }
    }
    o.detail << " fd_rel=" << worst_rel;
    o.require(worst_rel <= 1e-6, "rate matches finite differences along trajectories");
  });

  criterion(5, "flow commutes with rotation along the orbit", 60.0, [](Outcome& o) {
    const Model m = make(3.0, 10);
    const auto start = GibbsOrbit(m).point(0.0).nu;
    const FlowOptions tight{1e-11, 1e-12, 1e-14, 50'000'000};
    const auto step = integrate_flow(m, start, kTwoPi / 10, kTwoPi / 10, tight).states.back();
    const double shift_err = tv_distance(step, start.cyclic_shift(1));
    const auto full = integrate_flow(m, start, kTwoPi, kTwoPi, tight).states.back();
    const double period_err = tv_distance(full, start);
    o.detail << " shift=" << shift_err << " period=" << period_err;
    o.require(shift_err <= 1e-5, "one-arc shift after 2 pi / q");
    o.require(period_err <= 1e-5, "return after 2 pi");
  });

  criterion(6, "the orbit attracts starts below the equidistribution free energy", 0.0, [](Outcome& o) {
    const Model m = make(3.0, 10);
    const GibbsOrbit orbit(m);
    const double psi_eq = free_energy(m, SimplexVector::uniform(10)).value;
    std::mt19937_64 rng(601);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    int accepted = 0, drawn = 0;
    double worst_final = 0.0, worst_rise = 0.0;
    while (accepted < 20) {
      ++drawn;
      const auto nu0 = mix(orbit.point(kTwoPi * unif(rng)).nu, oracle::random_simplex(10, rng), unif(rng));
      if (!(free_energy(m, nu0).value < psi_eq)) continue;
      ++accepted;
      const auto traj = integrate_flow(m, nu0, 50.0, 0.5);
      double prev = INFINITY;
      for (std::size_t j = 0; j < traj.states.size(); ++j) {
        if (traj.times[j] < 25.0) continue;
        const double d = orbit.distance(traj.states[j], orbit.default_samples());
        worst_rise = std::max(worst_rise, d - prev);
        prev = d;
      }
      worst_final = std::max(worst_final, prev);
    }
    o.detail << " starts=" << accepted << "/" << drawn << " max_final_distance=" << worst_final
             << " max_rise=" << worst_rise;
    o.require(worst_final < 1e-2, "orbit distance at t = 50");
    o.require(worst_rise <= 1e-6, "orbit distance non-increasing over the second half");
  });

  criterion(7, "equidistribution has an unstable manifold", 0.0, [](Outcome& o) {
    const Model m = make(3.0, 10);
    const auto eq = SimplexVector::uniform(10);
    const auto stable = oracle::perturb(eq, oracle::cosine_mode(10, 2, 1e-4));
    const auto end_s = integrate_flow(m, stable, 5.0, 5.0, {1e-12, 1e-14, 1e-14, 50'000'000}).states.back();
    const double contraction = tv_distance(stable, eq) / tv_distance(end_s, eq);
    o.detail << " mode2_contraction=" << contraction;
    o.require(contraction >= 10.0, "mode-2 perturbation contracts tenfold");

    const auto unstable = oracle::perturb(eq, oracle::cosine_mode(10, 1, 1e-4));
    const double d0 = tv_distance(unstable, eq);
    double growth = 0.0;
    for (const auto& s : integrate_flow(m, unstable, 400.0, 0.5).states) {
      const double d = tv_distance(s, eq);
      if (d >= 0.1) break;
      growth = std::max(growth, d / d0);
    }
    o.detail << " mode1_growth_inside_ball=" << growth;
    o.require(growth >= 10.0, "mode-1 perturbation grows tenfold inside the 0.1 ball");

    int points = 0, disagreements = 0;
    for (int q : {3, 4, 5, 6, 8, 10, 15, 20, 50, 100})
      for (int i = 1; i <= 20; ++i) {
        ++points;
        const auto r = unstable_mode_check(make(2.0 + 4.9 * i, q));
        disagreements += (r.equivalent_criterion != r.spectral) + (r.not_purely_attractive != r.spectral);
      }
    o.detail << " grid=" << points << " disagreements=" << disagreements;
    o.require(points == 200 && disagreements == 0, "closed-form and spectral criteria agree");
  });

  criterion(8, "regime diagram structure", 30.0, [](Outcome& o) {
    const auto cells = regime_grid(2.0, 100.0, 980, 3, 100);
    long mismatches = 0, violations = 0, black = 0, nonuniq = 0, white = 0;
    for (const auto& c : cells) {
      const double s = std::sin(oracle::kPi / c.q);
      const bool uniq = c.beta * s * s < 1.0;
      const bool nonu = c.beta * (0.5 - c.q / (4 * oracle::kPi) * std::sin(2 * oracle::kPi / c.q)) > 1.0;
      mismatches += (uniq != c.label.uniqueness) + (nonu != c.label.non_uniqueness);
      violations += c.label.equidistribution_attractive && !c.label.non_uniqueness;
      black += c.label.uniqueness;
      nonuniq += c.label.non_uniqueness;
      white += c.label.equidistribution_attractive;
    }
    o.detail << " cells=" << cells.size() << " uniqueness=" << black << " non_uniqueness=" << nonuniq
             << " eq_attractive=" << white << " mismatches=" << mismatches << " violations=" << violations;
    o.require(mismatches == 0, "labels match independent arithmetic");
    o.require(violations == 0, "attractive equidistribution implies non-uniqueness");
    o.require(black > 0 && nonuniq > 0 && white > 0, "all regions populated");
  });

  criterion(9, "checkerboard fixed points", 0.0, [](Outcome& o) {
    const auto roots = checkerboard_fixed_points(make(6.0, 4));
    o.detail << " roots(6,4)=" << roots.size();
    o.require(roots.size() == 3 && roots[2] > 0.0 && roots[0] == -roots[2], "nontrivial pair at (6, 4)");
    const auto none = checkerboard_fixed_points(make(3.0, 10));
    o.require(none.size() == 1 && none[0] == 0.0, "only the trivial root at (3, 10)");
    double worst = 0.0;
    for (int q : {4, 6, 10, 40}) {
      const CheckerboardMap f(q, 32);
      const double h = 1e-4;
      const double fd = (f(h) - f(-h)) / (2 * h);
      worst = std::max(worst, std::abs(fd - (0.5 - q / (4 * oracle::kPi) * std::sin(2 * oracle::kPi / q))));
    }
    o.detail << " slope_err=" << worst;
    o.require(worst <= 1e-8, "slope at zero");
  });

  criterion(10, "Lagrangian vanishes along the flow", 0.0, [](Outcome& o) {
    const Model m = make(3.0, 10);
    std::mt19937_64 rng(1001);
    double worst_flow = 0.0, min_value = INFINITY;
    for (int i = 0; i < 100; ++i) {
      const auto nu = oracle::random_simplex(10, rng);
      const double v = lagrangian(m, nu, vector_field(m, nu)).value;
      worst_flow = std::max(worst_flow, v);
      min_value = std::min(min_value, v);
      auto u = vector_field(m, nu);
      const auto d = oracle::random_zero_sum(10, rng);
      for (int k = 0; k < 10; ++k) u[k] += 0.05 * d[k];
      min_value = std::min(min_value, lagrangian(m, nu, u).value);
    }
    o.detail << " max_on_flow=" << worst_flow << " min=" << min_value;
    o.require(worst_flow <= 1e-10, "zero cost on the flow");
    o.require(min_value >= 0.0, "nonnegative everywhere tested");
    const Model m4 = make(3.0, 4);
    const double w = 1.0 / kTwoPi;
    double grid_err = 0.0;
    for (int j : {1, 2}) {
      const auto u = oracle::cosine_mode(4, j, 1e-2);
      const double ref = oracle::lagrangian_grid_q4({w, w, w, w}, {u[0], u[1], u[2], u[3]}, 0.1, 1e-3);
      grid_err = std::max(grid_err, std::abs(lagrangian(m4, SimplexVector::uniform(4), u).value - ref));
    }
    o.detail << " grid_err=" << grid_err;
    o.require(grid_err <= 1e-4, "q = 4 grid oracle");
  });

  criterion(11, "law of large numbers for the jump process", 600.0, [](Outcome& o) {
    const Model m = make(3.0, 10);
    const auto nu0 = mix(SimplexVector::uniform(10), GibbsOrbit(m).point(0.0).nu, 0.8);
    std::vector<std::uint64_t> seeds;
    for (std::uint64_t s = 0; s < 20; ++s) seeds.push_back(s);
    const std::vector<long> ns{100, 1000, 10000};
    const auto rows = lln_error(m, nu0, ns, 5.0, seeds);
    std::vector<double> medians;
    for (long n : ns) {
      std::vector<double> v;
      for (const auto& r : rows)
        if (r.n == n) v.push_back(r.sup_tv);
      medians.push_back(median(v));
      o.detail << " median(" << n << ")=" << medians.back();
    }
    o.require(medians[0] > medians[1] && medians[1] > medians[2], "medians strictly decreasing");
    bool identical = true;
    for (std::uint64_t s : seeds) {
      const auto a = simulate_path(m, round_to_counts(nu0, 1000), 5.0, s);
      const auto b = simulate_path(m, round_to_counts(nu0, 1000), 5.0, s);
      identical = identical && a.event_times == b.event_times && a.states == b.states;
    }
    o.require(identical, "replay with the same seed is identical");
  });

  std::printf("%d of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
