#pragma once

namespace rcov {

// Constants of the bounded tanh loss family: quadratic core on [0, b],
// log-cosh blend on [b, c], constant plateau beyond c. The plateau height d
// and the scale-equation target delta_m = d/2 are derived, never stored.
struct RhoParams {
  double b = 1.5;
  double c = 4.0;
  double q1 = 1.540793;
  double q2 = 0.8622731;
  // Gaussian consistency factor of the M-scale: solves E[rho(t/a)] = d/2 for
  // t ~ N(0,1). Defaults to the numerically calibrated value for (b, c, q1, q2)
  // above.
  double a;

  RhoParams();
  RhoParams(double b, double c, double q1, double q2, double a);

  double plateau() const;        // d
  double mscale_target() const;  // delta_m = d/2

  // Custom cutoffs. q1 is rescaled so the derivative stays continuous at b,
  // and the consistency factor is recalibrated by Gaussian quadrature.
  static RhoParams with_cutoffs(double b, double c);

  void validate() const;  // throws Error on 0 < b < c violations
};

double rho_tanh(double t, const RhoParams& p);
double psi_tanh(double t, const RhoParams& p);
// psi(t)/t with the limit convention weight(0) = 1; exactly 0 for |t| >= c.
double weight_tanh(double t, const RhoParams& p);

// Solves E[rho(t/a)] = mscale_target() at the standard Gaussian by composite
// Gauss-Legendre quadrature and bisection.
double calibrate_consistency(const RhoParams& p);

// Loss family selector. Quadratic mode (rho = t^2) exists for the classical
// least-squares reduction used by oracle tests; its IRLS weights are the
// constant 1 (the psi(t)/t = 2 factor cancels in every weighted solve) and
// its scale equation degenerates to the root mean square.
struct RhoFunction {
  enum class Kind { Tanh, Quadratic };

  Kind kind = Kind::Tanh;
  RhoParams params{};

  double rho(double t) const;
  double psi(double t) const;
  double weight(double t) const;
  double mscale_target() const;  // quadratic: 1
  double consistency() const;    // quadratic: 1
  bool bounded() const { return kind == Kind::Tanh; }

  static RhoFunction tanh_default() { return RhoFunction{}; }
  static RhoFunction tanh_with(const RhoParams& p) {
    return RhoFunction{Kind::Tanh, p};
  }
  static RhoFunction quadratic() {
    return RhoFunction{Kind::Quadratic, RhoParams{}};
  }
};

}  // namespace rcov
