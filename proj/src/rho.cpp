#include "rcov/rho.hpp"

#include "rcov/errors.hpp"

#include <array>
#include <cmath>

namespace rcov {
namespace {

// 20-point Gauss-Legendre nodes/weights on [-1, 1] (positive half; the rule
// is symmetric). Composite panels push the quadrature error well below the
// 1e-12 needed for the consistency calibration.
constexpr std::array<double, 10> kGlNodes = {
    0.0765265211334973, 0.2277858511416451, 0.3737060887154195,
    0.5108670019508271, 0.6360536807265150, 0.7463319064601508,
    0.8391169718222188, 0.9122344282513259, 0.9639719272779138,
    0.9931285991850949};
constexpr std::array<double, 10> kGlWeights = {
    0.1527533871307258, 0.1491729864726037, 0.1420961093183820,
    0.1316886384491766, 0.1181945319615184, 0.1019301198172404,
    0.0832767415767048, 0.0626720483341091, 0.0406014298003869,
    0.0176140071391521};

double gauss_pdf(double t) {
  return std::exp(-0.5 * t * t) * 0.3989422804014326779;
}

double gauss_upper_tail(double t) { return 0.5 * std::erfc(t / std::sqrt(2.0)); }

// integral of f over [lo, hi] with `panels` composite 20-point GL panels
template <class F>
double integrate(F f, double lo, double hi, int panels) {
  double total = 0.0;
  double w = (hi - lo) / panels;
  for (int p = 0; p < panels; ++p) {
    double a = lo + p * w, mid = a + 0.5 * w, half = 0.5 * w;
    double s = 0.0;
    for (int i = 0; i < 10; ++i) {
      double x = half * kGlNodes[i];
      s += kGlWeights[i] * (f(mid + x) + f(mid - x));
    }
    total += half * s;
  }
  return total;
}

// E[rho(t/a)] under N(0,1). rho is constant beyond a*c, so only [0, a*c]
// needs quadrature; the kink at a*b gets its own panel boundary.
double expected_rho(double a, const RhoParams& p) {
  auto f = [&](double t) { return rho_tanh(t / a, p) * gauss_pdf(t); };
  double core = integrate(f, 0.0, a * p.b, 24) + integrate(f, a * p.b, a * p.c, 48);
  return 2.0 * core + 2.0 * p.plateau() * gauss_upper_tail(a * p.c);
}

double default_consistency_a() {
  static const double cached =
      calibrate_consistency(RhoParams(1.5, 4.0, 1.540793, 0.8622731, 1.0));
  return cached;
}

}  // namespace

RhoParams::RhoParams() : a(default_consistency_a()) {}

RhoParams::RhoParams(double b, double c, double q1, double q2, double a)
    : b(b), c(c), q1(q1), q2(q2), a(a) {}

double RhoParams::plateau() const {
  return 0.5 * b * b + (q1 / q2) * std::log(std::cosh(q2 * (c - b)));
}

double RhoParams::mscale_target() const { return 0.5 * plateau(); }

void RhoParams::validate() const {
  if (!(b > 0.0) || !(c > b))
    throw Error("rho params require 0 < b < c");
  if (!(q1 > 0.0) || !(q2 > 0.0))
    throw Error("rho params require q1 > 0 and q2 > 0");
  if (!(a > 0.0)) throw Error("rho consistency factor must be positive");
}

RhoParams RhoParams::with_cutoffs(double b, double c) {
  RhoParams p;
  p.b = b;
  p.c = c;
  // keep psi continuous at b: q1 * tanh(q2 * (c - b)) = b
  p.q1 = b / std::tanh(p.q2 * (c - b));
  p.validate();
  p.a = calibrate_consistency(p);
  return p;
}

double rho_tanh(double t, const RhoParams& p) {
  double x = std::abs(t);
  if (x <= p.b) return 0.5 * x * x;
  if (x >= p.c) return p.plateau();
  return p.plateau() - (p.q1 / p.q2) * std::log(std::cosh(p.q2 * (p.c - x)));
}

double psi_tanh(double t, const RhoParams& p) {
  double x = std::abs(t);
  double v;
  if (x <= p.b)
    v = x;
  else if (x >= p.c)
    v = 0.0;
  else
    v = p.q1 * std::tanh(p.q2 * (p.c - x));
  return t < 0.0 ? -v : v;
}

double weight_tanh(double t, const RhoParams& p) {
  double x = std::abs(t);
  if (x <= p.b) return 1.0;  // psi(t) = t there, and the t -> 0 limit
  if (x >= p.c) return 0.0;
  return p.q1 * std::tanh(p.q2 * (p.c - x)) / x;
}

double calibrate_consistency(const RhoParams& p) {
  double target = p.mscale_target();
  // expected_rho is decreasing in a (larger a shrinks |t/a|)
  double lo = 1e-3, hi = 10.0;
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    if (expected_rho(mid, p) > target)
      lo = mid;
    else
      hi = mid;
    if (hi - lo < 1e-14 * hi) break;
  }
  return 0.5 * (lo + hi);
}

double RhoFunction::rho(double t) const {
  if (kind == Kind::Quadratic) return t * t;
  return rho_tanh(t, params);
}

double RhoFunction::psi(double t) const {
  if (kind == Kind::Quadratic) return 2.0 * t;
  return psi_tanh(t, params);
}

double RhoFunction::weight(double t) const {
  if (kind == Kind::Quadratic) return 1.0;
  return weight_tanh(t, params);
}

double RhoFunction::mscale_target() const {
  if (kind == Kind::Quadratic) return 1.0;
  return params.mscale_target();
}

double RhoFunction::consistency() const {
  if (kind == Kind::Quadratic) return 1.0;
  return params.a;
}

}  // namespace rcov
