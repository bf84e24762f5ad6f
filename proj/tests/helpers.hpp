#pragma once

// Test-side oracles, deliberately independent of the library's numerics:
// adaptive Simpson quadrature, high-order finite differences, Hermite
// function evaluation by recurrence, and a chi-squared tail probability.

#include <cmath>
#include <functional>
#include <vector>

namespace oracle {

// Recursive adaptive Simpson; plain and slow but independent of the
// Gauss-Kronrod machinery under test.
inline double simpson_rec(const std::function<double(double)>& f, double a,
                          double b, double fa, double fm, double fb,
                          double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol) {
    return left + right + (left + right - whole) / 15.0;
  }
  return simpson_rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) +
         simpson_rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a,
                        double b, double tol = 1e-12) {
  // Split into unit-ish panels first so narrow features are not missed.
  const int panels = std::max(8, static_cast<int>(std::ceil(b - a)));
  double total = 0.0;
  for (int i = 0; i < panels; ++i) {
    const double pa = a + (b - a) * i / panels;
    const double pb = a + (b - a) * (i + 1) / panels;
    const double m = 0.5 * (pa + pb);
    const double fa = f(pa), fm = f(m), fb = f(pb);
    const double whole = (pb - pa) / 6.0 * (fa + 4.0 * fm + fb);
    total += simpson_rec(f, pa, pb, fa, fm, fb, whole, tol / panels, 48);
  }
  return total;
}

// Five-point central first derivative, O(h^4).
inline double derivative(const std::function<double(double)>& f, double x,
                         double h = 1e-3) {
  return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) /
         (12.0 * h);
}

// Hermite-Gaussian mode function phi_q(x) for PSF width sigma, via the
// physicists' Hermite recurrence.
inline double hg_mode(int q, double x, double sigma) {
  const double u = x / (std::sqrt(2.0) * sigma);
  double h_prev = 1.0, h_cur = 2.0 * u;
  if (q == 0) h_cur = 1.0;
  for (int k = 2; k <= q; ++k) {
    const double h_next = 2.0 * u * h_cur - 2.0 * (k - 1) * h_prev;
    h_prev = h_cur;
    h_cur = h_next;
  }
  const double hq = q == 0 ? 1.0 : (q == 1 ? 2.0 * u : h_cur);
  double norm = std::pow(2.0 * M_PI * sigma * sigma, -0.25);
  for (int k = 1; k <= q; ++k) norm /= std::sqrt(2.0 * k);
  return norm * hq * std::exp(-x * x / (4.0 * sigma * sigma));
}

// Regularized upper incomplete gamma Q(a, x) (series + continued fraction),
// for chi-squared tail probabilities.
inline double gamma_q(double a, double x) {
  if (x < 0.0 || a <= 0.0) return 1.0;
  if (x == 0.0) return 1.0;
  const double lg = std::lgamma(a);
  if (x < a + 1.0) {
    // P(a,x) by series, return 1 - P.
    double term = 1.0 / a, sum = term, ap = a;
    for (int i = 0; i < 500; ++i) {
      ap += 1.0;
      term *= x / ap;
      sum += term;
      if (std::abs(term) < std::abs(sum) * 1e-16) break;
    }
    return 1.0 - sum * std::exp(-x + a * std::log(x) - lg);
  }
  // Q(a,x) by Lentz continued fraction.
  double b = x + 1.0 - a, c = 1e300, d = 1.0 / b, h = d;
  for (int i = 1; i <= 500; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < 1e-300) d = 1e-300;
    c = b + an / c;
    if (std::abs(c) < 1e-300) c = 1e-300;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) break;
  }
  return std::exp(-x + a * std::log(x) - lg) * h;
}

inline double chi2_pvalue(double stat, int dof) {
  return gamma_q(0.5 * dof, 0.5 * stat);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace oracle
