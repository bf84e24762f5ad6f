#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <queue>
#include <type_traits>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "qloc/errors.hpp"

namespace qloc {

struct QuadratureOptions {
  double rtol = 1e-10;
  double atol = 1e-14;
  int max_panels = 1 << 20;
  // Initial uniform subdivision; keeps narrow features (width ~ sigma inside a
  // much wider window) from being missed by the first 15-point rule.
  int initial_panels = 16;
};

struct QuadratureInfo {
  double error_estimate = 0.0;
  int panels = 0;
};

namespace detail {

// 15-point Kronrod rule with embedded 7-point Gauss rule on [-1, 1].
// Abscissae/weights are the standard QUADPACK dqk15 constants.
inline constexpr int kGk15Points = 15;
inline constexpr double kGkNodes[8] = {
    0.9914553711208126, 0.9491079123427585, 0.8648644233597691,
    0.7415311855993945, 0.5860872354676911, 0.4058451513773972,
    0.2077849550078985, 0.0};
inline constexpr double kGkWeights[8] = {
    0.02293532201052922, 0.06309209262997855, 0.10479001032225018,
    0.14065325971552591, 0.16900472663926790, 0.19035057806478540,
    0.20443294007529889, 0.20948214108472782};
// Gauss weights for nodes 1, 3, 5 (paired) and the center node 7.
inline constexpr double kGaussWeights[4] = {
    0.12948496616886969, 0.27970539148927666, 0.38183005050511894,
    0.41795918367346938};

inline double sup_norm(double v) { return std::abs(v); }

template <typename Derived>
double sup_norm(const Eigen::MatrixBase<Derived>& v) {
  return v.template lpNorm<Eigen::Infinity>();
}

template <class V>
void set_zero(V& v) {
  if constexpr (std::is_arithmetic_v<V>) {
    v = V(0);
  } else {
    v.setZero();
  }
}

template <class F, class V>
void gk15_panel(F&& f, double a, double b, V& kronrod, double& err) {
  const double h = 0.5 * (b - a);
  const double c = 0.5 * (a + b);

  V gauss = f(c) * kGaussWeights[3];
  kronrod = f(c) * kGkWeights[7];
  for (int i = 0; i < 7; ++i) {
    const double dx = h * kGkNodes[i];
    V pair = f(c - dx) + f(c + dx);
    kronrod += pair * kGkWeights[i];
    if (i % 2 == 1) gauss += pair * kGaussWeights[i / 2];
  }
  kronrod *= h;
  gauss *= h;
  err = sup_norm(V(kronrod - gauss));
}

}  // namespace detail

/// Globally adaptive Gauss-Kronrod (G7,K15) integration of f over [a, b].
/// The integrand may return double, Eigen::VectorXd, or Eigen::MatrixXd;
/// errors are measured in the sup norm. Panels are split worst-first until
/// the accumulated error estimate satisfies max(atol, rtol * |I|) or the
/// panel budget is exhausted, in which case a QuadratureError carrying the
/// achieved estimate is thrown.
template <class F>
auto integrate(F&& f, double a, double b, const QuadratureOptions& opts = {},
               QuadratureInfo* info = nullptr) {
  using V = std::decay_t<decltype(f(a))>;

  struct Panel {
    double a, b, err;
    V value;
    std::uint64_t id;
  };
  struct WorstFirst {
    bool operator()(const Panel& p, const Panel& q) const {
      if (p.err != q.err) return p.err < q.err;
      return p.id > q.id;  // deterministic tie-break
    }
  };

  std::priority_queue<Panel, std::vector<Panel>, WorstFirst> heap;
  V total = f(a);  // shape template for Eigen types
  detail::set_zero(total);
  double total_err = 0.0;
  std::uint64_t next_id = 0;
  int panels = 0;

  const int seeds = std::max(1, opts.initial_panels);
  for (int i = 0; i < seeds; ++i) {
    const double pa = a + (b - a) * i / seeds;
    const double pb = a + (b - a) * (i + 1) / seeds;
    Panel p;
    p.a = pa;
    p.b = pb;
    p.id = next_id++;
    detail::gk15_panel(f, pa, pb, p.value, p.err);
    total += p.value;
    total_err += p.err;
    ++panels;
    heap.push(std::move(p));
  }

  auto tolerance = [&] {
    return std::max(opts.atol, opts.rtol * detail::sup_norm(total));
  };

  while (total_err > tolerance() && panels < opts.max_panels) {
    Panel worst = heap.top();
    heap.pop();
    total -= worst.value;
    total_err -= worst.err;

    const double mid = 0.5 * (worst.a + worst.b);
    for (const auto& [pa, pb] : {std::pair{worst.a, mid}, std::pair{mid, worst.b}}) {
      Panel p;
      p.a = pa;
      p.b = pb;
      p.id = next_id++;
      detail::gk15_panel(f, pa, pb, p.value, p.err);
      total += p.value;
      total_err += p.err;
      heap.push(std::move(p));
    }
    ++panels;
  }

  if (info) {
    info->error_estimate = total_err;
    info->panels = panels;
  }
  if (total_err > tolerance()) {
    throw QuadratureError("adaptive quadrature did not converge", total_err,
                          tolerance());
  }
  return total;
}

/// Locally adaptive variant that streams accepted panels into a running sum
/// instead of keeping them alive. Use for large matrix-valued integrands
/// where the globally adaptive heap would hold one matrix per panel.
/// Each panel must meet the error share tol * (panel width / total width).
template <class F>
auto integrate_local(F&& f, double a, double b,
                     const QuadratureOptions& opts = {},
                     QuadratureInfo* info = nullptr) {
  using V = std::decay_t<decltype(f(a))>;

  const int seeds = std::max(1, opts.initial_panels);
  const double width = b - a;

  // Coarse pass to scale the relative tolerance.
  V total = f(a);
  detail::set_zero(total);
  {
    V coarse = total;
    double err;
    for (int i = 0; i < seeds; ++i) {
      detail::gk15_panel(f, a + width * i / seeds, a + width * (i + 1) / seeds,
                         coarse, err);
      total += coarse;
    }
  }
  const double tol = std::max(opts.atol, opts.rtol * detail::sup_norm(total));
  detail::set_zero(total);

  struct Interval {
    double a, b;
  };
  std::vector<Interval> stack;
  for (int i = seeds; i-- > 0;) {
    stack.push_back({a + width * i / seeds, a + width * (i + 1) / seeds});
  }

  double total_err = 0.0;
  int panels = 0;
  V value = total;
  while (!stack.empty()) {
    const Interval iv = stack.back();
    stack.pop_back();
    double err;
    detail::gk15_panel(f, iv.a, iv.b, value, err);
    ++panels;
    const double share = tol * ((iv.b - iv.a) / width);
    if (err <= share || panels >= opts.max_panels ||
        (iv.b - iv.a) <= 1e-14 * width) {
      total += value;
      total_err += err;
    } else {
      const double mid = 0.5 * (iv.a + iv.b);
      stack.push_back({mid, iv.b});
      stack.push_back({iv.a, mid});
    }
  }

  if (info) {
    info->error_estimate = total_err;
    info->panels = panels;
  }
  if (total_err > tol) {
    throw QuadratureError("adaptive quadrature did not converge", total_err,
                          tol);
  }
  return total;
}

}  // namespace qloc
