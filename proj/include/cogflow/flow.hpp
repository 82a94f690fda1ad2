#pragma once

#include <cmath>
#include <vector>

#include "cogflow/model.hpp"

namespace cogflow {

// Deterministic flow between jumps: classical fixed-step RK4 on
// dx/dt = v(x, y), its time reversal dw/du = -v(w, y), and the volume
// scaling of the reverse flow via the Liouville formula
// d(log J)/du = -div v(w(u), y).

struct Trajectory {
  std::vector<double> times;
  std::vector<Vec> points;
  CognitiveIndex cognitive = 0;
};

struct ReverseMeasureRatio {
  double ratio = 1.0;    // |x*(tau; B(x,eps), y)| / |B(x,eps)| in the eps->0 limit
  double tau = 0.0;
  Vec base_point;
  CognitiveIndex cognitive = 0;
  Vec end_point;         // x*(tau; x, y), the reversed base point
};

namespace detail {

// Number of full steps and length of the shortened final step so that the
// integration lands on t0 + duration exactly.
struct StepPlan {
  size_t full_steps;
  double last_step;
};

inline StepPlan plan_steps(double duration, double step) {
  if (duration <= 0) return {0, 0.0};
  size_t n = static_cast<size_t>(std::ceil(duration / step - 1e-9));
  if (n == 0) n = 1;
  return {n - 1, duration - static_cast<double>(n - 1) * step};
}

template <typename Deriv>
inline void rk4_step(const Deriv& f, Vec& x, double h) {
  const Vec k1 = f(x);
  const Vec k2 = f(x + (h * 0.5) * k1);
  const Vec k3 = f(x + (h * 0.5) * k2);
  const Vec k4 = f(x + h * k3);
  x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// Endpoint-only integration with no domain handling.
template <typename Deriv>
inline Vec integrate_raw(const Deriv& f, Vec x, double duration, double step) {
  const StepPlan plan = plan_steps(duration, step);
  for (size_t k = 0; k < plan.full_steps; ++k) rk4_step(f, x, step);
  if (plan.last_step > 0) rk4_step(f, x, plan.last_step);
  return x;
}

inline void enforce_boundary(const ModelSpec& m, Vec& x, const char* what) {
  if (m.boundary == BoundaryMode::Periodic) {
    x = m.domain.wrap(x);
    return;
  }
  if (m.domain.contains(x)) return;
  if (m.domain_policy == DomainPolicy::Lenient) {
    x = m.domain.clamp(x);
    return;
  }
  std::string msg = std::string(what) + ": trajectory exited the domain at (";
  for (int i = 0; i < x.n; ++i) msg += (i ? "," : "") + format_g17(x[i]);
  msg += ")";
  throw DomainExitError(msg);
}

}  // namespace detail

/// Endpoint of the forward flow after `duration` under fixed cognition y.
/// Boundary policy is applied at every step endpoint.
inline Vec flow_advance(const ModelSpec& m, Vec x, CognitiveIndex y, double duration,
                        double step) {
  const auto f = [&](const Vec& p) { return eval_velocity_raw(m, p, y); };
  const detail::StepPlan plan = detail::plan_steps(duration, step);
  for (size_t k = 0; k < plan.full_steps; ++k) {
    detail::rk4_step(f, x, step);
    detail::enforce_boundary(m, x, "flow_forward");
  }
  if (plan.last_step > 0) {
    detail::rk4_step(f, x, plan.last_step);
    detail::enforce_boundary(m, x, "flow_forward");
  }
  return x;
}

/// Forward flow recording every step point. Final time is t0 + duration
/// exactly; the last partial step is shortened.
inline Trajectory flow_forward(const ModelSpec& m, const Vec& x0, CognitiveIndex y,
                               double duration, double step, double t0 = 0.0) {
  Trajectory tr;
  tr.cognitive = y;
  const detail::StepPlan plan = detail::plan_steps(duration, step);
  tr.times.reserve(plan.full_steps + 2);
  tr.points.reserve(plan.full_steps + 2);
  tr.times.push_back(t0);
  tr.points.push_back(x0);

  const auto f = [&](const Vec& p) { return eval_velocity_raw(m, p, y); };
  Vec x = x0;
  for (size_t k = 0; k < plan.full_steps; ++k) {
    detail::rk4_step(f, x, step);
    detail::enforce_boundary(m, x, "flow_forward");
    tr.times.push_back(t0 + static_cast<double>(k + 1) * step);
    tr.points.push_back(x);
  }
  if (plan.last_step > 0) {
    detail::rk4_step(f, x, plan.last_step);
    detail::enforce_boundary(m, x, "flow_forward");
    tr.times.push_back(t0 + duration);
    tr.points.push_back(x);
  }
  return tr;
}

/// x*(s; x, y): the point reached by integrating the negated field for
/// time s from x. flow_reverse(flow_forward(x, s), s) ~ x.
inline Vec flow_reverse(const ModelSpec& m, Vec x, CognitiveIndex y, double s, double step) {
  const auto f = [&](const Vec& p) { return -1.0 * eval_velocity_raw(m, p, y); };
  const detail::StepPlan plan = detail::plan_steps(s, step);
  for (size_t k = 0; k < plan.full_steps; ++k) {
    detail::rk4_step(f, x, step);
    detail::enforce_boundary(m, x, "flow_reverse");
  }
  if (plan.last_step > 0) {
    detail::rk4_step(f, x, plan.last_step);
    detail::enforce_boundary(m, x, "flow_reverse");
  }
  return x;
}

/// div v(x, y) by second-order central differences with spacing h_div.
inline double velocity_divergence(const ModelSpec& m, const Vec& x, CognitiveIndex y,
                                  double h_div) {
  double div = 0;
  for (int i = 0; i < m.dim; ++i) {
    Vec xp = x, xm = x;
    xp[i] += h_div;
    xm[i] -= h_div;
    div += (eval_velocity_raw(m, xp, y)[i] - eval_velocity_raw(m, xm, y)[i]) / (2.0 * h_div);
  }
  return div;
}

namespace detail {

// Reverse trajectory augmented with the log volume ratio; both integrated
// jointly so the divergence is sampled at the RK4 stage points.
struct ReverseState {
  Vec w;
  double logj;
};

inline ReverseState reverse_with_log_ratio(const ModelSpec& m, const Vec& x, CognitiveIndex y,
                                           double tau, double step, double h_div) {
  struct Deriv {
    Vec dw;
    double dlogj;
  };
  const auto f = [&](const ReverseState& s) -> Deriv {
    return {-1.0 * eval_velocity_raw(m, s.w, y), -velocity_divergence(m, s.w, y, h_div)};
  };
  const auto do_step = [&](ReverseState& s, double h) {
    const Deriv k1 = f(s);
    const Deriv k2 = f({s.w + (h * 0.5) * k1.dw, s.logj + h * 0.5 * k1.dlogj});
    const Deriv k3 = f({s.w + (h * 0.5) * k2.dw, s.logj + h * 0.5 * k2.dlogj});
    const Deriv k4 = f({s.w + h * k3.dw, s.logj + h * k3.dlogj});
    s.w += (h / 6.0) * (k1.dw + 2.0 * k2.dw + 2.0 * k3.dw + k4.dw);
    s.logj += (h / 6.0) * (k1.dlogj + 2.0 * (k2.dlogj + k3.dlogj) + k4.dlogj);
  };
  ReverseState s{x, 0.0};
  const StepPlan plan = plan_steps(tau, step);
  for (size_t k = 0; k < plan.full_steps; ++k) do_step(s, step);
  if (plan.last_step > 0) do_step(s, plan.last_step);
  return s;
}

}  // namespace detail

/// Volume ratio of the reversed infinitesimal ball together with the
/// reversed point itself: ratio = exp(-int_0^tau div v(w(u), y) du).
inline ReverseMeasureRatio reverse_measure_ratio(const ModelSpec& m, const Vec& x,
                                                 CognitiveIndex y, double tau, double step,
                                                 double h_div = 1e-4) {
  const detail::ReverseState s = detail::reverse_with_log_ratio(m, x, y, tau, step, h_div);
  ReverseMeasureRatio r;
  r.ratio = std::exp(s.logj);
  r.tau = tau;
  r.base_point = x;
  r.cognitive = y;
  r.end_point = s.w;
  return r;
}

/// Reverse endpoint without boundary enforcement; callers that need
/// "mass cannot originate outside the domain" test containment themselves.
inline Vec flow_reverse_unchecked(const ModelSpec& m, const Vec& x, CognitiveIndex y, double s,
                                  double step) {
  const auto f = [&](const Vec& p) { return -1.0 * eval_velocity_raw(m, p, y); };
  return detail::integrate_raw(f, x, s, step);
}

}  // namespace cogflow
