#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cogflow/common.hpp"
#include "cogflow/jsonutil.hpp"
#include "cogflow/parallel.hpp"
#include "cogflow/rng.hpp"

namespace cogflow {

// Breadth-oriented subsystem: a batch thread state |psi> evolving under a
// switching generator with one shared scalar Brownian motion,
//   d psi = [A_phi + (1/2) D D] psi dt + D psi dB,
// the induced matrix SDE for rho = sum |psi_j><psi_j|,
//   d rho = (A rho + rho A+ - (1/2)D+D rho - (1/2)rho D+D + D rho D+) dt
//         + (D rho + rho D+) dB,
// and its expectation, integrated deterministically. D is anti-Hermitian
// (D+ = -D), which makes every trace contribution cancel algebraically.

using cplx = std::complex<double>;
using CVec = std::vector<cplx>;

struct CMat {
  int n = 0;
  std::vector<cplx> a;

  CMat() = default;
  explicit CMat(int size) : n(size), a(static_cast<size_t>(size) * size) {}

  static CMat identity(int size) {
    CMat m(size);
    for (int i = 0; i < size; ++i) m(i, i) = 1.0;
    return m;
  }

  cplx& operator()(int i, int j) { return a[static_cast<size_t>(i) * n + j]; }
  cplx operator()(int i, int j) const { return a[static_cast<size_t>(i) * n + j]; }

  CMat& operator+=(const CMat& o) {
    for (size_t k = 0; k < a.size(); ++k) a[k] += o.a[k];
    return *this;
  }
  CMat& operator-=(const CMat& o) {
    for (size_t k = 0; k < a.size(); ++k) a[k] -= o.a[k];
    return *this;
  }
  CMat& operator*=(cplx s) {
    for (auto& v : a) v *= s;
    return *this;
  }
  friend CMat operator+(CMat x, const CMat& y) { return x += y; }
  friend CMat operator-(CMat x, const CMat& y) { return x -= y; }
  friend CMat operator*(cplx s, CMat x) { return x *= s; }

  CMat adjoint() const {
    CMat r(n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) r(i, j) = std::conj((*this)(j, i));
    return r;
  }

  cplx trace() const {
    cplx t = 0;
    for (int i = 0; i < n; ++i) t += (*this)(i, i);
    return t;
  }

  double frobenius() const {
    double s = 0;
    for (const auto& v : a) s += std::norm(v);
    return std::sqrt(s);
  }

  double hermiticity_defect() const {
    double s = 0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) s += std::norm((*this)(i, j) - std::conj((*this)(j, i)));
    return std::sqrt(s);
  }
};

inline void matmul_into(CMat& out, const CMat& x, const CMat& y) {
  std::fill(out.a.begin(), out.a.end(), cplx(0.0));
  out.n = x.n;
  for (int i = 0; i < x.n; ++i)
    for (int k = 0; k < x.n; ++k) {
      const cplx xik = x(i, k);
      if (xik == cplx(0.0)) continue;
      for (int j = 0; j < x.n; ++j) out(i, j) += xik * y(k, j);
    }
}

inline CMat matmul(const CMat& x, const CMat& y) {
  CMat r(x.n);
  matmul_into(r, x, y);
  return r;
}

inline CVec matvec(const CMat& x, const CVec& v) {
  CVec r(static_cast<size_t>(x.n));
  for (int i = 0; i < x.n; ++i) {
    cplx s = 0;
    for (int j = 0; j < x.n; ++j) s += x(i, j) * v[static_cast<size_t>(j)];
    r[static_cast<size_t>(i)] = s;
  }
  return r;
}

inline double vec_norm(const CVec& v) {
  double s = 0;
  for (const auto& z : v) s += std::norm(z);
  return std::sqrt(s);
}

/// Hermitian density matrix rho = sum_j |psi_j><psi_j|. Evolution keeps it
/// Hermitian; positive semidefiniteness holds at construction.
using DensityMatrix = CMat;

/// rho = sum_j psi_j psi_j^+, Hermitian PSD by construction.
inline DensityMatrix density_from_states(const std::vector<CVec>& states) {
  if (states.empty()) throw ConfigError("density_from_states: empty state list");
  const int n = static_cast<int>(states.front().size());
  for (const auto& s : states)
    if (static_cast<int>(s.size()) != n)
      throw ConfigError("density_from_states: state lengths differ");
  DensityMatrix rho(n);
  for (const auto& s : states)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        rho(i, j) += s[static_cast<size_t>(i)] * std::conj(s[static_cast<size_t>(j)]);
  return rho;
}

// ---------------------------------------------------------------------------

struct ThreadBatchState {
  CVec psi;
  int phi = 0;
};

enum class SwitchRule { Matrix, SoftmaxPsi };

struct SwitchingGeneratorSet {
  int n = 0;
  std::vector<CMat> generators;
  double switch_rate = 1.0;
  SwitchRule rule = SwitchRule::Matrix;
  std::vector<std::vector<double>> kernel;  // row-stochastic, m x m
  std::vector<CVec> centers;                // softmax-psi rule
  double beta = 0;
  std::vector<double> weights;
  CMat diffusion;

  int generator_count() const { return static_cast<int>(generators.size()); }
};

namespace detail {

inline int sample_switch_target(const SwitchingGeneratorSet& g, const ThreadBatchState& s,
                                CounterStream& rng) {
  const int m = g.generator_count();
  const double u = rng.next_unit();
  if (g.rule == SwitchRule::Matrix) {
    const auto& row = g.kernel[static_cast<size_t>(s.phi)];
    double cum = 0;
    for (int k = 0; k + 1 < m; ++k) {
      cum += row[static_cast<size_t>(k)];
      if (u < cum) return k;
    }
    return m - 1;
  }
  // softmax-psi: weight_k = prior_k * exp(-beta |psi - c_k|^2)
  std::vector<double> w(static_cast<size_t>(m));
  double z = 0;
  for (int k = 0; k < m; ++k) {
    double d2 = 0;
    for (size_t i = 0; i < s.psi.size(); ++i)
      d2 += std::norm(s.psi[i] - g.centers[static_cast<size_t>(k)][i]);
    const double prior = g.weights.empty() ? 1.0 : g.weights[static_cast<size_t>(k)];
    w[static_cast<size_t>(k)] = prior * std::exp(-g.beta * d2);
    z += w[static_cast<size_t>(k)];
  }
  double cum = 0;
  for (int k = 0; k + 1 < m; ++k) {
    cum += w[static_cast<size_t>(k)] / z;
    if (u < cum) return k;
  }
  return m - 1;
}

}  // namespace detail

struct ThreadPath {
  std::vector<double> times;
  std::vector<CVec> states;
  std::vector<int> phis;       // sampled path of the generator index
  std::vector<int> phi_at_step;  // index active during each step (length = steps)
  std::vector<double> brownian_increments;  // dB per step
};

/// Euler-Maruyama on the thread SDE with a single scalar Brownian increment
/// per step shared across all components. The generator index switches as a
/// per-step Bernoulli(switch_rate*dt) chain; targets come from the
/// configured rule. The realized phi path and increments are recorded so a
/// density path can be driven by the same noise.
inline ThreadPath evolve_thread(ThreadBatchState state, const SwitchingGeneratorSet& gens,
                                double dt, int steps, CounterStream& noise,
                                CounterStream& switching, int record_every = 1) {
  if (!(gens.switch_rate * dt < 1.0))
    throw ConfigError("evolve_thread: switch_rate*dt must be < 1");
  ThreadPath path;
  path.times.push_back(0);
  path.states.push_back(state.psi);
  path.phis.push_back(state.phi);
  path.phi_at_step.reserve(static_cast<size_t>(steps));
  path.brownian_increments.reserve(static_cast<size_t>(steps));
  const double sqrt_dt = std::sqrt(dt);

  for (int k = 0; k < steps; ++k) {
    path.phi_at_step.push_back(state.phi);
    const double db = sqrt_dt * noise.next_normal();
    path.brownian_increments.push_back(db);

    const CMat& a = gens.generators[static_cast<size_t>(state.phi)];
    const CVec apsi = matvec(a, state.psi);
    const CVec dpsi = matvec(gens.diffusion, state.psi);
    const CVec ddpsi = matvec(gens.diffusion, dpsi);
    for (size_t i = 0; i < state.psi.size(); ++i)
      state.psi[i] += (apsi[i] + 0.5 * ddpsi[i]) * dt + dpsi[i] * db;

    if (switching.next_unit() < gens.switch_rate * dt)
      state.phi = detail::sample_switch_target(gens, state, switching);

    if ((k + 1) % record_every == 0 || k + 1 == steps) {
      path.times.push_back((k + 1) * dt);
      path.states.push_back(state.psi);
      path.phis.push_back(state.phi);
    }
  }
  return path;
}

namespace detail {

/// Per-run constants of the density drift; the adjoints and D+D never change
/// along a path.
struct LindbladContext {
  std::vector<CMat> a_adj;
  CMat d_adj;
  CMat dtd;
  // workspaces
  CMat k_a, k_d, k_dd, k_m;

  LindbladContext(const SwitchingGeneratorSet& g)
      : d_adj(g.diffusion.adjoint()),
        dtd(matmul(g.diffusion.adjoint(), g.diffusion)),
        k_a(g.n),
        k_d(g.n),
        k_dd(g.n),
        k_m(g.n) {
    for (const auto& a : g.generators) a_adj.push_back(a.adjoint());
  }
};

}  // namespace detail

/// Drift of the expected equation:
///   A rho + rho A+ - (1/2) D+D rho - (1/2) rho D+D + D rho D+.
inline CMat lindblad_like_rhs(const CMat& a, const CMat& d, const CMat& rho) {
  const CMat ad = a.adjoint();
  const CMat dd = d.adjoint();
  const CMat dtd = matmul(dd, d);
  CMat r = matmul(a, rho);
  r += matmul(rho, ad);
  r -= 0.5 * matmul(dtd, rho);
  r -= 0.5 * matmul(rho, dtd);
  r += matmul(matmul(d, rho), dd);
  return r;
}

struct DensityPath {
  std::vector<double> times;
  std::vector<DensityMatrix> states;
};

/// Euler-Maruyama on the matrix SDE, driven either by supplied Brownian
/// increments and phi path (for cross-integrator consistency) or by a fresh
/// stream. Hermiticity is preserved by every term up to rounding.
inline DensityPath evolve_density_stochastic(DensityMatrix rho, const SwitchingGeneratorSet& gens,
                                             const std::vector<int>& phi_at_step, double dt,
                                             int steps, CounterStream* noise,
                                             const std::vector<double>* increments = nullptr,
                                             int record_every = 1) {
  if (rho.n != gens.n) throw ConfigError("evolve_density_stochastic: shape mismatch");
  if (increments && static_cast<int>(increments->size()) < steps)
    throw ConfigError("evolve_density_stochastic: not enough Brownian increments");
  DensityPath path;
  path.times.push_back(0);
  path.states.push_back(rho);
  const double sqrt_dt = std::sqrt(dt);
  detail::LindbladContext ctx(gens);
  const int n = rho.n;

  for (int k = 0; k < steps; ++k) {
    const int phi = phi_at_step.empty()
                        ? 0
                        : phi_at_step[static_cast<size_t>(std::min<size_t>(
                              static_cast<size_t>(k), phi_at_step.size() - 1))];
    const double db = increments ? (*increments)[static_cast<size_t>(k)]
                                 : sqrt_dt * noise->next_normal();
    // With rho Hermitian, rho A+ = (A rho)+ and rho D+D = (D+D rho)+, so one
    // product per term suffices.
    matmul_into(ctx.k_a, gens.generators[static_cast<size_t>(phi)], rho);
    matmul_into(ctx.k_d, gens.diffusion, rho);
    matmul_into(ctx.k_dd, ctx.k_d, ctx.d_adj);
    matmul_into(ctx.k_m, ctx.dtd, rho);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const cplx drift = ctx.k_a(i, j) + std::conj(ctx.k_a(j, i)) -
                           0.5 * (ctx.k_m(i, j) + std::conj(ctx.k_m(j, i))) + ctx.k_dd(i, j);
        const cplx noise_term = ctx.k_d(i, j) + std::conj(ctx.k_d(j, i));
        rho(i, j) += drift * dt + noise_term * db;
      }
    if ((k + 1) % record_every == 0 || k + 1 == steps) {
      path.times.push_back((k + 1) * dt);
      path.states.push_back(rho);
    }
  }
  return path;
}

/// Piecewise-constant deterministic generator schedule: (t_from, index),
/// sorted by t_from, first entry at 0.
using PhiSchedule = std::vector<std::pair<double, int>>;

inline int schedule_at(const PhiSchedule& sched, double t) {
  int idx = sched.front().second;
  for (const auto& [from, k] : sched)
    if (t >= from) idx = k;
  return idx;
}

/// Deterministic RK4 on the expected equation with a piecewise-constant
/// generator schedule. Switch times should align with step boundaries.
inline DensityPath evolve_density_expected(DensityMatrix rho, const SwitchingGeneratorSet& gens,
                                           const PhiSchedule& schedule, double dt, int steps,
                                           int record_every = 1) {
  if (rho.n != gens.n) throw ConfigError("evolve_density_expected: shape mismatch");
  if (schedule.empty()) throw ConfigError("evolve_density_expected: empty schedule");
  DensityPath path;
  path.times.push_back(0);
  path.states.push_back(rho);

  for (int k = 0; k < steps; ++k) {
    const double t = k * dt;
    const CMat& a = gens.generators[static_cast<size_t>(schedule_at(schedule, t))];
    const CMat k1 = lindblad_like_rhs(a, gens.diffusion, rho);
    CMat tmp = rho;
    tmp += (0.5 * dt) * k1;
    const CMat k2 = lindblad_like_rhs(a, gens.diffusion, tmp);
    tmp = rho;
    tmp += (0.5 * dt) * k2;
    const CMat k3 = lindblad_like_rhs(a, gens.diffusion, tmp);
    tmp = rho;
    tmp += dt * k3;
    const CMat k4 = lindblad_like_rhs(a, gens.diffusion, tmp);
    CMat incr = k1;
    incr += 2.0 * k2;
    incr += 2.0 * k3;
    incr += k4;
    rho += (dt / 6.0) * incr;
    if ((k + 1) % record_every == 0 || k + 1 == steps) {
      path.times.push_back((k + 1) * dt);
      path.states.push_back(rho);
    }
  }
  return path;
}

// ---------------------------------------------------------------------------
// Monte Carlo expectation of the stochastic density paths

struct McDensityResult {
  CMat mean;
  double se_frobenius = 0;  // sqrt(sum of per-entry variances / M)
  uint64_t paths = 0;
  double max_hermiticity_defect = 0;
};

/// Mean of M independent stochastic density paths at t = steps*dt under a
/// fixed generator index. Paths are computed in parallel but reduced in path
/// order, so the result is worker-count independent.
inline McDensityResult mc_expected_density(const DensityMatrix& rho0, const SwitchingGeneratorSet& gens,
                                           int phi_fixed, double dt, int steps, uint64_t paths,
                                           uint64_t seed, int workers = 1) {
  std::vector<CMat> finals(paths);
  std::vector<double> defects(paths, 0.0);
  const std::vector<int> phi_path(1, phi_fixed);
  parallel_for(paths, workers, [&](size_t begin, size_t end, int) {
    for (size_t j = begin; j < end; ++j) {
      RngStreams streams = RngStreams::for_particle(seed, j);
      DensityPath p = evolve_density_stochastic(rho0, gens, phi_path, dt, steps,
                                                &streams.time_stream, nullptr, steps);
      finals[j] = std::move(p.states.back());
      defects[j] = finals[j].hermiticity_defect();
    }
  });

  McDensityResult out;
  out.paths = paths;
  out.mean = CMat(rho0.n);
  for (size_t j = 0; j < paths; ++j) {
    out.mean += finals[j];
    out.max_hermiticity_defect = std::max(out.max_hermiticity_defect, defects[j]);
  }
  out.mean *= cplx(1.0 / static_cast<double>(paths));

  double var_sum = 0;
  for (size_t j = 0; j < paths; ++j)
    for (size_t k = 0; k < finals[j].a.size(); ++k) {
      const cplx d = finals[j].a[k] - out.mean.a[k];
      var_sum += std::norm(d);
    }
  var_sum /= static_cast<double>(paths - 1);
  out.se_frobenius = std::sqrt(var_sum / static_cast<double>(paths));
  return out;
}

// ---------------------------------------------------------------------------
// JSON load (complex entries as [re, im] pairs)

namespace detail {

inline cplx cplx_from_json(const json& j, const std::string& ctx) {
  if (!j.is_array() || j.size() != 2) throw ConfigError(ctx + ": expected [re, im]");
  return {j[0].get<double>(), j[1].get<double>()};
}

inline CMat cmat_from_json(const json& j, int n, const std::string& ctx) {
  if (!j.is_array() || static_cast<int>(j.size()) != n)
    throw ConfigError(ctx + ": expected " + std::to_string(n) + " rows");
  CMat m(n);
  for (int i = 0; i < n; ++i) {
    const json& row = j[static_cast<size_t>(i)];
    if (!row.is_array() || static_cast<int>(row.size()) != n)
      throw ConfigError(ctx + ": row length mismatch");
    for (int k = 0; k < n; ++k)
      m(i, k) = cplx_from_json(row[static_cast<size_t>(k)], ctx + " entry");
  }
  return m;
}

}  // namespace detail

inline SwitchingGeneratorSet generator_set_from_json(const json& j, bool strict = true) {
  if (!j.is_object()) throw ConfigError("generators: expected object");
  if (strict)
    detail::reject_unknown_keys(j,
                                {"size", "generators", "switch_rate", "switch_kernel",
                                 "switch_rule", "beta", "centers", "weights", "diffusion"},
                                "generators");
  SwitchingGeneratorSet g;
  g.n = detail::require(j, "size", "generators").get<int>();
  if (g.n < 1 || g.n > 64) throw ConfigError("generators.size out of range");
  for (const json& mat : detail::require(j, "generators", "generators"))
    g.generators.push_back(detail::cmat_from_json(mat, g.n, "generators[]"));
  if (g.generators.empty()) throw ConfigError("generators: need at least one generator");
  g.switch_rate = j.value("switch_rate", 1.0);
  if (g.switch_rate <= 0) throw ConfigError("generators.switch_rate must be > 0");

  const std::string rule = j.value("switch_rule", "matrix");
  const int m = g.generator_count();
  if (rule == "matrix") {
    g.rule = SwitchRule::Matrix;
    if (j.contains("switch_kernel")) {
      for (const json& row : j["switch_kernel"])
        g.kernel.push_back(row.get<std::vector<double>>());
    } else {
      g.kernel.assign(static_cast<size_t>(m),
                      std::vector<double>(static_cast<size_t>(m), 1.0 / m));
    }
    if (static_cast<int>(g.kernel.size()) != m)
      throw ConfigError("switch_kernel: expected " + std::to_string(m) + " rows");
    for (const auto& row : g.kernel) {
      if (static_cast<int>(row.size()) != m) throw ConfigError("switch_kernel: row length");
      double s = 0;
      for (double w : row) {
        if (w < 0) throw ConfigError("switch_kernel: negative entry");
        s += w;
      }
      if (std::abs(s - 1.0) > 1e-12)
        throw ConfigError("switch_kernel: row sum " + format_g17(s) + " != 1");
    }
  } else if (rule == "softmax-psi") {
    g.rule = SwitchRule::SoftmaxPsi;
    g.beta = detail::require(j, "beta", "generators").get<double>();
    for (const json& c : detail::require(j, "centers", "generators")) {
      CVec center;
      for (const json& z : c) center.push_back(detail::cplx_from_json(z, "centers entry"));
      if (static_cast<int>(center.size()) != g.n) throw ConfigError("centers: length mismatch");
      g.centers.push_back(std::move(center));
    }
    if (static_cast<int>(g.centers.size()) != m) throw ConfigError("centers: need one per generator");
    if (j.contains("weights")) g.weights = j["weights"].get<std::vector<double>>();
  } else {
    throw ConfigError("unknown switch_rule '" + rule + "'");
  }

  if (j.contains("diffusion"))
    g.diffusion = detail::cmat_from_json(j["diffusion"], g.n, "diffusion");
  else
    g.diffusion = CMat(g.n);

  // Anti-Hermitian constraint D+ = -D.
  CMat check = g.diffusion.adjoint();
  check += g.diffusion;
  if (check.frobenius() > 1e-12)
    throw ConfigError("diffusion: D must satisfy D+ = -D (defect " +
                      format_g17(check.frobenius()) + ")");
  return g;
}

/// Wide CSV of a density path: one row per recorded time, vectorized entries.
inline void write_density_path_csv(std::ostream& os, const DensityPath& path) {
  const int n = path.states.front().n;
  os << "t";
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) os << ",re_" << i << '_' << j << ",im_" << i << '_' << j;
  os << '\n';
  for (size_t k = 0; k < path.times.size(); ++k) {
    os << format_g17(path.times[k]);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const cplx z = path.states[k](i, j);
        os << ',' << format_g17(z.real()) << ',' << format_g17(z.imag());
      }
    os << '\n';
  }
}

/// Long-format CSV (one row per time and entry) for external plotting.
inline void write_density_path_long_csv(std::ostream& os, const DensityPath& path) {
  os << "t,i,j,re,im\n";
  const int n = path.states.front().n;
  for (size_t k = 0; k < path.times.size(); ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const cplx z = path.states[k](i, j);
        os << format_g17(path.times[k]) << ',' << i << ',' << j << ',' << format_g17(z.real())
           << ',' << format_g17(z.imag()) << '\n';
      }
}

}  // namespace cogflow
