#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "cogflow/flow.hpp"
#include "cogflow/model.hpp"
#include "cogflow/parallel.hpp"
#include "cogflow/rng.hpp"

namespace cogflow {

// Monte Carlo simulation of the coupled process: deterministic flow under
// the current cognitive index, interrupted by renewal jumps of the index at
// Exp(lambda) epochs. Jump epochs are exact (the flow integrates to the
// sampled epoch); the exponential clock is state-independent, so no thinning
// is needed.

/// Public view of one particle at the snapshot time.
struct ParticleState {
  Vec x;
  CognitiveIndex y = 0;
  double tau = 0;  // elapsed time since the last jump
  double t = 0;
};

struct JumpEvent {
  uint64_t particle = 0;
  double time = 0;
  CognitiveIndex from_y = 0;
  CognitiveIndex to_y = 0;
  Vec x_at_jump;
};

namespace detail {

/// Full per-particle record. The absolute next-jump epoch is carried so that
/// chained simulation legs reproduce a single long run draw-for-draw.
struct Particle {
  Vec x;
  CognitiveIndex y = 0;
  double last_jump_t = 0;
  double next_jump_t = 0;
  uint64_t jump_count = 0;  // jumps after the initial one at t_start
  RngStreams rng;
};

}  // namespace detail

struct EnsembleSnapshot {
  double t = 0;
  double t_start = 0;
  uint64_t seed = 0;
  uint64_t first_particle = 0;  // global index of particles[0]
  uint64_t model_hash = 0;
  TimeOrigin time_origin = TimeOrigin::JumpAtZero;
  std::vector<detail::Particle> particles;

  size_t size() const { return particles.size(); }

  ParticleState state(size_t i) const {
    const auto& p = particles[i];
    return {p.x, p.y, t - p.last_jump_t, t};
  }

  bool never_jumped(size_t i) const { return particles[i].jump_count == 0; }
};

/// Inverse-CDF draw from psi(x, .) using the space stream.
inline CognitiveIndex sample_transition(const ModelSpec& m, const Vec& x, CounterStream& space) {
  thread_local std::vector<double> psi;
  eval_kernel_into(m, x, psi);
  const double u = space.next_unit();
  double cum = 0;
  for (size_t y = 0; y + 1 < psi.size(); ++y) {
    cum += psi[y];
    if (u < cum) return static_cast<CognitiveIndex>(y);
  }
  return static_cast<CognitiveIndex>(psi.size() - 1);
}

namespace detail {

inline Vec draw_initial_point(const ModelSpec& m, CounterStream& space) {
  switch (m.initial.family) {
    case InitialFamily::Point:
      return m.initial.at;
    case InitialFamily::UniformBox: {
      const Vec lo = m.initial.lo.n > 0 ? m.initial.lo : m.domain.lo;
      const Vec hi = m.initial.hi.n > 0 ? m.initial.hi : m.domain.hi;
      Vec x(m.dim);
      for (int i = 0; i < m.dim; ++i) x[i] = lo[i] + (hi[i] - lo[i]) * space.next_unit();
      return x;
    }
    case InitialFamily::Gaussian: {
      // Rejection against the domain box keeps every particle inside.
      for (int attempt = 0; attempt < 1000; ++attempt) {
        Vec x(m.dim);
        for (int i = 0; i < m.dim; ++i)
          x[i] = m.initial.mean[i] + m.initial.sigma[i] * space.next_normal();
        if (m.domain.contains(x)) return x;
      }
      throw ConfigError("initial gaussian: rejection sampling failed (sigma too large?)");
    }
  }
  return Vec(m.dim);
}

}  // namespace detail

/// Draw n i.i.d. particles. Positions come from the configured initial
/// density; each particle's cognitive index is drawn from psi(x, .) at time
/// t_start with tau = 0 (the initial jump happens at the time origin).
/// `first_particle` selects the global index range, so an ensemble can be
/// materialized in blocks without changing any draw.
inline EnsembleSnapshot sample_initial(const ModelSpec& m, uint64_t n, uint64_t seed,
                                       uint64_t first_particle = 0, int workers = 1) {
  EnsembleSnapshot snap;
  snap.t = 0;
  snap.t_start = 0;
  snap.seed = seed;
  snap.first_particle = first_particle;
  snap.model_hash = model_digest(m);
  snap.time_origin = m.time_origin;
  snap.particles.resize(n);
  parallel_for(n, workers, [&](size_t begin, size_t end, int) {
    for (size_t i = begin; i < end; ++i) {
      detail::Particle& p = snap.particles[i];
      p.rng = RngStreams::for_particle(seed, first_particle + i);
      p.x = detail::draw_initial_point(m, p.rng.space_stream);
      p.y = sample_transition(m, p.x, p.rng.space_stream);
      p.last_jump_t = snap.t_start;
      p.next_jump_t = snap.t_start + p.rng.time_stream.next_exponential(m.lambda);
      p.jump_count = 0;
    }
  });
  return snap;
}

struct SimulateOptions {
  double step = 1e-2;
  int workers = 1;
  bool record_jumps = false;
};

/// Advance every particle by `horizon` under the continuous-time model:
/// integrate the flow to each exponential epoch, redraw y ~ psi(x, .), and
/// continue. tau is carried exactly; jump epochs are never discretized.
/// The jump log, when requested, is ordered by (particle, time).
inline EnsembleSnapshot simulate_continuous(const ModelSpec& m, EnsembleSnapshot snap,
                                            double horizon, const SimulateOptions& opt,
                                            std::vector<JumpEvent>* jump_log = nullptr) {
  if (horizon <= 0) throw ConfigError("simulate_continuous: horizon must be > 0");
  const double t_end = snap.t + horizon;
  std::vector<std::vector<JumpEvent>> per_particle_jumps;
  if (jump_log && opt.record_jumps) per_particle_jumps.resize(snap.particles.size());

  parallel_for(snap.particles.size(), opt.workers, [&](size_t begin, size_t end, int) {
    for (size_t i = begin; i < end; ++i) {
      detail::Particle& p = snap.particles[i];
      double t_now = snap.t;
      while (p.next_jump_t <= t_end) {
        const double seg = p.next_jump_t - t_now;
        if (seg > 0) p.x = flow_advance(m, p.x, p.y, seg, opt.step);
        t_now = p.next_jump_t;
        const CognitiveIndex from = p.y;
        p.y = sample_transition(m, p.x, p.rng.space_stream);
        p.last_jump_t = t_now;
        p.jump_count += 1;
        if (jump_log && opt.record_jumps)
          per_particle_jumps[i].push_back({snap.first_particle + i, t_now, from, p.y, p.x});
        p.next_jump_t = t_now + p.rng.time_stream.next_exponential(m.lambda);
      }
      const double seg = t_end - t_now;
      if (seg > 0) p.x = flow_advance(m, p.x, p.y, seg, opt.step);
    }
  });
  snap.t = t_end;

  if (jump_log && opt.record_jumps)
    for (auto& v : per_particle_jumps)
      jump_log->insert(jump_log->end(), v.begin(), v.end());
  return snap;
}

/// One step of the discrete-time model: x <- x + v(x, y) dt, and with
/// probability lambda*dt the index redraws from psi evaluated at the
/// pre-step position. tau accumulates in dt quanta.
inline EnsembleSnapshot step_discrete(const ModelSpec& m, EnsembleSnapshot snap, double dt,
                                      int workers = 1) {
  if (dt <= 0) throw ConfigError("step_discrete: dt must be > 0");
  if (!(m.lambda * dt < 1.0))
    throw ConfigError(
        "step_discrete: lambda*dt >= 1; the per-step Bernoulli jump probability lambda*dt is only "
        "a valid probability (and a faithful discretization of the exponential clock) when "
        "lambda*dt < 1");
  parallel_for(snap.particles.size(), workers, [&](size_t begin, size_t end, int) {
    for (size_t i = begin; i < end; ++i) {
      detail::Particle& p = snap.particles[i];
      const Vec x_old = p.x;
      Vec x_new = x_old + dt * eval_velocity_raw(m, x_old, p.y);
      detail::enforce_boundary(m, x_new, "step_discrete");
      p.x = x_new;
      const double u = p.rng.time_stream.next_unit();
      if (u < m.lambda * dt) {
        p.y = sample_transition(m, x_old, p.rng.space_stream);
        p.last_jump_t = snap.t + dt;
        p.jump_count += 1;
      }
    }
  });
  snap.t += dt;
  return snap;
}

/// Fraction of particles that never jumped since t_start, i.e. the mass of
/// the tau-distribution atom at tau = t - t_start. Only meaningful when the
/// time origin pins the initial jump at t_start.
inline double atom_weight(const EnsembleSnapshot& snap) {
  if (snap.time_origin != TimeOrigin::JumpAtZero)
    throw ConfigError("atom_weight: undefined in stationary-approximation mode");
  uint64_t count = 0;
  for (const auto& p : snap.particles)
    if (p.jump_count == 0) ++count;
  return static_cast<double>(count) / static_cast<double>(snap.particles.size());
}

// ---------------------------------------------------------------------------
// CSV export (17 significant digits, bit-exact round trip)

inline void write_snapshot_csv_header(std::ostream& os, int dim) {
  os << "particle,t";
  for (int i = 0; i < dim; ++i) os << ",x" << i;
  os << ",y,tau\n";
}

inline void write_snapshot_csv_rows(std::ostream& os, const EnsembleSnapshot& snap, int dim) {
  for (size_t i = 0; i < snap.particles.size(); ++i) {
    const ParticleState s = snap.state(i);
    os << (snap.first_particle + i) << ',' << format_g17(s.t);
    for (int k = 0; k < dim; ++k) os << ',' << format_g17(s.x[k]);
    os << ',' << s.y << ',' << format_g17(s.tau) << '\n';
  }
}

inline void write_snapshot_csv(std::ostream& os, const EnsembleSnapshot& snap, int dim) {
  write_snapshot_csv_header(os, dim);
  write_snapshot_csv_rows(os, snap, dim);
}

inline void write_jumps_csv_header(std::ostream& os, int dim) {
  os << "particle,time,from_y,to_y";
  for (int i = 0; i < dim; ++i) os << ",x" << i;
  os << '\n';
}

inline void write_jumps_csv_rows(std::ostream& os, const std::vector<JumpEvent>& events,
                                 int dim) {
  for (const auto& e : events) {
    os << e.particle << ',' << format_g17(e.time) << ',' << e.from_y << ',' << e.to_y;
    for (int k = 0; k < dim; ++k) os << ',' << format_g17(e.x_at_jump[k]);
    os << '\n';
  }
}

inline void write_jumps_csv(std::ostream& os, const std::vector<JumpEvent>& events, int dim) {
  write_jumps_csv_header(os, dim);
  write_jumps_csv_rows(os, events, dim);
}

}  // namespace cogflow
