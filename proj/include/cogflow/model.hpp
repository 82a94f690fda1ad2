#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "cogflow/common.hpp"
#include "cogflow/jsonutil.hpp"

namespace cogflow {

using ThoughtPoint = Vec;
using CognitiveIndex = int;

enum class VelocityFamily { ConstantPerY, LinearPerY, GaussianBumpMixture };
enum class KernelFamily { Uniform, PointMass, SoftmaxScore };
enum class InitialFamily { UniformBox, Gaussian, Point };
enum class TimeOrigin { JumpAtZero, StationaryApprox };
enum class DomainPolicy { Strict, Lenient };
enum class BoundaryMode { Box, Periodic };

struct GaussianBump {
  Vec center;
  double width = 1.0;
  Vec amplitude;
};

/// Velocity field v(x, y): one parameter set per cognitive index y.
struct VelocityFieldSpec {
  VelocityFamily family = VelocityFamily::ConstantPerY;
  std::vector<Vec> vectors;                         // constant-per-y
  std::vector<std::array<double, 9>> matrices;      // linear-per-y, row-major d*d
  std::vector<std::vector<GaussianBump>> bumps;     // gaussian-bump-mixture
  bool support_damping = false;
  double damping_margin = 0.0;  // 0 -> default derived from the box
  double damping_width = 0.0;
};

/// Transition kernel psi(x, .): probability over the cognitive set.
/// softmax-score weight: prior_y * exp(-beta * |x - c_y|^2), normalized;
/// with beta = 0 it reduces to the prior (uniform when no priors given).
struct TransitionKernelSpec {
  KernelFamily family = KernelFamily::Uniform;
  int target = 0;                  // point-mass
  double beta = 0.0;               // softmax-score
  std::vector<Vec> centers;        // softmax-score (required when beta > 0)
  std::vector<double> weights;     // softmax-score priors; must sum to 1
};

struct InitialDensitySpec {
  InitialFamily family = InitialFamily::UniformBox;
  Vec lo, hi;       // uniform-box; empty -> whole domain
  Vec mean, sigma;  // gaussian
  Vec at;           // point
};

struct ModelSpec {
  int dim = 1;
  Box domain;
  int cognitive_size = 1;
  VelocityFieldSpec velocity;
  TransitionKernelSpec kernel;
  double lambda = 1.0;
  InitialDensitySpec initial;
  TimeOrigin time_origin = TimeOrigin::JumpAtZero;
  DomainPolicy domain_policy = DomainPolicy::Strict;
  BoundaryMode boundary = BoundaryMode::Box;

  double default_damping_margin() const { return 0.05 * domain.min_extent(); }
  double default_damping_width() const { return 0.10 * domain.min_extent(); }
};

// ---------------------------------------------------------------------------
// Field evaluation

namespace detail {

// C1 cutoff: exactly 0 within `margin` of the boundary, 1 past margin+width.
inline double damping_factor(const ModelSpec& m, const Vec& x) {
  const double margin =
      m.velocity.damping_margin > 0 ? m.velocity.damping_margin : m.default_damping_margin();
  const double width =
      m.velocity.damping_width > 0 ? m.velocity.damping_width : m.default_damping_width();
  double f = 1.0;
  for (int i = 0; i < m.dim; ++i) {
    const double s = std::min(x[i] - m.domain.lo[i], m.domain.hi[i] - x[i]);
    if (s <= margin) return 0.0;
    const double u = (s - margin) / width;
    if (u < 1.0) f *= u * u * (3.0 - 2.0 * u);
  }
  return f;
}

}  // namespace detail

/// Evaluate v(x, y) from the family formula alone, with no domain handling.
/// Used by difference stencils that probe just outside the box.
inline Vec eval_velocity_raw(const ModelSpec& m, const Vec& x, CognitiveIndex y) {
  Vec v(m.dim);
  switch (m.velocity.family) {
    case VelocityFamily::ConstantPerY:
      v = m.velocity.vectors[static_cast<size_t>(y)];
      break;
    case VelocityFamily::LinearPerY: {
      const auto& a = m.velocity.matrices[static_cast<size_t>(y)];
      for (int i = 0; i < m.dim; ++i) {
        double s = 0;
        for (int j = 0; j < m.dim; ++j) s += a[static_cast<size_t>(i * m.dim + j)] * x[j];
        v[i] = s;
      }
      break;
    }
    case VelocityFamily::GaussianBumpMixture: {
      for (const auto& b : m.velocity.bumps[static_cast<size_t>(y)]) {
        const double r2 = (x - b.center).norm2();
        const double g = std::exp(-r2 / (2.0 * b.width * b.width));
        for (int i = 0; i < m.dim; ++i) v[i] += g * b.amplitude[i];
      }
      break;
    }
  }
  if (m.velocity.support_damping) v *= detail::damping_factor(m, x);
  return v;
}

inline Vec apply_domain_policy(const ModelSpec& m, Vec x, const char* what) {
  if (m.boundary == BoundaryMode::Periodic) return m.domain.wrap(x);
  if (m.domain.contains(x)) return x;
  if (m.domain_policy == DomainPolicy::Lenient) return m.domain.clamp(x);
  std::string msg = std::string(what) + ": point outside domain (";
  for (int i = 0; i < x.n; ++i) msg += (i ? "," : "") + format_g17(x[i]);
  msg += ")";
  throw DomainExitError(msg);
}

inline Vec eval_velocity(const ModelSpec& m, const Vec& x, CognitiveIndex y) {
  return eval_velocity_raw(m, apply_domain_policy(m, x, "eval_velocity"), y);
}

/// psi(x, .) as a probability vector over the cognitive set.
inline void eval_kernel_into(const ModelSpec& m, const Vec& x_in, std::vector<double>& out) {
  const size_t K = static_cast<size_t>(m.cognitive_size);
  out.assign(K, 0.0);
  switch (m.kernel.family) {
    case KernelFamily::Uniform: {
      const double p = 1.0 / static_cast<double>(K);
      std::fill(out.begin(), out.end(), p);
      break;
    }
    case KernelFamily::PointMass:
      out[static_cast<size_t>(m.kernel.target)] = 1.0;
      break;
    case KernelFamily::SoftmaxScore: {
      double z = 0;
      for (size_t y = 0; y < K; ++y) {
        const double prior = m.kernel.weights.empty() ? 1.0 : m.kernel.weights[y];
        double w = prior;
        if (m.kernel.beta > 0) {
          const double r2 = (x_in - m.kernel.centers[y]).norm2();
          w *= std::exp(-m.kernel.beta * r2);
        }
        out[y] = w;
        z += w;
      }
      for (size_t y = 0; y < K; ++y) out[y] /= z;
      break;
    }
  }
}

inline std::vector<double> eval_kernel(const ModelSpec& m, const Vec& x) {
  const Vec x2 = apply_domain_policy(m, x, "eval_kernel");
  std::vector<double> out;
  eval_kernel_into(m, x2, out);
  return out;
}

/// Documented Lipschitz bound for max_y |psi(x,y) - psi(x',y)| / |x - x'|.
/// uniform and point-mass are constant in x (L = 0); for softmax-score the
/// score gradient is bounded by 2*beta*R over the box, and the softmax map
/// contributes a factor at most 2.
inline double kernel_lipschitz_bound(const ModelSpec& m) {
  if (m.kernel.family != KernelFamily::SoftmaxScore || m.kernel.beta == 0) return 0.0;
  double rmax = 0;
  for (const auto& c : m.kernel.centers) {
    Vec far(m.dim);
    for (int i = 0; i < m.dim; ++i) {
      const double a = std::abs(m.domain.lo[i] - c[i]);
      const double b = std::abs(m.domain.hi[i] - c[i]);
      far[i] = std::max(a, b);
    }
    rmax = std::max(rmax, far.norm());
  }
  return 4.0 * m.kernel.beta * rmax;
}

// ---------------------------------------------------------------------------
// Validation

struct ValidationCheck {
  std::string id;
  bool passed = false;
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;

  bool ok() const {
    for (const auto& c : checks)
      if (!c.passed) return false;
    return true;
  }

  void add(std::string id, bool passed, std::string detail = "") {
    checks.push_back({std::move(id), passed, std::move(detail)});
  }

  std::string summary() const {
    std::string s;
    for (const auto& c : checks) {
      s += c.passed ? "[pass] " : "[FAIL] ";
      s += c.id;
      if (!c.detail.empty()) s += ": " + c.detail;
      s += "\n";
    }
    return s;
  }
};

namespace detail {

// Deterministic lattice of at least `min_points` points covering the box.
inline std::vector<Vec> domain_lattice(const Box& box, int min_points) {
  const int d = box.dim();
  int per_axis = static_cast<int>(std::ceil(std::pow(static_cast<double>(min_points), 1.0 / d)));
  per_axis = std::max(per_axis, 2);
  std::vector<Vec> pts;
  std::array<int, kMaxDim> idx{};
  const int total = static_cast<int>(std::pow(per_axis, d) + 0.5);
  pts.reserve(static_cast<size_t>(total));
  for (int k = 0; k < total; ++k) {
    int r = k;
    Vec x(d);
    for (int i = 0; i < d; ++i) {
      idx[i] = r % per_axis;
      r /= per_axis;
      x[i] = box.lo[i] + box.extent(i) * (idx[i] + 0.5) / per_axis;
    }
    pts.push_back(x);
  }
  return pts;
}

}  // namespace detail

/// Structural and numerical validation of a model spec. Kernel normalization
/// is checked on a deterministic lattice of at least 1000 domain points.
inline ValidationReport validate_model(const ModelSpec& m) {
  ValidationReport rep;
  const size_t K = static_cast<size_t>(m.cognitive_size);

  rep.add("dim", m.dim >= 1 && m.dim <= kMaxDim,
          "dim=" + std::to_string(m.dim));
  rep.add("cognitive_size", m.cognitive_size >= 1,
          "|Y|=" + std::to_string(m.cognitive_size));
  rep.add("lambda_positive", m.lambda > 0, "lambda=" + format_g17(m.lambda));

  bool box_ok = m.domain.lo.n == m.dim && m.domain.hi.n == m.dim;
  for (int i = 0; box_ok && i < m.dim; ++i) box_ok = m.domain.lo[i] < m.domain.hi[i];
  rep.add("domain_box", box_ok);
  if (!box_ok || m.dim < 1 || m.dim > kMaxDim || m.cognitive_size < 1) return rep;

  // Parameter array lengths must match |Y|.
  bool len_ok = true;
  std::string len_detail;
  switch (m.velocity.family) {
    case VelocityFamily::ConstantPerY:
      len_ok = m.velocity.vectors.size() == K;
      len_detail = "constant vectors: " + std::to_string(m.velocity.vectors.size());
      break;
    case VelocityFamily::LinearPerY:
      len_ok = m.velocity.matrices.size() == K;
      len_detail = "matrices: " + std::to_string(m.velocity.matrices.size());
      break;
    case VelocityFamily::GaussianBumpMixture:
      len_ok = m.velocity.bumps.size() == K;
      len_detail = "bump lists: " + std::to_string(m.velocity.bumps.size());
      break;
  }
  rep.add("velocity_param_length", len_ok, len_detail);

  bool kernel_len_ok = true;
  if (m.kernel.family == KernelFamily::SoftmaxScore) {
    if (m.kernel.beta > 0) kernel_len_ok = m.kernel.centers.size() == K;
    if (!m.kernel.weights.empty()) kernel_len_ok = kernel_len_ok && m.kernel.weights.size() == K;
  }
  if (m.kernel.family == KernelFamily::PointMass)
    kernel_len_ok = m.kernel.target >= 0 && m.kernel.target < m.cognitive_size;
  rep.add("kernel_param_length", kernel_len_ok);

  rep.add("kernel_beta", m.kernel.family != KernelFamily::SoftmaxScore || m.kernel.beta >= 0);

  if (!m.kernel.weights.empty() && m.kernel.weights.size() == K) {
    double s = 0;
    double wmin = m.kernel.weights[0];
    for (double w : m.kernel.weights) {
      s += w;
      wmin = std::min(wmin, w);
    }
    rep.add("kernel_weights_normalized", std::abs(s - 1.0) <= 1e-9 && wmin >= 0,
            "sum=" + format_g17(s));
  }

  if (!len_ok || !kernel_len_ok) return rep;

  // Kernel normalization and nonnegativity on the lattice.
  double max_norm_err = 0, min_val = 0;
  std::vector<double> psi;
  for (const Vec& x : detail::domain_lattice(m.domain, 1000)) {
    eval_kernel_into(m, x, psi);
    double s = 0;
    for (double p : psi) {
      s += p;
      min_val = std::min(min_val, p);
    }
    max_norm_err = std::max(max_norm_err, std::abs(s - 1.0));
  }
  rep.add("kernel_normalization", max_norm_err <= 1e-9,
          "max |sum-1| = " + format_g17(max_norm_err));
  rep.add("kernel_nonnegative", min_val >= 0);

  rep.add("boundary_mode", !(m.boundary == BoundaryMode::Periodic && m.velocity.support_damping),
          "periodic boundary excludes support damping");

  if (m.initial.family == InitialFamily::Point)
    rep.add("initial_point_in_domain", m.domain.contains(m.initial.at));
  if (m.initial.family == InitialFamily::Gaussian)
    rep.add("initial_mean_in_domain", m.domain.contains(m.initial.mean));
  if (m.initial.family == InitialFamily::UniformBox && m.initial.lo.n > 0) {
    bool sub_ok = m.domain.contains(m.initial.lo) && m.domain.contains(m.initial.hi);
    for (int i = 0; sub_ok && i < m.dim; ++i) sub_ok = m.initial.lo[i] < m.initial.hi[i];
    rep.add("initial_box_in_domain", sub_ok);
  }
  return rep;
}

/// Normalization/nonnegativity check for an arbitrary kernel evaluation,
/// e.g. hand-built weights that bypass the built-in families.
template <typename KernelFn>
inline ValidationReport validate_kernel_function(const Box& box, int cognitive_size,
                                                 KernelFn&& kernel) {
  ValidationReport rep;
  double max_norm_err = 0, min_val = 0;
  for (const Vec& x : detail::domain_lattice(box, 1000)) {
    std::vector<double> psi = kernel(x);
    if (static_cast<int>(psi.size()) != cognitive_size) {
      rep.add("kernel_length", false);
      return rep;
    }
    double s = 0;
    for (double p : psi) {
      s += p;
      min_val = std::min(min_val, p);
    }
    max_norm_err = std::max(max_norm_err, std::abs(s - 1.0));
  }
  rep.add("kernel_normalization", max_norm_err <= 1e-9,
          "max |sum-1| = " + format_g17(max_norm_err));
  rep.add("kernel_nonnegative", min_val >= 0);
  return rep;
}

// ---------------------------------------------------------------------------
// JSON schema

namespace detail {

inline Vec vec_from_json(const json& j, int dim, const std::string& ctx) {
  if (!j.is_array() || static_cast<int>(j.size()) != dim)
    throw ConfigError(ctx + ": expected array of length " + std::to_string(dim));
  Vec v(dim);
  for (int i = 0; i < dim; ++i) v[i] = j[static_cast<size_t>(i)].get<double>();
  return v;
}

}  // namespace detail

inline ModelSpec model_from_json(const json& j, bool strict = true) {
  using detail::require;
  using detail::vec_from_json;
  if (!j.is_object()) throw ConfigError("model: expected object");
  if (strict)
    detail::reject_unknown_keys(j,
                                {"dim", "domain", "cognitive_size", "velocity", "kernel", "lambda",
                                 "initial", "time_origin", "domain_policy", "boundary"},
                                "model");
  ModelSpec m;
  m.dim = require(j, "dim", "model").get<int>();
  if (m.dim < 1 || m.dim > kMaxDim) throw ConfigError("model.dim must be 1, 2 or 3");

  const json& dom = require(j, "domain", "model");
  if (strict) detail::reject_unknown_keys(dom, {"lo", "hi"}, "model.domain");
  m.domain.lo = vec_from_json(require(dom, "lo", "model.domain"), m.dim, "domain.lo");
  m.domain.hi = vec_from_json(require(dom, "hi", "model.domain"), m.dim, "domain.hi");

  m.cognitive_size = require(j, "cognitive_size", "model").get<int>();
  if (m.cognitive_size < 1) throw ConfigError("model.cognitive_size must be >= 1");
  m.lambda = require(j, "lambda", "model").get<double>();

  const json& vel = require(j, "velocity", "model");
  if (strict)
    detail::reject_unknown_keys(vel,
                                {"family", "vectors", "matrices", "bumps", "support_damping",
                                 "damping_margin", "damping_width"},
                                "model.velocity");
  const std::string vfam = require(vel, "family", "model.velocity").get<std::string>();
  if (vfam == "constant-per-y") {
    m.velocity.family = VelocityFamily::ConstantPerY;
    for (const json& row : require(vel, "vectors", "model.velocity"))
      m.velocity.vectors.push_back(vec_from_json(row, m.dim, "velocity.vectors[]"));
  } else if (vfam == "linear-per-y") {
    m.velocity.family = VelocityFamily::LinearPerY;
    for (const json& mat : require(vel, "matrices", "model.velocity")) {
      if (!mat.is_array() || static_cast<int>(mat.size()) != m.dim)
        throw ConfigError("velocity.matrices[]: expected d x d matrix");
      std::array<double, 9> a{};
      for (int r = 0; r < m.dim; ++r) {
        const Vec row = vec_from_json(mat[static_cast<size_t>(r)], m.dim, "velocity.matrices[][]");
        for (int c = 0; c < m.dim; ++c) a[static_cast<size_t>(r * m.dim + c)] = row[c];
      }
      m.velocity.matrices.push_back(a);
    }
  } else if (vfam == "gaussian-bump-mixture") {
    m.velocity.family = VelocityFamily::GaussianBumpMixture;
    for (const json& lst : require(vel, "bumps", "model.velocity")) {
      std::vector<GaussianBump> bumps;
      for (const json& b : lst) {
        if (strict)
          detail::reject_unknown_keys(b, {"center", "width", "amplitude"}, "velocity.bumps[][]");
        GaussianBump g;
        g.center = vec_from_json(require(b, "center", "bump"), m.dim, "bump.center");
        g.width = require(b, "width", "bump").get<double>();
        if (g.width <= 0) throw ConfigError("bump.width must be > 0");
        g.amplitude = vec_from_json(require(b, "amplitude", "bump"), m.dim, "bump.amplitude");
        bumps.push_back(g);
      }
      m.velocity.bumps.push_back(std::move(bumps));
    }
  } else {
    throw ConfigError("unknown velocity family '" + vfam + "'");
  }
  m.velocity.support_damping = vel.value("support_damping", false);
  m.velocity.damping_margin = vel.value("damping_margin", 0.0);
  m.velocity.damping_width = vel.value("damping_width", 0.0);

  const json& ker = require(j, "kernel", "model");
  if (strict)
    detail::reject_unknown_keys(ker, {"family", "target", "beta", "centers", "weights"},
                                "model.kernel");
  const std::string kfam = require(ker, "family", "model.kernel").get<std::string>();
  if (kfam == "uniform") {
    m.kernel.family = KernelFamily::Uniform;
  } else if (kfam == "point-mass") {
    m.kernel.family = KernelFamily::PointMass;
    m.kernel.target = require(ker, "target", "model.kernel").get<int>();
  } else if (kfam == "softmax-score") {
    m.kernel.family = KernelFamily::SoftmaxScore;
    m.kernel.beta = require(ker, "beta", "model.kernel").get<double>();
    if (m.kernel.beta < 0) throw ConfigError("kernel.beta must be >= 0");
    if (ker.contains("centers"))
      for (const json& c : ker["centers"])
        m.kernel.centers.push_back(vec_from_json(c, m.dim, "kernel.centers[]"));
    if (m.kernel.beta > 0 && m.kernel.centers.empty())
      throw ConfigError("kernel.centers required when beta > 0");
    if (ker.contains("weights")) m.kernel.weights = ker["weights"].get<std::vector<double>>();
  } else {
    throw ConfigError("unknown kernel family '" + kfam + "'");
  }

  const json& ini = require(j, "initial", "model");
  if (strict)
    detail::reject_unknown_keys(ini, {"family", "lo", "hi", "mean", "sigma", "at"},
                                "model.initial");
  const std::string ifam = require(ini, "family", "model.initial").get<std::string>();
  if (ifam == "uniform-box") {
    m.initial.family = InitialFamily::UniformBox;
    if (ini.contains("lo")) m.initial.lo = vec_from_json(ini["lo"], m.dim, "initial.lo");
    if (ini.contains("hi")) m.initial.hi = vec_from_json(ini["hi"], m.dim, "initial.hi");
  } else if (ifam == "gaussian") {
    m.initial.family = InitialFamily::Gaussian;
    m.initial.mean = vec_from_json(require(ini, "mean", "model.initial"), m.dim, "initial.mean");
    m.initial.sigma = vec_from_json(require(ini, "sigma", "model.initial"), m.dim, "initial.sigma");
    for (int i = 0; i < m.dim; ++i)
      if (m.initial.sigma[i] <= 0) throw ConfigError("initial.sigma must be > 0");
  } else if (ifam == "point") {
    m.initial.family = InitialFamily::Point;
    m.initial.at = vec_from_json(require(ini, "at", "model.initial"), m.dim, "initial.at");
  } else {
    throw ConfigError("unknown initial family '" + ifam + "'");
  }

  const std::string origin = j.value("time_origin", "jump-at-zero");
  if (origin == "jump-at-zero")
    m.time_origin = TimeOrigin::JumpAtZero;
  else if (origin == "stationary-approximation")
    m.time_origin = TimeOrigin::StationaryApprox;
  else
    throw ConfigError("unknown time_origin '" + origin + "'");

  const std::string policy = j.value("domain_policy", "strict");
  if (policy == "strict")
    m.domain_policy = DomainPolicy::Strict;
  else if (policy == "lenient")
    m.domain_policy = DomainPolicy::Lenient;
  else
    throw ConfigError("unknown domain_policy '" + policy + "'");

  const std::string boundary = j.value("boundary", "box");
  if (boundary == "box")
    m.boundary = BoundaryMode::Box;
  else if (boundary == "periodic")
    m.boundary = BoundaryMode::Periodic;
  else
    throw ConfigError("unknown boundary '" + boundary + "'");

  return m;
}

inline json model_to_json(const ModelSpec& m) {
  json j;
  j["dim"] = m.dim;
  json lo = json::array(), hi = json::array();
  for (int i = 0; i < m.dim; ++i) {
    lo.push_back(m.domain.lo[i]);
    hi.push_back(m.domain.hi[i]);
  }
  j["domain"] = {{"lo", lo}, {"hi", hi}};
  j["cognitive_size"] = m.cognitive_size;
  j["lambda"] = m.lambda;

  json vel;
  auto vec_to_json = [&](const Vec& v) {
    json a = json::array();
    for (int i = 0; i < m.dim; ++i) a.push_back(v[i]);
    return a;
  };
  switch (m.velocity.family) {
    case VelocityFamily::ConstantPerY: {
      vel["family"] = "constant-per-y";
      json rows = json::array();
      for (const auto& v : m.velocity.vectors) rows.push_back(vec_to_json(v));
      vel["vectors"] = rows;
      break;
    }
    case VelocityFamily::LinearPerY: {
      vel["family"] = "linear-per-y";
      json mats = json::array();
      for (const auto& a : m.velocity.matrices) {
        json mat = json::array();
        for (int r = 0; r < m.dim; ++r) {
          json row = json::array();
          for (int c = 0; c < m.dim; ++c) row.push_back(a[static_cast<size_t>(r * m.dim + c)]);
          mat.push_back(row);
        }
        mats.push_back(mat);
      }
      vel["matrices"] = mats;
      break;
    }
    case VelocityFamily::GaussianBumpMixture: {
      vel["family"] = "gaussian-bump-mixture";
      json lists = json::array();
      for (const auto& lst : m.velocity.bumps) {
        json bl = json::array();
        for (const auto& b : lst)
          bl.push_back({{"center", vec_to_json(b.center)},
                        {"width", b.width},
                        {"amplitude", vec_to_json(b.amplitude)}});
        lists.push_back(bl);
      }
      vel["bumps"] = lists;
      break;
    }
  }
  vel["support_damping"] = m.velocity.support_damping;
  if (m.velocity.damping_margin > 0) vel["damping_margin"] = m.velocity.damping_margin;
  if (m.velocity.damping_width > 0) vel["damping_width"] = m.velocity.damping_width;
  j["velocity"] = vel;

  json ker;
  switch (m.kernel.family) {
    case KernelFamily::Uniform:
      ker["family"] = "uniform";
      break;
    case KernelFamily::PointMass:
      ker["family"] = "point-mass";
      ker["target"] = m.kernel.target;
      break;
    case KernelFamily::SoftmaxScore: {
      ker["family"] = "softmax-score";
      ker["beta"] = m.kernel.beta;
      if (!m.kernel.centers.empty()) {
        json cs = json::array();
        for (const auto& c : m.kernel.centers) cs.push_back(vec_to_json(c));
        ker["centers"] = cs;
      }
      if (!m.kernel.weights.empty()) ker["weights"] = m.kernel.weights;
      break;
    }
  }
  j["kernel"] = ker;

  json ini;
  switch (m.initial.family) {
    case InitialFamily::UniformBox:
      ini["family"] = "uniform-box";
      if (m.initial.lo.n > 0) {
        ini["lo"] = vec_to_json(m.initial.lo);
        ini["hi"] = vec_to_json(m.initial.hi);
      }
      break;
    case InitialFamily::Gaussian:
      ini["family"] = "gaussian";
      ini["mean"] = vec_to_json(m.initial.mean);
      ini["sigma"] = vec_to_json(m.initial.sigma);
      break;
    case InitialFamily::Point:
      ini["family"] = "point";
      ini["at"] = vec_to_json(m.initial.at);
      break;
  }
  j["initial"] = ini;

  j["time_origin"] =
      m.time_origin == TimeOrigin::JumpAtZero ? "jump-at-zero" : "stationary-approximation";
  j["domain_policy"] = m.domain_policy == DomainPolicy::Strict ? "strict" : "lenient";
  j["boundary"] = m.boundary == BoundaryMode::Box ? "box" : "periodic";
  return j;
}

/// Content digest of a model spec (canonical JSON, sorted keys).
inline uint64_t model_digest(const ModelSpec& m) { return fnv1a64(model_to_json(m).dump()); }

}  // namespace cogflow
