#include <catch2/catch.hpp>

#include <cmath>
#include <complex>

#include "cogflow/breadth.hpp"
#include "test_helpers.hpp"

using namespace cogflow;
using testutil::expm;
using testutil::hermitian_eigenvalues;

namespace {

SwitchingGeneratorSet single_generator(const CMat& a, const CMat& d) {
  SwitchingGeneratorSet g;
  g.n = a.n;
  g.generators = {a};
  g.switch_rate = 1e-12;  // effectively frozen
  g.kernel = {{1.0}};
  g.diffusion = d;
  return g;
}

CMat projector_e0(int n) {
  CMat rho(n);
  rho(0, 0) = 1.0;
  return rho;
}

}  // namespace

TEST_CASE("density_from_states builds the expected projectors") {
  SECTION("single unit vector: rank-1 projector with trace 1") {
    CVec e0 = {1.0, 0.0, 0.0};
    const CMat rho = density_from_states({e0});
    CHECK(rho.trace() == cplx(1.0));
    CHECK(rho(0, 0) == cplx(1.0));
    CHECK(rho.hermiticity_defect() == 0.0);
    const auto ev = hermitian_eigenvalues(rho);
    CHECK(ev.front() == Approx(0.0).margin(1e-12));
    CHECK(ev.back() == Approx(1.0).margin(1e-12));
  }
  SECTION("orthonormal basis sums to the identity") {
    std::vector<CVec> basis;
    for (int k = 0; k < 4; ++k) {
      CVec e(4, cplx(0.0));
      e[static_cast<size_t>(k)] = 1.0;
      basis.push_back(e);
    }
    const CMat rho = density_from_states(basis);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) CHECK(rho(i, j) == cplx(i == j ? 1.0 : 0.0));
  }
  SECTION("(1, i)/sqrt(2) gives the textbook outer product") {
    const double r = 1.0 / std::sqrt(2.0);
    CVec psi = {cplx(r, 0), cplx(0, r)};
    const CMat rho = density_from_states({psi});
    CHECK(rho(0, 0).real() == Approx(0.5).margin(1e-15));
    CHECK(rho(0, 1).imag() == Approx(-0.5).margin(1e-15));
    CHECK(rho(1, 0).imag() == Approx(0.5).margin(1e-15));
    CHECK(rho(1, 1).real() == Approx(0.5).margin(1e-15));
  }
  SECTION("empty list rejected") {
    CHECK_THROWS_AS(density_from_states({}), ConfigError);
  }
  SECTION("unequal state lengths rejected") {
    CHECK_THROWS_AS(density_from_states({CVec(3), CVec(4)}), ConfigError);
  }
}

TEST_CASE("density integrators reject shape mismatches") {
  SwitchingGeneratorSet g = single_generator(CMat(3), CMat(3));
  CounterStream noise{detail::derive_key(3, 0, 0)};
  CHECK_THROWS_AS(evolve_density_stochastic(CMat(4), g, {0}, 1e-3, 1, &noise), ConfigError);
  CHECK_THROWS_AS(evolve_density_expected(CMat(4), g, {{0.0, 0}}, 1e-3, 1), ConfigError);
  CHECK_THROWS_AS(evolve_density_expected(CMat(3), g, {}, 1e-3, 1), ConfigError);
}

TEST_CASE("thread SDE special cases") {
  CounterStream noise{detail::derive_key(41, 0, 0)};
  CounterStream sw{detail::derive_key(41, 0, 1)};

  SECTION("A = 0, D = 0 keeps psi constant") {
    SwitchingGeneratorSet g = single_generator(CMat(3), CMat(3));
    ThreadBatchState s;
    s.psi = {cplx(0.3, 0.1), cplx(0.0, 0.9), cplx(-0.2, 0.0)};
    const auto path = evolve_thread(s, g, 1e-2, 100, noise, sw);
    for (size_t i = 0; i < 3; ++i) CHECK(path.states.back()[i] == s.psi[i]);
  }

  SECTION("planar rotation moves e0 to e1 at t = pi/2") {
    CMat a(2);
    a(0, 1) = -1.0;
    a(1, 0) = 1.0;
    SwitchingGeneratorSet g = single_generator(a, CMat(2));
    ThreadBatchState s;
    s.psi = {1.0, 0.0};
    const int steps = static_cast<int>(std::llround((3.14159265358979323846 / 2) / 1e-4));
    const auto path = evolve_thread(s, g, 1e-4, steps, noise, sw);
    CHECK(std::abs(path.states.back()[0] - cplx(0.0)) < 1e-4);
    CHECK(std::abs(path.states.back()[1] - cplx(1.0)) < 1e-4);
  }

  SECTION("norm drift under skew-Hermitian flow is first order in dt") {
    CounterStream init{detail::derive_key(7, 3, 0)};
    const CMat a = testutil::random_skew_hermitian(4, init, 1.0);
    SwitchingGeneratorSet g = single_generator(a, CMat(4));
    ThreadBatchState s;
    s.psi = testutil::random_unit_vector(4, init);
    auto drift = [&](double dt) {
      CounterStream n2{detail::derive_key(41, 1, 0)}, s2{detail::derive_key(41, 1, 1)};
      const auto path =
          evolve_thread(s, g, dt, static_cast<int>(std::llround(1.0 / dt)), n2, s2,
                        static_cast<int>(std::llround(1.0 / dt)));
      const double norm2 = vec_norm(path.states.back());
      return std::abs(norm2 * norm2 - 1.0);
    };
    const double d1 = drift(1e-3);
    const double d2 = drift(5e-4);
    CHECK(d1 < 10.0 * 1e-3);  // C * dt with C ~ |A psi|^2 over the path
    const double ratio = d1 / d2;
    CHECK(ratio > 1.9);
    CHECK(ratio < 2.1);
  }

  SECTION("switch rate at the Bernoulli limit is rejected") {
    SwitchingGeneratorSet g = single_generator(CMat(2), CMat(2));
    g.switch_rate = 200.0;
    ThreadBatchState s;
    s.psi = {1.0, 0.0};
    CHECK_THROWS_AS(evolve_thread(s, g, 1e-2, 1, noise, sw), ConfigError);
  }
}

TEST_CASE("CTMC switching frequency matches its rate") {
  CMat a(2);
  SwitchingGeneratorSet g;
  g.n = 2;
  g.generators = {a, a};
  g.switch_rate = 2.0;
  g.kernel = {{0.0, 1.0}, {1.0, 0.0}};  // always hop to the other index
  g.diffusion = CMat(2);
  CounterStream noise{detail::derive_key(91, 0, 0)};
  CounterStream sw{detail::derive_key(91, 0, 1)};
  ThreadBatchState s;
  s.psi = {1.0, 0.0};
  const int steps = 200000;
  const double dt = 5e-3;
  const auto path = evolve_thread(s, g, dt, steps, noise, sw, 1);
  int switches = 0;
  for (size_t k = 1; k < path.phi_at_step.size(); ++k)
    if (path.phi_at_step[k] != path.phi_at_step[k - 1]) ++switches;
  const double freq = static_cast<double>(switches) / static_cast<double>(steps - 1);
  const double p = g.switch_rate * dt;
  const double se = std::sqrt(p * (1 - p) / static_cast<double>(steps));
  CHECK(std::abs(freq - p) < 4.0 * se);
}

TEST_CASE("matrix SDE: algebraic invariants") {
  CounterStream init{detail::derive_key(17, 0, 0)};
  const CMat a = testutil::random_skew_hermitian(4, init, 1.0);
  const CMat d = testutil::random_anti_hermitian(4, init, 0.3);
  SwitchingGeneratorSet g = single_generator(a, d);
  CounterStream noise{detail::derive_key(17, 5, 0)};
  CMat rho0 = testutil::random_hermitian_psd(4, init);

  const auto path = evolve_density_stochastic(rho0, g, {0}, 1e-3, 1000, &noise, nullptr, 100);

  SECTION("trace is conserved step by step (cancellation is exact)") {
    for (const auto& rho : path.states)
      CHECK(std::abs(rho.trace() - rho0.trace()) < 1e-10);
  }
  SECTION("Hermiticity holds along the path") {
    for (const auto& rho : path.states) CHECK(rho.hermiticity_defect() < 1e-9);
  }
  SECTION("A = 0, D = 0 keeps rho constant") {
    SwitchingGeneratorSet id = single_generator(CMat(4), CMat(4));
    const auto still = evolve_density_stochastic(rho0, id, {0}, 1e-3, 50, &noise);
    for (size_t k = 0; k < rho0.a.size(); ++k) CHECK(still.states.back().a[k] == rho0.a[k]);
  }
}

TEST_CASE("thread outer products track the matrix SDE driven by the same noise") {
  CounterStream init{detail::derive_key(23, 0, 0)};
  const CMat a = testutil::random_skew_hermitian(4, init, 1.0);
  const CMat d = testutil::random_anti_hermitian(4, init, 0.2);
  SwitchingGeneratorSet g = single_generator(a, d);
  ThreadBatchState s;
  s.psi = testutil::random_unit_vector(4, init);
  const CMat rho0 = density_from_states({s.psi});

  const double dt = 1e-3;
  const int steps = 1000;
  CounterStream noise{detail::derive_key(23, 9, 0)};
  CounterStream sw{detail::derive_key(23, 9, 1)};
  const auto thread_path = evolve_thread(s, g, dt, steps, noise, sw, steps);
  const auto rho_path = evolve_density_stochastic(rho0, g, thread_path.phi_at_step, dt, steps,
                                                  nullptr, &thread_path.brownian_increments);

  const CMat from_thread = density_from_states({thread_path.states.back()});
  CMat diff = from_thread;
  diff -= rho_path.states.back();
  CHECK(diff.frobenius() < 10.0 * dt);
}

TEST_CASE("expected equation: RK4 vs matrix exponential oracle") {
  CounterStream init{detail::derive_key(29, 0, 0)};
  const CMat a = testutil::random_skew_hermitian(4, init, 1.0);
  CMat rho0 = testutil::random_hermitian_psd(4, init);
  SwitchingGeneratorSet g = single_generator(a, CMat(4));

  const auto path = evolve_density_expected(rho0, g, {{0.0, 0}}, 1e-3, 1000, 250);

  SECTION("matches e^{At} rho0 e^{A+t} within 1e-8") {
    CMat at = a;
    at *= cplx(1.0);
    const CMat u = expm(at);
    CMat expected = matmul(matmul(u, rho0), u.adjoint());
    CMat diff = expected;
    diff -= path.states.back();
    CHECK(diff.frobenius() < 1e-8);
  }
  SECTION("eigenvalues stay constant within 1e-8") {
    const auto ev0 = hermitian_eigenvalues(rho0);
    const auto ev1 = hermitian_eigenvalues(path.states.back());
    for (size_t i = 0; i < ev0.size(); ++i) CHECK(std::abs(ev0[i] - ev1[i]) < 1e-8);
  }
  SECTION("trace drift stays at rounding level") {
    CHECK(std::abs(path.states.back().trace() - rho0.trace()) < 1e-10);
  }
  SECTION("Hermiticity holds along the path") {
    for (const auto& rho : path.states) CHECK(rho.hermiticity_defect() < 1e-9);
  }
}

TEST_CASE("expected equation with pure diffusion conserves trace") {
  CounterStream init{detail::derive_key(31, 0, 0)};
  const CMat d = testutil::random_anti_hermitian(3, init, 0.8);
  CMat rho0 = testutil::random_hermitian_psd(3, init);
  SwitchingGeneratorSet g = single_generator(CMat(3), d);
  const auto path = evolve_density_expected(rho0, g, {{0.0, 0}}, 1e-3, 1000);
  CHECK(std::abs(path.states.back().trace() - rho0.trace()) < 1e-10);
}

TEST_CASE("finite-difference generator matches the analytic drift") {
  CounterStream init{detail::derive_key(37, 0, 0)};
  const CMat a = testutil::random_skew_hermitian(4, init, 1.0);
  const CMat d = testutil::random_anti_hermitian(4, init, 0.5);
  SwitchingGeneratorSet g = single_generator(a, d);
  ThreadBatchState s0;
  s0.psi = testutil::random_unit_vector(4, init);

  const double dt = 0.01;
  const uint64_t paths = 20000;
  CVec mean(4, cplx(0.0));
  for (uint64_t j = 0; j < paths; ++j) {
    CounterStream noise{detail::derive_key(37, j, 0)};
    CounterStream sw{detail::derive_key(37, j, 1)};
    const auto p = evolve_thread(s0, g, dt, 1, noise, sw);
    for (size_t i = 0; i < 4; ++i) mean[i] += (p.states.back()[i] - s0.psi[i]) / dt;
  }
  for (auto& z : mean) z /= static_cast<double>(paths);

  const CVec apsi = matvec(a, s0.psi);
  const CVec ddpsi = matvec(d, matvec(d, s0.psi));
  const CVec dpsi = matvec(d, s0.psi);
  for (size_t i = 0; i < 4; ++i) {
    const cplx analytic = apsi[i] + 0.5 * ddpsi[i];
    const double se = std::abs(dpsi[i]) / std::sqrt(static_cast<double>(paths) * dt);
    CHECK(std::abs(mean[i] - analytic) < 4.0 * se + 1e-12);
  }
}

TEST_CASE("MC mean of stochastic paths converges to the expected solution") {
  CounterStream init{detail::derive_key(43, 0, 0)};
  const CMat a = testutil::random_skew_hermitian(4, init, 1.0);
  const CMat d = testutil::random_anti_hermitian(4, init, 0.3);
  SwitchingGeneratorSet g = single_generator(a, d);
  const CMat rho0 = projector_e0(4);

  const double dt = 2e-3;
  const int steps = 500;
  const auto expected = evolve_density_expected(rho0, g, {{0.0, 0}}, dt, steps, steps);
  const auto mc = mc_expected_density(rho0, g, 0, dt, steps, 2000, 4242, 2);

  CMat diff = mc.mean;
  diff -= expected.states.back();
  CHECK(diff.frobenius() < 3.0 * mc.se_frobenius);
  CHECK(mc.max_hermiticity_defect < 1e-9);
}

TEST_CASE("generator set JSON schema") {
  json j;
  j["size"] = 2;
  j["generators"] = json::array();
  j["generators"].push_back(
      {{{0.0, 0.0}, {-1.0, 0.0}}, {{1.0, 0.0}, {0.0, 0.0}}});
  j["switch_rate"] = 1.5;
  j["switch_kernel"] = {{1.0}};
  j["diffusion"] = {{{0.0, 0.1}, {0.2, 0.3}}, {{-0.2, 0.3}, {0.0, -0.4}}};

  SECTION("valid set loads and keeps its pieces") {
    json ok = j;
    ok["switch_kernel"] = {{0.5, 0.5}, {0.25, 0.75}};
    ok["generators"].push_back(ok["generators"][0]);
    const auto g = generator_set_from_json(ok);
    CHECK(g.n == 2);
    CHECK(g.generator_count() == 2);
    CHECK(g.diffusion(0, 1) == cplx(0.2, 0.3));
  }
  SECTION("non-anti-Hermitian diffusion rejected") {
    json bad = j;
    bad["switch_kernel"] = {{1.0}};
    bad["generators"] = json::array({j["generators"][0]});
    bad["diffusion"] = {{{0.0, 0.0}, {1.0, 0.0}}, {{1.0, 0.0}, {0.0, 0.0}}};
    CHECK_THROWS_AS(generator_set_from_json(bad), ConfigError);
  }
  SECTION("kernel row sum off by 1e-3 rejected") {
    json bad = j;
    bad["generators"].push_back(j["generators"][0]);
    bad["switch_kernel"] = {{0.5, 0.5}, {0.5, 0.501}};
    CHECK_THROWS_AS(generator_set_from_json(bad), ConfigError);
  }
  SECTION("unknown key rejected") {
    json bad = j;
    bad["generators"] = json::array({j["generators"][0]});
    bad["switch_kernel"] = {{1.0}};
    bad["extra"] = true;
    CHECK_THROWS_AS(generator_set_from_json(bad), ConfigError);
  }
}

TEST_CASE("softmax-psi switching rule selects nearby centers") {
  SwitchingGeneratorSet g;
  g.n = 2;
  g.generators = {CMat(2), CMat(2)};
  g.switch_rate = 100.0;
  g.rule = SwitchRule::SoftmaxPsi;
  g.beta = 50.0;
  g.centers = {{cplx(1, 0), cplx(0, 0)}, {cplx(0, 0), cplx(1, 0)}};
  g.diffusion = CMat(2);
  CounterStream noise{detail::derive_key(53, 0, 0)};
  CounterStream sw{detail::derive_key(53, 0, 1)};
  ThreadBatchState s;
  s.psi = {1.0, 0.0};  // sits on center 0
  s.phi = 1;
  const auto path = evolve_thread(s, g, 1e-3, 2000, noise, sw, 1);
  // With a hot softmax, nearly every switch lands on the matching center.
  int at0 = 0, total = 0;
  for (int phi : path.phi_at_step) {
    total += 1;
    at0 += phi == 0 ? 1 : 0;
  }
  CHECK(static_cast<double>(at0) / total > 0.9);
}
