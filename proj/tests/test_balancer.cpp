#include <doctest.h>

#include <random>

#include "isgfan/loss_balancer.hpp"

using namespace isgfan;

TEST_CASE("dynamic_weight examples") {
  CHECK(dynamic_weight(0.5, 0.1, 0.5, 10.0) == 0.5);
  CHECK(std::abs(dynamic_weight(2.0, 0.1, 0.5, 10.0) - 0.25) < 1e-12);
  CHECK(dynamic_weight(1.0, 0.0, 0.5, 10.0) < 1e-15);
  CHECK(dynamic_weight(1.0, 0.1, 0.5, 10.0) == 0.5);
}

TEST_CASE("cap, bounds and continuity over random instances") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 1000; ++t) {
    const double ref = u(rng) * 2.0, base = u(rng), rho = 0.5 + 20.0 * u(rng);
    const double loss = ref * rho * 3.0 * u(rng) + (t % 7 == 0 ? 50.0 * u(rng) : 0.0);
    const double w = dynamic_weight(loss, ref, base, rho);
    CHECK(w * loss <= base * rho * ref + 1e-9);
    CHECK(w <= base);
    CHECK(w >= 0.0);
    if (loss <= rho * ref) CHECK(w == base);
  }
  const double base = 0.5, rho = 10.0, ref = 0.1;
  CHECK(dynamic_weight(rho * ref * (1.0 + 1e-10), ref, base, rho) == doctest::Approx(base).epsilon(1e-9));
}

TEST_CASE("assemble_total_loss examples") {
  BalancerConfig cfg;
  LossBundle b;
  b.l_lc = 0.7;
  auto r = assemble_total_loss(b, cfg);
  CHECK(r.total == 0.7);

  b.l_gd = 0.6;
  b.l_fd = 0.5;
  b.l_orth = 3.0;
  b.l_recon = 1.0;
  b.l_ld = 2.0;
  r = assemble_total_loss(b, cfg);
  CHECK(r.weights.lc == 1.0);
  CHECK(r.weights.gd == 0.5);
  CHECK(r.weights.fd == 0.1);
  CHECK(r.weights.orth == 0.01);
  CHECK(r.weights.recon == 0.01);
  CHECK(r.weights.ld == 0.01);
  CHECK(r.total == doctest::Approx(0.7 + 0.3 + 0.05 + 0.03 + 0.01 + 0.02));

  LossBundle c;
  c.l_lc = 0.1;
  c.l_gd = 5.0;
  r = assemble_total_loss(c, cfg);
  CHECK(r.weights.gd == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(r.total == doctest::Approx(0.6).epsilon(1e-12));

  LossBundle bad;
  bad.l_recon = -1.0;
  CHECK_THROWS(assemble_total_loss(bad, cfg));
}

TEST_CASE("default balancer matches the reference hyperparameters") {
  BalancerConfig cfg;
  CHECK(cfg.delta == 0.5);
  CHECK(cfg.zeta == 0.1);
  CHECK(cfg.gamma == 0.01);
  CHECK(cfg.mu == 0.01);
  CHECK(cfg.omega == 0.01);
  CHECK(cfg.rho == 10.0);
  cfg.rho = 0.0;
  CHECK_THROWS(cfg.validate());
}
