#include "isgfan/loss_balancer.hpp"

#include <cmath>
#include <stdexcept>

namespace isgfan {

void BalancerConfig::validate() const {
  for (double w : {delta, zeta, gamma, mu, omega}) {
    if (!(w >= 0.0)) throw std::invalid_argument("balancer base weights must be nonnegative");
  }
  if (!(rho > 0.0)) throw std::invalid_argument("balancer rho must be positive");
}

double dynamic_weight(double loss, double ref_loss, double base, double rho, double guard) {
  const double threshold = rho * ref_loss;
  if (loss > threshold) return base * threshold / (loss + guard);
  return base;
}

BalancedLoss assemble_total_loss(const LossBundle& bundle, const BalancerConfig& cfg) {
  if (!bundle.valid()) throw std::invalid_argument("loss bundle must hold finite nonnegative values");
  const double ref = bundle.l_lc;
  BalancedLoss out;
  out.weights.lc = 1.0;
  out.weights.gd = dynamic_weight(bundle.l_gd, ref, cfg.delta, cfg.rho, cfg.guard);
  out.weights.fd = dynamic_weight(bundle.l_fd, ref, cfg.zeta, cfg.rho, cfg.guard);
  out.weights.orth = dynamic_weight(bundle.l_orth, ref, cfg.gamma, cfg.rho, cfg.guard);
  out.weights.recon = dynamic_weight(bundle.l_recon, ref, cfg.mu, cfg.rho, cfg.guard);
  out.weights.ld = dynamic_weight(bundle.l_ld, ref, cfg.omega, cfg.rho, cfg.guard);
  out.total = bundle.l_lc + out.weights.gd * bundle.l_gd + out.weights.fd * bundle.l_fd +
              out.weights.orth * bundle.l_orth + out.weights.recon * bundle.l_recon + out.weights.ld * bundle.l_ld;
  return out;
}

}  // namespace isgfan
