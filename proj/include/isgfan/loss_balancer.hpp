#pragma once

#include "isgfan/objectives.hpp"

namespace isgfan {

/// Base weights of the auxiliary losses and the dominance threshold ratio.
struct BalancerConfig {
  double delta = 0.5;   ///< global domain
  double zeta = 0.1;    ///< focal domain
  double gamma = 0.01;  ///< orthogonality
  double mu = 0.01;     ///< reconstruction
  double omega = 0.01;  ///< label discriminator
  double rho = 10.0;
  double guard = 1e-18;

  void validate() const;
};

/// Multipliers applied to each loss term; l_lc is always 1.
struct LossWeights {
  double lc = 1.0;
  double gd = 0.0;
  double fd = 0.0;
  double orth = 0.0;
  double recon = 0.0;
  double ld = 0.0;
};

/// base, reduced to base * rho * ref / loss whenever loss exceeds rho * ref.
double dynamic_weight(double loss, double ref_loss, double base, double rho, double guard = 1e-18);

struct BalancedLoss {
  double total = 0.0;
  LossWeights weights;
};

BalancedLoss assemble_total_loss(const LossBundle& bundle, const BalancerConfig& cfg);

}  // namespace isgfan
