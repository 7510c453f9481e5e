#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace stmc {

// Exponential feedback controller for the proposal scale:
// sigma' = sigma * exp(G * (alpha_observed - alpha_target)), clamped to
// [1e-6, 10]. The exponential form keeps sigma positive and bounds each
// update by a factor exp(G).
struct ControllerState {
  double sigma = 1.0;
  double alpha_target = 0.234;
  double gain = 2.1;
};

inline ControllerState tune_scale(const ControllerState& ctrl, double alpha_observed) {
  if (alpha_observed < 0.0 || alpha_observed > 1.0)
    throw std::invalid_argument("tune_scale: acceptance rate outside [0,1]");
  ControllerState next = ctrl;
  next.sigma = std::clamp(ctrl.sigma * std::exp(ctrl.gain * (alpha_observed - ctrl.alpha_target)),
                          1e-6, 10.0);
  return next;
}

}  // namespace stmc
