#pragma once

#include <string>

#include "deepntk/activations.hpp"

namespace deepntk {

struct InitParams {
  double sigma_b = 0.0;
  double sigma_w = 1.0;
};

enum class Phase { ordered, chaotic, eoc };

std::string to_string(Phase p);

struct PhaseReport {
  InitParams params;
  double q_fixed = 0.0;
  double chi = 0.0;
  Phase phase = Phase::ordered;
  bool degenerate = false;  // tanh with sigma_b = 0 and q_fixed = 0
};

inline constexpr double kPhaseTolerance = 1e-8;

// sigma_b^2 + sigma_w^2 E[phi(sqrt(q) Z)^2]
double variance_map(const ActivationModel& model, const InitParams& params, double q);

// Limiting variance of the layerwise variance map. For ReLU at (0, sqrt 2)
// every variance is fixed and input_variance is returned.
double variance_fixed_point(const ActivationModel& model, const InitParams& params,
                            double input_variance = 1.0);

// sigma_w^2 E[phi'(sqrt(q) Z)^2]
double chi(const ActivationModel& model, const InitParams& params, double q);

PhaseReport classify(const ActivationModel& model, const InitParams& params,
                     double tol = kPhaseTolerance, double input_variance = 1.0);

// sigma_w on the tanh edge of chaos for the given sigma_b.
double eoc_curve(const ActivationModel& tanh_model, double sigma_b);

// Correlation map at the fixed-point variance (throws for a degenerate q = 0).
CorrelationMap correlation_map(const ActivationModel& model, const InitParams& params,
                               double input_variance = 1.0);

}  // namespace deepntk
