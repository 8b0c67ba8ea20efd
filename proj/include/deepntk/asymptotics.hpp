#pragma once

#include <string>
#include <vector>

#include "deepntk/kernels.hpp"

namespace deepntk {

enum class RateModel { power, power_log, exp, inv_log };

std::string to_string(RateModel m);
RateModel parse_rate_model(const std::string& name);

// Least-squares fit in the transform domain:
//   power      log r = log A + e log L
//   power_log  log r - log log L = log A + e log L
//   exp        log r = log A - e L           (e is the decay rate gamma)
//   inv_log    log r = log A + e log log L   (e = -p for A / log(L)^p)
struct RateFit {
  RateModel model = RateModel::power;
  double exponent = 0.0;
  double prefactor = 0.0;
  double r_squared = 0.0;
  int L_min = 0;
  int L_max = 0;
};

RateFit fit_rate(const std::vector<int>& depths, const std::vector<double>& residuals,
                 RateModel model);

struct ExpansionConstants {
  double kappa_relu = 0.0;
  double kappa_tanh = 0.0;  // NaN unless tanh
  double zeta_tanh = 0.0;   // NaN unless tanh
  double kappa_resnet = 0.0;
  double s = 0.0;
  double b = 0.0;
  double zeta_scaled = 0.0;
};

ExpansionConstants expansion_constants(const ActivationModel& model, const InitParams& params);

// Leading-order c^l predicted by the depth expansions.
double theoretical_correlation(ArchKind arch, const ActivationModel& model,
                               const InitParams& params, int l);

// 1 - c^l at the requested depths from the correlation-only recursion,
// started from correlation c1 at the fixed-point variance (or unit variance
// where no fixed point exists).
std::vector<double> correlation_gaps(ArchKind arch, const ActivationModel& model,
                                     const InitParams& params, double c1,
                                     const std::vector<int>& depths);

enum class ExpansionLaw { inverse_square, inverse, inverse_log_square };

std::string to_string(ExpansionLaw law);

struct ExpansionCheck {
  ExpansionLaw law = ExpansionLaw::inverse_square;
  int depth = 0;
  double empirical = 0.0;    // l^2 (1-c), l (1-c) or log(l)^2 (1-c)
  double theoretical = 0.0;  // kappa or zeta
  double rel_error = 0.0;
};

ExpansionLaw expansion_law(ArchKind arch, const ActivationModel& model);
double expansion_constant(ArchKind arch, const ActivationModel& model, const InitParams& params);

std::vector<ExpansionCheck> check_expansion(const std::vector<int>& depths,
                                            const std::vector<double>& gaps, ArchKind arch,
                                            const ActivationModel& model,
                                            const InitParams& params);
ExpansionCheck check_expansion(ArchKind arch, const ActivationModel& model,
                               const InitParams& params, double c1, int depth);

// Default rate depth grid 32 * 2^j, j = 0..8.
std::vector<int> default_rate_depths();

struct RateStudy {
  std::vector<int> depths;
  Normalization norm = Normalization::none;
  std::vector<double> limits;                    // per pair
  std::vector<std::vector<double>> per_pair;     // [pair][depth]
  std::vector<double> residual;                  // max over pairs, floored at 1e-300
  std::vector<double> theory;                    // theoretical shape anchored at depths[0]
  std::string theory_shape;
};

// Residuals |kappa^L - kappa^inf| over pairs: the EOC and residual kinds use
// their normalized kernels, ordered/chaotic FFNN the raw kernel.
RateStudy rate_study(ArchKind arch, const ActivationModel& model, const InitParams& params,
                     const std::vector<PairCovariance>& firsts, const std::vector<int>& depths);

}  // namespace deepntk
