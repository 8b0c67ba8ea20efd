#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "deepntk/phase.hpp"

namespace deepntk {

enum class ArchKind { ffnn, cnn, resnet_dense, resnet_conv, scaled_resnet_dense, scaled_resnet_conv };

std::string to_string(ArchKind a);
ArchKind parse_architecture(const std::string& name);
bool is_conv(ArchKind a);
bool is_residual(ArchKind a);
// Dense recursion that a conv kind reduces to under Assumption 1.
ArchKind dense_equivalent(ArchKind a);

struct ConvParams {
  int channels_width = 4;     // M, circular
  int filter_half_width = 1;  // k, filter offsets [-k, k]
  bool assumption1 = false;
};

struct Architecture {
  ArchKind kind = ArchKind::ffnn;
  ConvParams conv;
};

struct DensePair {
  Eigen::VectorXd x, xp;
};

// Conv inputs: n0 channels by M positions.
struct ConvPair {
  Eigen::MatrixXd x, xp;
};

// Per-layer M x M snapshot of a full-grid conv recursion. Stored values are
// mantissas; multiply by exp(log_scale) of the same layer.
struct ConvGrid {
  Eigen::VectorXd qx, qxp;
  Eigen::MatrixXd qcov, corr, qdot, ntk;
};

// Per-depth record for one input pair; index l-1 holds layer l. qx, qxp, qcov
// and ntk are mantissas scaled by exp(log_scale[l-1]) (log_scale is zero
// unless a residual recursion had to be rescaled).
struct KernelTrace {
  ArchKind arch = ArchKind::ffnn;
  double sigma_w = 1.0;
  int depth = 0;
  std::vector<double> qx, qxp, qcov, corr, one_minus_corr, qdot, ntk, log_scale;
  bool variance_overflow = false;
  bool in_b_epsilon = true;  // first-layer 1 - c at least 1e-3
  std::vector<ConvGrid> grid;

  double ntk_value(int l) const;   // may overflow to inf
  double log_ntk(int l) const;     // log of |K^l|
};

PairCovariance dense_first_layer(const DensePair& pair, const InitParams& params);

// Depth-L recursion of a dense kind from a given first-layer covariance.
KernelTrace dense_trace(ArchKind kind, const ActivationModel& model, const InitParams& params,
                        const PairCovariance& first, int L);

KernelTrace ntk_ffnn(const DensePair& pair, const ActivationModel& model,
                     const InitParams& params, int L);
KernelTrace ntk_resnet_dense(const DensePair& pair, const InitParams& params, int L);
KernelTrace ntk_scaled_resnet(const DensePair& pair, const InitParams& params, int L);

KernelTrace ntk_cnn(const ConvPair& pair, const ActivationModel& model, const InitParams& params,
                    int M, int k, int L, bool assumption1);
KernelTrace ntk_resnet_conv(const ConvPair& pair, const InitParams& params, int M, int k, int L,
                            bool assumption1);
KernelTrace ntk_scaled_resnet_conv(const ConvPair& pair, const InitParams& params, int M, int k,
                                   int L, bool assumption1);

// Any conv kind; assumption1 selects the scalar reduction.
KernelTrace conv_trace(ArchKind kind, const ConvPair& pair, const ActivationModel& model,
                       const InitParams& params, int k, int L, bool assumption1);

enum class Normalization { none, average, resnet, scaled };

std::string to_string(Normalization n);
Normalization parse_normalization(const std::string& name);
Normalization default_normalization(ArchKind a);
double log_normalizer(Normalization n, double sigma_w, int l);

std::vector<double> normalize(const KernelTrace& trace, Normalization scheme);

// Limit of the normalized kernel as depth grows, from a first-layer covariance.
double limiting_kernel(ArchKind arch, const ActivationModel& model, const InitParams& params,
                       const PairCovariance& first);
double limiting_kernel(ArchKind arch, const ActivationModel& model, const InitParams& params,
                       const DensePair& pair);

struct KernelConfig {
  ArchKind arch = ArchKind::ffnn;
  ActivationModel activation = ActivationModel::relu();
  InitParams params;
  int depth = 1;
  Normalization norm = Normalization::none;
};

// Normalized K^depth for a dense pair.
double kernel_value(const KernelConfig& config, const Eigen::VectorXd& x,
                    const Eigen::VectorXd& xp);
double kernel_value(const KernelConfig& config, const PairCovariance& first);
// Normalized K^L at each requested depth, one recursion up to the largest.
std::vector<double> kernel_values_at(const KernelConfig& config, const PairCovariance& first,
                                     const std::vector<int>& depths);

}  // namespace deepntk
