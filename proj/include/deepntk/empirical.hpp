#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "deepntk/kernels.hpp"

namespace deepntk {

// Finite random network in the NTK parameterization. The scalar output is
// neuron 0 of the last layer, so only that row of the last layer's weights
// and bias is stored.
struct FiniteNet {
  ArchKind arch = ArchKind::ffnn;  // ffnn or resnet_dense
  Activation activation = Activation::relu;
  InitParams params;
  int input_dim = 1;
  std::vector<int> widths;                // n_1 .. n_L
  std::vector<Eigen::MatrixXd> weights;   // layer l: n_l x n_{l-1} (last: 1 x n_{L-1})
  std::vector<Eigen::VectorXd> biases;    // layer l: n_l (last: 1)
  std::uint64_t seed = 0;

  int depth() const { return static_cast<int>(widths.size()); }
  std::size_t parameter_count() const;
};

FiniteNet sample_net(ArchKind arch, Activation activation, const InitParams& params,
                     int input_dim, const std::vector<int>& widths, std::uint64_t seed);

double forward(const FiniteNet& net, const Eigen::VectorXd& x);
// Per-layer average of y^l_i(x)^2 over neurons (last layer: the output unit).
std::vector<double> layer_second_moments(const FiniteNet& net, const Eigen::VectorXd& x);

// df/dtheta flattened layer by layer, weights row-major then bias.
Eigen::VectorXd parameter_gradient(const FiniteNet& net, const Eigen::VectorXd& x);
Eigen::VectorXd flatten_parameters(const FiniteNet& net);
void assign_parameters(FiniteNet& net, const Eigen::VectorXd& theta);

// Exact NTK of the sampled network by layerwise reverse accumulation.
double empirical_ntk(const FiniteNet& net, const Eigen::VectorXd& x, const Eigen::VectorXd& xp);

struct GradientCheck {
  double rel_error = 0.0;  // ||g_fd - g|| / ||g||
  std::size_t parameters = 0;
};

GradientCheck finite_difference_check(const FiniteNet& net, const Eigen::VectorXd& x,
                                      double step = 1e-5);

struct WidthRow {
  int width = 0;
  double mean_K = 0.0;
  double std_K = 0.0;
  double meanfield_K = 0.0;
  double rel_err = 0.0;       // |mean_K - meanfield_K| / |meanfield_K|
  double mean_abs_dev = 0.0;  // mean over seeds of |K - meanfield_K|
};

struct WidthStudy {
  std::vector<WidthRow> rows;
  double slope = 0.0;  // of log mean_abs_dev against log width
};

// Mean-field NTK at the given depth for ffnn or resnet_dense.
double meanfield_ntk(ArchKind arch, Activation activation, const InitParams& params,
                     const Eigen::VectorXd& x, const Eigen::VectorXd& xp, int depth);

WidthStudy width_convergence_study(ArchKind arch, Activation activation, const InitParams& params,
                                   const Eigen::VectorXd& x, const Eigen::VectorXd& xp, int depth,
                                   const std::vector<int>& widths, int seeds,
                                   std::uint64_t base_seed = 1);

}  // namespace deepntk
