#pragma once

#include <string>
#include <vector>

#include "deepntk/kernels.hpp"

namespace deepntk {

// Number of degree-k spherical harmonics on S^{d-1}.
long long harmonic_count(int d, int k);

// Legendre polynomial of dimension d with P(1) = 1.
double legendre_poly(int d, int k, double t);
// P^d_0(t) .. P^d_kmax(t)
std::vector<double> legendre_all(int d, int k_max, double t);

// Omega_m = 2 pi^(m/2) / Gamma(m/2), surface area of S^(m-1).
double sphere_area(int m);

struct SpectralDecomposition {
  int d = 3;
  int depth = 0;
  std::vector<double> mu;
  std::vector<double> multiplicities;
  std::string kernel_id;

  // sum_k mu_k N(d,k) P^d_k(t)
  double reconstruct(double t) const;
  // mu_k N(d,k) / sum_j mu_j N(d,j)
  std::vector<double> normalized() const;
};

// Gauss-Jacobi rule for the weight (1 - t^2)^((d-3)/2).
QuadratureRule sphere_rule(int d, int nodes = 256);

PairCovariance sphere_first_layer(const InitParams& params, int d, double t);

std::vector<double> zonal_profile(const KernelConfig& config, int d,
                                  const std::vector<double>& grid);
// profiles[i][j] = g_{depths[i]}(grid[j])
std::vector<std::vector<double>> zonal_profiles(const KernelConfig& config, int d,
                                                const std::vector<int>& depths,
                                                const std::vector<double>& grid);

SpectralDecomposition decompose(const std::vector<double>& profile, const QuadratureRule& rule,
                                int d, int k_max);

std::vector<SpectralDecomposition> eigen_trend(const KernelConfig& config, int d,
                                               const std::vector<int>& depths, int k_max,
                                               int nodes = 256);

std::string kernel_id(const KernelConfig& config);

}  // namespace deepntk
