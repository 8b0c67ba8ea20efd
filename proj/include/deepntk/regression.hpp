#pragma once

#include <Eigen/Dense>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "deepntk/kernels.hpp"

namespace deepntk {

struct Dataset {
  Eigen::MatrixXd X;  // N x d
  Eigen::MatrixXd Z;  // N x o targets
  std::vector<int> labels;  // class ids when targets are one-hot
  std::vector<std::string> names;

  int size() const { return static_cast<int>(X.rows()); }
};

// Throws invalid-dataset on duplicate rows or a pair with |cos| >= 1 - 1e-9.
void validate_dataset(const Dataset& data);

inline constexpr double kPseudoInverseThreshold = 1e-12;

struct TrainingState {
  Eigen::MatrixXd gram;
  Eigen::VectorXd eigenvalues;   // nonincreasing
  Eigen::MatrixXd eigenvectors;  // columns match eigenvalues
  Eigen::MatrixXd f0_train;      // N x o
  double min_eig = 0.0;
  double max_eig = 0.0;
  bool rank_deficient = false;   // some eigenvalue below the pseudo-inverse threshold
};

// Gram matrix of normalized K^L over the dataset plus its eigendecomposition.
TrainingState build_gram(const Dataset& data, const KernelConfig& config,
                         const std::optional<Eigen::MatrixXd>& f0 = std::nullopt);
// Same, from a precomputed symmetric Gram matrix.
TrainingState state_from_gram(const Eigen::MatrixXd& gram, int outputs,
                              const std::optional<Eigen::MatrixXd>& f0 = std::nullopt);

inline constexpr double kInfiniteTime = std::numeric_limits<double>::infinity();

// f_t(X) = e^{-tK/N} f_0 + (I - e^{-tK/N}) Z
Eigen::MatrixXd evolve(const TrainingState& state, const Eigen::MatrixXd& Z, double t);

// a = K^{-1} (I - e^{-tK/N}) (Z - f_0(X))
Eigen::MatrixXd rkhs_residual_coeffs(const TrainingState& state, const Eigen::MatrixXd& Z,
                                     double t, bool allow_pseudo_inverse = false);

Eigen::VectorXd kernel_row(const KernelConfig& config, const Eigen::MatrixXd& X,
                           const Eigen::VectorXd& x);

// f_t(x) = f_0(x) + K(x, X) a
Eigen::VectorXd predict(const TrainingState& state, const Dataset& data,
                        const KernelConfig& config, const Eigen::VectorXd& x_new, double t,
                        const std::optional<Eigen::VectorXd>& f0_new = std::nullopt,
                        bool allow_pseudo_inverse = false);

// Rows of predictions for many inputs, sharing one coefficient solve.
Eigen::MatrixXd predict_many(const TrainingState& state, const Dataset& data,
                             const KernelConfig& config, const Eigen::MatrixXd& X_new, double t,
                             bool allow_pseudo_inverse = false);

// Fraction of rows whose argmax matches the label.
double accuracy(const Eigen::MatrixXd& outputs, const std::vector<int>& labels);

}  // namespace deepntk
