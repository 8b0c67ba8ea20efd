#include "deepntk/regression.hpp"

#include <cmath>

#include "deepntk/parallel.hpp"

namespace deepntk {

namespace {

// (1 - e^{-t lambda / N}) / lambda on the eigenbasis, zero on null directions.
Eigen::VectorXd solve_weights(const TrainingState& s, double t, bool allow_pseudo_inverse) {
  require(t >= 0.0, "time must be nonnegative");
  const double N = static_cast<double>(s.gram.rows());
  const double cut = kPseudoInverseThreshold * s.max_eig;
  Eigen::VectorXd w(s.eigenvalues.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const double lam = s.eigenvalues[i];
    if (!(lam > cut)) {
      if (!allow_pseudo_inverse) {
        fail(ErrorKind::singular_matrix, "Gram matrix is singular at the 1e-12 relative threshold");
      }
      w[i] = 0.0;
      continue;
    }
    w[i] = std::isinf(t) ? 1.0 / lam : -std::expm1(-t * lam / N) / lam;
  }
  return w;
}

}  // namespace

void validate_dataset(const Dataset& data) {
  const Eigen::Index n = data.X.rows();
  if (data.Z.rows() != n) fail(ErrorKind::invalid_dataset, "targets and inputs differ in length");
  Eigen::VectorXd norms = data.X.rowwise().norm();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if ((data.X.row(i) - data.X.row(j)).squaredNorm() == 0.0) {
        fail(ErrorKind::invalid_dataset, "duplicate rows " + std::to_string(i) + " and " +
                                             std::to_string(j));
      }
      const double denom = norms[i] * norms[j];
      if (denom == 0.0) continue;
      const double cosine = data.X.row(i).dot(data.X.row(j)) / denom;
      if (std::abs(cosine) >= 1.0 - 1e-9) {
        fail(ErrorKind::invalid_dataset, "colinear rows " + std::to_string(i) + " and " +
                                             std::to_string(j));
      }
    }
  }
}

TrainingState state_from_gram(const Eigen::MatrixXd& gram, int outputs,
                              const std::optional<Eigen::MatrixXd>& f0) {
  const Eigen::Index n = gram.rows();
  require(n >= 1 && gram.cols() == n, "Gram matrix must be square and nonempty");
  require(outputs >= 1, "need at least one output");
  TrainingState s;
  s.gram = 0.5 * (gram + gram.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s.gram);
  if (es.info() != Eigen::Success) fail(ErrorKind::numeric, "eigendecomposition failed");
  s.eigenvalues = es.eigenvalues().reverse();
  s.eigenvectors = es.eigenvectors().rowwise().reverse();
  s.max_eig = s.eigenvalues[0];
  s.min_eig = s.eigenvalues[n - 1];
  s.rank_deficient = !(s.min_eig > kPseudoInverseThreshold * s.max_eig);
  if (f0) {
    require(f0->rows() == n && f0->cols() == outputs, "f0 has the wrong shape");
    s.f0_train = *f0;
  } else {
    s.f0_train = Eigen::MatrixXd::Zero(n, outputs);
  }
  return s;
}

TrainingState build_gram(const Dataset& data, const KernelConfig& config,
                         const std::optional<Eigen::MatrixXd>& f0) {
  validate_dataset(data);
  const Eigen::Index n = data.X.rows();
  Eigen::MatrixXd gram(n, n);
  const std::size_t pairs = static_cast<std::size_t>(n * (n + 1) / 2);
  parallel_for(pairs, [&](std::size_t p) {
    // unrank p into (i, j), j >= i
    Eigen::Index i = 0, rem = static_cast<Eigen::Index>(p);
    while (rem >= n - i) {
      rem -= n - i;
      ++i;
    }
    const Eigen::Index j = i + rem;
    const double v = kernel_value(config, data.X.row(i).transpose(), data.X.row(j).transpose());
    gram(i, j) = v;
    gram(j, i) = v;
  });
  return state_from_gram(gram, static_cast<int>(data.Z.cols()), f0);
}

Eigen::MatrixXd evolve(const TrainingState& s, const Eigen::MatrixXd& Z, double t) {
  require(t >= 0.0, "evolve: time must be nonnegative");
  require(Z.rows() == s.gram.rows() && Z.cols() == s.f0_train.cols(), "evolve: Z has the wrong shape");
  const double N = static_cast<double>(s.gram.rows());
  Eigen::VectorXd decay(s.eigenvalues.size());
  for (Eigen::Index i = 0; i < decay.size(); ++i) {
    const double lam = std::max(s.eigenvalues[i], 0.0);
    decay[i] = std::isinf(t) ? (lam > 0.0 ? 0.0 : 1.0) : std::exp(-t * lam / N);
  }
  const Eigen::MatrixXd& U = s.eigenvectors;
  const Eigen::MatrixXd err = U.transpose() * (s.f0_train - Z);
  return Z + U * (decay.asDiagonal() * err);
}

Eigen::MatrixXd rkhs_residual_coeffs(const TrainingState& s, const Eigen::MatrixXd& Z, double t,
                                     bool allow_pseudo_inverse) {
  require(Z.rows() == s.gram.rows() && Z.cols() == s.f0_train.cols(), "Z has the wrong shape");
  const Eigen::VectorXd w = solve_weights(s, t, allow_pseudo_inverse);
  const Eigen::MatrixXd& U = s.eigenvectors;
  return U * (w.asDiagonal() * (U.transpose() * (Z - s.f0_train)));
}

Eigen::VectorXd kernel_row(const KernelConfig& config, const Eigen::MatrixXd& X,
                           const Eigen::VectorXd& x) {
  Eigen::VectorXd row(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) row[i] = kernel_value(config, x, X.row(i).transpose());
  return row;
}

Eigen::VectorXd predict(const TrainingState& s, const Dataset& data, const KernelConfig& config,
                        const Eigen::VectorXd& x_new, double t,
                        const std::optional<Eigen::VectorXd>& f0_new, bool allow_pseudo_inverse) {
  require(x_new.size() == data.X.cols(), "predict: input dimension mismatch");
  const Eigen::MatrixXd a = rkhs_residual_coeffs(s, data.Z, t, allow_pseudo_inverse);
  Eigen::VectorXd base = f0_new ? *f0_new : Eigen::VectorXd::Zero(a.cols());
  require(base.size() == a.cols(), "predict: f0_new has the wrong size");
  return base + a.transpose() * kernel_row(config, data.X, x_new);
}

Eigen::MatrixXd predict_many(const TrainingState& s, const Dataset& data,
                             const KernelConfig& config, const Eigen::MatrixXd& X_new, double t,
                             bool allow_pseudo_inverse) {
  require(X_new.cols() == data.X.cols(), "predict: input dimension mismatch");
  const Eigen::MatrixXd a = rkhs_residual_coeffs(s, data.Z, t, allow_pseudo_inverse);
  Eigen::MatrixXd cross(X_new.rows(), data.X.rows());
  parallel_for(static_cast<std::size_t>(X_new.rows()), [&](std::size_t r) {
    cross.row(r) = kernel_row(config, data.X, X_new.row(r).transpose()).transpose();
  });
  return cross * a;
}

double accuracy(const Eigen::MatrixXd& outputs, const std::vector<int>& labels) {
  require(static_cast<std::size_t>(outputs.rows()) == labels.size(), "accuracy: size mismatch");
  if (labels.empty()) return 0.0;
  int hits = 0;
  for (Eigen::Index i = 0; i < outputs.rows(); ++i) {
    Eigen::Index arg;
    outputs.row(i).maxCoeff(&arg);
    if (arg == labels[i]) ++hits;
  }
  return static_cast<double>(hits) / labels.size();
}

}  // namespace deepntk
