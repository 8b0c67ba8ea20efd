#include "deepntk/empirical.hpp"

#include <cmath>
#include <random>

#include "deepntk/parallel.hpp"

namespace deepntk {

namespace {

struct ForwardPass {
  std::vector<Eigen::VectorXd> pre;   // y^l, l = 1..L
  std::vector<Eigen::VectorXd> post;  // a^0 = x, a^l = phi(y^l)
};

double act(Activation a, double v) { return a == Activation::relu ? std::max(v, 0.0) : std::tanh(v); }

double dact(Activation a, double v) {
  if (a == Activation::relu) return v > 0.0 ? 1.0 : 0.0;
  const double t = std::tanh(v);
  return 1.0 - t * t;
}

Eigen::VectorXd apply(Activation a, const Eigen::VectorXd& v) {
  return v.unaryExpr([a](double s) { return act(a, s); });
}

double fan_in(const FiniteNet& net, int layer) {
  return layer == 0 ? net.input_dim : net.widths[layer - 1];
}

ForwardPass run_forward(const FiniteNet& net, const Eigen::VectorXd& x) {
  require(x.size() == net.input_dim, "input dimension mismatch");
  const int L = net.depth();
  const double sw = net.params.sigma_w, sb = net.params.sigma_b;
  ForwardPass fp;
  fp.post.push_back(x);
  for (int l = 0; l < L; ++l) {
    const double scale = sw / std::sqrt(fan_in(net, l));
    Eigen::VectorXd y = scale * (net.weights[l] * fp.post[l]) + sb * net.biases[l];
    if (net.arch == ArchKind::resnet_dense && l > 0) {
      y += fp.pre[l - 1].head(y.size());
    }
    fp.pre.push_back(y);
    fp.post.push_back(apply(net.activation, y));
  }
  return fp;
}

// Backward sensitivities delta^l = df/dy^l, restricted to the rows stored.
std::vector<Eigen::VectorXd> run_backward(const FiniteNet& net, const ForwardPass& fp) {
  const int L = net.depth();
  const double sw = net.params.sigma_w;
  std::vector<Eigen::VectorXd> delta(L);
  delta[L - 1] = Eigen::VectorXd::Ones(1);
  for (int l = L - 1; l >= 1; --l) {
    const double scale = sw / std::sqrt(fan_in(net, l));
    const Eigen::VectorXd& y = fp.pre[l - 1];
    Eigen::VectorXd back = scale * (net.weights[l].transpose() * delta[l]);
    for (Eigen::Index i = 0; i < back.size(); ++i) back[i] *= dact(net.activation, y[i]);
    if (net.arch == ArchKind::resnet_dense) {
      back.head(delta[l].size()) += delta[l];
    }
    delta[l - 1] = std::move(back);
  }
  return delta;
}

}  // namespace

std::size_t FiniteNet::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
  return n;
}

FiniteNet sample_net(ArchKind arch, Activation activation, const InitParams& params,
                     int input_dim, const std::vector<int>& widths, std::uint64_t seed) {
  require(arch == ArchKind::ffnn || arch == ArchKind::resnet_dense,
          "finite networks support ffnn and resnet_dense");
  require(input_dim >= 1, "input dimension must be >= 1");
  require(!widths.empty(), "need at least one layer");
  for (int w : widths) require(w >= 1, "widths must be >= 1");
  if (arch == ArchKind::resnet_dense) {
    for (std::size_t l = 1; l < widths.size(); ++l) {
      require(widths[l] == widths[l - 1], "residual layers need equal widths");
    }
  }
  FiniteNet net;
  net.arch = arch;
  net.activation = activation;
  net.params = params;
  net.input_dim = input_dim;
  net.widths = widths;
  net.seed = seed;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int L = static_cast<int>(widths.size());
  for (int l = 0; l < L; ++l) {
    const int rows = l == L - 1 ? 1 : widths[l];
    const int cols = l == 0 ? input_dim : widths[l - 1];
    Eigen::MatrixXd W(rows, cols);
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < cols; ++j) W(i, j) = normal(rng);
    }
    Eigen::VectorXd b(rows);
    for (int i = 0; i < rows; ++i) b[i] = normal(rng);
    net.weights.push_back(std::move(W));
    net.biases.push_back(std::move(b));
  }
  return net;
}

double forward(const FiniteNet& net, const Eigen::VectorXd& x) {
  return run_forward(net, x).pre.back()[0];
}

std::vector<double> layer_second_moments(const FiniteNet& net, const Eigen::VectorXd& x) {
  const ForwardPass fp = run_forward(net, x);
  std::vector<double> out;
  for (const auto& y : fp.pre) out.push_back(y.squaredNorm() / y.size());
  return out;
}

Eigen::VectorXd parameter_gradient(const FiniteNet& net, const Eigen::VectorXd& x) {
  const ForwardPass fp = run_forward(net, x);
  const auto delta = run_backward(net, fp);
  const double sw = net.params.sigma_w, sb = net.params.sigma_b;
  Eigen::VectorXd g(net.parameter_count());
  Eigen::Index pos = 0;
  for (int l = 0; l < net.depth(); ++l) {
    const double scale = sw / std::sqrt(fan_in(net, l));
    const Eigen::VectorXd& a = fp.post[l];
    const Eigen::VectorXd& d = delta[l];
    for (Eigen::Index i = 0; i < net.weights[l].rows(); ++i) {
      g.segment(pos, a.size()) = scale * d[i] * a;
      pos += a.size();
    }
    g.segment(pos, d.size()) = sb * d;
    pos += d.size();
  }
  return g;
}

Eigen::VectorXd flatten_parameters(const FiniteNet& net) {
  Eigen::VectorXd theta(net.parameter_count());
  Eigen::Index pos = 0;
  for (int l = 0; l < net.depth(); ++l) {
    const auto& W = net.weights[l];
    for (Eigen::Index i = 0; i < W.rows(); ++i) {
      theta.segment(pos, W.cols()) = W.row(i).transpose();
      pos += W.cols();
    }
    theta.segment(pos, net.biases[l].size()) = net.biases[l];
    pos += net.biases[l].size();
  }
  return theta;
}

void assign_parameters(FiniteNet& net, const Eigen::VectorXd& theta) {
  require(static_cast<std::size_t>(theta.size()) == net.parameter_count(), "parameter size mismatch");
  Eigen::Index pos = 0;
  for (int l = 0; l < net.depth(); ++l) {
    auto& W = net.weights[l];
    for (Eigen::Index i = 0; i < W.rows(); ++i) {
      W.row(i) = theta.segment(pos, W.cols()).transpose();
      pos += W.cols();
    }
    net.biases[l] = theta.segment(pos, net.biases[l].size());
    pos += net.biases[l].size();
  }
}

double empirical_ntk(const FiniteNet& net, const Eigen::VectorXd& x, const Eigen::VectorXd& xp) {
  const ForwardPass f1 = run_forward(net, x), f2 = run_forward(net, xp);
  const auto d1 = run_backward(net, f1), d2 = run_backward(net, f2);
  const double sw2 = net.params.sigma_w * net.params.sigma_w;
  const double sb2 = net.params.sigma_b * net.params.sigma_b;
  double K = 0.0;
  for (int l = 0; l < net.depth(); ++l) {
    const double feat = sw2 / fan_in(net, l) * f1.post[l].dot(f2.post[l]) + sb2;
    K += d1[l].dot(d2[l]) * feat;
  }
  return K;
}

GradientCheck finite_difference_check(const FiniteNet& net, const Eigen::VectorXd& x, double step) {
  const Eigen::VectorXd g = parameter_gradient(net, x);
  const Eigen::VectorXd theta = flatten_parameters(net);
  FiniteNet probe = net;
  Eigen::VectorXd fd(theta.size());
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    Eigen::VectorXd t = theta;
    t[i] = theta[i] + step;
    assign_parameters(probe, t);
    const double up = forward(probe, x);
    t[i] = theta[i] - step;
    assign_parameters(probe, t);
    const double down = forward(probe, x);
    fd[i] = (up - down) / (2.0 * step);
  }
  GradientCheck out;
  out.parameters = static_cast<std::size_t>(theta.size());
  const double norm = g.norm();
  out.rel_error = norm > 0.0 ? (fd - g).norm() / norm : (fd - g).norm();
  return out;
}

double meanfield_ntk(ArchKind arch, Activation activation, const InitParams& params,
                     const Eigen::VectorXd& x, const Eigen::VectorXd& xp, int depth) {
  const ActivationModel model =
      activation == Activation::relu ? ActivationModel::relu() : ActivationModel::tanh();
  const KernelTrace t = dense_trace(arch, model, params, dense_first_layer({x, xp}, params), depth);
  return t.ntk_value(depth);
}

WidthStudy width_convergence_study(ArchKind arch, Activation activation, const InitParams& params,
                                   const Eigen::VectorXd& x, const Eigen::VectorXd& xp, int depth,
                                   const std::vector<int>& widths, int seeds,
                                   std::uint64_t base_seed) {
  require(seeds >= 2, "need at least two seeds");
  require(widths.size() >= 2, "need at least two widths");
  const double mf = meanfield_ntk(arch, activation, params, x, xp, depth);
  WidthStudy study;
  for (int w : widths) {
    std::vector<double> ks(seeds);
    parallel_for(static_cast<std::size_t>(seeds), [&](std::size_t s) {
      const std::vector<int> ws(depth, w);
      const FiniteNet net = sample_net(arch, activation, params, static_cast<int>(x.size()), ws,
                                       base_seed + 1000003ULL * static_cast<std::uint64_t>(w) + s);
      ks[s] = empirical_ntk(net, x, xp);
    });
    WidthRow row;
    row.width = w;
    for (double k : ks) {
      row.mean_K += k;
      row.mean_abs_dev += std::abs(k - mf);
    }
    row.mean_K /= seeds;
    row.mean_abs_dev /= seeds;
    for (double k : ks) row.std_K += (k - row.mean_K) * (k - row.mean_K);
    row.std_K = std::sqrt(row.std_K / (seeds - 1));
    row.meanfield_K = mf;
    row.rel_err = std::abs(row.mean_K - mf) / std::abs(mf);
    study.rows.push_back(row);
  }
  double mx = 0.0, my = 0.0;
  const double n = static_cast<double>(study.rows.size());
  for (const auto& r : study.rows) {
    mx += std::log(r.width);
    my += std::log(r.mean_abs_dev);
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& r : study.rows) {
    sxx += (std::log(r.width) - mx) * (std::log(r.width) - mx);
    sxy += (std::log(r.width) - mx) * (std::log(r.mean_abs_dev) - my);
  }
  study.slope = sxy / sxx;
  return study;
}

}  // namespace deepntk
