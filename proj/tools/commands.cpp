#include "commands.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <unistd.h>

#include "deepntk/asymptotics.hpp"
#include "deepntk/empirical.hpp"
#include "deepntk/errors.hpp"
#include "deepntk/io/dataset.hpp"
#include "deepntk/io/output.hpp"
#include "deepntk/phase.hpp"
#include "deepntk/regression.hpp"
#include "deepntk/spectral.hpp"

namespace deepntk::cli {

namespace {

using json = nlohmann::ordered_json;
using io::format_real;

const double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Output {
  std::string csv;   // empty: stdout
  std::string json;  // empty: stdout (commands with a summary)
};

struct KernelFlags {
  std::string arch = "ffnn";
  std::string activation = "relu";
  std::string phase = "eoc";
  double sigma_b = kNaN;
  double sigma_w = kNaN;
  std::string norm = "default";
  int quad_order = 64;
};

struct InputFlags {
  std::string path;
  std::string normalize = "none";
  int synthetic_d = 10;
  int synthetic_n = 20;
  std::uint64_t seed = 1;
};

struct Resolved {
  ArchKind arch = ArchKind::ffnn;
  ActivationModel model = ActivationModel::relu();
  InitParams params;
  Normalization norm = Normalization::none;
  std::string phase;
};

// Presets: ordered is (1, 0.1); eoc is (0, sqrt 2) for ReLU and
// (sigma_b or 0.2, eoc_curve(sigma_b)) for tanh. An explicit --sigma-w wins.
Resolved resolve(const KernelFlags& f) {
  Resolved r;
  r.arch = parse_architecture(f.arch);
  const Activation act = parse_activation(f.activation);
  require(f.quad_order >= 2, "--quad-order must be >= 2");
  r.model = act == Activation::relu ? ActivationModel::relu() : ActivationModel::tanh(f.quad_order);
  if (!std::isnan(f.sigma_w)) {
    r.params = {std::isnan(f.sigma_b) ? 0.0 : f.sigma_b, f.sigma_w};
    r.phase = "custom";
  } else if (f.phase == "ordered") {
    r.params = {std::isnan(f.sigma_b) ? 1.0 : f.sigma_b, 0.1};
    r.phase = "ordered";
  } else if (f.phase == "eoc") {
    if (act == Activation::relu) {
      require(std::isnan(f.sigma_b) || f.sigma_b == 0.0,
              "the ReLU edge of chaos is the single point sigma_b = 0");
      r.params = {0.0, std::sqrt(2.0)};
    } else {
      const double sb = std::isnan(f.sigma_b) ? 0.2 : f.sigma_b;
      r.params = {sb, eoc_curve(r.model, sb)};
    }
    r.phase = "eoc";
  } else {
    fail(ErrorKind::invalid_argument, "unknown --phase '" + f.phase + "' (ordered, eoc)");
  }
  r.norm = f.norm == "default" ? default_normalization(r.arch) : parse_normalization(f.norm);
  return r;
}

void add_kernel_flags(CLI::App* sub, KernelFlags& f, bool with_arch = true) {
  if (with_arch) {
    sub->add_option("--arch", f.arch,
                    "ffnn, cnn, resnet_dense, resnet_conv, scaled_resnet_dense, scaled_resnet_conv")
        ->capture_default_str();
  }
  sub->add_option("--activation", f.activation, "relu or tanh")->capture_default_str();
  sub->add_option("--phase", f.phase, "initialization preset: ordered or eoc")->capture_default_str();
  sub->add_option("--sigma-b", f.sigma_b, "bias scale (overrides the preset)");
  sub->add_option("--sigma-w", f.sigma_w, "weight scale (selects a custom point)");
  sub->add_option("--norm", f.norm, "none, average, resnet, scaled or default")->capture_default_str();
  sub->add_option("--quad-order", f.quad_order, "Gauss-Hermite order for tanh")->capture_default_str();
}

void add_input_flags(CLI::App* sub, InputFlags& f) {
  sub->add_option("--input", f.path, "CSV dataset: header, numeric features, integer label last");
  sub->add_option("--normalize", f.normalize, "row normalization: none or unit_sphere")->capture_default_str();
  sub->add_option("--synthetic-d", f.synthetic_d, "synthetic sphere dimension")->capture_default_str();
  sub->add_option("--synthetic-n", f.synthetic_n, "synthetic sphere point count")->capture_default_str();
  sub->add_option("--seed", f.seed, "synthetic data seed")->capture_default_str();
}

void add_output_flags(CLI::App* sub, Output& o, bool with_json) {
  sub->add_option("--out", o.csv, "CSV output path (default stdout)");
  if (with_json) sub->add_option("--json", o.json, "JSON summary path (default stdout)");
}

Dataset load_input(const InputFlags& f) {
  if (!f.path.empty()) return io::load_dataset(f.path, io::parse_row_normalization(f.normalize));
  return io::synthetic_two_class(f.synthetic_d, f.synthetic_n, f.seed);
}

using Config = std::vector<std::pair<std::string, std::string>>;

Config kernel_config(const Resolved& r) {
  return {{"arch", to_string(r.arch)},
          {"activation", to_string(r.model.kind)},
          {"phase", r.phase},
          {"sigma_b", format_real(r.params.sigma_b)},
          {"sigma_w", format_real(r.params.sigma_w)},
          {"norm", to_string(r.norm)},
          {"quad_order", std::to_string(r.model.kind == Activation::tanh ? r.model.quadrature.order() : 0)}};
}

Config input_config(const InputFlags& f) {
  if (!f.path.empty()) return {{"input", f.path}, {"normalize", f.normalize}};
  return {{"input", "synthetic"}, {"synthetic_d", std::to_string(f.synthetic_d)},
          {"synthetic_n", std::to_string(f.synthetic_n)}};
}

std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

io::RunHeader make_header(const std::string& command, Config config, std::uint64_t seed) {
  return {command, std::move(config), seed, io::artifact_version(), io::utc_timestamp()};
}

void emit_csv(const Output& o, const io::RunHeader& h, const io::CsvTable& t, std::ostream& out) {
  if (o.csv.empty()) {
    out << h.render() << t.body();
  } else {
    io::write_csv(o.csv, h, t);
  }
}

void emit_json(const Output& o, const json& j, std::ostream& out) {
  const std::string text = j.dump(2) + "\n";
  if (o.json.empty()) {
    out << text;
  } else {
    io::write_atomic(o.json, text);
  }
}

json number(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

std::vector<double> grid(double lo, double hi, int steps) {
  require(steps >= 1, "grid steps must be >= 1");
  std::vector<double> g;
  for (int i = 0; i < steps; ++i) g.push_back(steps == 1 ? lo : lo + (hi - lo) * i / (steps - 1));
  return g;
}

// ---- phase ----

struct PhaseCmd {
  std::string activation = "tanh";
  int quad_order = 64;
  double sb_min = 0.0, sb_max = 1.0, sw_min = 0.5, sw_max = 2.5;
  int sb_steps = 11, sw_steps = 21;
  bool eoc_curve = false;
  Output out;
};

void run_phase(const PhaseCmd& c, std::ostream& out) {
  const Activation act = parse_activation(c.activation);
  const ActivationModel model = act == Activation::relu ? ActivationModel::relu() : ActivationModel::tanh(c.quad_order);
  io::CsvTable t;
  t.columns = {{"sigma_b", "bias scale"},
               {"sigma_w", "weight scale"},
               {"q", "variance fixed point (inf where the variance diverges)"},
               {"chi", "chi = sigma_w^2 E[phi'(sqrt(q) Z)^2] at q"},
               {"phase", "ordered, eoc or chaotic"}};
  const auto row = [&](const InitParams& p) {
    const PhaseReport r = classify(model, p);
    t.add_row({format_real(p.sigma_b), format_real(p.sigma_w), format_real(r.q_fixed), format_real(r.chi),
               to_string(r.phase)});
  };
  for (double sb : grid(c.sb_min, c.sb_max, c.sb_steps)) {
    if (c.eoc_curve) {
      if (act == Activation::relu) {
        fail(ErrorKind::unsupported, "the ReLU edge of chaos is the single point (0, sqrt 2)");
      }
      row({sb, eoc_curve(model, sb)});
      continue;
    }
    for (double sw : grid(c.sw_min, c.sw_max, c.sw_steps)) row({sb, sw});
  }
  const Config cfg = {{"activation", c.activation},
                      {"quad_order", std::to_string(c.quad_order)},
                      {"sigma_b", format_real(c.sb_min) + ":" + format_real(c.sb_max) + ":" + std::to_string(c.sb_steps)},
                      {"sigma_w", c.eoc_curve ? std::string("eoc_curve")
                                              : format_real(c.sw_min) + ":" + format_real(c.sw_max) + ":" +
                                                    std::to_string(c.sw_steps)}};
  emit_csv(c.out, make_header("phase", cfg, 0), t, out);
}

// ---- kernel ----

struct KernelCmd {
  KernelFlags k;
  InputFlags in;
  int depth = 10;
  std::vector<int> pair{0, 1};
  int positions = 0;
  int filter_k = 1;
  bool assumption1 = false;
  Output out;
};

Eigen::MatrixXd as_conv(const Eigen::VectorXd& row, int M) {
  require(M >= 1 && row.size() % M == 0, "input length must be channels x --positions");
  const int n0 = static_cast<int>(row.size()) / M;
  Eigen::MatrixXd X(n0, M);
  for (int a = 0; a < M; ++a) X.col(a) = row.segment(a * n0, n0);
  return X;
}

void run_kernel(const KernelCmd& c, std::ostream& out) {
  const Resolved r = resolve(c.k);
  require(c.depth >= 1, "--depth must be >= 1");
  require(c.pair.size() == 2, "--pair takes two row indices");
  InputFlags in = c.in;
  if (in.path.empty()) in.synthetic_n = std::max(in.synthetic_n, std::max(c.pair[0], c.pair[1]) + 1);
  const Dataset data = load_input(in);
  for (int i : c.pair) {
    require(i >= 0 && i < data.X.rows(), "--pair index out of range");
  }
  const Eigen::VectorXd x = data.X.row(c.pair[0]).transpose(), xp = data.X.row(c.pair[1]).transpose();
  KernelTrace tr;
  double limit = kNaN;
  if (is_conv(r.arch)) {
    require(c.positions >= 1, "conv architectures need --positions");
    tr = conv_trace(r.arch, {as_conv(x, c.positions), as_conv(xp, c.positions)}, r.model, r.params,
                    c.filter_k, c.depth, c.assumption1);
  } else {
    const DensePair pr{x, xp};
    tr = dense_trace(r.arch, r.model, r.params, dense_first_layer(pr, r.params), c.depth);
    try {
      limit = limiting_kernel(r.arch, r.model, r.params, pr);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::divergence && e.kind() != ErrorKind::unsupported) throw;
    }
  }
  const std::vector<double> kn = normalize(tr, r.norm);
  io::CsvTable t;
  t.columns = {{"l", "layer index"},
               {"qx", "variance q^l(x)"},
               {"qxp", "variance q^l(x')"},
               {"c", "correlation c^l(x,x')"},
               {"qdot", "derivative covariance qdot^l(x,x') (0 at l = 1)"},
               {"K", "NTK K^l(x,x') (conv kinds: position pair (0,0))"},
               {"K_normalized", "K^l divided by the normalization factor"}};
  for (int l = 1; l <= c.depth; ++l) {
    const double s = std::exp(tr.log_scale[l - 1]);
    t.add_row({std::to_string(l), format_real(tr.qx[l - 1] * s), format_real(tr.qxp[l - 1] * s),
               format_real(tr.corr[l - 1]), format_real(tr.qdot[l - 1]), format_real(tr.ntk_value(l)),
               format_real(kn[l - 1])});
  }
  Config cfg = kernel_config(r);
  cfg.push_back({"depth", std::to_string(c.depth)});
  cfg.push_back({"pair", join_ints(c.pair)});
  if (is_conv(r.arch)) {
    cfg.push_back({"positions", std::to_string(c.positions)});
    cfg.push_back({"filter_k", std::to_string(c.filter_k)});
    cfg.push_back({"assumption1", c.assumption1 ? "true" : "false"});
  }
  for (auto& kv : input_config(c.in)) cfg.push_back(kv);
  emit_csv(c.out, make_header("kernel", cfg, c.in.seed), t, out);
  if (!c.out.json.empty()) {
    json j;
    j["arch"] = to_string(r.arch);
    j["activation"] = to_string(r.model.kind);
    j["sigma_b"] = r.params.sigma_b;
    j["sigma_w"] = r.params.sigma_w;
    j["depth"] = c.depth;
    j["norm"] = to_string(r.norm);
    j["K"] = number(tr.ntk_value(c.depth));
    j["K_normalized"] = number(kn.back());
    j["limit"] = number(limit);
    j["in_b_epsilon"] = tr.in_b_epsilon;
    j["variance_overflow"] = tr.variance_overflow;
    emit_json(c.out, j, out);
  }
}

// ---- rates ----

struct RatesCmd {
  KernelFlags k;
  std::string input;
  int pairs = 10;
  int input_dim = 10;
  std::uint64_t seed = 11;
  std::vector<int> depths = default_rate_depths();
  std::string model = "auto";
  Output out;
};

void run_rates(const RatesCmd& c, std::ostream& out) {
  const Resolved r = resolve(c.k);
  require(!is_conv(r.arch), "rates supports dense architectures");
  std::vector<DensePair> pairs;
  if (!c.input.empty()) {
    const Dataset data = io::load_dataset(c.input, io::RowNormalization::none);
    for (Eigen::Index i = 0; i + 1 < data.X.rows(); i += 2) {
      pairs.push_back({data.X.row(i).transpose(), data.X.row(i + 1).transpose()});
    }
    require(!pairs.empty(), "rates needs at least two input rows");
  } else {
    pairs = io::synthetic_pairs(c.input_dim, c.pairs, c.seed);
  }
  std::vector<PairCovariance> firsts;
  for (const auto& p : pairs) firsts.push_back(dense_first_layer(p, r.params));
  const RateStudy st = rate_study(r.arch, r.model, r.params, firsts, c.depths);

  const Phase ph = classify(r.model, r.params).phase;
  RateModel chosen;
  if (c.model == "auto") {
    chosen = (ph == Phase::eoc || is_residual(r.arch)) ? RateModel::power : RateModel::exp;
  } else {
    chosen = parse_rate_model(c.model);
  }
  io::CsvTable t;
  t.columns = {{"L", "depth"},
               {"residual", "max over pairs of |normalized K^L - limit| (floored at 1e-300)"},
               {"theory_residual", "predicted residual shape anchored at the first depth"}};
  for (std::size_t i = 0; i < st.depths.size(); ++i) {
    t.add_row({std::to_string(st.depths[i]), format_real(st.residual[i]), format_real(st.theory[i])});
  }
  Config cfg = kernel_config(r);
  cfg.push_back({"kernel_normalization", to_string(st.norm)});
  cfg.push_back({"depths", join_ints(c.depths)});
  cfg.push_back({"pairs", std::to_string(pairs.size())});
  cfg.push_back({"input", c.input.empty() ? "synthetic" : c.input});
  cfg.push_back({"input_dim", std::to_string(pairs.front().x.size())});
  emit_csv(c.out, make_header("rates", cfg, c.seed), t, out);

  const RateFit fit = fit_rate(st.depths, st.residual, chosen);
  const RateFit pw = fit_rate(st.depths, st.residual, RateModel::power);
  const RateFit ex = fit_rate(st.depths, st.residual, RateModel::exp);
  json j;
  j["arch"] = to_string(r.arch);
  j["activation"] = to_string(r.model.kind);
  j["sigma_b"] = r.params.sigma_b;
  j["sigma_w"] = r.params.sigma_w;
  j["phase"] = to_string(ph);
  j["norm"] = to_string(st.norm);
  j["theory_shape"] = st.theory_shape;
  j["model"] = to_string(chosen);
  j["exponent"] = number(fit.exponent);
  j["prefactor"] = number(fit.prefactor);
  j["r_squared"] = number(fit.r_squared);
  j["L_min"] = fit.L_min;
  j["L_max"] = fit.L_max;
  j["power_exponent"] = number(pw.exponent);
  j["power_r_squared"] = number(pw.r_squared);
  j["exp_exponent"] = number(ex.exponent);
  j["exp_r_squared"] = number(ex.r_squared);
  emit_json(c.out, j, out);
}

// ---- spectrum ----

struct SpectrumCmd {
  KernelFlags k;
  int d = 3;
  std::vector<int> depths{3, 30, 300};
  int k_max = 64;
  int nodes = 256;
  Output out;
};

void run_spectrum(const SpectrumCmd& c, std::ostream& out) {
  const Resolved r = resolve(c.k);
  require(!is_conv(r.arch), "spectrum supports dense architectures");
  KernelConfig kc{r.arch, r.model, r.params, 1, r.norm};
  const auto decs = eigen_trend(kc, c.d, c.depths, c.k_max, c.nodes);
  io::CsvTable t;
  t.columns = {{"L", "depth"},
               {"k", "harmonic degree"},
               {"mu_k", "Hecke-Funk coefficient of the normalized kernel profile"},
               {"mu_k_normalized", "mu_k N(d,k) / sum_j mu_j N(d,j)"}};
  for (const auto& dec : decs) {
    const auto nm = dec.normalized();
    for (int k = 0; k <= c.k_max; ++k) {
      t.add_row({std::to_string(dec.depth), std::to_string(k), format_real(dec.mu[k]), format_real(nm[k])});
    }
  }
  Config cfg = kernel_config(r);
  cfg.push_back({"d", std::to_string(c.d)});
  cfg.push_back({"depths", join_ints(c.depths)});
  cfg.push_back({"k_max", std::to_string(c.k_max)});
  cfg.push_back({"nodes", std::to_string(c.nodes)});
  emit_csv(c.out, make_header("spectrum", cfg, 0), t, out);
  if (!c.out.json.empty()) {
    std::vector<double> tg;
    for (int i = 0; i <= 198; ++i) tg.push_back(-0.99 + 0.01 * i);
    const auto profiles = zonal_profiles(kc, c.d, c.depths, tg);
    json j;
    j["kernel_id"] = decs.front().kernel_id;
    for (std::size_t i = 0; i < decs.size(); ++i) {
      const auto nm = decs[i].normalized();
      double err = 0;
      for (std::size_t m = 0; m < tg.size(); ++m) {
        err = std::max(err, std::abs(decs[i].reconstruct(tg[m]) - profiles[i][m]));
      }
      const std::string L = std::to_string(decs[i].depth);
      j["mu0_share_L" + L] = nm[0];
      j["higher_share_L" + L] = 1.0 - nm[0];
      j["reconstruction_error_L" + L] = err;
    }
    emit_json(c.out, j, out);
  }
}

// ---- train ----

struct TrainCmd {
  KernelFlags k;
  InputFlags in;
  int depth = 3;
  double test_fraction = 0.25;
  std::uint64_t split_seed = 1;
  std::string time = "infinity";
  std::string predictions;
  bool pinv = false;
  Output out;
};

double parse_time(const std::string& s) {
  if (s == "infinity" || s == "inf") return kInfiniteTime;
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  require(used == s.size() && v >= 0.0, "--time must be a nonnegative number or 'infinity'");
  return v;
}

void run_train(const TrainCmd& c, std::ostream& out) {
  const Resolved r = resolve(c.k);
  require(!is_conv(r.arch), "train supports dense architectures");
  require(c.test_fraction >= 0.0 && c.test_fraction < 1.0, "--test-fraction must lie in [0, 1)");
  const double t = parse_time(c.time);
  InputFlags in = c.in;
  const Dataset all = load_input(in);
  const int N = static_cast<int>(all.X.rows());
  std::vector<int> idx(N);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(c.split_seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const int n_test = static_cast<int>(std::lround(c.test_fraction * N));
  require(N - n_test >= 1, "no training rows left after the split");
  std::vector<int> test(idx.begin(), idx.begin() + n_test), train(idx.begin() + n_test, idx.end());
  std::sort(test.begin(), test.end());
  std::sort(train.begin(), train.end());
  const Dataset tr = io::subset(all, train);
  const KernelConfig kc{r.arch, r.model, r.params, c.depth, r.norm};
  const TrainingState s = build_gram(tr, kc);
  const Eigen::MatrixXd f_train = predict_many(s, tr, kc, tr.X, t, c.pinv);
  const double train_acc = accuracy(f_train, tr.labels);
  double test_acc = kNaN;
  Eigen::MatrixXd f_test;
  std::vector<int> test_labels;
  if (n_test > 0) {
    const Dataset te = io::subset(all, test);
    f_test = predict_many(s, tr, kc, te.X, t, c.pinv);
    test_acc = accuracy(f_test, te.labels);
    test_labels = te.labels;
  }
  json j;
  j["min_eig"] = s.min_eig;
  j["max_eig"] = s.max_eig;
  j["eig_ratio"] = s.min_eig / s.max_eig;
  j["rank_deficient"] = s.rank_deficient;
  j["train_acc"] = train_acc;
  j["test_acc"] = number(test_acc);
  j["n_train"] = static_cast<int>(train.size());
  j["n_test"] = n_test;
  j["time"] = std::isinf(t) ? json("infinity") : json(t);
  j["arch"] = to_string(r.arch);
  j["activation"] = to_string(r.model.kind);
  j["sigma_b"] = r.params.sigma_b;
  j["sigma_w"] = r.params.sigma_w;
  j["depth"] = c.depth;
  j["norm"] = to_string(r.norm);
  emit_json(c.out, j, out);

  if (!c.predictions.empty()) {
    io::CsvTable p;
    p.columns = {{"index", "row index in the input dataset"},
                 {"split", "train or test"},
                 {"label", "true label"},
                 {"predicted", "argmax of the outputs"}};
    const int o = static_cast<int>(all.Z.cols());
    for (int k = 0; k < o; ++k) {
      p.columns.push_back({"output_" + std::to_string(k), "f_t output for class " + std::to_string(k)});
    }
    const auto add = [&](const std::vector<int>& rows, const Eigen::MatrixXd& F, const char* split) {
      for (std::size_t i = 0; i < rows.size(); ++i) {
        Eigen::Index arg = 0;
        F.row(i).maxCoeff(&arg);
        std::vector<std::string> row{std::to_string(rows[i]), split, std::to_string(all.labels[rows[i]]),
                                     std::to_string(arg)};
        for (int k = 0; k < o; ++k) row.push_back(format_real(F(i, k)));
        p.add_row(std::move(row));
      }
    };
    add(train, f_train, "train");
    if (n_test > 0) add(test, f_test, "test");
    Config cfg = kernel_config(r);
    cfg.push_back({"depth", std::to_string(c.depth)});
    cfg.push_back({"time", c.time});
    cfg.push_back({"test_fraction", format_real(c.test_fraction)});
    cfg.push_back({"split_seed", std::to_string(c.split_seed)});
    for (auto& kv : input_config(in)) cfg.push_back(kv);
    io::write_csv(c.predictions, make_header("train", cfg, c.in.seed), p);
  }
}

// ---- empirical ----

struct EmpiricalCmd {
  KernelFlags k;
  int depth = 3;
  std::vector<int> widths{64, 128, 256, 512, 1024, 2048, 4096};
  int seeds = 30;
  std::uint64_t seed = 1;
  std::uint64_t pair_seed = 3;
  int input_dim = 5;
  Output out;
};

void run_empirical(const EmpiricalCmd& c, std::ostream& out) {
  const Resolved r = resolve(c.k);
  require(r.arch == ArchKind::ffnn || r.arch == ArchKind::resnet_dense,
          "empirical supports ffnn and resnet_dense");
  require(c.depth >= 1 && c.seeds >= 1, "--depth and --seeds must be >= 1");
  const DensePair pr = io::synthetic_pairs(c.input_dim, 1, c.pair_seed).front();
  // gradient check on a tiny network before any study
  const FiniteNet tiny = sample_net(r.arch, r.model.kind, r.params, c.input_dim,
                                    std::vector<int>(c.depth, 3), c.seed);
  const GradientCheck g = finite_difference_check(tiny, pr.x);
  if (!(g.rel_error < 1e-5)) {
    fail(ErrorKind::numeric, "finite-difference gradient check failed: relative error " + format_real(g.rel_error));
  }
  const WidthStudy st = width_convergence_study(r.arch, r.model.kind, r.params, pr.x, pr.xp, c.depth, c.widths,
                                                c.seeds, c.seed);
  io::CsvTable t;
  t.columns = {{"width", "hidden width"},
               {"mean_K", "seed mean of the empirical NTK"},
               {"std_K", "seed standard deviation of the empirical NTK"},
               {"meanfield_K", "infinite-width NTK from the recursion"},
               {"rel_err", "|mean_K - meanfield_K| / |meanfield_K|"},
               {"mean_abs_dev", "seed mean of |K - meanfield_K|"}};
  for (const auto& w : st.rows) {
    t.add_row({std::to_string(w.width), format_real(w.mean_K), format_real(w.std_K), format_real(w.meanfield_K),
               format_real(w.rel_err), format_real(w.mean_abs_dev)});
  }
  Config cfg = kernel_config(r);
  cfg.push_back({"depth", std::to_string(c.depth)});
  cfg.push_back({"widths", join_ints(c.widths)});
  cfg.push_back({"seeds", std::to_string(c.seeds)});
  cfg.push_back({"pair_seed", std::to_string(c.pair_seed)});
  cfg.push_back({"input_dim", std::to_string(c.input_dim)});
  emit_csv(c.out, make_header("empirical", cfg, c.seed), t, out);
  json j;
  j["arch"] = to_string(r.arch);
  j["activation"] = to_string(r.model.kind);
  j["sigma_b"] = r.params.sigma_b;
  j["sigma_w"] = r.params.sigma_w;
  j["depth"] = c.depth;
  j["gradient_check_rel_error"] = g.rel_error;
  j["slope"] = number(st.slope);
  emit_json(c.out, j, out);
}

// ---- selftest ----

struct SelftestCmd {
  std::string module;
  std::string json_path;
};

int run_selftest(const SelftestCmd& c, std::ostream& out) {
  std::vector<CheckResult> all = run_module_invariants();
  for (auto& r : cli_invariants()) all.push_back(std::move(r));
  int failed = 0, shown = 0;
  json arr = json::array();
  for (const auto& r : all) {
    if (!c.module.empty() && r.module != c.module) continue;
    ++shown;
    failed += r.passed ? 0 : 1;
    out << (r.passed ? "PASS " : "FAIL ") << r.module << ": " << r.name << " (" << r.detail << ")\n";
    arr.push_back({{"module", r.module}, {"name", r.name}, {"passed", r.passed}, {"detail", r.detail}});
  }
  out << shown - failed << "/" << shown << " invariants passed\n";
  if (!c.json_path.empty()) io::write_atomic(c.json_path, arr.dump(2) + "\n");
  return failed == 0 ? 0 : 1;
}

const char* module_of(const std::string& command) {
  if (command == "phase") return "phase";
  if (command == "kernel") return "kernels";
  if (command == "rates") return "asymptotics";
  if (command == "spectrum") return "spectral";
  if (command == "train") return "regression";
  if (command == "empirical") return "empirical";
  return "cli";
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool has_flag(const std::vector<std::string>& args, const std::string& flag) {
  for (const auto& a : args) {
    if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
  }
  return false;
}

// Inserts "--key=value" for every config-file key not given on the command line.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::string path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;
  std::ifstream f(path);
  if (!f) fail(ErrorKind::io, "cannot read config file '" + path + "'");
  std::vector<std::string> extra;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      fail(ErrorKind::parse, path + ":" + std::to_string(lineno) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    std::replace(key.begin(), key.end(), '_', '-');
    if (key.empty() || key == "config") {
      fail(ErrorKind::parse, path + ":" + std::to_string(lineno) + ": invalid key");
    }
    if (!has_flag(args, "--" + key)) extra.push_back("--" + key + "=" + value);
  }
  std::vector<std::string> out;
  out.push_back(args.front());
  out.insert(out.end(), extra.begin(), extra.end());
  out.insert(out.end(), args.begin() + 1, args.end());
  return out;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Infinite-width NTK recursions, depth asymptotics and kernel regression", "deepntk"};
  app.set_version_flag("--version", io::artifact_version());
  app.require_subcommand(1);

  PhaseCmd phase;
  auto* s_phase = app.add_subcommand("phase", "phase diagram grid (q, chi, phase)");
  s_phase->add_option("--activation", phase.activation, "relu or tanh")->capture_default_str();
  s_phase->add_option("--quad-order", phase.quad_order, "Gauss-Hermite order for tanh")->capture_default_str();
  s_phase->add_option("--sb-min", phase.sb_min)->capture_default_str();
  s_phase->add_option("--sb-max", phase.sb_max)->capture_default_str();
  s_phase->add_option("--sb-steps", phase.sb_steps)->capture_default_str();
  s_phase->add_option("--sw-min", phase.sw_min)->capture_default_str();
  s_phase->add_option("--sw-max", phase.sw_max)->capture_default_str();
  s_phase->add_option("--sw-steps", phase.sw_steps)->capture_default_str();
  s_phase->add_flag("--eoc-curve", phase.eoc_curve, "emit the tanh edge-of-chaos curve instead of a grid");
  add_output_flags(s_phase, phase.out, false);

  KernelCmd kernel;
  auto* s_kernel = app.add_subcommand("kernel", "per-depth NTK recursion for one input pair");
  add_kernel_flags(s_kernel, kernel.k);
  kernel.in.synthetic_n = 2;
  add_input_flags(s_kernel, kernel.in);
  s_kernel->add_option("--depth", kernel.depth)->capture_default_str();
  s_kernel->add_option("--pair", kernel.pair, "two row indices")->delimiter(',')->expected(2);
  s_kernel->add_option("--positions", kernel.positions, "conv: spatial positions M (rows hold M blocks of channels)");
  s_kernel->add_option("--filter-k", kernel.filter_k, "conv: filter half width k")->capture_default_str();
  s_kernel->add_flag("--assumption1", kernel.assumption1, "conv: use the offset-independent scalar reduction");
  add_output_flags(s_kernel, kernel.out, true);

  RatesCmd rates;
  auto* s_rates = app.add_subcommand("rates", "convergence of the normalized kernel with depth");
  add_kernel_flags(s_rates, rates.k);
  s_rates->add_option("--input", rates.input, "CSV dataset; consecutive rows form pairs");
  s_rates->add_option("--pairs", rates.pairs)->capture_default_str();
  s_rates->add_option("--input-dim", rates.input_dim)->capture_default_str();
  s_rates->add_option("--seed", rates.seed)->capture_default_str();
  s_rates->add_option("--depths", rates.depths, "depth list")->delimiter(',');
  s_rates->add_option("--model", rates.model, "auto, power, exp, power_log or inv_log")->capture_default_str();
  add_output_flags(s_rates, rates.out, true);

  SpectrumCmd spectrum;
  auto* s_spectrum = app.add_subcommand("spectrum", "spherical-harmonic spectrum of the kernel on S^{d-1}");
  add_kernel_flags(s_spectrum, spectrum.k);
  s_spectrum->add_option("--d", spectrum.d)->capture_default_str();
  s_spectrum->add_option("--depths", spectrum.depths)->delimiter(',');
  s_spectrum->add_option("--k-max", spectrum.k_max)->capture_default_str();
  s_spectrum->add_option("--nodes", spectrum.nodes, "Gauss-Jacobi nodes")->capture_default_str();
  add_output_flags(s_spectrum, spectrum.out, true);

  TrainCmd train;
  auto* s_train = app.add_subcommand("train", "closed-form kernel gradient-flow training");
  add_kernel_flags(s_train, train.k);
  train.in.synthetic_n = 200;
  add_input_flags(s_train, train.in);
  s_train->add_option("--depth", train.depth)->capture_default_str();
  s_train->add_option("--test-fraction", train.test_fraction)->capture_default_str();
  s_train->add_option("--split-seed", train.split_seed)->capture_default_str();
  s_train->add_option("--time", train.time, "training time or 'infinity'")->capture_default_str();
  s_train->add_option("--predictions", train.predictions, "per-example predictions CSV path");
  s_train->add_flag("--pinv", train.pinv, "pseudo-inverse for rank-deficient Gram matrices at t = infinity");
  s_train->add_option("--json", train.out.json, "JSON summary path (default stdout)");

  EmpiricalCmd empirical;
  auto* s_emp = app.add_subcommand("empirical", "finite-width Monte-Carlo NTK against the mean-field value");
  add_kernel_flags(s_emp, empirical.k);
  s_emp->add_option("--depth", empirical.depth)->capture_default_str();
  s_emp->add_option("--widths", empirical.widths)->delimiter(',');
  s_emp->add_option("--seeds", empirical.seeds)->capture_default_str();
  s_emp->add_option("--seed", empirical.seed, "base seed")->capture_default_str();
  s_emp->add_option("--pair-seed", empirical.pair_seed)->capture_default_str();
  s_emp->add_option("--input-dim", empirical.input_dim)->capture_default_str();
  add_output_flags(s_emp, empirical.out, true);

  SelftestCmd selftest;
  auto* s_self = app.add_subcommand("selftest", "run the invariant suites of all modules");
  s_self->add_option("--module", selftest.module, "restrict to one module");
  s_self->add_option("--json", selftest.json_path, "write results as JSON");

  std::string config_path;
  for (auto* s : {s_phase, s_kernel, s_rates, s_spectrum, s_train, s_emp, s_self}) {
    s->add_option("--config", config_path, "flat key = value file; command-line flags take precedence");
  }

  std::vector<std::string> expanded;
  try {
    expanded = expand_config(args);
  } catch (const Error& e) {
    err << "deepntk: config error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  }
  std::vector<std::string> rev(expanded.rbegin(), expanded.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();
  try {
    if (sub == s_phase) run_phase(phase, out);
    if (sub == s_kernel) run_kernel(kernel, out);
    if (sub == s_rates) run_rates(rates, out);
    if (sub == s_spectrum) run_spectrum(spectrum, out);
    if (sub == s_train) run_train(train, out);
    if (sub == s_emp) run_empirical(empirical, out);
    if (sub == s_self) return run_selftest(selftest, out);
    return 0;
  } catch (const Error& e) {
    err << "deepntk " << command << ": " << module_of(command) << " error: " << e.what() << "\n";
    err << "config:\n" << sub->config_to_str(true, false);
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "deepntk " << command << ": " << module_of(command) << " error: " << e.what() << "\n";
    err << "config:\n" << sub->config_to_str(true, false);
    return 3;
  }
}

namespace {

std::string csv_body(const std::string& path) {
  std::ifstream f(path);
  std::string line, body;
  while (std::getline(f, line)) {
    if (!line.empty() && line[0] == '#') continue;
    body += line + "\n";
  }
  return body;
}

std::string read_all(const std::string& path) {
  std::ifstream f(path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() / ("deepntk-selftest-" + std::to_string(::getpid()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

std::vector<CheckResult> cli_invariants() {
  std::vector<CheckResult> out;
  const TempDir dir;
  const std::vector<std::vector<std::string>> runs = {
      {"kernel", "--arch", "ffnn", "--activation", "tanh", "--depth", "25"},
      {"kernel", "--arch", "resnet_dense", "--phase", "ordered", "--depth", "25", "--synthetic-d", "4"},
      {"rates", "--depths", "16,32,64,128,256,512,1024,2048"},
      {"spectrum", "--phase", "ordered", "--depths", "3,30"},
      {"phase", "--sb-steps", "3", "--sw-steps", "4"}};
  const auto run_to = [](std::vector<std::string> args, const std::string& csv, std::string* detail) {
    args.push_back("--out");
    args.push_back(csv);
    if (args.front() != "phase") {
      args.push_back("--json");
      args.push_back(csv + ".json");
    }
    std::ostringstream o, e;
    const int code = run(args, o, e);
    if (code != 0) *detail += args.front() + " exited " + std::to_string(code) + ": " + e.str();
    return code == 0;
  };
  out.push_back(run_check("cli", "identical config and seed give byte-identical CSV bodies", [&](std::string& d) {
    bool ok = true;
    for (std::size_t i = 0; i < runs.size(); ++i) {
      const std::string a = dir.file("a" + std::to_string(i) + ".csv"), b = dir.file("b" + std::to_string(i) + ".csv");
      if (!run_to(runs[i], a, &d) || !run_to(runs[i], b, &d)) return false;
      const bool same = csv_body(a) == csv_body(b) && !csv_body(a).empty();
      if (!same) d += runs[i].front() + " bodies differ; ";
      ok = ok && same;
    }
    if (ok) d = std::to_string(runs.size()) + " commands compared";
    return ok;
  }));
  out.push_back(run_check("cli", "schema sidecar documents every CSV column", [&](std::string& d) {
    bool ok = true;
    for (std::size_t i = 0; i < runs.size(); ++i) {
      const std::string a = dir.file("a" + std::to_string(i) + ".csv");
      std::istringstream body(csv_body(a));
      std::string header, name;
      std::getline(body, header);
      std::vector<std::string> cols;
      std::istringstream hs(header);
      while (std::getline(hs, name, ',')) cols.push_back(name);
      const json schema = json::parse(read_all(a + ".schema.json"));
      std::vector<std::string> documented;
      for (const auto& c : schema["columns"]) {
        if (c["description"].get<std::string>().empty()) ok = false;
        documented.push_back(c["name"].get<std::string>());
      }
      if (documented != cols) {
        ok = false;
        d += runs[i].front() + " schema mismatch; ";
      }
    }
    if (ok) d = "all sidecars complete";
    return ok;
  }));
  return out;
}

}  // namespace deepntk::cli
