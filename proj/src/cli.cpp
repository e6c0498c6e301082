#include "mlgp/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>

#include "mlgp/archive.hpp"
#include "mlgp/bound.hpp"
#include "mlgp/predict.hpp"
#include "mlgp/synth.hpp"
#include "mlgp/trainer.hpp"

namespace mlgp {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitIo = 2;
constexpr int kExitNumeric = 3;

std::string fnv1a_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for hashing");
  std::uint64_t h = 1469598103934665603ull;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
  }
  char out[24];
  std::snprintf(out, sizeof(out), "fnv1a:%016llx",
                static_cast<unsigned long long>(h));
  return out;
}

void write_json(const std::string& path, const json& doc) {
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream os(path);
  if (!os) throw IoError("cannot write '" + path + "'");
  os << doc.dump(2) << '\n';
}

json load_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open '" + path + "'");
  json doc;
  is >> doc;
  return doc;
}

KernelSpec::Kind parse_kernel(const std::string& name) {
  if (name == "linear") return KernelSpec::Kind::linear;
  if (name == "se") return KernelSpec::Kind::squared_exponential;
  throw CLI::ValidationError("--kernel", "must be 'linear' or 'se'");
}

InducingRepresentation::Mode parse_mode(const std::string& name) {
  if (name == "subspace") return InducingRepresentation::Mode::subspace;
  if (name == "free-z") return InducingRepresentation::Mode::free_z;
  throw CLI::ValidationError("--mode", "must be 'subspace' or 'free-z'");
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::string basis_path;
  std::string out{"mlgp_run"};
  std::string resume;
  std::string from_manifest;
  std::string kernel{"linear"};
  std::string mode{"subspace"};
  TrainConfig config;
  bool precompute_cross{true};
};

json train_config_json(const TrainArgs& a) {
  return json{{"data", a.data},
              {"basis", a.basis_path},
              {"out", a.out},
              {"kernel", a.kernel},
              {"mode", a.mode},
              {"latents", a.config.latents},
              {"inducing", a.config.inducing},
              {"rank", a.config.rank},
              {"batch", a.config.batch_size},
              {"neg", a.config.neg_size},
              {"epochs", a.config.epochs},
              {"lr", a.config.learning_rate},
              {"adam_beta1", a.config.adam_beta1},
              {"adam_beta2", a.config.adam_beta2},
              {"adam_eps", a.config.adam_eps},
              {"seed", a.config.seed},
              {"quad_order", a.config.quadrature_order},
              {"checkpoint_every", a.config.checkpoint_every},
              {"iid", a.config.iid_sampling},
              {"kmeans_iters", a.config.kmeans_iters},
              {"precompute_cross", a.precompute_cross}};
}

void train_args_from_json(const json& j, TrainArgs& a) {
  a.data = j.at("data").get<std::string>();
  a.basis_path = j.value("basis", std::string{});
  a.kernel = j.at("kernel").get<std::string>();
  a.mode = j.at("mode").get<std::string>();
  a.config.latents = j.at("latents").get<Index>();
  a.config.inducing = j.at("inducing").get<Index>();
  a.config.rank = j.at("rank").get<Index>();
  a.config.batch_size = j.at("batch").get<Index>();
  a.config.neg_size = j.at("neg").get<Index>();
  a.config.epochs = j.at("epochs").get<Index>();
  a.config.learning_rate = j.at("lr").get<double>();
  a.config.adam_beta1 = j.at("adam_beta1").get<double>();
  a.config.adam_beta2 = j.at("adam_beta2").get<double>();
  a.config.adam_eps = j.at("adam_eps").get<double>();
  a.config.seed = j.at("seed").get<std::uint64_t>();
  a.config.quadrature_order = j.at("quad_order").get<int>();
  a.config.checkpoint_every = j.at("checkpoint_every").get<Index>();
  a.config.iid_sampling = j.at("iid").get<bool>();
  a.config.kmeans_iters = j.at("kmeans_iters").get<int>();
  a.precompute_cross = j.at("precompute_cross").get<bool>();
}

int cmd_train(TrainArgs& a) {
  if (!a.from_manifest.empty()) {
    const json manifest = load_json(a.from_manifest);
    train_args_from_json(manifest.at("config"), a);
  }
  a.config.kernel = parse_kernel(a.kernel);
  a.config.mode = parse_mode(a.mode);

  const Dataset data = load_xc_dataset(a.data);
  Basis basis;
  if (!a.basis_path.empty()) {
    basis = load_basis(a.basis_path);
    if (basis.input_dim() != data.n_features())
      throw IoError("basis input dimension does not match the dataset");
  } else {
    basis = build_basis(data.features, a.config.rank, a.precompute_cross,
                        a.config.seed);
  }
  a.config.rank = basis.rank();

  fs::create_directories(a.out);
  std::ofstream log(a.out + "/train_log.jsonl");
  StepLogger logger = [&](const StepRecord& rec) {
    log << json{{"epoch", rec.epoch},
                {"step", rec.step},
                {"bound", rec.bound},
                {"wall_seconds", rec.wall_seconds}}
               .dump()
        << '\n';
  };

  const TrainResult result =
      train(a.config, data, basis, a.out, logger, a.resume);

  json manifest{{"command", "train"},
                {"config", train_config_json(a)},
                {"hashes", json{{"data", fnv1a_file(a.data)}}},
                {"checkpoint", a.out + "/final.ckpt"},
                {"epoch_bound", result.epoch_bound}};
  if (!a.basis_path.empty())
    manifest["hashes"]["basis"] = fnv1a_file(a.basis_path);
  write_json(a.out + "/manifest.json", manifest);

  if (!result.epoch_bound.empty())
    std::cout << "final_epoch_bound=" << result.epoch_bound.back() << '\n';
  std::cout << "checkpoint=" << a.out + "/final.ckpt" << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// basis
// ---------------------------------------------------------------------------

int cmd_basis(const std::string& data_path, Index rank, std::uint64_t seed,
              bool precompute_cross, const std::string& out) {
  const Dataset data = load_xc_dataset(data_path);
  const Basis basis = build_basis(data.features, rank, precompute_cross, seed);
  fs::path out_path(out);
  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
  save_basis(basis, out);
  if (basis.rank_deficient)
    std::cerr << "warning: requested rank exceeds the numerical rank; kept "
              << basis.rank() << " components\n";
  write_json(out + ".manifest.json",
             json{{"command", "basis"},
                  {"config", json{{"data", data_path},
                                  {"rank", rank},
                                  {"seed", seed},
                                  {"precompute_cross", precompute_cross},
                                  {"out", out}}},
                  {"hashes", json{{"data", fnv1a_file(data_path)}}},
                  {"achieved_rank", basis.rank()}});
  std::cout << "basis=" << out << "\nrank=" << basis.rank() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval / predict
// ---------------------------------------------------------------------------

struct LoadedModel {
  Checkpoint ckpt;
  Basis basis;
  bool has_basis{false};
  const Basis* basis_ptr() const { return has_basis ? &basis : nullptr; }
};

LoadedModel load_model(const std::string& ckpt_path,
                       const std::string& basis_path) {
  LoadedModel m;
  m.ckpt = load_checkpoint(ckpt_path);
  if (m.ckpt.state.rep.is_subspace()) {
    if (basis_path.empty())
      throw IoError("this checkpoint is in subspace mode; pass --basis");
    m.basis = load_basis(basis_path);
    m.has_basis = true;
  }
  return m;
}

int cmd_eval(const std::string& ckpt_path, const std::string& basis_path,
             const std::string& data_path, std::vector<Index> ks,
             const std::string& out, const std::string& from_manifest) {
  std::string ckpt = ckpt_path, basis = basis_path, data = data_path;
  if (!from_manifest.empty()) {
    const json m = load_json(from_manifest);
    ckpt = m.at("config").at("checkpoint").get<std::string>();
    basis = m.at("config").value("basis", std::string{});
    data = m.at("config").at("data").get<std::string>();
    ks = m.at("config").at("ks").get<std::vector<Index>>();
  }
  if (ks.empty()) ks = {1, 3, 5};
  const LoadedModel model = load_model(ckpt, basis);
  const Dataset test = load_xc_dataset(data);
  std::vector<Index> valid_ks;
  for (Index k : ks)
    if (k <= test.n_labels) valid_ks.push_back(k);
  const EvaluationReport report =
      evaluate(model.ckpt.state, test, valid_ks, model.basis_ptr());
  std::cout << report.to_string();

  json report_json{{"n_test", report.n_test}};
  for (std::size_t i = 0; i < report.ks.size(); ++i)
    report_json["p_at_" + std::to_string(report.ks[i])] = report.precision[i];
  json manifest{{"command", "eval"},
                {"config", json{{"checkpoint", ckpt},
                                {"basis", basis},
                                {"data", data},
                                {"ks", valid_ks}}},
                {"hashes", json{{"checkpoint", fnv1a_file(ckpt)},
                                {"data", fnv1a_file(data)}}},
                {"report", report_json}};
  if (!basis.empty()) manifest["hashes"]["basis"] = fnv1a_file(basis);
  const std::string manifest_path =
      out.empty() ? "mlgp_eval_manifest.json" : out + ".manifest.json";
  if (!out.empty()) write_json(out, report_json);
  write_json(manifest_path, manifest);
  return kExitOk;
}

int cmd_predict(const std::string& ckpt_path, const std::string& basis_path,
                const std::string& data_path, Index top, const std::string& out) {
  const LoadedModel model = load_model(ckpt_path, basis_path);
  const Dataset data = load_xc_dataset(data_path);
  if (data.n_labels != model.ckpt.state.dims.k)
    throw IoError("prediction data label space does not match the checkpoint");
  const MatrixXd scores =
      predict_utilities(model.ckpt.state, data.features, model.basis_ptr());
  const Index k = std::min<Index>(top, scores.cols());

  std::ofstream os(out);
  if (!os) throw IoError("cannot write '" + out + "'");
  os.precision(8);
  for (Index i = 0; i < scores.rows(); ++i) {
    const auto labels = top_k_labels(scores.row(i).transpose(), k);
    for (std::size_t t = 0; t < labels.size(); ++t) {
      if (t > 0) os << ' ';
      os << labels[t] << ':' << scores(i, labels[t]);
    }
    os << '\n';
  }
  write_json(out + ".manifest.json",
             json{{"command", "predict"},
                  {"config", json{{"checkpoint", ckpt_path},
                                  {"basis", basis_path},
                                  {"data", data_path},
                                  {"top", top},
                                  {"out", out}}},
                  {"hashes", json{{"checkpoint", fnv1a_file(ckpt_path)},
                                  {"data", fnv1a_file(data_path)}}}});
  std::cout << "predictions=" << out << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// grad-check
// ---------------------------------------------------------------------------

int cmd_grad_check(const std::string& data_path, const std::string& kernel,
                   const std::string& mode, std::uint64_t seed, double step,
                   double tolerance) {
  Dataset data;
  if (data_path.empty()) {
    SynthSpec spec;
    spec.n = 12;
    spec.d = 6;
    spec.k = 3;
    spec.p_true = 2;
    spec.density = 0.6;
    spec.seed = seed;
    data = generate(spec).data;
  } else {
    data = load_xc_dataset(data_path);
  }

  TrainConfig config;
  config.latents = 2;
  config.inducing = std::min<Index>(4, data.n_rows());
  config.rank = std::min<Index>(3, std::min(data.n_rows(), data.n_features()));
  config.kernel = parse_kernel(kernel);
  config.mode = parse_mode(mode);
  config.seed = seed;

  const Basis basis =
      build_basis(data.features, config.rank, true, config.seed);
  std::mt19937_64 rng(config.seed);
  ModelState state = init_state(config, data, basis, rng);
  // move off the all-zero variational point so every block has signal
  std::normal_distribution<double> normal(0.0, 0.3);
  for (Index p = 0; p < state.factors.mu.rows(); ++p)
    for (Index m = 0; m < state.factors.mu.cols(); ++m) {
      state.factors.mu(p, m) = normal(rng);
      state.factors.log_sigma(p, m) = normal(rng);
    }

  const QuadratureRule rule = make_quadrature(config.quadrature_order);
  const Minibatch batch = exhaustive_batch(data);
  const Basis* bptr = state.rep.is_subspace() ? &basis : nullptr;
  const FiniteDiffReport report =
      finite_diff_check(state, batch, data.n_rows(), bptr, rule, step);
  std::cout << report.to_string();
  std::cout << "worst=" << report.worst() << "\ntolerance=" << tolerance
            << '\n';
  if (report.worst() >= tolerance) {
    std::cerr << "gradient check FAILED\n";
    return kExitNumeric;
  }
  std::cout << "gradient check passed\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

int cmd_synth(const SynthSpec& spec, const std::string& kernel,
              const std::string& out, const std::string& truth_out) {
  SynthSpec resolved = spec;
  resolved.kernel.kind = parse_kernel(kernel);
  const SynthResult result = generate(resolved);
  fs::path out_path(out);
  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
  std::ofstream os(out);
  if (!os) throw IoError("cannot write '" + out + "'");
  write_xc_dataset(result.data, os);
  if (!truth_out.empty()) {
    Archive a;
    a.put_int("format_version", 1);
    a.put_matrix("utilities", result.utilities);
    a.put_matrix("phi_true", result.phi_true);
    a.put_vector("bias_true", result.bias_true);
    a.save(truth_out);
  }
  write_json(out + ".manifest.json",
             json{{"command", "synth"},
                  {"config", json{{"n", resolved.n},
                                  {"d", resolved.d},
                                  {"k", resolved.k},
                                  {"p_true", resolved.p_true},
                                  {"kernel", kernel},
                                  {"phi_scale", resolved.phi_scale},
                                  {"bias_min", resolved.bias_min},
                                  {"bias_max", resolved.bias_max},
                                  {"density", resolved.density},
                                  {"seed", resolved.seed},
                                  {"out", out}}}});
  std::cout << "dataset=" << out << '\n';
  return kExitOk;
}

}  // namespace

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

namespace {

template <typename F>
double median_time(int repeats, F&& f) {
  std::vector<double> times;
  times.reserve(repeats);
  for (int it = 0; it < repeats; ++it) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    const std::chrono::duration<double> dt =
        std::chrono::steady_clock::now() - t0;
    times.push_back(dt.count());
  }
  std::nth_element(times.begin(), times.begin() + times.size() / 2,
                   times.end());
  return times[times.size() / 2];
}

Dataset bench_dataset(const BenchSpec& spec, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Dataset data;
  data.n_labels = spec.n_labels;
  data.features.n_rows = spec.n;
  data.features.n_cols = spec.d;
  data.features.row_offsets.assign(1, 0);
  std::vector<Index> cols(spec.d);
  std::iota(cols.begin(), cols.end(), Index{0});
  data.positive_labels.resize(spec.n);
  for (Index i = 0; i < spec.n; ++i) {
    const Index nnz = std::min(spec.nnz_per_row, spec.d);
    for (Index t = 0; t < nnz; ++t) {
      std::uniform_int_distribution<Index> pick(t, spec.d - 1);
      std::swap(cols[t], cols[pick(rng)]);
    }
    std::sort(cols.begin(), cols.begin() + nnz);
    for (Index t = 0; t < nnz; ++t) {
      data.features.col_indices.push_back(cols[t]);
      data.features.values.push_back(normal(rng));
    }
    data.features.row_offsets.push_back(
        static_cast<std::int64_t>(data.features.values.size()));
    std::uniform_int_distribution<LabelIndex> lab(
        0, static_cast<LabelIndex>(spec.n_labels - 1));
    std::set<LabelIndex> pos;
    while (pos.size() < 3) pos.insert(lab(rng));
    data.positive_labels[i].assign(pos.begin(), pos.end());
  }
  return data;
}

}  // namespace

std::string BenchReport::to_string() const {
  std::ostringstream os;
  os << "basis_build_seconds=" << basis_build_s << '\n'
     << "subspace_gram_kl_seconds=" << subspace_gram_kl_s << '\n'
     << "free_gram_kl_seconds=" << free_gram_kl_s << '\n'
     << "gram_kl_ratio=" << gram_kl_ratio() << '\n'
     << "subspace_step_seconds=" << subspace_step_s << '\n'
     << "free_step_seconds=" << free_step_s << '\n'
     << "step_ratio=" << step_ratio() << '\n';
  return os.str();
}

BenchReport run_bench(const BenchSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  const Dataset data = bench_dataset(spec, rng);

  BenchReport report;
  Basis basis;
  {
    const auto t0 = std::chrono::steady_clock::now();
    basis = build_basis(data.features, spec.rank, true, spec.seed);
    report.basis_build_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
  }

  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixXd a(spec.m, basis.rank());
  for (Index j = 0; j < a.cols(); ++j)
    for (Index i = 0; i < a.rows(); ++i) a(i, j) = 0.3 * normal(rng);

  KernelSpec kernel;
  kernel.kind = spec.kernel;

  const auto sub_rep = InducingRepresentation::subspace(a);
  const auto free_rep = InducingRepresentation::free_rows(a * basis.x_tilde);

  VariationalFactors factors = VariationalFactors::zeros(spec.latents, spec.m);
  std::mt19937_64 vrng(spec.seed + 1);
  for (Index p = 0; p < factors.mu.rows(); ++p)
    for (Index m = 0; m < factors.mu.cols(); ++m)
      factors.mu(p, m) = 0.1 * normal(vrng);

  auto gram_kl = [&](const InducingRepresentation& rep, const Basis* bptr) {
    const GramCache gram = compute_gram(rep, kernel, bptr);
    double total = 0.0;
    for (Index p = 0; p < factors.latents(); ++p) {
      const VectorXd sigma = factors.sigma_diag(p);
      const MatrixXd chol = stable_factorize(gram.k_z, sigma);
      total += kl_term(gram.k_z, factors.mu.row(p).transpose(), sigma, chol);
    }
    return total;
  };
  report.subspace_gram_kl_s =
      median_time(spec.repeats, [&] { gram_kl(sub_rep, &basis); });
  report.free_gram_kl_s =
      median_time(spec.repeats, [&] { gram_kl(free_rep, nullptr); });

  // one full gradient evaluation on a fixed minibatch
  ModelState state;
  state.dims = {spec.n, spec.d, spec.n_labels, spec.m, spec.latents,
                basis.rank()};
  state.factors = factors;
  state.phi = MatrixXd::Zero(spec.n_labels, spec.latents);
  for (Index p = 0; p < state.phi.cols(); ++p)
    for (Index k = 0; k < state.phi.rows(); ++k)
      state.phi(k, p) = 0.3 * normal(vrng);
  state.bias = VectorXd::Zero(spec.n_labels);
  state.kernel = kernel;

  const QuadratureRule rule = make_quadrature(20);
  std::mt19937_64 brng(spec.seed + 2);
  const Minibatch batch =
      sample_minibatch(data, std::min(spec.batch, spec.n),
                       std::max<Index>(1, spec.n_labels - 1), brng);

  state.rep = sub_rep;
  report.subspace_step_s = median_time(spec.repeats, [&] {
    bound_gradient(state, batch, spec.n, &basis, rule);
  });
  state.rep = free_rep;
  state.dims.r = 0;
  report.free_step_s = median_time(spec.repeats, [&] {
    bound_gradient(state, batch, spec.n, nullptr, rule);
  });
  return report;
}

namespace {

int cmd_bench(const BenchSpec& spec, const std::string& kernel,
              const std::string& out) {
  BenchSpec resolved = spec;
  resolved.kernel = parse_kernel(kernel);
  const BenchReport report = run_bench(resolved);
  std::cout << report.to_string();
  if (!out.empty())
    write_json(out, json{{"command", "bench"},
                         {"basis_build_seconds", report.basis_build_s},
                         {"subspace_gram_kl_seconds", report.subspace_gram_kl_s},
                         {"free_gram_kl_seconds", report.free_gram_kl_s},
                         {"gram_kl_ratio", report.gram_kl_ratio()},
                         {"subspace_step_seconds", report.subspace_step_s},
                         {"free_step_seconds", report.free_step_s},
                         {"step_ratio", report.step_ratio()}});
  return kExitOk;
}

}  // namespace

// ---------------------------------------------------------------------------
// entry point
// ---------------------------------------------------------------------------

int run_cli(std::vector<std::string> args) {
  CLI::App app{"Sparse variational GP multi-label classifier with subspace "
               "inducing inputs"};
  app.require_subcommand(1);
  app.set_config("--config", "", "INI/TOML config file; flags take precedence");

  // basis
  auto* basis_cmd = app.add_subcommand("basis", "Build and persist a subspace basis");
  std::string b_data, b_out{"basis.bin"};
  Index b_rank{100};
  std::uint64_t b_seed{0};
  bool b_cross{true};
  basis_cmd->add_option("--data", b_data, "training data file")->required();
  basis_cmd->add_option("--rank", b_rank, "subspace rank R");
  basis_cmd->add_option("--seed", b_seed, "rng seed");
  basis_cmd->add_flag("--precompute-cross,!--no-precompute-cross", b_cross,
                      "store the N x R cross gram");
  basis_cmd->add_option("--out", b_out, "output basis file");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train the model");
  TrainArgs t;
  train_cmd->add_option("--data", t.data, "training data file");
  train_cmd->add_option("--basis", t.basis_path, "prebuilt basis file");
  train_cmd->add_option("--latents", t.config.latents, "latent processes P");
  train_cmd->add_option("--inducing", t.config.inducing, "inducing inputs M");
  train_cmd->add_option("--rank", t.config.rank, "subspace rank R");
  train_cmd->add_option("--batch", t.config.batch_size, "minibatch size");
  train_cmd->add_option("--neg", t.config.neg_size,
                        "negative samples per row (0 = min(K-1, 2000))");
  train_cmd->add_option("--epochs", t.config.epochs, "epochs");
  train_cmd->add_option("--lr", t.config.learning_rate, "Adam learning rate");
  train_cmd->add_option("--kernel", t.kernel, "linear | se");
  train_cmd->add_option("--mode", t.mode, "subspace | free-z");
  train_cmd->add_option("--seed", t.config.seed, "rng seed");
  train_cmd->add_option("--quad-order", t.config.quadrature_order,
                        "Gauss-Hermite order");
  train_cmd->add_option("--checkpoint-every", t.config.checkpoint_every,
                        "checkpoint cadence in epochs (0 = final only)");
  train_cmd->add_flag("--iid", t.config.iid_sampling,
                      "i.i.d. minibatches instead of epoch shuffling");
  train_cmd->add_option("--kmeans-iters", t.config.kmeans_iters,
                        "Lloyd iterations for initialization");
  train_cmd->add_flag("--precompute-cross,!--no-precompute-cross",
                      t.precompute_cross, "precompute the cross gram");
  train_cmd->add_option("--resume", t.resume, "checkpoint to resume from");
  train_cmd->add_option("--from-manifest", t.from_manifest,
                        "reproduce a run from its manifest");
  train_cmd->add_option("--out", t.out, "output directory");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate P@k on a test file");
  std::string e_ckpt, e_basis, e_data, e_out, e_manifest;
  std::vector<Index> e_ks;
  eval_cmd->add_option("--checkpoint", e_ckpt, "trained checkpoint");
  eval_cmd->add_option("--basis", e_basis, "basis file (subspace mode)");
  eval_cmd->add_option("--data", e_data, "test data file");
  eval_cmd->add_option("--ks", e_ks, "precision cutoffs (default 1 3 5)");
  eval_cmd->add_option("--out", e_out, "write the report as JSON");
  eval_cmd->add_option("--from-manifest", e_manifest,
                       "reproduce an eval from its manifest");

  // predict
  auto* pred_cmd = app.add_subcommand("predict", "Write top-k labels per instance");
  std::string p_ckpt, p_basis, p_data, p_out{"predictions.txt"};
  Index p_top{5};
  pred_cmd->add_option("--checkpoint", p_ckpt)->required();
  pred_cmd->add_option("--basis", p_basis, "basis file (subspace mode)");
  pred_cmd->add_option("--data", p_data)->required();
  pred_cmd->add_option("--top", p_top, "labels per instance");
  pred_cmd->add_option("--out", p_out, "output file");

  // grad-check
  auto* grad_cmd = app.add_subcommand(
      "grad-check", "Finite-difference check of the analytic gradient");
  std::string g_data, g_kernel{"linear"}, g_mode{"subspace"};
  std::uint64_t g_seed{0};
  double g_step{1e-5}, g_tol{1e-4};
  grad_cmd->add_option("--data", g_data, "dataset (default: tiny synthetic)");
  grad_cmd->add_option("--kernel", g_kernel, "linear | se");
  grad_cmd->add_option("--mode", g_mode, "subspace | free-z");
  grad_cmd->add_option("--seed", g_seed, "rng seed");
  grad_cmd->add_option("--step", g_step, "central difference step");
  grad_cmd->add_option("--tolerance", g_tol, "max relative error");

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "Generate synthetic data");
  SynthSpec s_spec;
  std::string s_kernel{"linear"}, s_out{"synth.txt"}, s_truth;
  synth_cmd->add_option("--n", s_spec.n);
  synth_cmd->add_option("--d", s_spec.d);
  synth_cmd->add_option("--k", s_spec.k);
  synth_cmd->add_option("--p", s_spec.p_true);
  synth_cmd->add_option("--kernel", s_kernel, "linear | se");
  synth_cmd->add_option("--phi-scale", s_spec.phi_scale);
  synth_cmd->add_option("--bias-min", s_spec.bias_min);
  synth_cmd->add_option("--bias-max", s_spec.bias_max);
  synth_cmd->add_option("--density", s_spec.density);
  synth_cmd->add_option("--seed", s_spec.seed);
  synth_cmd->add_option("--out", s_out, "dataset output file");
  synth_cmd->add_option("--truth", s_truth, "ground-truth archive output");

  // bench
  auto* bench_cmd = app.add_subcommand(
      "bench", "Time subspace vs free-Z gram/KL/gradient evaluations");
  BenchSpec bench_spec;
  std::string bench_kernel{"linear"}, bench_out;
  bench_cmd->add_option("--n", bench_spec.n);
  bench_cmd->add_option("--d", bench_spec.d);
  bench_cmd->add_option("--m", bench_spec.m);
  bench_cmd->add_option("--rank", bench_spec.rank);
  bench_cmd->add_option("--batch", bench_spec.batch);
  bench_cmd->add_option("--latents", bench_spec.latents);
  bench_cmd->add_option("--labels", bench_spec.n_labels);
  bench_cmd->add_option("--nnz-per-row", bench_spec.nnz_per_row);
  bench_cmd->add_option("--kernel", bench_kernel, "linear | se");
  bench_cmd->add_option("--seed", bench_spec.seed);
  bench_cmd->add_option("--repeats", bench_spec.repeats);
  bench_cmd->add_option("--out", bench_out, "write timings as JSON");

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*basis_cmd) return cmd_basis(b_data, b_rank, b_seed, b_cross, b_out);
    if (*train_cmd) {
      if (t.from_manifest.empty() && t.data.empty())
        throw CLI::RequiredError("--data");
      return cmd_train(t);
    }
    if (*eval_cmd) {
      if (e_manifest.empty() && (e_ckpt.empty() || e_data.empty()))
        throw CLI::RequiredError("--checkpoint/--data");
      return cmd_eval(e_ckpt, e_basis, e_data, e_ks, e_out, e_manifest);
    }
    if (*pred_cmd) return cmd_predict(p_ckpt, p_basis, p_data, p_top, p_out);
    if (*grad_cmd)
      return cmd_grad_check(g_data, g_kernel, g_mode, g_seed, g_step, g_tol);
    if (*synth_cmd) return cmd_synth(s_spec, s_kernel, s_out, s_truth);
    if (*bench_cmd) return cmd_bench(bench_spec, bench_kernel, bench_out);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const ParseError& e) {
    std::cerr << e.what() << '\n';
    return kExitIo;
  } catch (const IoError& e) {
    std::cerr << e.what() << '\n';
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  }
  return kExitUsage;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args;
  args.reserve(argc > 0 ? argc - 1 : 0);
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(std::move(args));
}

}  // namespace mlgp
