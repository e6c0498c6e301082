#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "mlgp/predict.hpp"
#include "mlgp/trainer.hpp"
#include "test_util.hpp"

using namespace mlgp;

namespace {

namespace fs = std::filesystem;

std::string tmp_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

bool states_equal(const ModelState& a, const ModelState& b) {
  return a.rep.coeffs == b.rep.coeffs && a.factors.mu == b.factors.mu &&
         a.factors.log_sigma == b.factors.log_sigma && a.phi == b.phi &&
         a.bias == b.bias &&
         a.kernel.log_variance == b.kernel.log_variance &&
         a.kernel.log_lengthscale == b.kernel.log_lengthscale;
}

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("bias initialization is the clipped label log-odds") {
  // a label present in half the rows starts at log-odds zero
  {
    std::mt19937_64 rng(1);
    Dataset data = testutil::random_dataset(4, 3, 2, 0.9, 0.0, rng);
    data.positive_labels = {{0}, {0}, {1}, {}};
    const Basis basis = build_basis(data.features, 2, true, 0);
    TrainConfig config;
    config.inducing = 2;
    config.rank = 2;
    std::mt19937_64 irng(0);
    const ModelState state = init_state(config, data, basis, irng);
    CHECK(state.bias[0] == doctest::Approx(0.0).epsilon(1e-12));
  }
  // a label never present at N=98 gets pi = 1/100
  {
    std::mt19937_64 rng(2);
    Dataset data = testutil::random_dataset(98, 4, 2, 0.5, 0.0, rng);
    for (auto& labels : data.positive_labels) labels = {0};
    const Basis basis = build_basis(data.features, 2, true, 0);
    TrainConfig config;
    config.inducing = 4;
    config.rank = 2;
    std::mt19937_64 irng(0);
    const ModelState state = init_state(config, data, basis, irng);
    CHECK(state.bias[1] ==
          doctest::Approx(std::log(0.01 / 0.99)).epsilon(1e-10));
    CHECK(state.bias[1] == doctest::Approx(-4.595).epsilon(1e-3));
    // pi = 1 clips to +6 through the same path
    CHECK(state.bias[0] <= 6.0);
  }
}

TEST_CASE("initialization is deterministic given the seed") {
  std::mt19937_64 rng(3);
  const Dataset data = testutil::random_dataset(20, 6, 4, 0.5, 1.5, rng);
  const Basis basis = build_basis(data.features, 3, true, 0);
  TrainConfig config;
  config.inducing = 5;
  config.rank = 3;
  config.kernel = KernelSpec::Kind::squared_exponential;
  std::mt19937_64 r1(7), r2(7);
  const ModelState a = init_state(config, data, basis, r1);
  const ModelState b = init_state(config, data, basis, r2);
  CHECK(states_equal(a, b));
}

TEST_CASE("adam: zero gradient leaves parameters untouched") {
  std::mt19937_64 rng(4);
  const Dataset data = testutil::random_dataset(6, 3, 2, 0.8, 1.0, rng);
  const Basis basis = build_basis(data.features, 2, true, 0);
  ModelState state = testutil::random_state(
      data, basis, 2, 1, KernelSpec::Kind::linear,
      InducingRepresentation::Mode::subspace, rng);
  const ModelState before = state;
  GradientBundle zero = GradientBundle::zeros_like(state);
  OptimizerMoments moments;
  TrainConfig config;
  CHECK(adam_step(state, zero, moments, config));
  CHECK(states_equal(state, before));
}

TEST_CASE("adam: first step moves by ~lr * sign(gradient)") {
  std::mt19937_64 rng(5);
  const Dataset data = testutil::random_dataset(6, 3, 2, 0.8, 1.0, rng);
  const Basis basis = build_basis(data.features, 2, true, 0);
  ModelState state = testutil::random_state(
      data, basis, 2, 1, KernelSpec::Kind::linear,
      InducingRepresentation::Mode::subspace, rng);
  const ModelState before = state;
  GradientBundle grads = GradientBundle::zeros_like(state);
  grads.mu = testutil::random_dense(1, 2, rng);
  OptimizerMoments moments;
  TrainConfig config;
  config.learning_rate = 1e-2;
  CHECK(adam_step(state, grads, moments, config));
  for (Index j = 0; j < 2; ++j) {
    const double delta = state.factors.mu(0, j) - before.factors.mu(0, j);
    const double expected =
        config.learning_rate * (grads.mu(0, j) > 0 ? 1.0 : -1.0);
    CHECK(std::abs(delta - expected) <= config.learning_rate * 1e-6);
  }
}

TEST_CASE("adam: two constant-gradient steps match the hand recurrence") {
  std::mt19937_64 rng(6);
  const Dataset data = testutil::random_dataset(6, 3, 2, 0.8, 1.0, rng);
  const Basis basis = build_basis(data.features, 2, true, 0);
  ModelState state = testutil::random_state(
      data, basis, 2, 1, KernelSpec::Kind::linear,
      InducingRepresentation::Mode::subspace, rng);
  const double theta0 = state.bias[0];
  GradientBundle grads = GradientBundle::zeros_like(state);
  const double g = 0.37;
  grads.bias[0] = g;
  OptimizerMoments moments;
  TrainConfig config;
  const double lr = config.learning_rate, b1 = config.adam_beta1,
               b2 = config.adam_beta2, eps = config.adam_eps;
  CHECK(adam_step(state, grads, moments, config));
  CHECK(adam_step(state, grads, moments, config));

  // textbook recurrence, ascent direction
  double m = 0.0, v = 0.0, theta = theta0;
  for (int t = 1; t <= 2; ++t) {
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mhat = m / (1 - std::pow(b1, t));
    const double vhat = v / (1 - std::pow(b2, t));
    theta += lr * mhat / (std::sqrt(vhat) + eps);
  }
  CHECK(state.bias[0] == doctest::Approx(theta).epsilon(1e-12));
}

TEST_CASE("non-finite gradients abort the step") {
  std::mt19937_64 rng(7);
  const Dataset data = testutil::random_dataset(6, 3, 2, 0.8, 1.0, rng);
  const Basis basis = build_basis(data.features, 2, true, 0);
  ModelState state = testutil::random_state(
      data, basis, 2, 1, KernelSpec::Kind::linear,
      InducingRepresentation::Mode::subspace, rng);
  const ModelState before = state;
  GradientBundle grads = GradientBundle::zeros_like(state);
  grads.phi(0, 0) = std::numeric_limits<double>::quiet_NaN();
  OptimizerMoments moments;
  TrainConfig config;
  CHECK(!adam_step(state, grads, moments, config));
  CHECK(states_equal(state, before));
  CHECK(moments.step == 0);
}

TEST_CASE("two separable points reach training P@1 = 1 and improve the bound") {
  Dataset data;
  data.n_labels = 2;
  data.features.n_rows = 2;
  data.features.n_cols = 2;
  data.features.row_offsets = {0, 1, 2};
  data.features.col_indices = {0, 1};
  data.features.values = {1.0, 1.0};
  data.positive_labels = {{0}, {1}};

  const Basis basis = build_basis(data.features, 2, true, 0);
  TrainConfig config;
  config.latents = 2;
  config.inducing = 2;
  config.rank = 2;
  config.batch_size = 2;
  config.epochs = 200;  // full batch, one step per epoch
  config.seed = 1;

  std::mt19937_64 irng(config.seed);
  const ModelState init = init_state(config, data, basis, irng);
  const QuadratureRule rule = make_quadrature(20);
  const double bound_init = full_bound(init, data, &basis, rule);

  const TrainResult result = train(config, data, basis);
  const double bound_final = full_bound(result.state, data, &basis, rule);
  CHECK(bound_final > bound_init);

  const EvaluationReport report = evaluate(result.state, data, {1}, &basis);
  CHECK(report.precision[0] == 1.0);
}

TEST_CASE("zero epochs returns the init state with empty history") {
  std::mt19937_64 rng(8);
  const Dataset data = testutil::random_dataset(10, 4, 3, 0.6, 1.0, rng);
  const Basis basis = build_basis(data.features, 3, true, 0);
  TrainConfig config;
  config.inducing = 4;
  config.rank = 3;
  config.epochs = 0;
  config.seed = 9;
  const TrainResult result = train(config, data, basis);
  CHECK(result.epoch_bound.empty());
  std::mt19937_64 irng(config.seed);
  const ModelState expected = init_state(config, data, basis, irng);
  CHECK(states_equal(result.state, expected));
}

TEST_CASE("the same seed reproduces the history bitwise") {
  std::mt19937_64 rng(9);
  const Dataset data = testutil::random_dataset(12, 4, 3, 0.6, 1.0, rng);
  const Basis basis = build_basis(data.features, 3, true, 0);
  TrainConfig config;
  config.inducing = 4;
  config.rank = 3;
  config.epochs = 4;
  config.batch_size = 5;
  config.seed = 21;
  const TrainResult a = train(config, data, basis);
  const TrainResult b = train(config, data, basis);
  CHECK(a.epoch_bound == b.epoch_bound);
  CHECK(states_equal(a.state, b.state));
}

TEST_CASE("checkpoint save/load round-trips bitwise") {
  std::mt19937_64 rng(10);
  const Dataset data = testutil::random_dataset(8, 4, 3, 0.6, 1.0, rng);
  const Basis basis = build_basis(data.features, 3, true, 0);
  ModelState state = testutil::random_state(
      data, basis, 3, 2, KernelSpec::Kind::squared_exponential,
      InducingRepresentation::Mode::subspace, rng);
  OptimizerMoments moments;
  moments.step = 5;
  moments.first = GradientBundle::zeros_like(state);
  moments.second = GradientBundle::zeros_like(state);
  moments.first.mu = testutil::random_dense(2, 3, rng);
  moments.second.phi = testutil::random_dense(3, 2, rng).cwiseAbs();

  const std::string path = tmp_dir("mlgp_ckpt_test") + "/state.ckpt";
  save_checkpoint(path, state, moments, 7, "12345 67");
  const Checkpoint back = load_checkpoint(path);
  CHECK(states_equal(back.state, state));
  CHECK(back.epoch == 7);
  CHECK(back.moments.step == 5);
  CHECK(back.moments.first.mu == moments.first.mu);
  CHECK(back.moments.second.phi == moments.second.phi);
  CHECK(back.rng_state == "12345 67");
}

TEST_CASE("a truncated checkpoint is rejected with no partial state") {
  std::mt19937_64 rng(11);
  const Dataset data = testutil::random_dataset(8, 4, 3, 0.6, 1.0, rng);
  const Basis basis = build_basis(data.features, 3, true, 0);
  const ModelState state = testutil::random_state(
      data, basis, 3, 2, KernelSpec::Kind::linear,
      InducingRepresentation::Mode::subspace, rng);
  const std::string path = tmp_dir("mlgp_ckpt_trunc") + "/state.ckpt";
  save_checkpoint(path, state, OptimizerMoments{}, 0, "");
  fs::resize_file(path, fs::file_size(path) / 3);
  CHECK_THROWS_AS(load_checkpoint(path), IoError);
}

TEST_CASE("resuming a checkpoint continues the run exactly") {
  std::mt19937_64 rng(12);
  const Dataset data = testutil::random_dataset(14, 5, 3, 0.6, 1.2, rng);
  const Basis basis = build_basis(data.features, 3, true, 0);
  TrainConfig config;
  config.inducing = 4;
  config.rank = 3;
  config.epochs = 6;
  config.batch_size = 5;
  config.seed = 33;
  config.checkpoint_every = 3;

  const std::string dir = tmp_dir("mlgp_resume_test");
  const TrainResult uninterrupted = train(config, data, basis, dir);

  const TrainResult resumed =
      train(config, data, basis, {}, {}, dir + "/epoch_3.ckpt");
  CHECK(states_equal(resumed.state, uninterrupted.state));
}

TEST_CASE("repeated numeric failures abort with the last good checkpoint") {
  std::mt19937_64 rng(13);
  const Dataset data = testutil::random_dataset(10, 4, 3, 0.6, 1.0, rng);
  const Basis basis = build_basis(data.features, 3, true, 0);
  TrainConfig config;
  config.inducing = 4;
  config.rank = 3;
  config.epochs = 3;
  config.batch_size = 5;
  config.learning_rate = 1e280;  // guarantees an overflow within a step or two
  const std::string dir = tmp_dir("mlgp_abort_test");
  CHECK_THROWS_AS(train(config, data, basis, dir), NumericError);
  CHECK(fs::exists(dir + "/abort.ckpt"));
  CHECK_NOTHROW(load_checkpoint(dir + "/abort.ckpt"));
}

}  // TEST_SUITE
