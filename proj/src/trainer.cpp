#include "mlgp/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "mlgp/archive.hpp"

namespace mlgp {

void TrainConfig::validate() const {
  if (latents < 1 || inducing < 1 || rank < 1 || batch_size < 1 || epochs < 0)
    throw std::invalid_argument("train config: counts must be >= 1");
  if (adam_beta1 < 0.0 || adam_beta1 >= 1.0 || adam_beta2 < 0.0 ||
      adam_beta2 >= 1.0)
    throw std::invalid_argument("train config: betas must lie in [0, 1)");
  if (learning_rate <= 0.0 || adam_eps <= 0.0)
    throw std::invalid_argument("train config: learning rate and eps must be > 0");
  if (quadrature_order < 1)
    throw std::invalid_argument("train config: quadrature order must be >= 1");
}

ModelState init_state(const TrainConfig& config, const Dataset& data,
                      const Basis& basis, std::mt19937_64& rng) {
  config.validate();
  if (config.inducing > data.n_rows())
    throw std::invalid_argument("init_state: M must not exceed N");

  ModelState state;
  state.dims = {data.n_rows(), data.n_features(), data.n_labels,
                config.inducing, config.latents,
                config.mode == InducingRepresentation::Mode::subspace
                    ? basis.rank()
                    : 0};

  const MatrixXd a =
      init_subspace_coeffs(basis, config.inducing, config.kmeans_iters, rng);
  if (config.mode == InducingRepresentation::Mode::subspace)
    state.rep = InducingRepresentation::subspace(a);
  else
    state.rep = InducingRepresentation::free_rows(a * basis.x_tilde);

  state.factors = VariationalFactors::zeros(config.latents, config.inducing);

  std::normal_distribution<double> normal(0.0, 1.0);
  const double phi_sd = 1.0 / std::sqrt(static_cast<double>(config.latents));
  state.phi.resize(data.n_labels, config.latents);
  for (Index p = 0; p < config.latents; ++p)
    for (Index k = 0; k < data.n_labels; ++k)
      state.phi(k, p) = phi_sd * normal(rng);

  // bias from clipped empirical label log-odds
  const double n = static_cast<double>(data.n_rows());
  const double floor = 1.0 / (n + 2.0);
  std::vector<Index> counts(data.n_labels, 0);
  for (const auto& labels : data.positive_labels)
    for (LabelIndex k : labels) ++counts[k];
  state.bias.resize(data.n_labels);
  for (Index k = 0; k < data.n_labels; ++k) {
    const double pi = std::clamp(counts[k] / n, floor, 1.0 - floor);
    state.bias[k] = std::clamp(std::log(pi / (1.0 - pi)), -6.0, 6.0);
  }

  state.kernel.kind = config.kernel;
  if (state.kernel.is_se()) {
    state.kernel.log_variance = 0.0;
    // median pairwise distance over a sample of rows of U S
    const MatrixXd us = basis.scaled_left();
    const Index sample = std::min<Index>(us.rows(), 1000);
    std::vector<Index> rows(us.rows());
    std::iota(rows.begin(), rows.end(), Index{0});
    for (Index i = 0; i < sample; ++i) {
      std::uniform_int_distribution<Index> pick(i, us.rows() - 1);
      std::swap(rows[i], rows[pick(rng)]);
    }
    std::vector<double> dists;
    dists.reserve(sample * (sample - 1) / 2);
    for (Index i = 0; i < sample; ++i)
      for (Index j = i + 1; j < sample; ++j)
        dists.push_back((us.row(rows[i]) - us.row(rows[j])).norm());
    double median = 1.0;
    if (!dists.empty()) {
      std::nth_element(dists.begin(), dists.begin() + dists.size() / 2,
                       dists.end());
      median = dists[dists.size() / 2];
    }
    state.kernel.log_lengthscale = std::log(median > 0.0 ? median : 1.0);
  }
  state.validate();
  return state;
}

namespace {

void adam_update(Eigen::Ref<MatrixXd> param, const MatrixXd& g, MatrixXd& m,
                 MatrixXd& v, double c1, double c2, double lr, double eps,
                 double b1, double b2) {
  m = b1 * m + (1.0 - b1) * g;
  v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
  param.array() +=
      lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
}

void adam_update_scalar(double& param, double g, double& m, double& v,
                        double c1, double c2, double lr, double eps,
                        double b1, double b2) {
  m = b1 * m + (1.0 - b1) * g;
  v = b2 * v + (1.0 - b2) * g * g;
  param += lr * (m / c1) / (std::sqrt(v / c2) + eps);
}

}  // namespace

bool adam_step(ModelState& state, const GradientBundle& grads,
               OptimizerMoments& moments, const TrainConfig& config) {
  if (!grads.all_finite()) return false;
  if (moments.step == 0) {
    moments.first = GradientBundle::zeros_like(state);
    moments.second = GradientBundle::zeros_like(state);
  }
  ++moments.step;
  const double b1 = config.adam_beta1, b2 = config.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(moments.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(moments.step));
  const double lr = config.learning_rate, eps = config.adam_eps;

  adam_update(state.rep.coeffs, grads.rep, moments.first.rep,
              moments.second.rep, c1, c2, lr, eps, b1, b2);
  adam_update(state.factors.mu, grads.mu, moments.first.mu, moments.second.mu,
              c1, c2, lr, eps, b1, b2);
  adam_update(state.factors.log_sigma, grads.log_sigma,
              moments.first.log_sigma, moments.second.log_sigma, c1, c2, lr,
              eps, b1, b2);
  adam_update(state.phi, grads.phi, moments.first.phi, moments.second.phi, c1,
              c2, lr, eps, b1, b2);
  {
    MatrixXd bias = state.bias, g = grads.bias;
    MatrixXd mb = moments.first.bias, vb = moments.second.bias;
    adam_update(bias, g, mb, vb, c1, c2, lr, eps, b1, b2);
    state.bias = bias;
    moments.first.bias = mb;
    moments.second.bias = vb;
  }
  if (state.kernel.is_se()) {
    adam_update_scalar(state.kernel.log_variance, grads.log_variance,
                       moments.first.log_variance, moments.second.log_variance,
                       c1, c2, lr, eps, b1, b2);
    adam_update_scalar(state.kernel.log_lengthscale, grads.log_lengthscale,
                       moments.first.log_lengthscale,
                       moments.second.log_lengthscale, c1, c2, lr, eps, b1,
                       b2);
  }
  return true;
}

void save_checkpoint(const std::string& path, const ModelState& state,
                     const OptimizerMoments& moments, Index epoch,
                     const std::string& rng_state) {
  Archive a;
  a.put_int("format_version", 1);
  a.put_ints("dims", {state.dims.n, state.dims.d, state.dims.k, state.dims.m,
                      state.dims.p, state.dims.r});
  a.put_int("mode", state.rep.is_subspace() ? 0 : 1);
  a.put_int("kernel_kind", state.kernel.is_se() ? 1 : 0);
  a.put_scalar("log_variance", state.kernel.log_variance);
  a.put_scalar("log_lengthscale", state.kernel.log_lengthscale);
  a.put_matrix("rep", state.rep.coeffs);
  a.put_matrix("mu", state.factors.mu);
  a.put_matrix("log_sigma", state.factors.log_sigma);
  a.put_matrix("phi", state.phi);
  a.put_vector("bias", state.bias);
  a.put_int("epoch", epoch);
  a.put_int("moments_step", moments.step);
  if (moments.step > 0) {
    a.put_matrix("m_rep", moments.first.rep);
    a.put_matrix("m_mu", moments.first.mu);
    a.put_matrix("m_log_sigma", moments.first.log_sigma);
    a.put_matrix("m_phi", moments.first.phi);
    a.put_vector("m_bias", moments.first.bias);
    a.put_scalar("m_log_variance", moments.first.log_variance);
    a.put_scalar("m_log_lengthscale", moments.first.log_lengthscale);
    a.put_matrix("v_rep", moments.second.rep);
    a.put_matrix("v_mu", moments.second.mu);
    a.put_matrix("v_log_sigma", moments.second.log_sigma);
    a.put_matrix("v_phi", moments.second.phi);
    a.put_vector("v_bias", moments.second.bias);
    a.put_scalar("v_log_variance", moments.second.log_variance);
    a.put_scalar("v_log_lengthscale", moments.second.log_lengthscale);
  }
  a.put_bytes("rng_state", rng_state);
  a.save(path);
}

Checkpoint load_checkpoint(const std::string& path) {
  Archive a = Archive::load(path);
  if (a.get_int("format_version") != 1)
    throw IoError("checkpoint: unsupported format version in '" + path + "'");
  Checkpoint ckpt;
  const auto dims = a.get_ints("dims");
  if (dims.size() != 6) throw IoError("checkpoint: malformed dims");
  ckpt.state.dims = {dims[0], dims[1], dims[2], dims[3], dims[4], dims[5]};
  ckpt.state.rep = a.get_int("mode") == 0
                       ? InducingRepresentation::subspace(a.get_matrix("rep"))
                       : InducingRepresentation::free_rows(a.get_matrix("rep"));
  ckpt.state.kernel.kind = a.get_int("kernel_kind") == 1
                               ? KernelSpec::Kind::squared_exponential
                               : KernelSpec::Kind::linear;
  ckpt.state.kernel.log_variance = a.get_scalar("log_variance");
  ckpt.state.kernel.log_lengthscale = a.get_scalar("log_lengthscale");
  ckpt.state.factors.mu = a.get_matrix("mu");
  ckpt.state.factors.log_sigma = a.get_matrix("log_sigma");
  ckpt.state.phi = a.get_matrix("phi");
  ckpt.state.bias = a.get_vector("bias");
  ckpt.epoch = a.get_int("epoch");
  ckpt.moments.step = a.get_int("moments_step");
  if (ckpt.moments.step > 0) {
    ckpt.moments.first.rep = a.get_matrix("m_rep");
    ckpt.moments.first.mu = a.get_matrix("m_mu");
    ckpt.moments.first.log_sigma = a.get_matrix("m_log_sigma");
    ckpt.moments.first.phi = a.get_matrix("m_phi");
    ckpt.moments.first.bias = a.get_vector("m_bias");
    ckpt.moments.first.log_variance = a.get_scalar("m_log_variance");
    ckpt.moments.first.log_lengthscale = a.get_scalar("m_log_lengthscale");
    ckpt.moments.second.rep = a.get_matrix("v_rep");
    ckpt.moments.second.mu = a.get_matrix("v_mu");
    ckpt.moments.second.log_sigma = a.get_matrix("v_log_sigma");
    ckpt.moments.second.phi = a.get_matrix("v_phi");
    ckpt.moments.second.bias = a.get_vector("v_bias");
    ckpt.moments.second.log_variance = a.get_scalar("v_log_variance");
    ckpt.moments.second.log_lengthscale = a.get_scalar("v_log_lengthscale");
  }
  ckpt.state.validate();
  ckpt.rng_state = a.get_bytes("rng_state");
  return ckpt;
}

namespace {

std::string rng_to_string(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

void rng_from_string(std::mt19937_64& rng, const std::string& s) {
  std::istringstream is(s);
  is >> rng;
  if (!is) throw IoError("checkpoint: malformed rng state");
}

}  // namespace

TrainResult train(const TrainConfig& config, const Dataset& data,
                  const Basis& basis,
                  const std::optional<std::string>& checkpoint_dir,
                  const StepLogger& logger, const std::string& resume_from) {
  config.validate();
  std::mt19937_64 rng(config.seed);

  TrainResult result;
  OptimizerMoments moments;
  Index start_epoch = 0;
  if (resume_from.empty()) {
    result.state = init_state(config, data, basis, rng);
  } else {
    Checkpoint ckpt = load_checkpoint(resume_from);
    result.state = std::move(ckpt.state);
    moments = std::move(ckpt.moments);
    start_epoch = ckpt.epoch;
    rng_from_string(rng, ckpt.rng_state);
  }

  const Basis* bptr =
      result.state.rep.is_subspace() ? &basis : nullptr;
  const QuadratureRule rule = make_quadrature(config.quadrature_order);
  const Index neg = config.effective_neg_size(data.n_labels);

  auto write_ckpt = [&](const std::string& name, Index epoch) {
    if (!checkpoint_dir) return;
    std::filesystem::create_directories(*checkpoint_dir);
    save_checkpoint(*checkpoint_dir + "/" + name, result.state, moments, epoch,
                    rng_to_string(rng));
  };

  EpochSampler sampler(data, std::min(config.batch_size, data.n_rows()), neg,
                       rng);
  int consecutive_failures = 0;
  for (Index epoch = start_epoch; epoch < config.epochs; ++epoch) {
    double epoch_sum = 0.0;
    const Index steps = sampler.batches_per_epoch();
    for (Index s = 0; s < steps; ++s) {
      const auto t0 = std::chrono::steady_clock::now();
      const Minibatch batch =
          config.iid_sampling
              ? sample_minibatch(data, std::min(config.batch_size,
                                                data.n_rows()),
                                 neg, rng)
              : sampler.next();
      bool ok = true;
      double value = 0.0;
      try {
        const BoundResult res =
            bound_gradient(result.state, batch, data.n_rows(), bptr, rule);
        value = res.value;
        ok = adam_step(result.state, res.grads, moments, config);
      } catch (const NumericError&) {
        ok = false;
      }
      if (!ok) {
        // the failed update was not applied, so the live state is last-good
        if (++consecutive_failures >= 3) {
          write_ckpt("abort.ckpt", epoch);
          throw NumericError(
              "train: aborting after repeated non-finite steps" +
              std::string(checkpoint_dir ? " (last good state in " +
                                               *checkpoint_dir + "/abort.ckpt)"
                                         : ""));
        }
        continue;
      }
      consecutive_failures = 0;
      epoch_sum += value;
      if (logger) {
        const std::chrono::duration<double> dt =
            std::chrono::steady_clock::now() - t0;
        logger({epoch, s, value, dt.count()});
      }
    }
    result.epoch_bound.push_back(epoch_sum / static_cast<double>(steps));
    if (config.checkpoint_every > 0 &&
        (epoch + 1) % config.checkpoint_every == 0)
      write_ckpt("epoch_" + std::to_string(epoch + 1) + ".ckpt", epoch + 1);
  }
  write_ckpt("final.ckpt", config.epochs);
  return result;
}

}  // namespace mlgp
