#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <random>
#include <sstream>

#include "mlgp/bound.hpp"
#include "mlgp/cli.hpp"
#include "mlgp/predict.hpp"
#include "mlgp/synth.hpp"
#include "mlgp/trainer.hpp"

namespace py = pybind11;
using namespace mlgp;

namespace {

TrainConfig make_config(Index latents, Index inducing, Index rank,
                        Index batch_size, Index neg_size, Index epochs,
                        double lr, const std::string& kernel,
                        const std::string& mode, std::uint64_t seed,
                        int quad_order, bool iid) {
  TrainConfig c;
  c.latents = latents;
  c.inducing = inducing;
  c.rank = rank;
  c.batch_size = batch_size;
  c.neg_size = neg_size;
  c.epochs = epochs;
  c.learning_rate = lr;
  c.kernel = kernel == "se" ? KernelSpec::Kind::squared_exponential
                            : KernelSpec::Kind::linear;
  c.mode = mode == "free-z" ? InducingRepresentation::Mode::free_z
                            : InducingRepresentation::Mode::subspace;
  c.seed = seed;
  c.quadrature_order = quad_order;
  c.iid_sampling = iid;
  return c;
}

const Basis* basis_ptr(const ModelState& state, const Basis* basis) {
  return state.rep.is_subspace() ? basis : nullptr;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Sparse variational GP multi-label classifier (C++ core)";

  py::register_exception<ParseError>(m, "DatasetParseError");
  py::register_exception<IoError>(m, "ArchiveIoError");
  py::register_exception<NumericError>(m, "NumericFailure");

  py::enum_<KernelSpec::Kind>(m, "KernelKind")
      .value("linear", KernelSpec::Kind::linear)
      .value("se", KernelSpec::Kind::squared_exponential);

  py::enum_<InducingRepresentation::Mode>(m, "Mode")
      .value("subspace", InducingRepresentation::Mode::subspace)
      .value("free_z", InducingRepresentation::Mode::free_z);

  py::class_<Dataset>(m, "Dataset")
      .def_property_readonly("n_rows", &Dataset::n_rows)
      .def_property_readonly("n_features", &Dataset::n_features)
      .def_readonly("n_labels", &Dataset::n_labels)
      .def_property_readonly("positive_labels",
                             [](const Dataset& d) { return d.positive_labels; })
      .def_property_readonly("features_dense",
                             [](const Dataset& d) { return d.features.to_dense(); })
      .def("mean_positives_per_row", &Dataset::mean_positives_per_row)
      .def("to_text", &format_xc_dataset);

  py::class_<Minibatch>(m, "Minibatch")
      .def_readonly("row_indices", &Minibatch::row_indices)
      .def_readonly("positives", &Minibatch::positives)
      .def_readonly("negatives", &Minibatch::negatives)
      .def_readonly("negative_pop", &Minibatch::negative_pop);

  py::class_<Basis>(m, "Basis")
      .def_property_readonly("rank", &Basis::rank)
      .def_readonly("x_tilde", &Basis::x_tilde)
      .def_readonly("gram_tilde", &Basis::gram_tilde)
      .def_readonly("singular_values", &Basis::singular_values)
      .def_readonly("rank_deficient", &Basis::rank_deficient);

  py::class_<ModelState>(m, "ModelState")
      .def_readonly("phi", &ModelState::phi)
      .def_readonly("bias", &ModelState::bias)
      .def_property_readonly(
          "mu", [](const ModelState& s) { return s.factors.mu; })
      .def_property_readonly(
          "rep", [](const ModelState& s) { return s.rep.coeffs; })
      .def_property_readonly("mode", [](const ModelState& s) {
        return s.rep.is_subspace() ? "subspace" : "free-z";
      });

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init(&make_config), py::kw_only(), py::arg("latents") = 2,
           py::arg("inducing") = 16, py::arg("rank") = 8,
           py::arg("batch_size") = 64, py::arg("neg_size") = 0,
           py::arg("epochs") = 10, py::arg("lr") = 1e-2,
           py::arg("kernel") = "linear", py::arg("mode") = "subspace",
           py::arg("seed") = 0, py::arg("quad_order") = 20,
           py::arg("iid") = false)
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("learning_rate", &TrainConfig::learning_rate);

  py::class_<EvaluationReport>(m, "EvaluationReport")
      .def_readonly("ks", &EvaluationReport::ks)
      .def_readonly("precision", &EvaluationReport::precision)
      .def_readonly("n_test", &EvaluationReport::n_test)
      .def("__repr__", &EvaluationReport::to_string);

  py::class_<SynthResult>(m, "SynthResult")
      .def_readonly("data", &SynthResult::data)
      .def_readonly("utilities", &SynthResult::utilities)
      .def_readonly("phi_true", &SynthResult::phi_true)
      .def_readonly("bias_true", &SynthResult::bias_true);

  py::class_<BenchReport>(m, "BenchReport")
      .def_readonly("subspace_gram_kl_s", &BenchReport::subspace_gram_kl_s)
      .def_readonly("free_gram_kl_s", &BenchReport::free_gram_kl_s)
      .def("gram_kl_ratio", &BenchReport::gram_kl_ratio)
      .def("__repr__", &BenchReport::to_string);

  m.def("parse_xc_dataset",
        py::overload_cast<const std::string&>(&parse_xc_dataset),
        py::arg("text"));
  m.def("load_xc_dataset", &load_xc_dataset, py::arg("path"));

  m.def(
      "build_basis",
      [](const Dataset& d, Index rank, bool cross, std::uint64_t seed) {
        return build_basis(d.features, rank, cross, seed);
      },
      py::arg("dataset"), py::arg("rank"), py::arg("precompute_cross") = true,
      py::arg("seed") = 0);
  m.def("save_basis", &save_basis);
  m.def("load_basis", &load_basis);

  m.def(
      "sample_minibatch",
      [](const Dataset& data, Index batch_size, Index neg_size,
         std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        return sample_minibatch(data, batch_size, neg_size, rng);
      },
      py::arg("data"), py::arg("batch_size"), py::arg("neg_size"),
      py::arg("seed") = 0);
  m.def("exhaustive_batch", &exhaustive_batch);

  m.def(
      "expected_log_logistic",
      [](int y, double mean, double var, int order) {
        const auto r = expected_log_logistic(y, mean, var, make_quadrature(order));
        return py::make_tuple(r.value, r.d_mean, r.d_var);
      },
      py::arg("y"), py::arg("mean"), py::arg("var"), py::arg("order") = 20);

  m.def(
      "kl_term",
      [](const MatrixXd& k_z, const VectorXd& mu, const VectorXd& sigma_diag) {
        return kl_term(k_z, mu, sigma_diag, stable_factorize(k_z, sigma_diag));
      },
      py::arg("k_z"), py::arg("mu"), py::arg("sigma_diag"));

  m.def(
      "gram_inducing_linear",
      [](const MatrixXd& a, const Basis& basis) {
        KernelSpec spec;
        return gram_inducing(InducingRepresentation::subspace(a), spec, &basis);
      },
      py::arg("a"), py::arg("basis"));

  m.def(
      "train",
      [](const TrainConfig& config, const Dataset& data, const Basis& basis,
         std::optional<std::string> checkpoint_dir) {
        const TrainResult r = train(config, data, basis, checkpoint_dir);
        return py::make_tuple(r.state, r.epoch_bound);
      },
      py::arg("config"), py::arg("data"), py::arg("basis"),
      py::arg("checkpoint_dir") = std::nullopt);

  m.def(
      "full_bound",
      [](const ModelState& state, const Dataset& data, const Basis* basis,
         int order) {
        return full_bound(state, data, basis_ptr(state, basis),
                          make_quadrature(order));
      },
      py::arg("state"), py::arg("data"), py::arg("basis") = nullptr,
      py::arg("order") = 20);

  m.def(
      "stochastic_bound",
      [](const ModelState& state, const Minibatch& batch, Index n_total,
         const Basis* basis, int order) {
        return stochastic_bound(state, batch, n_total,
                                basis_ptr(state, basis), make_quadrature(order));
      },
      py::arg("state"), py::arg("batch"), py::arg("n_total"),
      py::arg("basis") = nullptr, py::arg("order") = 20);

  m.def(
      "finite_diff_worst",
      [](const ModelState& state, const Minibatch& batch, Index n_total,
         const Basis* basis, double step, int order) {
        return finite_diff_check(state, batch, n_total,
                                 basis_ptr(state, basis),
                                 make_quadrature(order), step)
            .worst();
      },
      py::arg("state"), py::arg("batch"), py::arg("n_total"),
      py::arg("basis") = nullptr, py::arg("step") = 1e-5,
      py::arg("order") = 20);

  m.def(
      "predict_utilities",
      [](const ModelState& state, const Dataset& data, const Basis* basis) {
        return predict_utilities(state, data.features,
                                 basis_ptr(state, basis));
      },
      py::arg("state"), py::arg("data"), py::arg("basis") = nullptr);

  m.def(
      "precision_at_k",
      [](const std::vector<LabelIndex>& positives, const VectorXd& scores,
         Index k) { return precision_at_k(positives, scores, k); },
      py::arg("positives"), py::arg("scores"), py::arg("k"));

  m.def(
      "evaluate",
      [](const ModelState& state, const Dataset& test,
         const std::vector<Index>& ks, const Basis* basis) {
        return evaluate(state, test, ks, basis_ptr(state, basis));
      },
      py::arg("state"), py::arg("test"), py::arg("ks"),
      py::arg("basis") = nullptr);

  m.def(
      "generate_synth",
      [](Index n, Index d, Index k, Index p_true, const std::string& kernel,
         double phi_scale, double bias_min, double bias_max, double density,
         std::uint64_t seed) {
        SynthSpec spec;
        spec.n = n;
        spec.d = d;
        spec.k = k;
        spec.p_true = p_true;
        spec.kernel.kind = kernel == "se"
                               ? KernelSpec::Kind::squared_exponential
                               : KernelSpec::Kind::linear;
        spec.phi_scale = phi_scale;
        spec.bias_min = bias_min;
        spec.bias_max = bias_max;
        spec.density = density;
        spec.seed = seed;
        return generate(spec);
      },
      py::kw_only(), py::arg("n") = 200, py::arg("d") = 20, py::arg("k") = 10,
      py::arg("p_true") = 2, py::arg("kernel") = "linear",
      py::arg("phi_scale") = 1.0, py::arg("bias_min") = -2.0,
      py::arg("bias_max") = 0.0, py::arg("density") = 0.2,
      py::arg("seed") = 0);

  m.def(
      "save_checkpoint",
      [](const std::string& path, const ModelState& state) {
        save_checkpoint(path, state, OptimizerMoments{}, 0, "");
      },
      py::arg("path"), py::arg("state"));
  m.def(
      "load_checkpoint",
      [](const std::string& path) { return load_checkpoint(path).state; },
      py::arg("path"));

  m.def(
      "run_bench",
      [](Index n, Index d, Index m_inducing, Index rank, int repeats,
         std::uint64_t seed) {
        BenchSpec spec;
        spec.n = n;
        spec.d = d;
        spec.m = m_inducing;
        spec.rank = rank;
        spec.repeats = repeats;
        spec.seed = seed;
        return run_bench(spec);
      },
      py::kw_only(), py::arg("n") = 1000, py::arg("d") = 20000,
      py::arg("m") = 100, py::arg("rank") = 100, py::arg("repeats") = 3,
      py::arg("seed") = 0);
}
