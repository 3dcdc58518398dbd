#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sccl/autodiff.hpp"
#include "sccl/data.hpp"
#include "sccl/encoder.hpp"
#include "sccl/knn.hpp"
#include "sccl/losses.hpp"
#include "sccl/memory.hpp"
#include "sccl/metrics.hpp"
#include "sccl/selector.hpp"
#include "sccl/trainer.hpp"

namespace py = pybind11;
using namespace sccl;

namespace {

Tensor2 tensor_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw std::invalid_argument("expected a 2-D float array");
  Tensor2 t(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  std::copy(a.data(), a.data() + t.size(), t.v.begin());
  return t;
}

py::array_t<double> array_from_tensor(const Tensor2& t) {
  py::array_t<double> a({t.rows, t.cols});
  std::copy(t.v.begin(), t.v.end(), a.mutable_data());
  return a;
}

py::object optional_to_py(const std::optional<double>& v) {
  if (v) return py::float_(*v);
  return py::none();
}

}  // namespace

PYBIND11_MODULE(_sccl, m) {
  m.doc() = "continual contrastive text classification: core operations";

  py::class_<Example>(m, "Example")
      .def(py::init([](int64_t id, const std::string& text, int label, int task) {
             Example ex;
             ex.id = id;
             ex.text = text;
             ex.label = label;
             ex.task = task;
             return ex;
           }),
           py::arg("id"), py::arg("text"), py::arg("label"), py::arg("task"))
      .def_readwrite("id", &Example::id)
      .def_readwrite("text", &Example::text)
      .def_readwrite("raw_features", &Example::raw_features)
      .def_readwrite("label", &Example::label)
      .def_readwrite("task", &Example::task)
      .def("__repr__", [](const Example& ex) {
        return "Example(id=" + std::to_string(ex.id) + ", label=" + std::to_string(ex.label) +
               ", task=" + std::to_string(ex.task) + ")";
      });

  py::class_<TaskSpec>(m, "TaskSpec")
      .def_readonly("task_id", &TaskSpec::task_id)
      .def_property_readonly("labels", &TaskSpec::labels_sorted)
      .def_readonly("train", &TaskSpec::train)
      .def_readonly("test", &TaskSpec::test);

  py::class_<TaskSequence>(m, "TaskSequence")
      .def_readonly("tasks", &TaskSequence::tasks)
      .def_readonly("order_name", &TaskSequence::order_name)
      .def("n", &TaskSequence::n);

  py::class_<SyntheticSpec>(m, "SyntheticSpec")
      .def(py::init<>())
      .def_readwrite("n_tasks", &SyntheticSpec::n_tasks)
      .def_readwrite("labels_per_task", &SyntheticSpec::labels_per_task)
      .def_readwrite("train_per_label", &SyntheticSpec::train_per_label)
      .def_readwrite("test_per_label", &SyntheticSpec::test_per_label)
      .def_readwrite("vocab_size", &SyntheticSpec::vocab_size)
      .def_readwrite("seed", &SyntheticSpec::seed);

  m.def("gen_synthetic_tasks", &gen_synthetic_tasks, py::arg("spec"));
  m.def("load_manifest", &load_manifest, py::arg("path"));

  py::class_<HashingConfig>(m, "HashingConfig")
      .def(py::init<>())
      .def_readwrite("dim", &HashingConfig::dim)
      .def_readwrite("ngram_min", &HashingConfig::ngram_min)
      .def_readwrite("ngram_max", &HashingConfig::ngram_max)
      .def_readwrite("signed_hash", &HashingConfig::signed_hash);

  m.def(
      "hash_vectorize",
      [](const HashingConfig& cfg, const std::string& text) {
        SparseVec v = hash_vectorize(cfg, text);
        return v.entries;
      },
      py::arg("config"), py::arg("text"),
      "sparse (index, value) features for one text under the hashing front end");

  py::class_<EncoderState>(m, "Encoder")
      .def_static("init", &EncoderState::init, py::arg("hashing"), py::arg("dims"),
                  py::arg("seed"))
      .def_property_readonly("input_dim", &EncoderState::input_dim)
      .def_property_readonly("output_dim", &EncoderState::output_dim)
      .def(
          "encode",
          [](const EncoderState& enc, const std::vector<Example>& batch) {
            return array_from_tensor(encode_batch(enc, batch));
          },
          py::arg("batch"), "unit-norm representations, one row per example")
      .def("param_hash", [](const EncoderState& enc) { return param_hash(enc); })
      .def("save", [](const EncoderState& enc, const std::string& path) {
        save_encoder(enc, path);
      })
      .def_static("load", &load_encoder, py::arg("path"));

  m.def(
      "supcon_value",
      [](const py::array_t<double>& reps, const std::vector<int>& labels, double kappa) {
        Tape tape;
        Var h = tape.leaf(tensor_from_array(reps));
        SupconLoss out = supcon_loss(tape, h, labels, kappa);
        return tape.scalar(out.loss);
      },
      py::arg("reps"), py::arg("labels"), py::arg("kappa") = 0.2);

  m.def(
      "supcon_grad",
      [](const py::array_t<double>& reps, const std::vector<int>& labels, double kappa) {
        Tape tape;
        Var h = tape.leaf(tensor_from_array(reps), true);
        SupconLoss out = supcon_loss(tape, h, labels, kappa);
        tape.backward(out.loss);
        return array_from_tensor(tape.grad(h));
      },
      py::arg("reps"), py::arg("labels"), py::arg("kappa") = 0.2);

  m.def(
      "ird_value",
      [](const py::array_t<double>& cur, const py::array_t<double>& prev, double tau) {
        Tape tape;
        Var h = tape.leaf(tensor_from_array(cur));
        Var loss = ird_loss(tape, h, tensor_from_array(prev), tau);
        return tape.scalar(loss);
      },
      py::arg("cur_reps"), py::arg("prev_reps"), py::arg("tau") = 0.2);

  m.def(
      "ird_similarity",
      [](const py::array_t<double>& reps, double tau) {
        return array_from_tensor(ird_similarity(tensor_from_array(reps), tau));
      },
      py::arg("reps"), py::arg("tau") = 0.2,
      "row-stochastic within-batch similarities, self-pairs excluded");

  m.def(
      "kmeans",
      [](const py::array_t<double>& points, int k, uint64_t seed, int max_iter, double tol) {
        KMeansResult r = kmeans(tensor_from_array(points), k, seed, max_iter, tol);
        py::dict out;
        out["centroids"] = array_from_tensor(r.centroids);
        out["assignment"] = r.assignment;
        out["inertia"] = r.inertia;
        out["inertia_trace"] = r.inertia_trace;
        out["k_clamped"] = r.k_clamped;
        return out;
      },
      py::arg("points"), py::arg("k"), py::arg("seed"), py::arg("max_iter") = 100,
      py::arg("tol") = 1e-6);

  m.def("select_samples", &select_samples, py::arg("task"), py::arg("encoder"), py::arg("m"),
        py::arg("clusters_per_label"), py::arg("seed"));

  py::class_<MemoryBuffer>(m, "MemoryBuffer")
      .def(py::init<>())
      .def("add_task_exemplars", &MemoryBuffer::add_task_exemplars, py::arg("task_id"),
           py::arg("exemplars"))
      .def("has_task", &MemoryBuffer::has_task)
      .def("task_exemplars", &MemoryBuffer::task_exemplars, py::arg("task_id"))
      .def("task_ids", &MemoryBuffer::task_ids)
      .def("size", &MemoryBuffer::size)
      .def("empty", &MemoryBuffer::empty)
      .def("replay_batch", &MemoryBuffer::replay_batch, py::arg("batch_size"), py::arg("seed"),
           py::arg("step"));

  py::class_<Criterion>(m, "Criterion")
      .def_property_readonly("reps",
                             [](const Criterion& c) { return array_from_tensor(c.reps); })
      .def_readonly("labels", &Criterion::labels)
      .def_readonly("ids", &Criterion::ids)
      .def("size", &Criterion::size);

  m.def("build_criterion", &build_criterion, py::arg("buffer"), py::arg("task_id"),
        py::arg("encoder"));

  py::class_<Prediction>(m, "Prediction")
      .def_readonly("label", &Prediction::label)
      .def_readonly("probs", &Prediction::probs)
      .def_readonly("neighbors", &Prediction::neighbors);

  m.def(
      "knn_predict",
      [](const py::array_t<double>& query, const Criterion& crit, int k, double T) {
        return knn_predict(tensor_from_array(query), crit, k, T);
      },
      py::arg("query"), py::arg("criterion"), py::arg("k") = 10, py::arg("T") = 5.0);

  m.def("evaluate_task", &evaluate_task, py::arg("buffer"), py::arg("task"), py::arg("encoder"),
        py::arg("k") = 10, py::arg("T") = 5.0);

  py::class_<TemperatureConfig>(m, "TemperatureConfig")
      .def(py::init<>())
      .def_readwrite("kappa", &TemperatureConfig::kappa)
      .def_readwrite("tau", &TemperatureConfig::tau)
      .def_readwrite("t_infer", &TemperatureConfig::t_infer);

  py::class_<RunConfig>(m, "RunConfig")
      .def(py::init<>())
      .def_property(
          "mode", [](const RunConfig& c) { return mode_name(c.mode); },
          [](RunConfig& c, const std::string& name) { c.mode = parse_mode(name); })
      .def_readwrite("batch_size", &RunConfig::batch_size)
      .def_readwrite("epochs", &RunConfig::epochs)
      .def_readwrite("base_lr", &RunConfig::base_lr)
      .def_readwrite("replay_every", &RunConfig::replay_every)
      .def_readwrite("memory_per_task", &RunConfig::memory_per_task)
      .def_readwrite("clusters_per_label", &RunConfig::clusters_per_label)
      .def_readwrite("temps", &RunConfig::temps)
      .def_readwrite("k", &RunConfig::k)
      .def_readwrite("seed", &RunConfig::seed)
      .def_readwrite("hashing", &RunConfig::hashing)
      .def_readwrite("encoder_dims", &RunConfig::encoder_dims);

  m.def(
      "run_sequence",
      [](const TaskSequence& seq, const RunConfig& cfg) {
        RunResult result = run_sequence(seq, cfg);
        py::dict out;
        out["acc"] = result.report.acc;
        out["bwt"] = optional_to_py(result.report.bwt);
        out["final_accuracies"] = result.report.final_accuracies;
        out["mode"] = result.report.mode;
        out["seed"] = result.report.seed;
        out["config_hash"] = result.report.config_hash;
        out["total_steps"] = result.report.total_steps;
        out["total_replay_steps"] = result.report.total_replay_steps;
        py::list rmat;
        const RMatrix& r = result.state.rmatrix;
        for (int i = 0; i < r.n(); ++i) {
          py::list row;
          for (int j = 0; j <= i; ++j) row.append(r.get(i, j));
          rmat.append(row);
        }
        out["rmatrix"] = rmat;
        return out;
      },
      py::arg("sequence"), py::arg("config"),
      "train every task in order; returns metrics and the accuracy matrix");

  m.def(
      "compute_acc",
      [](const std::vector<std::vector<double>>& rows) {
        RMatrix r(static_cast<int>(rows.size()));
        for (size_t i = 0; i < rows.size(); ++i)
          for (size_t j = 0; j < rows[i].size(); ++j)
            r.set(static_cast<int>(i), static_cast<int>(j), rows[i][j]);
        return acc(r);
      },
      py::arg("rmatrix_rows"));

  m.def(
      "compute_bwt",
      [](const std::vector<std::vector<double>>& rows) {
        RMatrix r(static_cast<int>(rows.size()));
        for (size_t i = 0; i < rows.size(); ++i)
          for (size_t j = 0; j < rows[i].size(); ++j)
            r.set(static_cast<int>(i), static_cast<int>(j), rows[i][j]);
        return optional_to_py(bwt(r));
      },
      py::arg("rmatrix_rows"));
}
