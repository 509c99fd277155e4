#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "dgae/checkpoint.hpp"
#include "dgae/errors.hpp"
#include "dgae/experiment.hpp"
#include "dgae/graph.hpp"
#include "dgae/loss.hpp"
#include "dgae/metrics.hpp"
#include "dgae/model.hpp"
#include "dgae/rng.hpp"
#include "dgae/spectral.hpp"
#include "dgae/split.hpp"
#include "dgae/tape.hpp"
#include "dgae/train.hpp"

namespace py = pybind11;
using namespace dgae;

namespace {

py::array_t<std::int32_t> edges_array(const std::vector<Edge>& edges) {
  py::array_t<std::int32_t> out({static_cast<py::ssize_t>(edges.size()), py::ssize_t(2)});
  auto view = out.mutable_unchecked<2>();
  for (py::ssize_t i = 0; i < view.shape(0); ++i) {
    view(i, 0) = edges[static_cast<std::size_t>(i)].u;
    view(i, 1) = edges[static_cast<std::size_t>(i)].v;
  }
  return out;
}

py::array_t<double> matrix_array(const DenseMatrix& m) {
  py::array_t<double> out({static_cast<py::ssize_t>(m.rows()), static_cast<py::ssize_t>(m.cols())});
  std::copy(m.data(), m.data() + m.size(), out.mutable_data());
  return out;
}

DenseMatrix matrix_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw DimensionError("expected a 2-d array");
  DenseMatrix m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  std::copy(a.data(), a.data() + m.size(), m.data());
  return m;
}

ModelConfig model_config(const std::string& variant, int k, int hidden_dim, int latent_dim,
                         bool linear, double dropout, const std::string& ae_activation) {
  ModelConfig cfg;
  cfg.variant = variant_from_string(variant);
  cfg.k = k;
  cfg.hidden_dim = hidden_dim;
  cfg.latent_dim = latent_dim;
  cfg.linear_mode = linear;
  cfg.dropout_rate = dropout;
  if (ae_activation == "relu")
    cfg.ae_activation = AeActivation::relu;
  else if (ae_activation == "linear")
    cfg.ae_activation = AeActivation::linear;
  else
    throw ConfigError("unknown ae_activation \"" + ae_activation + "\"");
  return cfg;
}

DenseMatrix embed_graph(DgaeModel& m, const Graph& g, const EdgeSplit* split) {
  if (!g.has_features()) throw ConfigError("graph has no features; load with featureless=True");
  const std::vector<Edge>& edges = split ? split->train_edges : g.edges;
  const SparseAdjacency a = SparseAdjacency::normalized(g.n, edges);
  const DenseMatrix s = a.multiply(g.features);
  Tape t;
  const ForwardResult r = forward_model(m, t, ForwardContext{&a, &g.features, &s}, {});
  return t.value(r.z);
}

}  // namespace

PYBIND11_MODULE(_core, mod) {
  mod.doc() = "deep graph autoencoders for link prediction";

  py::register_exception<ParseError>(mod, "ParseError", PyExc_ValueError);
  py::register_exception<DimensionError>(mod, "DimensionError", PyExc_ValueError);
  py::register_exception<ConfigError>(mod, "ConfigError", PyExc_ValueError);
  py::register_exception<MetricError>(mod, "MetricError", PyExc_ValueError);
  py::register_exception<SamplingError>(mod, "SamplingError", PyExc_RuntimeError);
  py::register_exception<TrainError>(mod, "TrainError", PyExc_RuntimeError);
  py::register_exception<IoError>(mod, "IoError", PyExc_OSError);

  py::class_<Graph>(mod, "Graph")
      .def_readonly("n", &Graph::n)
      .def_property_readonly("num_edges", [](const Graph& g) { return g.edges.size(); })
      .def_property_readonly("feature_dim", &Graph::feature_dim)
      .def_property_readonly("edges", [](const Graph& g) { return edges_array(g.edges); })
      .def_property_readonly("features", [](const Graph& g) { return matrix_array(g.features); })
      .def("__repr__", [](const Graph& g) {
        return "Graph(n=" + std::to_string(g.n) + ", edges=" + std::to_string(g.edges.size()) +
               ", feature_dim=" + std::to_string(g.feature_dim()) + ")";
      });

  py::class_<EdgeSplit>(mod, "EdgeSplit")
      .def_readonly("n", &EdgeSplit::n)
      .def_readonly("seed", &EdgeSplit::seed)
      .def_property_readonly("train_edges",
                             [](const EdgeSplit& s) { return edges_array(s.train_edges); })
      .def_property_readonly("val_pos", [](const EdgeSplit& s) { return edges_array(s.val_pos); })
      .def_property_readonly("val_neg", [](const EdgeSplit& s) { return edges_array(s.val_neg); })
      .def_property_readonly("test_pos", [](const EdgeSplit& s) { return edges_array(s.test_pos); })
      .def_property_readonly("test_neg", [](const EdgeSplit& s) { return edges_array(s.test_neg); })
      .def("__repr__", [](const EdgeSplit& s) {
        return "EdgeSplit(train=" + std::to_string(s.train_edges.size()) +
               ", val=" + std::to_string(s.val_pos.size()) +
               ", test=" + std::to_string(s.test_pos.size()) + ")";
      });

  py::class_<DgaeModel>(mod, "Model")
      .def_property_readonly("variant",
                             [](const DgaeModel& m) { return to_string(m.config.variant); })
      .def_property_readonly("k", [](const DgaeModel& m) { return m.config.k; })
      .def_readonly("input_dim", &DgaeModel::input_dim)
      .def("__repr__", [](const DgaeModel& m) {
        return "Model(variant=" + to_string(m.config.variant) +
               ", k=" + std::to_string(m.config.k) +
               ", input_dim=" + std::to_string(m.input_dim) + ")";
      });

  mod.def(
      "load_graph",
      [](const std::string& edge_path, const std::string& feature_path, bool featureless) {
        Graph g = load_dataset(edge_path, feature_path);
        if (featureless) make_featureless(g);
        if (!g.has_features())
          throw ConfigError("dataset has no feature file; pass featureless=True");
        return g;
      },
      py::arg("edge_path"), py::arg("feature_path") = "", py::arg("featureless") = false,
      "Read a tab-separated edge list (and optional whitespace-separated feature rows).");

  mod.def(
      "random_graph",
      [](std::int32_t n, std::int32_t feature_dim, double edge_prob, std::uint64_t seed) {
        Rng rng(seed);
        return random_connected_graph(n, feature_dim, edge_prob, rng);
      },
      py::arg("n"), py::arg("feature_dim"), py::arg("edge_prob"), py::arg("seed") = 1,
      "Connected Erdos-Renyi graph with uniform features, for experiments and tests.");

  mod.def(
      "split_edges",
      [](const Graph& g, double val_frac, double test_frac, std::uint64_t seed) {
        SplitRatios r;
        r.val = val_frac;
        r.test = test_frac;
        r.train = 1.0 - val_frac - test_frac;
        return split_edges(g, r, seed);
      },
      py::arg("graph"), py::arg("val_frac") = 0.05, py::arg("test_frac") = 0.10,
      py::arg("seed") = 1);

  mod.def(
      "build_model",
      [](const Graph& g, const std::string& variant, int k, int hidden_dim, int latent_dim,
         bool linear, double dropout, const std::string& ae_activation, std::uint64_t seed) {
        Rng rng(mix_seed(seed, 0x6d6f64656cull));
        return build_model(model_config(variant, k, hidden_dim, latent_dim, linear, dropout,
                                        ae_activation),
                           g.feature_dim(), rng);
      },
      py::arg("graph"), py::arg("variant") = "gae", py::arg("k") = 2, py::arg("hidden_dim") = 32,
      py::arg("latent_dim") = 16, py::arg("linear") = false, py::arg("dropout") = 0.0,
      py::arg("ae_activation") = "relu", py::arg("seed") = 1);

  mod.def(
      "train",
      [](DgaeModel& m, const Graph& g, const EdgeSplit& split, int epochs, double lr,
         std::uint64_t seed, int eval_every, const std::string& selection, double lambda0,
         const std::vector<double>& lambda_ae, double kl_weight, bool literal_recon) {
        LossConfig lc;
        lc.lambda0 = lambda0;
        lc.lambda_ae = lambda_ae;
        lc.kl_weight = kl_weight;
        lc.literal_recon = literal_recon;
        TrainConfig tc;
        tc.epochs = epochs;
        tc.lr = lr;
        tc.seed = seed;
        tc.eval_every = eval_every;
        tc.selection = selection_from_string(selection);
        TrainHistory h;
        {
          py::gil_scoped_release release;
          h = train_model(m, g, split, lc, tc);
        }
        py::list out;
        for (const EpochStats& e : h.epochs) {
          py::dict row;
          row["epoch"] = e.epoch;
          row["total"] = e.total;
          row["recon"] = e.recon;
          row["ae"] = e.ae;
          row["kl"] = e.kl;
          if (e.val_auc >= 0.0) {
            row["val_auc"] = e.val_auc;
            row["val_ap"] = e.val_ap;
          }
          out.append(std::move(row));
        }
        return out;
      },
      py::arg("model"), py::arg("graph"), py::arg("split"), py::arg("epochs") = 200,
      py::arg("lr") = 0.01, py::arg("seed") = 1, py::arg("eval_every") = 10,
      py::arg("selection") = "final_epoch", py::arg("lambda0") = 1.0,
      py::arg("lambda_ae") = std::vector<double>{}, py::arg("kl_weight") = -1.0,
      py::arg("literal_recon") = false,
      "Full-batch training on the split's training edges; returns per-epoch stats.");

  mod.def(
      "embed",
      [](DgaeModel& m, const Graph& g, const EdgeSplit* split) {
        DenseMatrix z;
        {
          py::gil_scoped_release release;
          z = embed_graph(m, g, split);
        }
        return matrix_array(z);
      },
      py::arg("model"), py::arg("graph"), py::arg("split") = nullptr,
      "Evaluation-mode embeddings; adjacency from the split's training edges when given, "
      "otherwise from the whole graph.");

  mod.def(
      "evaluate",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& z,
         const EdgeSplit& split, const std::string& part) {
        if (part != "val" && part != "test") throw ConfigError("part must be val or test");
        return evaluate(matrix_from_array(z), split,
                        part == "val" ? SplitPart::val : SplitPart::test);
      },
      py::arg("z"), py::arg("split"), py::arg("part") = "test",
      "(auc, ap) of sigmoid(z z^T) scores on the held-out pairs.");

  mod.def(
      "auc",
      [](const std::vector<double>& scores, const std::vector<int>& labels) {
        return auc_score(scores, labels);
      },
      py::arg("scores"), py::arg("labels"));

  mod.def(
      "average_precision",
      [](const std::vector<double>& scores, const std::vector<int>& labels) {
        return average_precision(scores, labels);
      },
      py::arg("scores"), py::arg("labels"));

  mod.def(
      "verify_expansion",
      [](DgaeModel& m, const Graph& g, double tol) {
        const ExpansionReport r = verify_expansion(m, g, tol);
        return std::make_pair(r.max_abs_err, r.pass);
      },
      py::arg("model"), py::arg("graph"), py::arg("tol") = 1e-10,
      "Check the linear model against its polynomial filter form; (max_abs_err, pass).");

  mod.def("walk_collapse", &walk_collapse, py::arg("graph"), py::arg("k_max"),
          "Row dispersion of the lazy walk per power; decay drives the deep-stack collapse.");

  mod.def("save_model", &save_model, py::arg("model"), py::arg("path"));
  mod.def("load_model", &load_model, py::arg("path"));

  mod.def(
      "run_experiment",
      [](const std::string& config_json) {
        const ExperimentConfig cfg = config_from_json_text(config_json);
        std::vector<RunOutcome> outcomes;
        RunAggregate agg;
        {
          py::gil_scoped_release release;
          agg = run_experiment(cfg, &outcomes);
        }
        py::dict out;
        out["auc_mean"] = agg.auc_mean;
        out["auc_std"] = agg.auc_std;
        out["ap_mean"] = agg.ap_mean;
        out["ap_std"] = agg.ap_std;
        py::list runs;
        for (const RunOutcome& o : outcomes) {
          py::dict row;
          row["run"] = o.run;
          row["seed"] = o.seed;
          row["ok"] = o.ok;
          if (o.ok) {
            row["auc"] = o.auc;
            row["ap"] = o.ap;
          } else {
            row["error"] = o.error;
          }
          runs.append(std::move(row));
        }
        out["runs"] = std::move(runs);
        return out;
      },
      py::arg("config_json"),
      "Run the full protocol from a JSON config string; also writes runs.csv and summary.csv "
      "under the config's out_dir.");
}
