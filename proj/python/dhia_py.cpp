#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>

#include "json.hpp"

#include "dhia/config.hpp"
#include "dhia/dataset.hpp"
#include "dhia/errors.hpp"
#include "dhia/metrics.hpp"
#include "dhia/model.hpp"
#include "dhia/pca.hpp"
#include "dhia/trainer.hpp"

namespace py = pybind11;
using namespace dhia;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const Array& a) {
  if (a.ndim() != 2) throw DimensionError("expected a 2-D array, got " + std::to_string(a.ndim()) + "-D");
  Matrix m(a.shape(0), a.shape(1));
  std::copy(a.data(), a.data() + a.size(), m.data().begin());
  return m;
}

py::array_t<double> to_array(const Matrix& m) {
  py::array_t<double> out({m.rows(), m.cols()});
  std::copy(m.data().begin(), m.data().end(), out.mutable_data());
  return out;
}

py::array_t<std::uint8_t> mask_to_array(const AvailabilityMask& g) {
  py::array_t<std::uint8_t> out({g.rows(), g.views()});
  auto r = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < g.rows(); ++i)
    for (std::size_t v = 0; v < g.views(); ++v) r(i, v) = g(i, v) ? 1 : 0;
  return out;
}

py::array_t<std::int64_t> labels_to_array(const Labels& l) {
  const std::vector<std::int64_t> wide(l.begin(), l.end());
  return py::array_t<std::int64_t>(static_cast<py::ssize_t>(wide.size()), wide.data());
}

Labels to_labels(const py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 1) throw DimensionError("labels must be 1-D");
  Labels l(a.size());
  for (py::ssize_t i = 0; i < a.size(); ++i) {
    if (a.data()[i] < 0) throw DataError("labels must be non-negative");
    l[i] = static_cast<std::size_t>(a.data()[i]);
  }
  return l;
}

TrainConfig to_config(const py::object& cfg) {
  if (cfg.is_none()) return desk_config();
  const std::string text = py::module_::import("json").attr("dumps")(cfg).cast<std::string>();
  return config_from_json(nlohmann::json::parse(text));
}

py::dict config_to_dict(const TrainConfig& c) {
  return py::module_::import("json").attr("loads")(to_json(c).dump()).cast<py::dict>();
}

ViewDataset to_dataset(const std::vector<Array>& views, const py::object& mask, const py::object& labels) {
  ViewDataset ds;
  for (const auto& v : views) ds.views.push_back(to_matrix(v));
  if (mask.is_none()) {
    ds.mask = AvailabilityMask(ds.n(), ds.views.size(), true);
  } else {
    ds.mask = AvailabilityMask::from_matrix(to_matrix(mask.cast<Array>()));
  }
  if (!labels.is_none()) ds.labels = to_labels(labels.cast<py::array_t<std::int64_t>>());
  apply_mask(ds);
  ds.validate();
  return ds;
}

py::dict dataset_to_dict(const ViewDataset& ds) {
  py::list views;
  for (const auto& v : ds.views) views.append(to_array(v));
  py::dict d;
  d["views"] = views;
  d["mask"] = mask_to_array(ds.mask);
  d["labels"] = ds.labels ? py::object(labels_to_array(*ds.labels)) : py::object(py::none());
  return d;
}

py::dict metrics_to_dict(const MetricsReport& m) {
  py::dict d;
  d["acc"] = m.acc;
  d["nmi"] = m.nmi;
  d["pur"] = m.pur;
  d["contingency"] = m.contingency;
  d["mapping"] = m.mapping;
  return d;
}

const char* phase_name(Phase p) { return p == Phase::pretrain ? "pretrain" : "finetune"; }

}  // namespace

PYBIND11_MODULE(_dhia, m) {
  m.doc() = "Incomplete multi-view clustering with hierarchical imputation and alignment";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());
  py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
  py::register_exception<ContractError>(m, "ContractError", base.ptr());

  m.def(
      "synthesize",
      [](std::size_t n, std::size_t views, std::size_t k, std::size_t latent_dim,
         std::optional<std::vector<std::size_t>> view_dims, double separation, double noise, std::uint64_t seed,
         double eta) {
        SyntheticSpec s;
        s.n = n;
        s.v_count = views;
        s.k = k;
        s.latent_dim = latent_dim;
        s.view_dims = view_dims ? *view_dims : std::vector<std::size_t>(views, 20);
        s.separation = separation;
        s.noise = noise;
        s.seed = seed;
        return dataset_to_dict(synthesize_incomplete(s, eta));
      },
      py::arg("n") = 300, py::arg("views") = 2, py::arg("k") = 3, py::arg("latent_dim") = 8,
      py::arg("view_dims") = py::none(), py::arg("separation") = 6.0, py::arg("noise") = 0.1, py::arg("seed") = 0,
      py::arg("eta") = 0.0,
      "Labelled Gaussian multi-view data; eta > 0 removes that fraction of rows from each view.");

  m.def(
      "generate_mask",
      [](std::size_t n, std::size_t views, double eta, std::uint64_t seed) {
        return mask_to_array(generate_mask(n, views, eta, seed));
      },
      py::arg("n"), py::arg("views"), py::arg("eta"), py::arg("seed") = 0);

  m.def(
      "default_config", [](const std::string& profile) {
        if (profile == "desk") return config_to_dict(desk_config());
        if (profile == "full") return config_to_dict(full_scale_config());
        throw ConfigError("unknown profile '" + profile + "' (expected desk or full)");
      },
      py::arg("profile") = "desk");

  m.def(
      "train",
      [](const std::vector<Array>& views, const py::object& mask, const py::object& labels, const py::object& config,
         const py::object& out) {
        const TrainConfig cfg = to_config(config);
        const ViewDataset ds = to_dataset(views, mask, labels);
        RunResult r;
        {
          py::gil_scoped_release release;
          if (out.is_none()) {
            Trainer t(cfg, ds);
            t.run_to_completion();
            r.labels = t.final_labels();
            r.state = t.state();
            if (t.data().labels) r.metrics = evaluate(r.labels, *t.data().labels);
          }
        }
        if (!out.is_none()) {
          const std::string dir = py::str(out);
          py::gil_scoped_release release;
          r = run(cfg, ds, dir);
        }
        py::list history;
        for (const auto& e : r.state.history) {
          py::dict h;
          h["phase"] = phase_name(e.phase);
          h["epoch"] = e.epoch;
          h["rec"] = e.losses.rec;
          h["ebm"] = e.losses.ebm;
          h["caa"] = e.losses.caa;
          h["total"] = e.losses.total;
          h["imputed_assignments"] = e.imputed_assignments;
          h["imputed_features"] = e.imputed_features;
          history.append(h);
        }
        py::dict d;
        d["labels"] = labels_to_array(r.labels);
        d["metrics"] = r.metrics ? py::object(metrics_to_dict(*r.metrics)) : py::object(py::none());
        d["history"] = history;
        return d;
      },
      py::arg("views"), py::arg("mask") = py::none(), py::arg("labels") = py::none(), py::arg("config") = py::none(),
      py::arg("out") = py::none(),
      "Pretrain, fine-tune and label. With `out`, also writes the run artifacts there.");

  m.def(
      "complete",
      [](const std::string& checkpoint, const std::vector<Array>& views, const py::object& mask,
         const py::object& config) {
        const TrainConfig cfg = to_config(config);
        ViewDataset ds = to_dataset(views, mask, py::none());
        if (cfg.normalize) ds = normalize(std::move(ds));
        const ModelBundle bundle = load_checkpoint(checkpoint);
        const FullPass fp = full_pass(bundle, ds, cfg);
        py::list h, q;
        for (const auto& x : fp.completed_h.completed) h.append(to_array(x));
        for (const auto& x : fp.completed_q.completed) q.append(to_array(x));
        py::dict d;
        d["h_star"] = h;
        d["q_star"] = q;
        d["labels"] = labels_to_array(labels_from_completed(fp.completed_q.completed));
        return d;
      },
      py::arg("checkpoint"), py::arg("views"), py::arg("mask") = py::none(), py::arg("config") = py::none(),
      "Completed latents H*, completed assignments Q* and labels from a saved checkpoint.");

  m.def(
      "evaluate",
      [](const py::array_t<std::int64_t>& pred, const py::array_t<std::int64_t>& truth) {
        return metrics_to_dict(evaluate(to_labels(pred), to_labels(truth)));
      },
      py::arg("pred"), py::arg("truth"));

  m.def(
      "pca",
      [](const Array& x, std::size_t components) {
        const PcaResult r = pca(to_matrix(x), components);
        py::dict d;
        d["projection"] = to_array(r.projection);
        d["components"] = to_array(r.components);
        d["variances"] = r.variances;
        return d;
      },
      py::arg("x"), py::arg("components") = 2);
}
