// Python bindings for the core operations: set-matching metrics on frame
// features, synthetic store generation, episodic training and evaluation.
// Configuration kwargs are serialized to the same `key = value` form the CLI
// reads, so both front ends share one parser and one set of defaults.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "hyrsm/data.hpp"
#include "hyrsm/episodic.hpp"
#include "hyrsm/error.hpp"
#include "hyrsm/gradcheck.hpp"
#include "hyrsm/metrics.hpp"
#include "hyrsm/ops.hpp"
#include "hyrsm/relation.hpp"

namespace py = pybind11;
using namespace hyrsm;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_matrix(const DoubleArray& arr, const char* what) {
  if (arr.ndim() != 2) {
    throw DimensionError(std::string(what) + " must be a 2-D [frames x channels] array");
  }
  if (arr.shape(0) == 0 || arr.shape(1) == 0) {
    throw DimensionError(std::string(what) + " must be non-empty");
  }
  Tensor t = Tensor::zeros({static_cast<std::size_t>(arr.shape(0)),
                            static_cast<std::size_t>(arr.shape(1))});
  std::memcpy(t.values.data(), arr.data(), sizeof(double) * t.values.size());
  return t;
}

Tensor to_vector(const DoubleArray& arr, const char* what) {
  if (arr.ndim() != 1 || arr.shape(0) == 0) {
    throw DimensionError(std::string(what) + " must be a non-empty 1-D array");
  }
  Tensor t = Tensor::zeros({static_cast<std::size_t>(arr.shape(0))});
  std::memcpy(t.values.data(), arr.data(), sizeof(double) * t.values.size());
  return t;
}

py::array_t<double> matrix_to_array(const Tensor& t) {
  py::array_t<double> out({static_cast<py::ssize_t>(t.rows()), static_cast<py::ssize_t>(t.cols())});
  std::memcpy(out.mutable_data(), t.values.data(), sizeof(double) * t.values.size());
  return out;
}

// "Name" or "Name:direction"; bare names get the direction the CSV tools use.
Metric parse_metric(const std::string& item) {
  Metric m;
  const std::size_t colon = item.find(':');
  const std::string kind = colon == std::string::npos ? item : item.substr(0, colon);
  m.kind = metric_kind_from_name(kind);
  if (colon != std::string::npos) {
    m.direction = direction_from_name(item.substr(colon + 1));
  } else {
    m.direction = m.kind == MetricKind::DirectedMHM ? Direction::Forward : Direction::Bidirectional;
  }
  return m;
}

std::string kwargs_to_kv_text(const py::kwargs& kwargs) {
  std::string text;
  for (const auto& item : kwargs) {
    const std::string key = py::cast<std::string>(item.first);
    const py::handle value = item.second;
    std::string rendered;
    if (py::isinstance<py::bool_>(value)) {
      rendered = py::cast<bool>(value) ? "true" : "false";
    } else if (py::isinstance<py::int_>(value)) {
      rendered = std::to_string(py::cast<long long>(value));
    } else if (py::isinstance<py::float_>(value)) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.17g", py::cast<double>(value));
      rendered = buf;
    } else if (py::isinstance<py::str>(value)) {
      rendered = py::cast<std::string>(value);
      if (rendered.find('\n') != std::string::npos || rendered.find('#') != std::string::npos) {
        throw ConfigError("config value for '" + key + "' contains a newline or '#'");
      }
    } else {
      throw ConfigError("config value for '" + key + "' must be bool, int, float, or str");
    }
    text += key + " = " + rendered + "\n";
  }
  return text;
}

TrainConfig config_from_kwargs(const py::kwargs& kwargs, const FeatureStore* store) {
  std::string text = kwargs_to_kv_text(kwargs);
  if (store) {
    if (!kwargs.contains("frames")) {
      text += "frames = " + std::to_string(store->videos.empty() ? 0 : store->videos[0].features.rows()) + "\n";
    }
    if (!kwargs.contains("channels")) {
      text += "channels = " + std::to_string(store->channels()) + "\n";
    }
  }
  return TrainConfig::from_text(text, "kwargs");
}

py::dict summary_to_dict(const EvalSummary& s) {
  py::dict d;
  d["way"] = s.way;
  d["shot"] = s.shot;
  d["episodes"] = s.episodes;
  d["accuracy"] = s.accuracy;
  d["ci95"] = s.ci95;
  return d;
}

// Opaque handle around trained weights; evaluation needs the matching config
// again, so the handle stays path-friendly instead of exposing matrices.
struct ParamsHandle {
  RelationParams params;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() =
      "Few-shot action recognition on pre-extracted frame features: hybrid "
      "feature enhancement and set-matching temporal metrics.";

  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const UsageError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const ConfigError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const DimensionError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const DomainError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const Error& e) {
      PyErr_SetString(PyExc_RuntimeError, e.what());
    }
  });

  py::class_<FeatureStore>(m, "Store", "Labeled videos as [frames x channels] feature matrices.")
      .def("__len__", [](const FeatureStore& s) { return s.videos.size(); })
      .def_property_readonly("channels", &FeatureStore::channels)
      .def_property_readonly("num_classes", &FeatureStore::num_classes)
      .def_property_readonly("class_names",
                             [](const FeatureStore& s) { return s.class_names; })
      .def_property_readonly("provenance", [](const FeatureStore& s) { return s.provenance; })
      .def("label",
           [](const FeatureStore& s, std::size_t i) {
             if (i >= s.videos.size()) throw DomainError("video index out of range");
             return s.videos[i].label;
           },
           py::arg("index"))
      .def("features",
           [](const FeatureStore& s, std::size_t i) {
             if (i >= s.videos.size()) throw DomainError("video index out of range");
             return matrix_to_array(s.videos[i].features);
           },
           py::arg("index"))
      .def("save", [](const FeatureStore& s, const std::string& path) { write_store(s, path); },
           py::arg("path"));

  py::class_<ParamsHandle>(m, "Params", "Trained relation-module weights.")
      .def("save",
           [](const ParamsHandle& p, const std::string& path) { save_params(p.params, path); },
           py::arg("path"));

  m.def(
      "generate_store",
      [](const py::kwargs& kwargs) {
        SynthSpec spec = SynthSpec::from_text(kwargs_to_kv_text(kwargs), "kwargs");
        return generate(spec);
      },
      "Generate a synthetic store; kwargs mirror the gen-synth spec keys.");

  m.def("load_store", &read_store, py::arg("path"));

  m.def(
      "metric_value",
      [](const std::string& kind, const DoubleArray& x, const DoubleArray& y,
         const py::object& direction) {
        Metric metric = parse_metric(kind);
        if (!direction.is_none()) {
          metric.direction = direction_from_name(py::cast<std::string>(direction));
        }
        return metric_value(metric, to_matrix(x, "x"), to_matrix(y, "y"));
      },
      py::arg("kind"), py::arg("x"), py::arg("y"), py::arg("direction") = py::none(),
      "Distance between two frame sequences under the named metric.");

  m.def("metric_names", [] { return metric_names(); });

  m.def(
      "cosine_distance",
      [](const DoubleArray& a, const DoubleArray& b) {
        return cosine_distance_value(to_vector(a, "a").values, to_vector(b, "b").values);
      },
      py::arg("a"), py::arg("b"));

  m.def(
      "train",
      [](const FeatureStore& store, const py::kwargs& kwargs) {
        TrainConfig cfg = config_from_kwargs(kwargs, &store);
        TrainResult result;
        {
          py::gil_scoped_release release;
          result = train(store, cfg);
        }
        py::list log;
        for (const TrainLogRow& row : result.log) {
          py::dict d;
          d["episode_index"] = row.episode_index;
          d["episodic_loss"] = row.episodic_loss;
          d["reg_loss"] = row.reg_loss;
          d["total_loss"] = row.total_loss;
          log.append(d);
        }
        ParamsHandle handle{std::move(result.params)};
        return py::make_tuple(handle, log);
      },
      "Train on a store; returns (params, per-episode loss log).");

  m.def(
      "load_params",
      [](const std::string& path, const py::kwargs& kwargs) {
        TrainConfig cfg = config_from_kwargs(kwargs, nullptr);
        return ParamsHandle{load_params(path, cfg.relation_config(0))};
      },
      py::arg("path"), "Load saved weights; kwargs must repeat the training config.");

  m.def(
      "evaluate",
      [](const FeatureStore& store, const py::object& params, std::size_t episodes,
         std::size_t threads, const py::kwargs& kwargs) {
        TrainConfig cfg = config_from_kwargs(kwargs, &store);
        RelationParams weights = params.is_none() ? initial_params(cfg, 0)
                                                  : py::cast<const ParamsHandle&>(params).params;
        const std::size_t count = episodes > 0 ? episodes : cfg.eval_episodes;
        EvalSummary summary;
        {
          py::gil_scoped_release release;
          summary = evaluate(store, weights, cfg, count, threads);
        }
        return summary_to_dict(summary);
      },
      py::arg("store"), py::arg("params") = py::none(), py::arg("episodes") = 0,
      py::arg("threads") = 1,
      "Episodic accuracy with a 95% interval; params=None evaluates fresh weights.");

  m.def(
      "bench_metrics",
      [](const FeatureStore& store, const std::vector<std::string>& metrics, std::size_t episodes,
         std::size_t threads, const py::kwargs& kwargs) {
        TrainConfig cfg = config_from_kwargs(kwargs, &store);
        std::vector<Metric> parsed;
        for (const std::string& item : metrics) parsed.push_back(parse_metric(item));
        std::vector<BenchRow> rows;
        {
          py::gil_scoped_release release;
          rows = bench_metrics(store, cfg, parsed, episodes, threads);
        }
        py::list out;
        for (const BenchRow& row : rows) {
          py::dict d;
          std::string label = metric_name(row.metric.kind);
          if (row.metric.kind == MetricKind::DirectedMHM &&
              row.metric.direction == Direction::Backward) {
            label += ":backward";
          }
          d["metric"] = label;
          d["way"] = row.way;
          d["shot"] = row.shot;
          d["episodes"] = row.episodes;
          d["accuracy"] = row.accuracy;
          d["ci95"] = row.ci95;
          out.append(d);
        }
        return out;
      },
      py::arg("store"),
      py::arg("metrics") =
          std::vector<std::string>{"Diagonal", "PlainDTW", "Hausdorff", "DirectedMHM", "BiMHM"},
      py::arg("episodes") = 1000, py::arg("threads") = 1,
      "Compare metrics on raw stored features over a shared episode stream.");

  m.def(
      "grad_check",
      [](std::uint64_t seed, std::size_t points) {
        std::vector<GradCheckReport> reports;
        {
          py::gil_scoped_release release;
          reports = grad_check_all(seed, points);
        }
        py::dict out;
        for (const GradCheckReport& r : reports) out[py::str(r.component)] = r.worst_rel_err;
        return out;
      },
      py::arg("seed") = 1, py::arg("points") = 20,
      "Worst analytic-vs-finite-difference relative error per component.");

  m.def("require_disjoint_classes", &require_disjoint_classes, py::arg("train_store"),
        py::arg("eval_store"));
}
