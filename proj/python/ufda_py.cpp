// Copyright 2026 The UFDA Simulator Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// Python bindings: JSON strings in and out, plus a few pure helpers.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <utility>
#include <vector>

#include "ufda/config.hpp"
#include "ufda/error.hpp"
#include "ufda/federation.hpp"
#include "ufda/gcld.hpp"
#include "ufda/mvd.hpp"

namespace py = pybind11;
using namespace ufda;

PYBIND11_MODULE(_ufda, m) {
  m.doc() = "UFDA simulator core";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<RangeError>(m, "RangeError", base.ptr());
  py::register_exception<DegenerateInputError>(m, "DegenerateInputError", base.ptr());
  py::register_exception<DivergenceError>(m, "DivergenceError", base.ptr());
  py::register_exception<ProtocolError>(m, "ProtocolError", base.ptr());
  py::register_exception<InvariantError>(m, "InvariantError", base.ptr());

  m.def("default_config", [] { return to_json(RunConfig{}).dump(); });

  m.def("resolve_config", [](const std::string& text) { return to_json(parse_config(text)).dump(); },
        py::arg("config_json"));

  m.def(
      "run_experiment",
      [](const std::string& text, const std::string& output_dir) {
        const RunConfig cfg = parse_config(text);
        federation::ExperimentReport report;
        {
          py::gil_scoped_release release;
          report = federation::run_experiment(cfg);
          if (!output_dir.empty()) federation::write_report(output_dir, report);
        }
        return federation::report_to_json(report).dump();
      },
      py::arg("config_json"), py::arg("output_dir") = "");

  m.def(
      "schedule_rounds",
      [](double r, std::size_t epochs, std::size_t batches) {
        std::vector<std::pair<std::size_t, std::size_t>> out;
        for (const auto& e : federation::schedule_rounds(r, epochs, batches).events) {
          out.emplace_back(e.epoch, e.batch);
        }
        return out;
      },
      py::arg("r"), py::arg("epochs"), py::arg("batches_per_epoch"));

  m.def(
      "fit_gmm2",
      [](const std::vector<double>& values) {
        const auto fit = gcld::fit_gmm2(values);
        py::dict d;
        py::list comps;
        for (const auto& c : fit.components) {
          py::dict cd;
          cd["weight"] = c.weight;
          cd["mean"] = c.mean;
          cd["variance"] = c.variance;
          comps.append(cd);
        }
        d["components"] = comps;
        d["posterior_low"] = fit.posterior_low;
        d["log_likelihood"] = fit.log_likelihood;
        d["iterations"] = fit.iterations;
        d["degenerate"] = fit.degenerate;
        return d;
      },
      py::arg("values"));

  m.def("mutual_scores", [](const std::vector<double>& d_s, const std::vector<double>& d_t) {
    return mvd::mutual_scores(d_s, d_t);
  });

  m.def(
      "decide_shared",
      [](const std::vector<double>& scores, double lambda) {
        std::vector<bool> shared;
        for (auto v : mvd::decide_shared(scores, lambda)) shared.push_back(v == mvd::Verdict::kShared);
        return shared;
      },
      py::arg("scores"), py::arg("lam"));
}
