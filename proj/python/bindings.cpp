// Copyright (c) 2026, The fairlora authors
// SPDX-License-Identifier: Apache-2.0
//

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "fairlora/experiment.hpp"

namespace py = pybind11;
using namespace fairlora;

namespace {

py::array_t<double> to_numpy(const Tensor& t) {
    py::array_t<double> a({t.rows(), t.cols()});
    std::copy(t.data().begin(), t.data().end(), a.mutable_data());
    return a;
}

py::object opt(const std::optional<double>& v) { return v ? py::cast(*v) : py::none(); }

py::dict report_dict(const FairnessReport& rep) {
    py::dict out;
    for (const MetricRow& r : rep.rows) {
        py::dict row;
        row["overall"] = opt(r.overall.v);
        row["group0"] = opt(r.group[0].v);
        row["group1"] = opt(r.group[1].v);
        row["difference"] = opt(r.difference);
        row["ratio"] = opt(r.ratio);
        out[metric_name(r.metric)] = row;
    }
    return out;
}

template <LabelKind K>
py::tuple split(const LabeledDataset<K>& d) {
    return py::make_tuple(to_numpy(d.x), py::array_t<int>(d.labels.size(), d.labels.data()));
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "fairlora core: synthetic data, fairness metrics and the two-party LoRA strategies";

    m.def(
        "generate",
        [](const std::string& spec_json) {
            GenSpec s;
            from_json(nlohmann::json::parse(spec_json), s);
            const DatasetSplits d = generate(s);
            py::dict out;
            out["sd_train"] = split(d.sd_train);
            out["sd_val"] = split(d.sd_val);
            out["sd_test"] = split(d.sd_test);
            out["co_train"] = split(d.co_train);
            out["test_groups"] = d.sidecar.test_groups;
            return out;
        },
        py::arg("spec_json") = "{}", "Generate the SD/CO splits; returns (x, labels) tuples and the test groups.");

    m.def(
        "evaluate",
        [](std::vector<double> scores, std::vector<int> labels, std::vector<int> groups, double threshold) {
            return report_dict(evaluate(EvalFrame{std::move(scores), std::move(labels), std::move(groups)}, threshold));
        },
        py::arg("scores"), py::arg("labels"), py::arg("groups"), py::arg("threshold") = 0.5);

    m.def(
        "run_experiment",
        [](const std::string& spec_json, std::optional<std::filesystem::path> out) {
            ExperimentSpec spec;
            from_json(nlohmann::json::parse(spec_json), spec);
            ExperimentResult res;
            {
                py::gil_scoped_release release;
                res = run_experiment(spec, out);
            }
            py::list runs;
            for (const auto& r : res.runs) {
                py::dict d;
                d["strategy"] = r.record.strategy;
                d["seed"] = r.record.seed;
                d["metrics"] = report_dict(r.record.report);
                d["task_stack_digest"] = r.task_stack_digest;
                d["audit_pass"] = r.audit.pass();
                runs.append(d);
            }
            return runs;
        },
        py::arg("spec_json"), py::arg("out") = std::nullopt);

    m.def(
        "audit_transcript",
        [](const std::filesystem::path& path) {
            const AuditReport rep = audit_transcript(Transcript::load(path), {}, {});
            return py::make_tuple(rep.pass(), rep.to_text());
        },
        py::arg("path"), "Structural audit of a saved transcript (checks a and d; b and c need heads and data).");

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);

    m.attr("__version__") = "0.1.0";
}
