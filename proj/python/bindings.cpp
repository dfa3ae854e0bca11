#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "modpipe/cli.hpp"
#include "modpipe/corpus.hpp"
#include "modpipe/embeddings.hpp"
#include "modpipe/fusion.hpp"
#include "modpipe/gateway.hpp"
#include "modpipe/metrics.hpp"
#include "modpipe/pipeline.hpp"
#include "modpipe/prompts.hpp"
#include "modpipe/svm.hpp"

namespace py = pybind11;
using namespace modpipe;

namespace {

template <typename T>
T required(std::optional<T> value, const std::string& what, const std::string& text) {
  if (!value) throw py::value_error("unknown " + what + " '" + text + "'");
  return *value;
}

py::dict report_dict(const EvaluationReport& r) {
  py::dict per_class;
  for (const auto& m : r.per_class) {
    py::dict d;
    d["precision"] = m.precision;
    d["recall"] = m.recall;
    d["f1"] = m.f1;
    d["f2"] = m.f2;
    d["support"] = m.support;
    per_class[py::str(m.label)] = d;
  }
  py::dict out;
  out["accuracy"] = r.accuracy;
  out["macro_precision"] = r.macro_precision;
  out["macro_recall"] = r.macro_recall;
  out["macro_f1"] = r.macro_f1;
  out["macro_f2"] = r.macro_f2;
  out["empty"] = r.empty;
  out["per_class"] = per_class;
  out["counts"] = r.confusion.counts;
  return out;
}

}  // namespace

PYBIND11_MODULE(_modpipe, m) {
  m.doc() = "Python access to the modpipe moderation pipeline";

  py::register_exception<Error>(m, "ModpipeError", PyExc_RuntimeError);

  m.attr("EMBEDDING_DIM") = static_cast<int>(kEmbeddingDim);

  m.def("template_names", [] {
    std::vector<std::string> names;
    for (const auto& t : all_prompt_templates()) names.emplace_back(to_string(t.id));
    return names;
  });
  m.def("template_body", [](const std::string& name) {
    return prompt_template(required(parse_template_id(name), "template", name)).body;
  });
  m.def(
      "parse_label",
      [](const std::string& response, const std::string& template_name) {
        const auto& tmpl = prompt_template(required(parse_template_id(template_name), "template", template_name));
        const ParsedLabel parsed = parse_label(RawResponse{response, 0.0, 200}, tmpl);
        return py::make_tuple(parsed.label, std::string(to_string(parsed.method)));
      },
      py::arg("response"), py::arg("template"));
  m.def(
      "majority_vote",
      [](const std::array<std::string, 3>& votes, const std::array<std::size_t, 3>& priority) {
        return majority_vote(votes, priority);
      },
      py::arg("votes"), py::arg("priority") = std::array<std::size_t, 3>{0, 1, 2});

  m.def(
      "stub_embedding",
      [](const std::string& content, const std::string& modality, double leak,
         std::optional<std::string> label) {
        return stub_embedding(required(parse_modality(modality), "modality", modality), content,
                              leak, label)
            .values();
      },
      py::arg("content"), py::arg("modality") = "text", py::arg("leak") = 0.0,
      py::arg("label") = py::none());
  m.def(
      "fuse",
      [](std::optional<Eigen::VectorXd> text, std::optional<Eigen::VectorXd> image,
         const std::string& mode) {
        return fuse_values(text ? &*text : nullptr, image ? &*image : nullptr,
                           required(parse_fusion_mode(mode), "fusion mode", mode));
      },
      py::arg("text"), py::arg("image"), py::arg("mode"));

  m.def("gamma_scale", &gamma_scale, py::arg("X"));
  m.def("rbf_kernel", &rbf_kernel, py::arg("x"), py::arg("y"), py::arg("gamma"));
  m.def("balanced_class_weights", [](const std::vector<std::string>& labels) {
    return balanced_class_weights(labels);
  });

  py::class_<SvmModel>(m, "SvmModel")
      .def_readonly("bias", &SvmModel::bias)
      .def_readonly("gamma", &SvmModel::gamma)
      .def_readonly("dual_coefs", &SvmModel::dual_coefs)
      .def_readonly("support_vectors", &SvmModel::support_vectors)
      .def_readonly("converged", &SvmModel::converged)
      .def_readonly("dual_objective", &SvmModel::dual_objective)
      .def_property_readonly("label_map", [](const SvmModel& s) { return s.label_map; })
      .def("decision_function", &SvmModel::decision_function)
      .def("predict", [](const SvmModel& s, const Eigen::VectorXd& x) { return s.predict(x); });
  m.def(
      "train_svm",
      [](const Eigen::MatrixXd& X, const std::vector<std::string>& labels, double C,
         std::optional<double> gamma, std::uint64_t seed) {
        SvmHyperparams hp;
        hp.C = C;
        if (gamma) hp.gamma = GammaFixed{*gamma};
        return train_smo(X, labels, hp, seed);
      },
      py::arg("X"), py::arg("labels"), py::arg("C") = 0.1, py::arg("gamma") = py::none(),
      py::arg("seed") = 0);

  m.def(
      "macro_report",
      [](const std::vector<std::string>& gold, const std::vector<std::string>& pred,
         const std::vector<std::string>& classes) {
        return report_dict(macro_report(confusion(gold, pred, classes)));
      },
      py::arg("gold"), py::arg("pred"), py::arg("classes"));

  m.def(
      "class_histogram",
      [](const std::string& path, int task, const std::string& field) {
        const Task t = required(parse_task(std::to_string(task)), "task", std::to_string(task));
        return class_histogram(load_dataset(path, t),
                               select_label(required(parse_label_field(field), "label field", field)));
      },
      py::arg("path"), py::arg("task"), py::arg("field"));

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out;
        std::ostringstream err;
        int code;
        {
          py::gil_scoped_release release;
          code = run_cli(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"));
}
