#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cli.hpp"
#include "crossrec/error.hpp"
#include "crossrec/eval/eval.hpp"
#include "crossrec/segmentation/segmentation.hpp"
#include "crossrec/synth/synth.hpp"

namespace py = pybind11;
using nlohmann::json;
using namespace crossrec;

namespace {

json parse(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(e.what());
  }
}

template <class T>
T config_from(const std::string& text) {
  try {
    T c = parse(text).get<T>();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(e.what());
  }
}

py::dict metrics_dict(const eval::Metrics& m) {
  py::dict d;
  d["hr"] = m.hr;
  d["precision"] = m.precision;
  d["recall"] = m.recall;
  d["mrr"] = m.mrr;
  d["map"] = m.ap;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  auto base = py::register_exception<Error>(m, "CrossrecError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());

  m.def("config_hash", [](const std::string& config) { return cli::config_hash(parse(config)); });

  m.def("run_cli", [](std::vector<std::string> args) {
    args.insert(args.begin(), "crossrec");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    return cli::run(static_cast<int>(argv.size()), argv.data());
  });

  m.def("generate_synth", [](const std::string& config) {
    const auto data = synth::generate(config_from<synth::SynthConfig>(config));
    py::dict d;
    d["events"] = data.events;
    d["purchases"] = data.purchases;
    d["profiles"] = data.profiles;
    d["catalog"] = data.catalog;
    d["planted"] = data.planted;
    return d;
  });

  m.def("write_synth", [](const std::string& config, const std::string& dir) {
    synth::write_files(synth::generate(config_from<synth::SynthConfig>(config)), dir);
  });

  m.def("rank_items", &eval::rank_items);
  m.def("apply_post_filter", &eval::apply_post_filter);
  m.def("metrics_at_k", [](const std::vector<std::uint32_t>& ranked, const std::vector<std::uint32_t>& purchased,
                           std::size_t k) { return metrics_dict(eval::metrics_at_k(ranked, purchased, k)); });

  m.def("weibull_pmf", &recmodels::weibull_pmf);
  m.def("weibull_tail", &recmodels::weibull_tail);

  m.def("fit_gmm", [](const std::vector<double>& xs) {
    const auto fit = segmentation::fit_gmm_em(xs);
    const auto& g = fit.model;
    py::dict d;
    d["weights"] = std::vector<double>{g.w1, g.w2};
    d["means"] = std::vector<double>{g.mu1, g.mu2};
    d["sds"] = std::vector<double>{g.sigma1, g.sigma2};
    d["log_likelihood"] = fit.log_likelihood;
    d["converged"] = fit.converged;
    d["threshold"] = segmentation::intersection_threshold(g).log_seconds;
    return d;
  });

  m.def(
      "train_and_evaluate",
      [](const std::string& data_dir, const std::string& spec, const std::string& prep_config, std::size_t k) {
        const auto prepared = prep::prepare(dataio::ingest(synth::files_in(data_dir)),
                                            config_from<prep::PrepConfig>(prep_config));
        const auto model = eval::train_model(prepared, config_from<eval::ModelSpec>(spec));
        const auto report = eval::evaluate(*model, prepared.data, prepared.tasks_of(prepared.split.test), k);
        return eval::report_to_json(report).dump();
      },
      py::arg("data_dir"), py::arg("spec"), py::arg("prep_config") = "{}", py::arg("k") = 3);
}
