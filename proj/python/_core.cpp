// Python bindings for the relsynth core.

#include <sstream>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "relsynth/assemble.hpp"
#include "relsynth/cli.hpp"
#include "relsynth/error.hpp"
#include "relsynth/evaluate.hpp"
#include "relsynth/llm/mock_endpoint.hpp"
#include "relsynth/model.hpp"
#include "relsynth/toy.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using namespace relsynth;

namespace {

py::object to_python(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

std::vector<std::vector<std::optional<std::string>>> table_rows(const RelationalDataset& ds, const std::string& name) {
  const auto& t = ds.table(name);
  std::vector<std::vector<std::optional<std::string>>> rows(t.row_count());
  for (std::size_t r = 0; r < t.row_count(); ++r)
    for (std::size_t c = 0; c < t.column_count(); ++c) rows[r].push_back(t.cell(r, c));
  return rows;
}

llm::PromptTemplate load_template(const RelationalDataset& ds, const fs::path& config_path, const char* role,
                                  const std::optional<fs::path>& path, llm::PromptKind kind) {
  if (path) return llm::PromptTemplate::load(*path, kind);
  const auto it = ds.schema().templates.find(role);
  if (it != ds.schema().templates.end() && !config_path.empty())
    return llm::PromptTemplate::load(config_path.parent_path() / it->second, kind);
  throw ConfigError(std::string("no ") + role + " template: pass one or fit from a config that names it");
}

llm::EndpointConfig endpoint(const std::string& url, std::size_t concurrency) {
  llm::EndpointConfig ec;
  ec.url = url;
  ec.max_concurrency = concurrency;
  return ec;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Relational synthetic data with a private Bayesian network and a structured-output LLM";

  auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", error);
  py::register_exception<DataError>(m, "DataError", error);
  py::register_exception<EndpointError>(m, "EndpointError", error);

  py::class_<RelationalDataset>(m, "Dataset")
      .def_static("load", &load_dataset, py::arg("config"))
      .def("save", &save_dataset, py::arg("out_dir"))
      .def_property_readonly("entity_count", &RelationalDataset::entity_count)
      .def_property_readonly("main_table", [](const RelationalDataset& d) { return d.schema().main_table; })
      .def_property_readonly("tables",
                             [](const RelationalDataset& d) {
                               std::vector<std::string> names;
                               for (const auto& t : d.schema().tables) names.push_back(t.name);
                               return names;
                             })
      .def("columns",
           [](const RelationalDataset& d, const std::string& table) {
             std::vector<std::string> names;
             for (const auto& c : d.schema().table(table).columns) names.push_back(c.name);
             return names;
           })
      .def("rows", &table_rows, py::arg("table"), "Rows of a table as lists of cells (None for null).")
      .def("subset", [](const RelationalDataset& d, const std::vector<std::size_t>& e) { return d.subset(e); })
      .def("__len__", &RelationalDataset::entity_count);

  m.def(
      "generate_toy", [](std::size_t entities, std::uint64_t seed) { return generate_toy({entities, seed}); },
      py::arg("entities") = 2000, py::arg("seed") = 7);
  m.def("write_toy", &write_toy, py::arg("dataset"), py::arg("out_dir"));

  py::class_<FittedModel>(m, "Model")
      .def_static(
          "fit",
          [](const RelationalDataset& ds, double epsilon, std::size_t degree, double holdout, std::uint64_t seed,
             bool noise_disabled, std::optional<fs::path> config) {
            FitOptions fo;
            fo.epsilon = epsilon;
            fo.degree = degree;
            fo.holdout = holdout;
            fo.seed = seed;
            fo.noise_disabled = noise_disabled;
            return fit_model(ds, fo, config.value_or(fs::path()));
          },
          py::arg("dataset"), py::arg("epsilon") = 2.0, py::arg("degree") = 3, py::arg("holdout") = 0.2,
          py::arg("seed") = 0, py::arg("noise_disabled") = false, py::arg("config") = py::none())
      .def_static("load", &load_model, py::arg("model_dir"))
      .def("save", [](const FittedModel& m, const RelationalDataset& ds, const fs::path& dir) { save_model(m, ds, dir); })
      .def_property_readonly("epsilon_spent", [](const FittedModel& m) { return m.net.account.total(); })
      .def_property_readonly("feature_keys", [](const FittedModel& m) { return m.net.feature_keys; })
      .def_property_readonly("train", [](const FittedModel& m) { return m.split.train; })
      .def_property_readonly("holdout", [](const FittedModel& m) { return m.split.holdout; })
      .def_property_readonly("config_path", [](const FittedModel& m) { return m.config_path; })
      .def(
          "sample_rows", [](const FittedModel& m, std::size_t n, std::uint64_t seed) { return m.net.sample(n, seed); },
          py::arg("n"), py::arg("seed") = 0, "Analytics rows (codes) drawn from the network.")
      .def(
          "top_n_similar",
          [](const FittedModel& m, const RelationalDataset& ds, const AnalyticsRow& row, std::size_t n) {
            const auto index = make_similarity_index(ds, m);
            std::vector<std::string> keys;
            for (auto e : index.top_n_similar(row, n)) keys.push_back(ds.entity_key(e));
            return keys;
          },
          py::arg("dataset"), py::arg("row"), py::arg("n"), "Entity keys of the n most similar training entities.");

  m.def(
      "synthesize",
      [](const FittedModel& model, const RelationalDataset& ds, const std::string& url, std::size_t samples,
         std::size_t references, std::optional<std::uint64_t> seed, std::optional<fs::path> out_dir,
         std::optional<fs::path> template_path, std::size_t concurrency, bool resume) {
        const auto index = make_similarity_index(ds, model);
        const auto tpl = load_template(ds, model.config_path, "synthesis", template_path, llm::PromptKind::kSynthesis);
        SynthesisOptions so;
        so.samples = samples;
        so.references = references;
        so.seed = seed.value_or(model.options.seed);
        so.out_dir = out_dir.value_or(fs::path());
        so.resume = resume;
        SynthesisResult res = [&] {
          py::gil_scoped_release release;
          const llm::CompletionClient client(endpoint(url, concurrency));
          return synthesize({ds, model.spec, model.net, index, tpl, client}, so);
        }();
        py::list log;
        for (const auto& r : res.log) log.append(to_python(r.to_json()));
        return py::make_tuple(std::move(res.dataset), log);
      },
      py::arg("model"), py::arg("dataset"), py::arg("url"), py::arg("samples"), py::arg("references") = 3,
      py::arg("seed") = py::none(), py::arg("out_dir") = py::none(), py::arg("template") = py::none(),
      py::arg("concurrency") = 4, py::arg("resume") = false,
      "Generates entities through an OpenAI-compatible endpoint; returns (dataset, log records).");

  m.def(
      "evaluate",
      [](const FittedModel& model, const RelationalDataset& original, const RelationalDataset& synthetic,
         double alpha) {
        MetricsReport rep;
        rep.against = "given";
        rep.kl = kl_report(original, synthetic, model.spec, alpha);
        rep.chi2 = chi2_report(original, synthetic, model.spec);
        return to_python(rep.to_json(model.spec));
      },
      py::arg("model"), py::arg("original"), py::arg("synthetic"), py::arg("alpha") = 0.5,
      "Aggregated KL and chi-squared report as a dict.");

  m.def(
      "realism",
      [](const FittedModel& model, const RelationalDataset& source, const RelationalDataset& dataset,
         const std::vector<std::size_t>& candidates, const std::string& url, std::size_t references,
         std::optional<fs::path> template_path) {
        const auto index = make_similarity_index(source, model);
        const auto tpl =
            load_template(source, model.config_path, "evaluation", template_path, llm::PromptKind::kEvaluation);
        RealismReport rep;
        {
          py::gil_scoped_release release;
          const llm::CompletionClient client(endpoint(url, 4));
          rep = realism_report({source, model.spec, index, tpl, client, references, 1}, dataset, candidates);
        }
        py::dict out;
        out["mean"] = rep.mean;
        out["histogram"] = std::vector<std::size_t>(rep.histogram.begin(), rep.histogram.end());
        out["scored"] = rep.scored;
        out["skipped"] = rep.skipped;
        out["candidates"] = rep.candidates;
        out["references"] = rep.references;
        return out;
      },
      py::arg("model"), py::arg("source"), py::arg("dataset"), py::arg("candidates"), py::arg("url"),
      py::arg("references") = 3, py::arg("template") = py::none(), "LLM-judged realism of the candidate entities.");

  m.def(
      "smoothed_kl",
      [](const std::vector<double>& p, const std::vector<double>& q, double alpha) { return smoothed_kl(p, q, alpha); },
      py::arg("p"), py::arg("q"), py::arg("alpha") = 0.5);
  m.def("kl_score", &kl_score, py::arg("kl"));
  m.def(
      "chi2_homogeneity",
      [](const std::vector<double>& a, const std::vector<double>& b) {
        const auto r = chi2_homogeneity(a, b);
        return py::make_tuple(r.statistic, r.df, r.p_value);
      },
      py::arg("a"), py::arg("b"), "(statistic, df, p_value)");

  py::class_<llm::MockEndpoint>(m, "MockEndpoint")
      .def(py::init([](std::vector<int> scores, std::size_t invalid_first, std::size_t rate_limit_first,
                       bool unavailable, int port) {
             llm::MockOptions o;
             o.scores = std::move(scores);
             o.invalid_first = invalid_first;
             o.rate_limit_first = rate_limit_first;
             o.unavailable = unavailable;
             return std::make_unique<llm::MockEndpoint>(o, port);
           }),
           py::arg("scores") = std::vector<int>{4}, py::arg("invalid_first") = 0, py::arg("rate_limit_first") = 0,
           py::arg("unavailable") = false, py::arg("port") = 0)
      .def_property_readonly("url", &llm::MockEndpoint::url)
      .def_property_readonly("requests", &llm::MockEndpoint::requests)
      .def_property_readonly("entity_requests", &llm::MockEndpoint::entity_requests)
      .def_property_readonly("score_requests", &llm::MockEndpoint::score_requests)
      .def("stop", &llm::MockEndpoint::stop)
      .def("__enter__", [](llm::MockEndpoint& self) -> llm::MockEndpoint& { return self; },
           py::return_value_policy::reference)
      .def("__exit__", [](llm::MockEndpoint& self, py::args) { self.stop(); });

  m.def(
      "run_cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "relsynth");
        std::vector<const char*> argv;
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command line tool in-process; returns (exit code, stdout, stderr).");
}
