#include "relsynth/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "relsynth/assemble.hpp"
#include "relsynth/error.hpp"
#include "relsynth/evaluate.hpp"
#include "relsynth/llm/mock_endpoint.hpp"
#include "relsynth/model.hpp"
#include "relsynth/toy.hpp"

namespace relsynth {

namespace {

namespace fs = std::filesystem;

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + p.string());
  out << text;
}

struct EndpointArgs {
  std::string config;
  std::string url;
  std::string model;
  std::size_t concurrency = 0;

  void add(CLI::App* cmd) {
    cmd->add_option("--endpoint", config, "Endpoint config JSON");
    cmd->add_option("--url", url, "Endpoint base URL (overrides the config)");
    cmd->add_option("--model-name", model, "Model name sent to the endpoint");
    cmd->add_option("--concurrency", concurrency, "Maximum requests in flight");
  }

  llm::EndpointConfig resolve() const {
    llm::EndpointConfig c = config.empty() ? llm::EndpointConfig{} : llm::EndpointConfig::load(config);
    if (!url.empty()) c.url = url;
    if (!model.empty()) c.model = model;
    if (concurrency > 0) c.max_concurrency = concurrency;
    if (config.empty() && url.empty()) throw ConfigError("an endpoint is required: pass --endpoint or --url");
    return c;
  }
};

// Dataset a model was fitted on, unless overridden.
fs::path dataset_config(const FittedModel& model, const std::string& override_path) {
  if (!override_path.empty()) return override_path;
  if (model.config_path.empty()) throw ConfigError("model manifest has no dataset config; pass --config");
  return model.config_path;
}

llm::PromptTemplate template_for(const fs::path& config, const RelationalDataset& ds, const std::string& role,
                                 const std::string& override_path, llm::PromptKind kind) {
  if (!override_path.empty()) return llm::PromptTemplate::load(override_path, kind);
  const auto it = ds.schema().templates.find(role);
  if (it != ds.schema().templates.end()) return llm::PromptTemplate::load(config.parent_path() / it->second, kind);
  return llm::PromptTemplate::parse(kind == llm::PromptKind::kSynthesis ? toy_synthesis_template()
                                                                        : toy_evaluation_template(),
                                    kind);
}

std::string fmt(double v, const char* f = "%.4f") {
  if (std::isnan(v)) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// Report values; null stands for an undefined mean.
std::string fmt(const nlohmann::json& v, const char* f = "%.4f") {
  return v.is_null() ? "n/a" : fmt(v.get<double>(), f);
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"relsynth: differentially private relational data synthesis with LLM assembly"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "relsynth 0.1.0");

  // fit
  auto* fit = app.add_subcommand("fit", "Discretize, build analytics and fit the private network");
  std::string fit_config, fit_model_dir, fit_strategy;
  FitOptions fo;
  fit->add_option("--config", fit_config, "Dataset config JSON")->required();
  fit->add_option("--model-dir", fit_model_dir, "Output directory for model artifacts")->required();
  fit->add_option("--epsilon", fo.epsilon, "Total privacy budget")->capture_default_str();
  fit->add_option("--degree", fo.degree, "Maximum parents per node")->capture_default_str();
  fit->add_option("--structure-share", fo.structure_share, "Budget share for structure learning")
      ->capture_default_str();
  fit->add_option("--cell-cap", fo.cell_cap, "Maximum conditional table cells per node")->capture_default_str();
  fit->add_option("--holdout", fo.holdout, "Entity fraction held out from training")->capture_default_str();
  fit->add_option("--seed", fo.seed, "Master seed")->capture_default_str();
  fit->add_option("--strategy", fit_strategy, "Discretization strategy JSON");
  fit->add_flag("--no-noise", fo.noise_disabled, "Disable all noise (testing only; not private)");

  // sample
  auto* sample = app.add_subcommand("sample", "Generate synthetic entities through the completion endpoint");
  std::string s_model_dir, s_out, s_config, s_template;
  SynthesisOptions so;
  std::optional<std::uint64_t> s_seed;
  std::optional<std::size_t> s_stop_after;
  EndpointArgs s_ep;
  sample->add_option("--model-dir", s_model_dir, "Fitted model directory")->required();
  sample->add_option("--out", s_out, "Output directory")->required();
  sample->add_option("-m,--samples", so.samples, "Number of entities to generate")->required();
  sample->add_option("-n,--references", so.references, "Reference entities per prompt")->capture_default_str();
  sample->add_option("--seed", s_seed, "Sampling seed (defaults to the fit seed)");
  sample->add_option("--config", s_config, "Dataset config (defaults to the one used by fit)");
  sample->add_option("--template", s_template, "Synthesis prompt template");
  sample->add_option("--regenerations", so.regenerations, "Retries after an invalid answer")->capture_default_str();
  sample->add_option("--checkpoint-every", so.checkpoint_every, "Samples between checkpoints")->capture_default_str();
  sample->add_flag("--resume", so.resume, "Continue from the synthesis log in --out");
  sample->add_option("--stop-after", s_stop_after)->group("");
  s_ep.add(sample);

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Score a synthetic dataset against the original");
  std::string e_model_dir, e_synth, e_out, e_config, e_template, e_against = "all";
  std::size_t e_cap = 0, e_refs = 3;
  bool e_baseline = false, e_skip_realism = false;
  double e_alpha = 0.5;
  EndpointArgs e_ep;
  evaluate->add_option("--model-dir", e_model_dir, "Fitted model directory")->required();
  evaluate->add_option("--synthetic", e_synth, "Synthetic dataset directory (with config.json)")->required();
  evaluate->add_option("--out", e_out, "Report path prefix (writes .json and .csv)");
  evaluate->add_option("--config", e_config, "Original dataset config (defaults to the one used by fit)");
  evaluate->add_option("--against", e_against, "Original partition to compare with")
      ->check(CLI::IsMember({"all", "train", "holdout"}))
      ->capture_default_str();
  evaluate->add_option("--alpha", e_alpha, "Additive smoothing for KL")->capture_default_str();
  evaluate->add_option("--realism-cap", e_cap, "Entities scored by the judge (0 disables)")->capture_default_str();
  evaluate->add_option("-n,--references", e_refs, "Reference entities per judge prompt")->capture_default_str();
  evaluate->add_flag("--skip-realism", e_skip_realism, "Skip the judge even when --realism-cap is set");
  evaluate->add_flag("--baseline", e_baseline, "Also score held-out real entities");
  evaluate->add_option("--template", e_template, "Evaluation prompt template");
  e_ep.add(evaluate);

  // report
  auto* report = app.add_subcommand("report", "Print a saved evaluation report");
  std::string r_path;
  report->add_option("report", r_path, "Report JSON")->required();

  // generate-toy
  auto* toy = app.add_subcommand("generate-toy", "Write the built-in toy dataset");
  std::string t_out;
  ToyOptions to;
  toy->add_option("--out", t_out, "Output directory")->required();
  toy->add_option("--entities", to.entities, "Number of persons")->capture_default_str();
  toy->add_option("--seed", to.seed, "Generator seed")->capture_default_str();

  // mock-server
  auto* mock = app.add_subcommand("mock-server", "Serve the offline mock endpoint until interrupted");
  int m_port = 8000;
  llm::MockOptions mo;
  mock->add_option("--port", m_port, "Port on 127.0.0.1")->capture_default_str();
  mock->add_option("--scores", mo.scores, "Scripted realism scores");
  mock->add_option("--invalid-first", mo.invalid_first, "Invalid answers per prompt before a valid one");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : static_cast<int>(ErrorKind::kConfig);
  }

  try {
    if (fit->parsed()) {
      if (!fit_strategy.empty()) fo.strategy = StrategyConfig::from_json(read_file(fit_strategy));
      const auto t0 = std::chrono::steady_clock::now();
      const auto ds = load_dataset(fit_config);
      const auto model = fit_model(ds, fo, fit_config);
      save_model(model, ds, fit_model_dir);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      out << "fitted " << model.net.column_count() << " analytics columns on " << model.split.train.size()
          << " training entities (" << model.split.holdout.size() << " held out)\n";
      out << "privacy budget spent: "
          << (std::isfinite(model.net.account.total()) ? fmt(model.net.account.total(), "%.6g") : "inf") << "\n";
      for (const auto& w : model.spec.warnings()) out << "warning: " << w << "\n";
      out << "fit time: " << fmt(secs, "%.2f") << " s\n";
      return 0;
    }

    if (sample->parsed()) {
      const auto model = load_model(s_model_dir);
      const auto config = dataset_config(model, s_config);
      const auto ds = load_dataset(config);
      const auto index = make_similarity_index(ds, model);
      const auto tpl = template_for(config, ds, "synthesis", s_template, llm::PromptKind::kSynthesis);
      const llm::CompletionClient client(s_ep.resolve());
      so.seed = s_seed.value_or(model.options.seed);
      so.out_dir = s_out;
      so.stop_after = s_stop_after;
      const auto result = synthesize({ds, model.spec, model.net, index, tpl, client}, so);
      out << "generated " << result.dataset.entity_count() << " entities (" << result.failed << " failed, "
          << result.log.size() << " logged)\n";
      if (!result.complete) out << "stopped early; rerun with --resume to continue\n";
      return 0;
    }

    if (evaluate->parsed()) {
      const auto model = load_model(e_model_dir);
      const auto config = dataset_config(model, e_config);
      const auto ds = load_dataset(config);
      const auto synth = load_dataset(fs::path(e_synth) / "config.json");
      MetricsReport rep;
      rep.against = e_against;
      std::optional<RelationalDataset> part;
      if (e_against == "train") part.emplace(ds.subset(model.split.train));
      if (e_against == "holdout") part.emplace(ds.subset(model.split.holdout));
      const RelationalDataset& original = part ? *part : ds;
      rep.kl = kl_report(original, synth, model.spec, e_alpha);
      rep.chi2 = chi2_report(original, synth, model.spec);
      if (e_cap > 0 && !e_skip_realism) {
        const auto index = make_similarity_index(ds, model);
        const auto tpl = template_for(config, ds, "evaluation", e_template, llm::PromptKind::kEvaluation);
        const llm::CompletionClient client(e_ep.resolve());
        RealismContext rc{ds, model.spec, index, tpl, client, e_refs, 1};
        std::vector<std::size_t> cands(std::min(e_cap, synth.entity_count()));
        for (std::size_t i = 0; i < cands.size(); ++i) cands[i] = i;
        rep.realism = realism_report(rc, synth, cands);
        if (e_baseline) {
          std::vector<std::size_t> hold(model.split.holdout.begin(),
                                        model.split.holdout.begin() +
                                            static_cast<std::ptrdiff_t>(std::min(e_cap, model.split.holdout.size())));
          rep.baseline = realism_report(rc, ds, hold);
        }
      }
      const fs::path prefix = e_out.empty() ? fs::path(e_synth) / "report" : fs::path(e_out);
      write_file(prefix.string() + ".json", rep.to_json(model.spec).dump(2) + "\n");
      write_file(prefix.string() + ".csv", rep.to_csv(model.spec));
      out << "KL score " << fmt(rep.kl.aggregate) << ", chi2 P " << fmt(rep.chi2.aggregate);
      if (rep.realism) out << ", realism " << fmt(rep.realism->mean, "%.2f");
      if (rep.baseline) out << " (baseline " << fmt(rep.baseline->mean, "%.2f") << ")";
      out << "\nreport written to " << prefix.string() << ".json\n";
      return 0;
    }

    if (report->parsed()) {
      const auto j = nlohmann::json::parse(read_file(r_path));
      out << "compared against: " << j.value("against", "all") << "\n";
      out << "KL score (1/(1+KL)): " << fmt(j.at("kl").at("aggregate")) << "\n";
      for (const auto& [cat, v] : j.at("kl").at("per_category").items())
        out << "  " << cat << ": " << fmt(v) << "\n";
      out << "chi2 P (mean): " << fmt(j.at("chi2").at("aggregate")) << "\n";
      for (const auto& [t, v] : j.at("chi2").at("per_table").items())
        out << "  " << t << ": " << fmt(v) << "\n";
      for (const char* key : {"realism", "realism_baseline"}) {
        if (!j.contains(key)) continue;
        const auto& r = j.at(key);
        out << key << ": mean " << fmt(r.at("mean"), "%.2f") << " over " << r.at("scored").get<int>()
            << " entities (" << r.at("skipped").get<int>() << " skipped)\n";
      }
      return 0;
    }

    if (toy->parsed()) {
      const auto ds = generate_toy(to);
      write_toy(ds, t_out);
      out << "wrote " << ds.entity_count() << " persons to " << t_out << "\n";
      return 0;
    }

    if (mock->parsed()) {
      llm::MockEndpoint server(mo, m_port);
      out << "mock endpoint listening on " << server.url() << std::endl;
      server.wait();
      return 0;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(e.kind());
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(ErrorKind::kConfig);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace relsynth
