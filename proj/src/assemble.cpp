#include "relsynth/assemble.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <map>

#include "relsynth/error.hpp"
#include "relsynth/parallel.hpp"
#include "relsynth/random.hpp"

namespace relsynth {

using nlohmann::json;

json SampleRecord::to_json() const {
  json cond = json::array();
  for (const auto& [name, value] : conditioning) cond.push_back({{"name", name}, {"value", value}});
  return {{"sample", sample},
          {"status", ok ? "ok" : "failed"},
          {"conditioning", std::move(cond)},
          {"references", references},
          {"attempts", attempts},
          {"tokens", {{"prompt", usage.prompt}, {"completion", usage.completion}}},
          {"wall_ms", wall_ms},
          {"clamped", clamped},
          {"error", error},
          {"response", response}};
}

SampleRecord SampleRecord::from_json(const json& j) {
  SampleRecord r;
  r.sample = j.at("sample").get<std::size_t>();
  r.ok = j.at("status").get<std::string>() == "ok";
  for (const auto& c : j.at("conditioning")) r.conditioning.emplace_back(c.at("name"), c.at("value"));
  r.references = j.at("references").get<std::vector<std::string>>();
  r.attempts = j.at("attempts").get<std::size_t>();
  r.usage.prompt = j.at("tokens").at("prompt").get<std::size_t>();
  r.usage.completion = j.at("tokens").at("completion").get<std::size_t>();
  r.wall_ms = j.value("wall_ms", 0.0);
  r.clamped = j.value("clamped", std::size_t{0});
  r.error = j.value("error", "");
  r.response = j.at("response").get<std::string>();
  return r;
}

std::vector<SampleRecord> read_synthesis_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open synthesis log " + path.string());
  std::vector<SampleRecord> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      out.push_back(SampleRecord::from_json(json::parse(line)));
    } catch (const json::exception& e) {
      // A torn final line is what a kill mid-write leaves behind.
      if (in.peek() == std::char_traits<char>::eof()) break;
      throw DataError("synthesis log line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

namespace {

struct Generator {
  const SynthesisContext& ctx;
  const SynthesisOptions& opt;
  llm::ojson schema;
  std::uint64_t sampling_seed;

  SampleRecord run(std::size_t i) const {
    const auto start = std::chrono::steady_clock::now();
    SampleRecord rec;
    rec.sample = i;
    const AnalyticsRow row = ctx.net.sample_row(sampling_seed, i);
    const auto& layout = ctx.index.train();
    rec.conditioning = llm::conditioning_lines(row, layout, ctx.spec, ctx.source.schema().main_table);

    std::vector<std::size_t> refs;
    if (opt.references > 0) refs = ctx.index.top_n_similar(row, opt.references);
    std::vector<std::string> docs;
    docs.reserve(refs.size());
    for (std::size_t e : refs) docs.push_back(llm::entity_to_json(ctx.source, e, ctx.spec).dump());

    std::string prompt = llm::render_synthesis(ctx.prompt, docs, rec.conditioning);
    // Least similar references go first when the prompt is over budget.
    while (llm::estimate_tokens(prompt) > ctx.client.config().context_tokens && !docs.empty()) {
      docs.pop_back();
      refs.pop_back();
      prompt = llm::render_synthesis(ctx.prompt, docs, rec.conditioning);
    }
    for (std::size_t e : refs) rec.references.push_back(ctx.source.entity_key(e));
    auto finish = [&] {
      rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      return rec;
    };
    if (llm::estimate_tokens(prompt) > ctx.client.config().context_tokens) {
      rec.error = "prompt exceeds the context budget";
      return finish();
    }

    llm::CompletionRequest req;
    req.messages = {{"user", prompt}};
    req.schema = schema;
    req.schema_name = "entity";
    for (std::size_t attempt = 0; attempt <= opt.regenerations; ++attempt) {
      ++rec.attempts;
      req.seed = derive_seed(sampling_seed, i * 64 + attempt) >> 1;
      try {
        const auto resp = ctx.client.complete(req);
        rec.usage.prompt += resp.usage.prompt;
        rec.usage.completion += resp.usage.completion;
        rec.response = resp.text;
        llm::KeyMinter scratch;
        rec.clamped = llm::parse_sample(resp.text, ctx.source.schema(), ctx.spec, scratch).clamped;
        rec.ok = true;
        rec.error.clear();
        break;
      } catch (const SchemaViolation& e) {
        rec.error = e.what();
      } catch (const StructuredOutputError& e) {
        rec.error = e.what();
        rec.response.clear();
      } catch (const TokenLimitError& e) {
        rec.error = e.what();
      }
    }
    return finish();
  }
};

RelationalDataset assemble_dataset(const DatasetSchema& schema, const DiscretizationSpec& spec,
                                   const std::map<std::size_t, SampleRecord>& records) {
  llm::DatasetBuilder builder(schema);
  llm::KeyMinter keys;
  for (const auto& [i, rec] : records)
    if (rec.ok) builder.add(llm::parse_sample(rec.response, schema, spec, keys));
  return builder.build();
}

void write_outputs(const RelationalDataset& ds, const std::filesystem::path& dir) {
  if (!dir.empty()) save_dataset(ds, dir);
}

}  // namespace

SynthesisResult synthesize(const SynthesisContext& ctx, const SynthesisOptions& opt) {
  if (opt.samples < 1) throw ConfigError("number of samples must be at least 1");
  if (opt.references > ctx.index.size())
    throw ConfigError("n = " + std::to_string(opt.references) + " exceeds the " + std::to_string(ctx.index.size()) +
                      " training entities");
  if (!ctx.net.spec_hash.empty() && ctx.net.spec_hash != ctx.spec.hash())
    throw ConfigError("network was fitted against a different discretization");
  if (opt.checkpoint_every == 0) throw ConfigError("checkpoint interval must be positive");

  DatasetSchema out_schema = ctx.source.schema();
  out_schema.templates.clear();
  for (auto& t : out_schema.tables) t.csv_path = t.name + ".csv";

  Generator gen{ctx, opt, llm::compile_schema(out_schema, ctx.spec).document, derive_seed(opt.seed, "sampling")};

  std::map<std::size_t, SampleRecord> records;
  const auto log_path = opt.out_dir.empty() ? std::filesystem::path() : opt.out_dir / kSynthesisLogName;
  if (!log_path.empty()) std::filesystem::create_directories(opt.out_dir);
  if (opt.resume && !log_path.empty() && std::filesystem::exists(log_path)) {
    for (auto& r : read_synthesis_log(log_path))
      if (r.sample < opt.samples) records[r.sample] = std::move(r);
    // Rewrite so a torn tail line is dropped.
    std::ofstream out(log_path, std::ios::trunc);
    for (const auto& [i, r] : records) out << r.to_json().dump() << '\n';
  } else if (!log_path.empty()) {
    std::ofstream(log_path, std::ios::trunc);
  }

  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < opt.samples; ++i)
    if (!records.count(i)) pending.push_back(i);
  bool complete = true;
  if (opt.stop_after) {
    const std::size_t budget = *opt.stop_after > records.size() ? *opt.stop_after - records.size() : 0;
    if (budget < pending.size()) {
      pending.resize(budget);
      complete = false;
    }
  }

  std::ofstream log;
  if (!log_path.empty()) log.open(log_path, std::ios::app);
  const std::size_t chunk = std::max<std::size_t>(ctx.client.config().max_concurrency, 1);
  std::size_t since_checkpoint = 0;
  for (std::size_t begin = 0; begin < pending.size(); begin += chunk) {
    const std::size_t len = std::min(chunk, pending.size() - begin);
    std::vector<SampleRecord> done(len);
    auto errors = run_bounded(len, chunk, [&](std::size_t k) { done[k] = gen.run(pending[begin + k]); });
    std::exception_ptr abort;
    for (std::size_t k = 0; k < len; ++k) {
      if (errors[k]) {
        if (!abort) abort = errors[k];
        continue;
      }
      if (log.is_open()) log << done[k].to_json().dump() << '\n';
      records[done[k].sample] = std::move(done[k]);
      ++since_checkpoint;
    }
    if (log.is_open()) log.flush();
    if (abort) {
      write_outputs(assemble_dataset(out_schema, ctx.spec, records), opt.out_dir);
      std::rethrow_exception(abort);
    }
    if (since_checkpoint >= opt.checkpoint_every) {
      write_outputs(assemble_dataset(out_schema, ctx.spec, records), opt.out_dir);
      since_checkpoint = 0;
    }
  }

  SynthesisResult result{assemble_dataset(out_schema, ctx.spec, records), {}, 0, complete};
  for (auto& [i, r] : records) {
    if (!r.ok) ++result.failed;
    result.log.push_back(std::move(r));
  }
  write_outputs(result.dataset, opt.out_dir);
  return result;
}

}  // namespace relsynth
