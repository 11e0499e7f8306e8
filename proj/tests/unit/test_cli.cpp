#include <doctest.h>

#ifdef RELSYNTH_HAVE_CLI

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "relsynth/assemble.hpp"
#include "relsynth/cli.hpp"
#include "relsynth/error.hpp"
#include "relsynth/llm/mock_endpoint.hpp"
#include "relsynth/model.hpp"
#include "relsynth/toy.hpp"
#include "support/builders.hpp"

using namespace relsynth;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "relsynth");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Toy data plus a fitted model, shared by the tests below.
const fs::path& toy_model() {
  static const fs::path dir = [] {
    const auto d = testing::scratch("cli");
    REQUIRE(cli({"generate-toy", "--out", (d / "toy").string(), "--entities", "300", "--seed", "3"}).code == 0);
    const auto fit = cli({"fit", "--config", (d / "toy" / "config.json").string(), "--model-dir",
                          (d / "model").string(), "--seed", "4"});
    REQUIRE_MESSAGE(fit.code == 0, fit.err);
    return d;
  }();
  return dir;
}

}  // namespace

TEST_CASE("cli: fit writes a model whose noise account sums to epsilon, deterministically") {
  const auto& d = toy_model();
  const auto account = nlohmann::json::parse(slurp(d / "model" / "noise_account.json"));
  CHECK(account["total"].get<double>() == 2.0);
  for (const char* f : {"manifest.json", "discretization.json", "network.json", "histograms.json", "split.json",
                        "analytics_summary.json"})
    CHECK(fs::exists(d / "model" / f));

  const auto again = d / "model_again";
  REQUIRE(cli({"fit", "--config", (d / "toy" / "config.json").string(), "--model-dir", again.string(), "--seed", "4"})
              .code == 0);
  for (const char* f : {"discretization.json", "network.json", "histograms.json", "noise_account.json", "split.json"})
    CHECK(slurp(again / f) == slurp(d / "model" / f));
}

TEST_CASE("cli: usage and configuration errors exit with 2") {
  CHECK(cli({}).code == 2);
  CHECK(cli({"fit", "--model-dir", "/tmp/x"}).code == 2);
  CHECK(cli({"fit", "--config", "/nonexistent/config.json", "--model-dir", "/tmp/relsynth_unit_nomodel"}).code == 2);
  CHECK(cli({"evaluate", "--model-dir", toy_model().string() + "/model", "--synthetic", "/tmp", "--against", "bogus"})
            .code == 2);
}

TEST_CASE("cli: invalid data exits with 4") {
  const auto d = testing::scratch("cli_bad_data");
  fs::copy(toy_model() / "toy", d, fs::copy_options::recursive);
  std::ofstream(d / "admission.csv", std::ios::app) << "99999,424242,2150-01-01 1:00,elective,1.0\n";
  const auto r = cli({"fit", "--config", (d / "config.json").string(), "--model-dir", (d / "model").string()});
  CHECK(r.code == 4);
  CHECK(r.err.find("dangling") != std::string::npos);
}

TEST_CASE("cli: sample, kill, resume") {
  const auto& d = toy_model();
  llm::MockEndpoint mock;
  const auto out = d / "synthetic";
  fs::remove_all(out);
  const std::vector<std::string> base{"sample", "--model-dir", (d / "model").string(), "--out", out.string(), "-m",
                                      "10", "--url", mock.url()};
  auto first = base;
  first.insert(first.end(), {"--stop-after", "6"});
  const auto a = cli(first);
  REQUIRE_MESSAGE(a.code == 0, a.err);
  CHECK(mock.entity_requests() == 6);
  auto resume = base;
  resume.push_back("--resume");
  const auto b = cli(resume);
  REQUIRE_MESSAGE(b.code == 0, b.err);
  CHECK(mock.entity_requests() == 10);
  CHECK(load_dataset(out / "config.json").entity_count() == 10);
  CHECK(read_synthesis_log(out / kSynthesisLogName).size() == 10);
}

TEST_CASE("cli: endpoint failures exit with 3 and keep partial output") {
  const auto& d = toy_model();
  llm::MockOptions mo;
  mo.fail_after = 2;
  llm::MockEndpoint mock(mo);
  const auto out = d / "synthetic_partial";
  fs::remove_all(out);
  const auto r = cli({"sample", "--model-dir", (d / "model").string(), "--out", out.string(), "-m", "10", "--url",
                      mock.url(), "--concurrency", "1"});
  CHECK(r.code == 3);
  CHECK(load_dataset(out / "config.json").entity_count() == 2);

  int port = 0;
  {
    llm::MockEndpoint probe;
    port = probe.port();
  }
  const auto down = cli({"sample", "--model-dir", (d / "model").string(), "--out", (d / "synthetic_down").string(),
                         "-m", "2", "--url", "http://127.0.0.1:" + std::to_string(port) + "/v1"});
  CHECK(down.code == 3);
}

TEST_CASE("cli: evaluating a copy of the original scores one") {
  const auto& d = toy_model();
  const auto rep = d / "copy_report";
  const auto r = cli({"evaluate", "--model-dir", (d / "model").string(), "--synthetic", (d / "toy").string(), "--out",
                      rep.string(), "--skip-realism", "--realism-cap", "5"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto j = nlohmann::json::parse(slurp(rep.string() + ".json"));
  CHECK(j["kl"]["aggregate"].get<double>() == 1.0);
  CHECK(j["chi2"]["aggregate"].get<double>() == 1.0);
  CHECK_FALSE(j.contains("realism"));
  CHECK(fs::exists(rep.string() + ".csv"));
  const auto shown = cli({"report", rep.string() + ".json"});
  CHECK(shown.code == 0);
  CHECK(shown.out.find("KL score") != std::string::npos);
}

TEST_CASE("cli: realism with the mock judge is capped and includes the baseline") {
  const auto& d = toy_model();
  llm::MockOptions mo;
  mo.scores = {2, 5};
  llm::MockEndpoint mock(mo);
  const auto rep = d / "realism_report";
  const auto r = cli({"evaluate", "--model-dir", (d / "model").string(), "--synthetic", (d / "toy").string(), "--out",
                      rep.string(), "--realism-cap", "5", "--baseline", "--url", mock.url()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(mock.score_requests() <= 10);
  const auto j = nlohmann::json::parse(slurp(rep.string() + ".json"));
  REQUIRE(j.contains("realism"));
  REQUIRE(j.contains("realism_baseline"));
  CHECK(j["realism"]["scored"].get<int>() <= 5);
  CHECK(j["realism_baseline"]["scored"].get<int>() <= 5);
  CHECK(j["realism"]["histogram"].size() == 5);
  CHECK(j["realism_baseline"]["histogram"].size() == 5);
}

TEST_CASE("model: artifacts round-trip and a mismatched discretization is refused") {
  const auto& d = toy_model();
  const auto model = load_model(d / "model");
  CHECK(model.net.spec_hash == model.spec.hash());
  CHECK(model.split.train.size() + model.split.holdout.size() == 300);
  CHECK(model.split.holdout.size() == 60);

  const auto broken = testing::scratch("cli_broken_model");
  fs::copy(d / "model", broken, fs::copy_options::recursive);
  auto spec = nlohmann::json::parse(slurp(broken / "discretization.json"));
  spec["features"][0]["labels"][0] = "tampered";
  std::ofstream(broken / "discretization.json") << spec.dump();
  CHECK_THROWS_AS(load_model(broken), ConfigError);
}

#endif
