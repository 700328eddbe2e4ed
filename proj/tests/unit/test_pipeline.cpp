#include <doctest.h>
#include <fmt/format.h>
#include <sys/wait.h>

#include <atomic>
#include <cstdlib>

#include "criteria.hpp"
#include "fixtures.hpp"
#include "vrh/common.hpp"
#include "vrh/pipeline.hpp"
#include "vrh/report.hpp"

using namespace vrh;

namespace {

int run_cli(const std::string& args) {
  const int status = std::system(fmt::format("{} {} >/dev/null 2>&1", VRH_BINARY, args).c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::filesystem::path write_config(const std::filesystem::path& dir, const ExperimentConfig& c) {
  const auto path = dir / "cfg.json";
  atomic_write(path, c.to_json().dump(2));
  return path;
}

}  // namespace

TEST_CASE("parallel_for visits every index once and reports the lowest failure") {
  std::vector<std::atomic<int>> hits(200);
  parallel_for(hits.size(), 4, [&](std::size_t i, int) { ++hits[i]; });
  for (const auto& h : hits) CHECK(h == 1);
  try {
    parallel_for(50, 3, [](std::size_t i, int) {
      if (i == 7 || i == 30) throw DataError(fmt::format("bad {}", i));
    });
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()) == "bad 7");
  }
}

TEST_CASE("axis handling") {
  fixtures::TempDir tmp("axes");
  auto cfg = fixtures::smoke_config(tmp.path());
  RunContext ctx(cfg);
  CHECK_THROWS_AS(run_axis(ctx, "spatial"), ConfigError);
  CHECK(axis_grid(cfg, "discriminability").empty());
  CHECK(axis_grid(cfg, "occlusion").size() == occlusion_grid(cfg.seed).size());
  CHECK(ctx.subset("occlusion").size() == 8);
  CHECK(ctx.dataset_hash().size() == 64);
  CHECK(ctx.dataset_hash() == RunContext(cfg).dataset_hash());
}

TEST_CASE("results do not depend on the worker count") {
  fixtures::TempDir tmp("workers");
  auto one = fixtures::smoke_config(tmp.path());
  auto many = one;
  many.workers = 3;
  many.output_dir = (tmp.path() / "out3").string();
  RunContext c1(one);
  RunContext c3(many);
  run_axis(c1, "occlusion");
  run_axis(c3, "occlusion");
  CHECK(read_file(results_path(one.output_dir, "occlusion")) == read_file(results_path(many.output_dir, "occlusion")));
}

TEST_CASE("end-to-end smoke with a warm rerun") {
  const auto o = criteria::end_to_end_smoke();
  for (const auto& f : o.failures) INFO(f);
  CHECK(o.pass);
}

TEST_CASE("command line exit codes") {
  fixtures::TempDir tmp("cli");
  CHECK(run_cli("--no-such-flag") == 2);
  CHECK(run_cli(fmt::format("-c {} run", (tmp.path() / "missing.json").string())) == 2);
  CHECK(run_cli("--set bogus_key=1 ingest") == 2);

  auto cfg = fixtures::smoke_config(tmp.path());
  auto broken = cfg;
  broken.dataset.manifest = (tmp.path() / "nope.tsv").string();
  CHECK(run_cli(fmt::format("-c {} ingest", write_config(tmp.path(), broken).string())) == 3);

  const auto path = write_config(tmp.path(), cfg);
  CHECK(run_cli(fmt::format("-c {} ingest", path.string())) == 0);
  CHECK(run_cli(fmt::format("-c {} --set 'axes=[\"temporal\"]' run --no-plots", path.string())) == 0);
  const std::filesystem::path out = cfg.output_dir;
  CHECK(std::filesystem::exists(out / "results" / "temporal.jsonl"));
  CHECK(std::filesystem::exists(out / "report" / "f_dscs_triplet.csv"));
  CHECK(std::filesystem::exists(out / "config.resolved.json"));
  CHECK(run_cli(fmt::format("-c {} analyze --encoder toy_mix --versus toy_avg", path.string())) == 3);
  CHECK(run_cli(fmt::format("-c {} --set 'axes=[\"occlusion\"]' evaluate", path.string())) == 0);
  CHECK(run_cli(fmt::format("-c {} analyze --encoder toy_mix --versus toy_avg", path.string())) == 0);
}

TEST_CASE("report tolerates missing axes") {
  fixtures::TempDir tmp("report");
  std::filesystem::create_directories(tmp.path() / "results");
  CHECK_THROWS_AS(write_report(tmp.path() / "results", tmp.path() / "report"), DataError);

  auto cfg = fixtures::smoke_config(tmp.path());
  RunContext ctx(cfg);
  run_axis(ctx, "discriminability");
  const std::filesystem::path out = cfg.output_dir;
  const auto s = write_report(out / "results", out / "report");
  CHECK_FALSE(s.warnings.empty());
  CHECK(std::filesystem::exists(out / "report" / "discriminability_summary.csv"));
  CHECK_FALSE(std::filesystem::exists(out / "report" / "d_wilcoxon.csv"));
}
