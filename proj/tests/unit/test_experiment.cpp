#include <filesystem>
#include <fstream>
#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "doctest.h"
#include "json.hpp"

#include "iteach/error.hpp"
#include "iteach/experiment.hpp"

using namespace iteach;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int n = 0;
    path = fs::temp_directory_path() /
           ("iteach-exp-" + std::to_string(::getpid()) + "-" + std::to_string(n++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t line_count(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

// Small enough to run in a couple of seconds.
ExperimentConfig tiny(const fs::path& out) {
  ExperimentConfig c;
  c.tasks = {"reach_target"};
  c.methods = {Method::ITeach};
  c.episodes = {5};
  c.seeds = {1, 2};
  c.trainer.eval_episodes = 5;
  c.trainer.warm_start_demos = 3;
  c.trainer.warm_start_epochs = 2;
  c.output_dir = out.string();
  return c;
}

RunRecord row(const std::string& task, Method m, std::size_t episodes, std::uint64_t seed, double s,
              const std::string& hash) {
  RunRecord r;
  r.task = task;
  r.method = m;
  r.episodes = episodes;
  r.seed = seed;
  r.success_rate = s;
  r.correction_rate = 0.25;
  r.config_hash = hash;
  return r;
}

}  // namespace

TEST_SUITE("experiment") {
  TEST_CASE("config json defaults and round trip") {
    const ExperimentConfig d = experiment_config_from_json("{}");
    CHECK(experiment_config_to_json(d) == experiment_config_to_json(ExperimentConfig{}));
    ExperimentConfig c;
    c.tasks = {"pick_lift", "push_button"};
    c.methods = {Method::BC, Method::ITeach};
    c.betas = {0, 45};
    c.feedback_modes = {FeedbackMode::CorrectiveOnly};
    c.warm_start = {false};
    c.trainer.feedback.beta_deg = 33;
    c.llm.model = "m";
    const std::string text = experiment_config_to_json(c);
    CHECK(experiment_config_to_json(experiment_config_from_json(text)) == text);

    const TrainerConfig t = trainer_config_from_json(R"({"feedback": {"beta_deg": 10}})");
    CHECK(t.feedback.beta_deg == 10.0);
    CHECK(t.batch_size == TrainerConfig{}.batch_size);
  }

  TEST_CASE("unknown keys and bad values are rejected with a path") {
    try {
      experiment_config_from_json(R"({"trainer": {"feedback": {"betta": 3}}})");
      FAIL("expected a parse error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("betta") != std::string::npos);
    }
    CHECK_THROWS_AS(experiment_config_from_json(R"({"methods": ["dagger"]})"), Error);
    CHECK_THROWS_AS(experiment_config_from_json(R"({"tasks": ["no_such_task"]})"), Error);
    CHECK_THROWS_AS(experiment_config_from_json(R"({"seeds": "1"})"), Error);
    CHECK_THROWS_AS(experiment_config_from_json("{"), Error);
  }

  TEST_CASE("grid expansion collapses axes that do not apply") {
    ExperimentConfig c;
    c.tasks = {"reach_target"};
    c.methods = {Method::BC, Method::ITeach, Method::TeacherDirect};
    c.episodes = {10, 20};
    c.betas = {10, 20, 30};
    c.seeds = {1, 2};
    auto cells = expand_grid(c);
    for (auto& cell : cells) cell.config_hash = cell_config_hash(cell, "prog");
    std::size_t bc = 0, it = 0, td = 0;
    for (const auto& cell : cells) {
      bc += cell.method == Method::BC;
      it += cell.method == Method::ITeach;
      td += cell.method == Method::TeacherDirect;
    }
    CHECK(bc == 2 * 2);       // episodes x seeds, beta ignored
    CHECK(it == 2 * 3 * 2);   // episodes x betas x seeds
    CHECK(td == 2);           // seeds only
    std::set<std::string> stems;
    for (const auto& cell : cells) stems.insert(cell.file_stem());
    CHECK(stems.size() == cells.size());
    // Same hash across seeds of a cell, different across betas.
    std::map<std::string, std::set<std::uint64_t>> by_hash;
    for (const auto& cell : cells) by_hash[cell.config_hash].insert(cell.seed);
    for (const auto& [h, s] : by_hash) CHECK(s.size() == 2);
    CHECK(expand_grid(c).size() == cells.size());
  }

  TEST_CASE("results csv round trip and schema errors") {
    std::vector<RunRecord> rows{row("reach_target", Method::BC, 10, 1, 0.5, "aa"),
                                row("pick_lift", Method::ITeach, 20, 7, 0.125, "bb")};
    rows[1].feedback_mode = FeedbackMode::EvaluativeOnly;
    rows[1].warm_start = false;
    rows[1].beta_deg = 45;
    const std::string csv = results_csv(rows);
    CHECK(csv.rfind(std::string(kResultsCsvHeader) + "\n", 0) == 0);
    const auto back = parse_results_csv(csv, "x.csv");
    REQUIRE(back.size() == 2);
    CHECK(results_csv(back) == csv);
    CHECK(back[1].beta_deg == 45.0);
    CHECK(back[1].feedback_mode == FeedbackMode::EvaluativeOnly);

    try {
      parse_results_csv("task,method\nreach_target,bc\n", "broken.csv");
      FAIL("expected a schema error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::Schema);
      CHECK(std::string(e.what()).find("broken.csv") != std::string::npos);
    }
  }

  TEST_CASE("grid run writes summaries and resumes") {
    TempDir dir;
    const ExperimentConfig c = tiny(dir.path);
    std::size_t done = 0;
    GridHooks hooks;
    hooks.on_cell_done = [&](const RunCell&, bool) { ++done; };
    const GridResult r = run_grid(c, hooks);
    CHECK(r.failures.empty());
    CHECK(r.executed == 2);
    CHECK(r.skipped == 0);
    CHECK(done == 2);
    CHECK(r.records.size() == 2);
    const std::string csv = slurp(r.csv_path);
    CHECK(line_count(csv) == 3);

    std::size_t summaries = 0;
    for (const auto& f : fs::directory_iterator(dir.path / "runs")) {
      const std::string name = f.path().filename().string();
      if (!name.ends_with(".json") || name.ends_with(".timing.json")) continue;
      ++summaries;
      const auto j = nlohmann::json::parse(slurp(f.path()));
      CHECK(j.contains("metrics"));
      CHECK(j["metrics"]["episodes"].size() == 5);
    }
    CHECK(summaries == 2);

    // Remove one summary: only that cell runs again, output is identical.
    fs::path first;
    for (const auto& f : fs::directory_iterator(dir.path / "runs"))
      if (f.path().filename().string().ends_with("__s1.json")) first = f.path();
    REQUIRE_FALSE(first.empty());
    const std::string before = slurp(first);
    fs::remove(first);
    const GridResult again = run_grid(c);
    CHECK(again.executed == 1);
    CHECK(again.skipped == 1);
    CHECK(slurp(first) == before);
    CHECK(slurp(again.csv_path) == csv);
  }

  TEST_CASE("failing cell is recorded and the rest completes") {
    TempDir dir;
    ExperimentConfig c = tiny(dir.path);
    c.methods = {Method::WarmStartOnly, Method::TeacherDirect};
    c.seeds = {1};
    c.trainer.max_episode_steps = 1;  // no demonstration can succeed
    c.trainer.warm_start_max_attempts = 3;
    const GridResult r = run_grid(c);
    REQUIRE(r.failures.size() == 1);
    CHECK(r.failures[0].cell.find("warm-start-only") != std::string::npos);
    CHECK(r.records.size() == 1);
    CHECK(r.records[0].method == Method::TeacherDirect);
    bool error_file = false;
    for (const auto& f : fs::directory_iterator(dir.path / "runs"))
      error_file |= f.path().string().ends_with(".error.txt");
    CHECK(error_file);
  }

  TEST_CASE("report aggregates, dedupes and is reproducible") {
    TempDir dir;
    std::vector<RunRecord> rows;
    for (std::size_t ep : {10, 20, 40, 80})
      for (std::uint64_t s = 1; s <= 3; ++s) {
        rows.push_back(row("reach_target", Method::BC, ep, s, 0.1 * s, "bc" + std::to_string(ep)));
        rows.push_back(row("reach_target", Method::ITeach, ep, s, 0.2 * s, "it" + std::to_string(ep)));
      }
    const fs::path a = dir.path / "a.csv", b = dir.path / "b.csv";
    std::ofstream(a) << results_csv(rows);
    std::ofstream(b) << results_csv({rows[0], rows[1]});  // duplicates of rows in a
    const ReportFiles files = write_report({a.string(), b.string()}, (dir.path / "out").string());
    CHECK(files.written.size() == 5);

    const std::string table = slurp(dir.path / "out" / "report_table.csv");
    CHECK(line_count(table) == 1 + 2 * 4);
    // Oracle for one group: BC at 10 episodes, seeds 1..3.
    const double m = (0.1 + 0.2 + 0.3) / 3.0;
    const double sd = std::sqrt(((0.1 - m) * (0.1 - m) + (0.2 - m) * (0.2 - m) + (0.3 - m) * (0.3 - m)) / 2.0);
    char expect[128];
    std::snprintf(expect, sizeof expect, "reach_target,bc,10,3,%.4f,%.4f,0.2500,", m, sd);
    CHECK(table.find(expect) != std::string::npos);

    const std::string plot = slurp(dir.path / "out" / "plot_success_vs_episodes.csv");
    CHECK(line_count(plot) == 1 + 2 * 2 * 4);  // per task plus "all"

    const std::string txt = slurp(dir.path / "out" / "report_table.txt");
    write_report({a.string(), b.string()}, (dir.path / "out").string());
    CHECK(slurp(dir.path / "out" / "report_table.txt") == txt);
    CHECK(slurp(dir.path / "out" / "report_table.csv") == table);
  }

  TEST_CASE("report on empty input writes nothing") {
    TempDir dir;
    const fs::path empty = dir.path / "empty.csv";
    std::ofstream(empty) << kResultsCsvHeader << "\n";
    CHECK_THROWS_AS(write_report({empty.string()}, (dir.path / "out").string()), Error);
    CHECK_FALSE(fs::exists(dir.path / "out"));
    CHECK_THROWS_AS(write_report({}, (dir.path / "out").string()), Error);
  }
}
