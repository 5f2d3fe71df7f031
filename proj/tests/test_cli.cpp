#include <cstdlib>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "forge/corpus.hpp"
#include "forge/curriculum.hpp"
#include "forge/evaluate.hpp"
#include "mock_server.hpp"

using forgetest::MockServer;
using forgetest::TempDir;

namespace {

struct CmdResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Run the forge binary through the shell with a controlled environment.
CmdResult run_forge(const std::string& args, const TempDir& dir,
                    const std::string& env_prefix = "") {
  std::string out_file = (dir / "cmd_stdout.txt").string();
  std::string err_file = (dir / "cmd_stderr.txt").string();
  std::string cmd = "env -u FORGE_API_BASE -u FORGE_SCORER_BASE -u FORGE_EMBED_BASE " +
                    env_prefix + " " + std::string(FORGE_BIN) + " " + args + " > " + out_file +
                    " 2> " + err_file;
  int status = std::system(cmd.c_str());
  CmdResult result;
  result.exit_code = WEXITSTATUS(status);
  result.out = slurp_file(out_file);
  result.err = slurp_file(err_file);
  return result;
}

}  // namespace

TEST_CASE("cli: ingest a TSV and reingest byte-identically") {
  TempDir dir("cli");
  {
    std::ofstream tsv(dir / "in.tsv", std::ios::binary);
    tsv << "مرحبا\tHello\nكيفك\tHow are you\n";
  }
  std::string out = (dir / "out.jsonl").string();
  CmdResult r = run_forge("ingest --format tsv --origin MADAR " + (dir / "in.tsv").string() +
                              " -o " + out,
                          dir);
  CHECK(r.exit_code == 0);
  forge::Corpus corpus = forge::read_corpus_jsonl(out);
  REQUIRE(corpus.pairs.size() == 2);
  CHECK(corpus.pairs[0].id == "MADAR-000001");
  CHECK(std::filesystem::exists(dir / "out.jsonl.config.json"));

  std::string first = slurp_file(out);
  CmdResult again = run_forge("ingest --format tsv --origin MADAR " +
                                  (dir / "in.tsv").string() + " -o " + out,
                              dir);
  CHECK(again.exit_code == 0);
  CHECK(slurp_file(out) == first);
}

TEST_CASE("cli: unknown subcommand exits 2, module errors exit 1") {
  TempDir dir("cli");
  CHECK(run_forge("frobnicate", dir).exit_code == 2);

  CmdResult missing =
      run_forge("ingest --format tsv --origin OTHER /nonexistent.tsv -o " +
                    (dir / "x.jsonl").string(),
                dir);
  CHECK(missing.exit_code == 1);
  CHECK(missing.err.find("IoError") != std::string::npos);

  // empty input file: EmptyFile category on stderr
  { std::ofstream empty(dir / "empty.tsv"); }
  CmdResult empty_run = run_forge("ingest --format tsv --origin OTHER " +
                                      (dir / "empty.tsv").string() + " -o " +
                                      (dir / "y.jsonl").string(),
                                  dir);
  CHECK(empty_run.exit_code == 1);
  CHECK(empty_run.err.find("EmptyFile") != std::string::npos);
}

TEST_CASE("cli: evaluate without endpoints reports ConfigMissing") {
  TempDir dir("cli");
  forgetest::write_test_set_jsonl(dir / "test.jsonl", 3, 90);
  CmdResult r = run_forge("evaluate --test-set " + (dir / "test.jsonl").string() +
                              " --out " + (dir / "run.json").string(),
                          dir);
  CHECK(r.exit_code == 1);
  CHECK(r.err.find("ConfigMissing") != std::string::npos);
}

TEST_CASE("cli: transliterate maps stdin to stdout") {
  TempDir dir("cli");
  {
    std::ofstream in(dir / "in.txt", std::ios::binary);
    in << "kifak?\nmar7aba\n";
  }
  CmdResult r = run_forge("transliterate -i " + (dir / "in.txt").string(), dir);
  CHECK(r.exit_code == 0);
  CHECK(r.out == "كيفك؟\nمرحبا\n");

  // explicit rule file gives the same result as the built-in table
  CmdResult with_rules = run_forge(
      "transliterate --rules " + std::string(FORGE_RULES_FILE) + " -i " +
          (dir / "in.txt").string(),
      dir);
  CHECK(with_rules.out == r.out);
}

TEST_CASE("cli: build-instructions renders a corpus") {
  TempDir dir("cli");
  forge::Corpus corpus = forgetest::make_corpus(5, 91, forge::Origin::LW, "lw");
  forge::write_corpus_jsonl(corpus, dir / "c.jsonl");
  CmdResult r = run_forge("build-instructions --kind mt --corpus " +
                              (dir / "c.jsonl").string() + " -o " + (dir / "mt.jsonl").string(),
                          dir);
  CHECK(r.exit_code == 0);
  std::ifstream in(dir / "mt.jsonl");
  std::string line;
  size_t rows = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 5);

  // contrastive without --rejected is a config error
  CmdResult bad = run_forge("build-instructions --kind contrastive --corpus " +
                                (dir / "c.jsonl").string() + " -o " +
                                (dir / "cont.jsonl").string(),
                            dir);
  CHECK(bad.exit_code == 1);
  CHECK(bad.err.find("ConfigMissing") != std::string::npos);
}

TEST_CASE("cli: gen-rejected, plan-curriculum, export-cpo against the mock") {
  MockServer server;
  TempDir dir("cli");
  std::string env = "FORGE_API_BASE=" + server.base_url();

  forge::Corpus corpus = forgetest::make_corpus(12, 92, forge::Origin::LW, "lw");
  forge::write_corpus_jsonl(corpus, dir / "lw.jsonl");

  CmdResult rej = run_forge("gen-rejected --corpus " + (dir / "lw.jsonl").string() + " -o " +
                                (dir / "rej.jsonl").string() + " --retry-base-ms 2",
                            dir, env);
  CHECK(rej.exit_code == 0);
  forge::RejectedMap map = forge::read_rejected_map(dir / "rej.jsonl");
  CHECK(map.size() == 12);

  CmdResult plan = run_forge("plan-curriculum --config CONT+MT --data LW --corpus " +
                                 (dir / "lw.jsonl").string() + " --rejected " +
                                 (dir / "rej.jsonl").string() + " --seed 42 --out " +
                                 (dir / "plan").string(),
                             dir);
  CHECK(plan.exit_code == 0);
  forge::CurriculumPlan loaded = forge::read_plan_json(dir / "plan" / "plan.json");
  REQUIRE(loaded.stages.size() == 2);
  CHECK(loaded.stages[0].kind == forge::InstructionKind::Contrastive);
  CHECK(loaded.stages[0].record_count == 6);
  CHECK(loaded.stages[1].record_count == 6);

  CmdResult cpo = run_forge("export-cpo --corpus " + (dir / "lw.jsonl").string() +
                                " --rejected " + (dir / "rej.jsonl").string() + " -o " +
                                (dir / "pref.jsonl").string(),
                            dir);
  CHECK(cpo.exit_code == 0);
  std::ifstream pref(dir / "pref.jsonl");
  std::string line;
  size_t rows = 0;
  while (std::getline(pref, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 12);
}

TEST_CASE("cli: select-demos and build-prompts work offline") {
  TempDir dir("cli");
  forge::Corpus pool = forgetest::make_corpus(15, 95, forge::Origin::LW, "pool");
  forge::write_corpus_jsonl(pool, dir / "pool.jsonl");

  CmdResult sel = run_forge("select-demos --pool " + (dir / "pool.jsonl").string() +
                                " --strategy random --k 3 --seed 11 -o " +
                                (dir / "demos.jsonl").string(),
                            dir);
  CHECK(sel.exit_code == 0);
  forge::Corpus demos = forge::read_corpus_jsonl(dir / "demos.jsonl");
  CHECK(demos.pairs.size() == 3);

  // frequency strategy with a matrix built from the pool itself
  CmdResult fm = run_forge("build-freq-matrix " + (dir / "pool.jsonl").string() + " -o " +
                               (dir / "fm.json").string(),
                           dir);
  CHECK(fm.exit_code == 0);
  CmdResult frq = run_forge("select-demos --pool " + (dir / "pool.jsonl").string() +
                                " --strategy frequency --k 2 --input \"" +
                                pool.pairs[0].source_leb + "\" --freq " +
                                (dir / "fm.json").string() + " -o " +
                                (dir / "demos2.jsonl").string(),
                            dir);
  CHECK(frq.exit_code == 0);

  // few-shot prompt batch: k defaults to 3, one prompt per test pair
  forgetest::write_test_set_jsonl(dir / "test.jsonl", 4, 96);
  CmdResult bp = run_forge("build-prompts --test-set " + (dir / "test.jsonl").string() +
                               " --mode few_shot --pool " + (dir / "pool.jsonl").string() +
                               " -o " + (dir / "prompts.jsonl").string(),
                           dir);
  CHECK(bp.exit_code == 0);
  std::ifstream in(dir / "prompts.jsonl");
  std::string line;
  size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto obj = nlohmann::json::parse(line);
    CHECK(obj.at("k").get<int>() == 3);
    CHECK(obj.at("mode").get<std::string>() == "few_shot");
    std::string prompt = obj.at("prompt").get<std::string>();
    size_t inputs = 0;
    for (size_t at = prompt.find("### Input:"); at != std::string::npos;
         at = prompt.find("### Input:", at + 1))
      ++inputs;
    CHECK(inputs == 4);  // 3 demos + open block
    ++rows;
  }
  CHECK(rows == 4);
}

TEST_CASE("cli: synth-grammar builds an LGID corpus from a chapter") {
  MockServer server;
  server.chat_mode = MockServer::ChatMode::Fixed;
  server.fixed_reply =
      "LEB: رح روح\nEN: I will go\nRULE: rah marks the future\n\n"
      "LEB: عم بيشرب\nEN: he is drinking\nRULE: am marks the progressive\n";
  TempDir dir("cli");
  {
    std::ofstream chapter(dir / "ch01.txt", std::ios::binary);
    chapter << "A short chapter paragraph about the future tense.\n";
  }
  CmdResult r = run_forge("synth-grammar --chapter " + (dir / "ch01.txt").string() +
                              " --index 3 -o " + (dir / "lgid.jsonl").string() +
                              " --retry-base-ms 2",
                          dir, "FORGE_API_BASE=" + server.base_url());
  CHECK(r.exit_code == 0);
  forge::Corpus lgid = forge::read_corpus_jsonl(dir / "lgid.jsonl");
  REQUIRE(lgid.pairs.size() == 2);
  CHECK(lgid.pairs[0].origin == forge::Origin::LGID);
  REQUIRE(lgid.pairs[0].hint.has_value());
  CHECK(*lgid.pairs[0].hint == "rah marks the future");
  CHECK(lgid.pairs[0].id.rfind("LGID-ch03-", 0) == 0);
}

TEST_CASE("cli: evaluate and report reproduce fixture cells") {
  MockServer server;
  TempDir dir("cli");
  std::string env = "FORGE_API_BASE=" + server.base_url() +
                    " FORGE_SCORER_BASE=" + server.base_url();

  forgetest::write_test_set_jsonl(dir / "test.jsonl", 10, 93);
  forge::Corpus pool = forgetest::make_corpus(20, 94, forge::Origin::LW, "pool");
  forge::write_corpus_jsonl(pool, dir / "pool.jsonl");

  CmdResult r = run_forge("evaluate --test-set " + (dir / "test.jsonl").string() +
                              " --mode few_shot --k 3 --pool " + (dir / "pool.jsonl").string() +
                              " --system Vanilla --retry-base-ms 2 -o " +
                              (dir / "run.json").string(),
                          dir, env);
  CHECK(r.exit_code == 0);
  forge::EvalRun run = forge::read_eval_run(dir / "run.json");
  CHECK(run.scored.size() == 10);
  CHECK(run.mean_score() == doctest::Approx(85.5).epsilon(1e-12));  // fixed mock score

  CmdResult rep = run_forge("report --runs " + (dir / "run.json").string() + " --out " +
                                (dir / "table.txt").string() + " --csv " +
                                (dir / "table.csv").string(),
                            dir);
  CHECK(rep.exit_code == 0);
  std::string table = slurp_file(dir / "table.txt");
  CHECK(table.find("*85.5*") != std::string::npos);
  CHECK(slurp_file(dir / "table.csv").find("Vanilla,custom,3-shot,85.5,10,1") !=
        std::string::npos);
}
