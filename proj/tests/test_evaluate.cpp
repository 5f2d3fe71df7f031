#include "forge/evaluate.hpp"

#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "forge/errors.hpp"
#include "forge/text.hpp"
#include "mock_server.hpp"

using namespace forge;
using forgetest::MockServer;
using forgetest::TempDir;

// Pinned from an independent hand computation of the n-gram precision/recall
// formula (whitespace removed, orders 1..6, beta 2), before implementation.
struct ChrfGolden {
  const char* hypothesis;
  const char* reference;
  double expected;
};
static const ChrfGolden kChrfGoldens[] = {
    {"hello there", "hello here", 53.3800289135},
    {"مرحبا كيفك", "مرحبا شو في", 37.3280423280},
    {"the cat sat on the mat", "the cat is on the mat", 64.5779420625},
    {"abc", "abcd", 51.6467065868},
    {"good morning friend", "morning good friend", 63.5729548230},
};

TEST_CASE("compute_chrf identity, disjoint, and pinned values") {
  CHECK(compute_chrf("same text", "same text") == 100.0);
  CHECK(compute_chrf("abcd", "wxyz") == 0.0);
  for (const ChrfGolden& g : kChrfGoldens)
    CHECK(compute_chrf(g.hypothesis, g.reference) ==
          doctest::Approx(g.expected).epsilon(1e-9));
  // whitespace never contributes n-grams
  CHECK(compute_chrf("a b", "ab") == 100.0);
  // asymmetric by construction
  CHECK(compute_chrf("abc", "abcd") != compute_chrf("abcd", "abc"));
  CHECK(compute_chrf("xyz", "xyz") == 100.0);
}

// Brute-force recount with an independently written counter over byte
// windows of the whitespace-stripped codepoint sequence.
TEST_CASE("compute_chrf matches a brute-force n-gram recount") {
  auto oracle = [](const std::string& hyp, const std::string& ref) {
    auto strip = [](const std::string& s) {
      std::u32string out;
      for (char32_t c : forge::decode_utf8(s))
        if (c != U' ' && c != U'\t' && c != U'\n' && c != U'\r' && c != 0x00A0) out += c;
      return out;
    };
    std::u32string h = strip(hyp), r = strip(ref);
    double psum = 0, rsum = 0;
    int orders = 0;
    for (size_t n = 1; n <= 6; ++n) {
      std::map<std::u32string, long> hg, rg;
      for (size_t i = 0; i + n <= h.size(); ++i) ++hg[h.substr(i, n)];
      for (size_t i = 0; i + n <= r.size(); ++i) ++rg[r.substr(i, n)];
      long ht = 0, rt = 0, ov = 0;
      for (auto& [g, c] : hg) ht += c;
      for (auto& [g, c] : rg) rt += c;
      for (auto& [g, c] : hg)
        if (rg.count(g)) ov += std::min(c, rg[g]);
      if (ht == 0 && rt == 0) continue;
      ++orders;
      psum += ht ? double(ov) / ht : 0.0;
      rsum += rt ? double(ov) / rt : 0.0;
    }
    if (!orders) return hyp == ref ? 100.0 : 0.0;
    double p = psum / orders, r2 = rsum / orders;
    double denom = 4 * p + r2;
    return denom == 0 ? 0.0 : 100.0 * 5 * p * r2 / denom;
  };

  std::mt19937_64 rng(404);
  const std::string chars = "abcdefg شحل ";
  for (int i = 0; i < 200; ++i) {
    auto mk = [&] {
      std::string s;
      size_t n = rng() % 12;
      std::vector<std::string> pool = {"a", "b", "c", "ش", "ح", " ", "ab", "شح"};
      for (size_t j = 0; j < n; ++j) s += pool[rng() % pool.size()];
      return s;
    };
    std::string h = mk(), r = mk();
    if (h.empty() || r.empty()) continue;
    CHECK(compute_chrf(h, r) == doctest::Approx(oracle(h, r)).epsilon(1e-12));
  }
}

TEST_CASE("LocalChrfScorer scores identity at 100") {
  LocalChrfScorer scorer;
  std::vector<ScoreItem> items{{"id1", "src", "same", std::string("same")},
                               {"id2", "src", "abcd", std::string("wxyz")}};
  auto scored = scorer.score(items);
  CHECK(scored[0].score == 100.0);
  CHECK(scored[1].score == 0.0);
  std::vector<ScoreItem> no_ref{{"id", "src", "hyp", std::nullopt}};
  CHECK_THROWS_AS(scorer.score(no_ref), ForgeError);
}

static TestSet small_test_set(size_t n, std::uint64_t seed) {
  TestSet set;
  set.name = "custom";
  set.pairs = forgetest::make_corpus(n, seed, Origin::OTHER, "t").pairs;
  set.file_sha = "test";
  return set;
}

TEST_CASE("run_eval produces one score per pair in all three modes") {
  MockServer server;
  ClientOptions options;
  options.base_url = server.base_url();
  options.backoff_base_ms = 2;
  ChatClient chat(options);
  LocalChrfScorer scorer;

  TestSet test_set = small_test_set(10, 71);
  ExamplePool pool = forgetest::make_pool(30, 72);

  EvalBackends backends;
  backends.chat = &chat;
  backends.scorer = &scorer;
  backends.pool = &pool;

  GenerationConfig cfg;
  for (PromptMode mode :
       {PromptMode::zero_shot, PromptMode::few_shot, PromptMode::contrastive_few_shot}) {
    PromptSpec spec;
    spec.mode = mode;
    spec.k = mode == PromptMode::zero_shot ? 0 : 3;
    spec.strategy.seed = 42;
    EvalRun run = run_eval("vanilla", test_set, spec, cfg, backends);
    CHECK(run.scored.size() == 10);
    CHECK(run.failures.empty());
    CHECK(run.mode == mode);
    // deterministic reruns (mock is a pure function of the request)
    EvalRun again = run_eval("vanilla", test_set, spec, cfg, backends);
    REQUIRE(again.scored.size() == run.scored.size());
    for (size_t i = 0; i < run.scored.size(); ++i) {
      CHECK(again.scored[i].id == run.scored[i].id);
      CHECK(again.scored[i].score == run.scored[i].score);
    }
  }
}

TEST_CASE("run_eval zero-shot prompts contain no demonstrations") {
  MockServer server;
  server.chat_mode = MockServer::ChatMode::Echo;  // reply = the prompt itself
  ClientOptions options;
  options.base_url = server.base_url();
  ChatClient chat(options);
  LocalChrfScorer scorer;
  TestSet test_set = small_test_set(2, 73);

  EvalBackends backends;
  backends.chat = &chat;
  backends.scorer = &scorer;

  PromptSpec spec;  // zero-shot
  GenerationConfig cfg;
  cfg.stop_sequences = {"<<no-stop>>"};  // keep the echoed prompt intact
  EvalRun run = run_eval("echo", test_set, spec, cfg, backends);
  REQUIRE(run.scored.size() == 2);
  for (const ScoredSentence& s : run.scored) {
    CHECK(s.hypothesis.find("### Input:") != std::string::npos);
    CHECK(s.hypothesis.find("### Hint:") == std::string::npos);
    // exactly one input block
    CHECK(s.hypothesis.find("### Input:") == s.hypothesis.rfind("### Input:"));
  }
}

TEST_CASE("eval run json round-trips") {
  TempDir dir("run");
  EvalRun run;
  run.system_name = "sys";
  run.test_set_name = "custom";
  run.mode = PromptMode::contrastive_few_shot;
  run.k = 3;
  run.scored = {{"a", "hyp a", 70.0}, {"b", "hyp b", 72.0}};
  run.failures = {{"c", "EndpointUnreachable: boom"}};
  run.config_snapshot["seed"] = "42";
  write_eval_run(run, dir / "run.json");
  EvalRun back = read_eval_run(dir / "run.json");
  CHECK(back.system_name == run.system_name);
  CHECK(back.mode == run.mode);
  CHECK(back.k == 3);
  REQUIRE(back.scored.size() == 2);
  CHECK(back.scored[1].score == 72.0);
  CHECK(back.failures.size() == 1);
  CHECK(back.config_snapshot.at("seed") == "42");
  CHECK(back.mean_score() == doctest::Approx(71.0).epsilon(1e-12));
}

static EvalRun fixture_run(const std::string& system, const std::string& set, PromptMode mode,
                           int k, std::initializer_list<double> scores) {
  EvalRun run;
  run.system_name = system;
  run.test_set_name = set;
  run.mode = mode;
  run.k = k;
  int i = 0;
  for (double s : scores) run.scored.push_back({"id" + std::to_string(i++), "hyp", s});
  return run;
}

TEST_CASE("aggregate_table means, bolding, and rendering") {
  // Cells mirror published numbers: Vanilla FLoRes 0-shot 85.5 and
  // Instruct-Cont-LW LebEval C3-shot 74.4 (column maximum, bolded).
  std::vector<EvalRun> runs;
  runs.push_back(fixture_run("Vanilla", "flores_subset", PromptMode::zero_shot, 0,
                             {85.5, 85.5, 85.5, 85.5}));
  runs.push_back(fixture_run("Instruct-Cont-LW", "flores_subset", PromptMode::zero_shot, 0,
                             {86.8, 86.8, 86.8, 86.8}));
  runs.push_back(fixture_run("Vanilla", "lebeval", PromptMode::contrastive_few_shot, 3,
                             {71.4, 71.4, 71.4, 71.4}));
  runs.push_back(fixture_run("Instruct-Cont-LW", "lebeval", PromptMode::contrastive_few_shot, 3,
                             {74.4, 74.4, 74.4, 74.4}));

  ResultsTable table = aggregate_table(runs);
  REQUIRE(table.systems.size() == 2);
  REQUIRE(table.columns.size() == 2);
  CHECK(table.columns[0] == std::pair<std::string, std::string>{"flores_subset", "0-shot"});
  CHECK(table.columns[1] == std::pair<std::string, std::string>{"lebeval", "C3-shot"});

  CHECK(table.cells[0][0].mean == doctest::Approx(85.5).epsilon(1e-12));
  CHECK(table.cells[1][1].mean == doctest::Approx(74.4).epsilon(1e-12));
  CHECK_FALSE(table.cells[0][0].bold);  // 86.8 beats 85.5 in that column
  CHECK(table.cells[1][0].bold);
  CHECK(table.cells[1][1].bold);  // 74.4 is the LebEval C3-shot maximum
  CHECK_FALSE(table.cells[0][1].bold);

  std::string text = table.render_text();
  CHECK(text.find("*74.4*") != std::string::npos);
  CHECK(text.find("85.5") != std::string::npos);
  std::string csv = table.render_csv();
  CHECK(csv.find("Instruct-Cont-LW,lebeval,C3-shot,74.4,4,1") != std::string::npos);

  // duplicated cell: inconsistent grid
  runs.push_back(fixture_run("Vanilla", "flores_subset", PromptMode::zero_shot, 0, {1.0}));
  CHECK_THROWS_AS(aggregate_table(runs), ForgeError);
}

TEST_CASE("aggregate_table single run and missing cells") {
  std::vector<EvalRun> runs;
  runs.push_back(fixture_run("only", "custom", PromptMode::zero_shot, 0, {70.0, 72.0}));
  ResultsTable table = aggregate_table(runs);
  REQUIRE(table.systems.size() == 1);
  REQUIRE(table.columns.size() == 1);
  CHECK(table.cells[0][0].mean == doctest::Approx(71.0).epsilon(1e-12));
  CHECK(table.cells[0][0].bold);

  // a second system with a different column leaves a missing cell rendered "-"
  runs.push_back(fixture_run("other", "custom", PromptMode::few_shot, 3, {50.0}));
  table = aggregate_table(runs);
  std::string text = table.render_text();
  CHECK(text.find("-") != std::string::npos);
  std::string csv = table.render_csv();
  CHECK(csv.find("only,custom,3-shot") == std::string::npos);  // absent, never zero
}

TEST_CASE("mean aggregation matches a summation oracle to 1e-9") {
  std::mt19937_64 rng(808);
  for (int trial = 0; trial < 50; ++trial) {
    size_t n = 1 + rng() % 400;
    EvalRun run;
    long double oracle_sum = 0.0L;
    for (size_t i = 0; i < n; ++i) {
      double score = static_cast<double>(rng() % 100000) / 1000.0;
      run.scored.push_back({"id", "hyp", score});
      oracle_sum += score;
    }
    double oracle_mean = static_cast<double>(oracle_sum / n);
    CHECK(run.mean_score() == doctest::Approx(oracle_mean).epsilon(1e-9));
  }
}

TEST_CASE("ablation sweep emits 9 deterministic rows") {
  MockServer server;
  ClientOptions options;
  options.base_url = server.base_url();
  ChatClient chat(options);
  LocalChrfScorer scorer;

  TestSet test_set = small_test_set(5, 74);
  ExamplePool pool = forgetest::make_pool(25, 75);
  FrequencyMatrix fm;
  fm.tokenizer_version = kTokenizerVersion;
  for (const auto& pair : pool.pairs)
    for (const auto& token : tokenize(pair.source_leb)) {
      ++fm.counts[token];
      ++fm.total_tokens;
    }

  EmbeddingClient embedder(options);
  EvalBackends backends;
  backends.chat = &chat;
  backends.scorer = &scorer;
  backends.pool = &pool;
  backends.freq = &fm;
  backends.embedder = &embedder;

  // embedding strategy needs pool vectors
  std::vector<std::string> texts;
  for (const auto& pair : pool.pairs) texts.push_back(pair.source_leb);
  pool.vectors = embedder.embed_batch(texts);

  std::vector<SelectionStrategy> strategies(3);
  strategies[0].kind = SelectionKind::random;
  strategies[1].kind = SelectionKind::embedding;
  strategies[2].kind = SelectionKind::frequency;
  strategies[2].threshold = 5;
  for (auto& s : strategies) s.seed = 42;

  GenerationConfig cfg;
  std::string csv = ablation_sweep(strategies, {3, 5, 7}, test_set, cfg, backends);
  std::string csv2 = ablation_sweep(strategies, {3, 5, 7}, test_set, cfg, backends);
  CHECK(csv == csv2);

  size_t rows = 0, header = 0;
  std::istringstream in(csv);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("strategy,", 0) == 0)
      ++header;
    else if (!line.empty())
      ++rows;
  }
  CHECK(header == 1);
  CHECK(rows == 9);
  CHECK(csv.find("random,3,") != std::string::npos);
  CHECK(csv.find("frequency,7,") != std::string::npos);
}

TEST_CASE("run_eval fails beyond the 5% failure budget") {
  // nothing listens on this port: every sentence fails
  ClientOptions options;
  options.base_url = "http://127.0.0.1:1";
  options.max_attempts = 1;
  options.backoff_base_ms = 1;
  ChatClient chat(options);
  LocalChrfScorer scorer;
  TestSet test_set = small_test_set(4, 76);
  EvalBackends backends;
  backends.chat = &chat;
  backends.scorer = &scorer;
  PromptSpec spec;
  GenerationConfig cfg;
  try {
    run_eval("sys", test_set, spec, cfg, backends);
    FAIL("expected TooManyFailures");
  } catch (const ForgeError& e) {
    CHECK(e.code() == ErrorCode::TooManyFailures);
  }
}
