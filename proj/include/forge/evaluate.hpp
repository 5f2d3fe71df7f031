#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "forge/corpus.hpp"
#include "forge/curriculum.hpp"
#include "forge/genclient.hpp"
#include "forge/prompt.hpp"
#include "forge/select.hpp"

namespace forge {

// Character n-gram F-score (n = 1..6, beta = 2): whitespace is ignored,
// precision/recall are averaged over the orders where either side has
// n-grams, result on [0, 100]. Offline fallback metric; the faithful path is
// the remote scorer endpoint.
double compute_chrf(const std::string& hypothesis, const std::string& reference);

class LocalChrfScorer : public Scorer {
 public:
  std::vector<ScoredSentence> score(const std::vector<ScoreItem>& items) override;
};

struct EvalRun {
  std::string system_name;
  std::string test_set_name;
  PromptMode mode = PromptMode::zero_shot;
  int k = 0;
  std::vector<ScoredSentence> scored;
  std::vector<std::pair<std::string, std::string>> failures;  // (pair id, error)
  std::map<std::string, std::string> config_snapshot;

  double mean_score() const;
};

struct EvalBackends {
  ChatClient* chat = nullptr;
  Scorer* scorer = nullptr;
  const ExamplePool* pool = nullptr;       // few-shot modes
  const FrequencyMatrix* freq = nullptr;   // frequency strategy
  EmbeddingClient* embedder = nullptr;     // embedding strategy
  const RejectedMap* rejected = nullptr;   // contrastive demo rejections
};

// Translate and score every test-set pair under the prompt spec. Per-sentence
// failures are recorded, excluded from the mean, and tolerated up to 5% of
// the set; beyond that the run fails with TooManyFailures. Demo selection is
// seeded per sentence (strategy seed + sentence index) so reruns reproduce.
EvalRun run_eval(const std::string& system_name, const TestSet& test_set, const PromptSpec& spec,
                 const GenerationConfig& cfg, EvalBackends& backends);

void write_eval_run(const EvalRun& run, const std::filesystem::path& path);
EvalRun read_eval_run(const std::filesystem::path& path);

// Paper-style column label: 0-shot / 3-shot / C3-shot.
std::string shot_label(PromptMode mode, int k);

struct TableCell {
  bool present = false;
  double mean = 0.0;
  size_t n = 0;
  bool bold = false;
};

struct ResultsTable {
  std::vector<std::string> systems;                            // row order
  std::vector<std::pair<std::string, std::string>> columns;    // (test set, shot label)
  std::vector<std::vector<TableCell>> cells;                   // [row][col]

  std::string render_text() const;  // aligned table, column maxima starred
  std::string render_csv() const;   // system,test_set,mode,mean_score,n_sentences,bold
};

// Aggregate runs into the result-table shape: cell = mean of per-sentence
// scores (full precision; rounded only at render), per-column maximum bolded,
// missing cells stay absent. A duplicated (system, column) is InconsistentGrid.
ResultsTable aggregate_table(const std::vector<EvalRun>& runs);

// One run per (strategy, k), emitted as "strategy,k,mean_score,n_sentences"
// CSV rows in the given order. Deterministic under fixed seeds.
std::string ablation_sweep(const std::vector<SelectionStrategy>& strategies,
                           const std::vector<int>& ks, const TestSet& test_set,
                           const GenerationConfig& cfg, EvalBackends& backends);

}  // namespace forge
