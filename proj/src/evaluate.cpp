#include "forge/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>

#include "forge/errors.hpp"
#include "forge/text.hpp"
#include "json.hpp"

namespace forge {

// Multiset n-gram counts over codepoints with whitespace removed.
static std::map<std::u32string, size_t> char_ngrams(const std::vector<char32_t>& chars, size_t n) {
  std::map<std::u32string, size_t> grams;
  if (chars.size() < n) return grams;
  for (size_t i = 0; i + n <= chars.size(); ++i)
    ++grams[std::u32string(chars.begin() + i, chars.begin() + i + n)];
  return grams;
}

static std::vector<char32_t> squeeze(const std::string& text) {
  std::vector<char32_t> out;
  for (char32_t cp : decode_utf8(text)) {
    bool ws = cp == U' ' || cp == U'\t' || cp == U'\n' || cp == U'\r' || cp == 0x00A0;
    if (!ws) out.push_back(cp);
  }
  return out;
}

double compute_chrf(const std::string& hypothesis, const std::string& reference) {
  constexpr size_t kMaxOrder = 6;
  constexpr double kBeta = 2.0;

  std::vector<char32_t> hyp = squeeze(hypothesis);
  std::vector<char32_t> ref = squeeze(reference);

  double precision_sum = 0.0, recall_sum = 0.0;
  size_t effective_orders = 0;
  for (size_t n = 1; n <= kMaxOrder; ++n) {
    auto hyp_grams = char_ngrams(hyp, n);
    auto ref_grams = char_ngrams(ref, n);
    size_t hyp_total = 0, ref_total = 0, overlap = 0;
    for (const auto& [gram, count] : hyp_grams) {
      hyp_total += count;
      auto it = ref_grams.find(gram);
      if (it != ref_grams.end()) overlap += std::min(count, it->second);
    }
    for (const auto& [gram, count] : ref_grams) ref_total += count;
    if (hyp_total == 0 && ref_total == 0) continue;
    ++effective_orders;
    precision_sum += hyp_total ? static_cast<double>(overlap) / hyp_total : 0.0;
    recall_sum += ref_total ? static_cast<double>(overlap) / ref_total : 0.0;
  }
  if (effective_orders == 0) return hyp == ref ? 100.0 : 0.0;
  double precision = precision_sum / effective_orders;
  double recall = recall_sum / effective_orders;
  double denom = kBeta * kBeta * precision + recall;
  if (denom == 0.0) return 0.0;
  return 100.0 * (1.0 + kBeta * kBeta) * precision * recall / denom;
}

std::vector<ScoredSentence> LocalChrfScorer::score(const std::vector<ScoreItem>& items) {
  std::vector<ScoredSentence> out;
  out.reserve(items.size());
  for (const ScoreItem& item : items) {
    if (!item.reference)
      throw ForgeError(ErrorCode::InvalidArgument,
                       "local metric needs a reference for item " + item.id);
    out.push_back({item.id, item.hypothesis, compute_chrf(item.hypothesis, *item.reference)});
  }
  return out;
}

double EvalRun::mean_score() const {
  if (scored.empty()) return 0.0;
  double sum = 0.0;
  for (const ScoredSentence& s : scored) sum += s.score;
  return sum / static_cast<double>(scored.size());
}

std::string shot_label(PromptMode mode, int k) {
  switch (mode) {
    case PromptMode::zero_shot: return "0-shot";
    case PromptMode::few_shot: return std::to_string(k) + "-shot";
    case PromptMode::contrastive_few_shot: return "C" + std::to_string(k) + "-shot";
  }
  return "0-shot";
}

namespace {

// Rejected translations for contrastive demos: prefer the supplied map, fall
// back to sampling from the chat endpoint, cache per pair for the run.
class DemoRejector {
 public:
  DemoRejector(const RejectedMap* supplied, ChatClient* chat, const GenerationConfig& cfg,
               const Template& tpl)
      : supplied_(supplied), chat_(chat), cfg_(cfg), tpl_(tpl) {}

  std::optional<std::string> rejected_for(const SentencePair& pair) {
    if (supplied_) {
      auto it = supplied_->find(pair.id);
      if (it != supplied_->end()) return it->second;
    }
    {
      std::lock_guard<std::mutex> lock(mutex_);
      auto it = cache_.find(pair.id);
      if (it != cache_.end()) return it->second;
    }
    GenerationConfig cfg = cfg_;
    if (cfg.temperature <= 0.0) cfg.temperature = 0.7;
    GenerateRejectedResult result = generate_rejected({pair}, cfg, *chat_, tpl_, 3);
    std::optional<std::string> value;
    if (!result.items.empty()) value = result.items.front().rejected;
    std::lock_guard<std::mutex> lock(mutex_);
    cache_[pair.id] = value;
    return value;
  }

 private:
  const RejectedMap* supplied_;
  ChatClient* chat_;
  GenerationConfig cfg_;
  Template tpl_;
  std::mutex mutex_;
  std::map<std::string, std::optional<std::string>> cache_;
};

}  // namespace

EvalRun run_eval(const std::string& system_name, const TestSet& test_set, const PromptSpec& spec,
                 const GenerationConfig& cfg, EvalBackends& backends) {
  if (!backends.chat) throw ForgeError(ErrorCode::ConfigMissing, "chat endpoint not configured");
  if (!backends.scorer) throw ForgeError(ErrorCode::ConfigMissing, "scorer not configured");
  if (test_set.pairs.empty()) throw ForgeError(ErrorCode::EmptyCorpus, "test set is empty");
  const bool needs_pool = spec.mode != PromptMode::zero_shot;
  if (needs_pool && (!backends.pool || backends.pool->pairs.empty()))
    throw ForgeError(ErrorCode::EmptyPool, "few-shot modes need a demonstration pool");
  if (spec.mode == PromptMode::zero_shot && spec.k != 0)
    throw ForgeError(ErrorCode::InvalidArgument, "zero-shot implies k = 0");
  if (needs_pool && spec.k < 1)
    throw ForgeError(ErrorCode::InvalidArgument, "few-shot modes need k >= 1");

  GenerationConfig gen_cfg = cfg;
  if (gen_cfg.stop_sequences.empty()) gen_cfg.stop_sequences = {kDefaultStopSequence};

  DemoRejector rejector(backends.rejected, backends.chat, gen_cfg, spec.tpl);

  const size_t n = test_set.pairs.size();
  std::vector<std::optional<std::string>> hypotheses(n);
  std::vector<std::optional<std::string>> errors(n);

  std::vector<std::function<void()>> tasks;
  tasks.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    tasks.push_back([&, i] {
      const SentencePair& pair = test_set.pairs[i];
      try {
        std::string prompt;
        if (spec.mode == PromptMode::zero_shot) {
          prompt = build_zero_shot(pair.source_leb, spec.tpl);
        } else {
          std::uint64_t sentence_seed = spec.strategy.seed + static_cast<std::uint64_t>(i);
          Selection demos;
          switch (spec.strategy.kind) {
            case SelectionKind::random:
              demos = select_random(*backends.pool, spec.k, sentence_seed);
              break;
            case SelectionKind::embedding: {
              if (!backends.embedder)
                throw ForgeError(ErrorCode::ConfigMissing, "embedding backend not configured");
              EmbeddingVector query = backends.embedder->embed_batch({pair.source_leb}).front();
              demos = select_by_embedding(*backends.pool, query, spec.k);
              break;
            }
            case SelectionKind::frequency: {
              if (!backends.freq)
                throw ForgeError(ErrorCode::ConfigMissing, "frequency matrix not configured");
              demos = select_by_frequency(*backends.pool, pair.source_leb, *backends.freq,
                                          spec.strategy.threshold.value_or(5), spec.k,
                                          sentence_seed);
              break;
            }
          }
          if (spec.mode == PromptMode::few_shot) {
            prompt = build_few_shot(pair.source_leb, demos.pairs, spec.tpl);
          } else {
            std::vector<std::pair<SentencePair, std::string>> contrastive_demos;
            for (const SentencePair& demo : demos.pairs) {
              std::optional<std::string> rejected = rejector.rejected_for(demo);
              if (rejected) contrastive_demos.emplace_back(demo, *rejected);
              // A demo whose samples were all degenerate is dropped.
            }
            prompt = build_contrastive_few_shot(pair.source_leb, contrastive_demos, spec.tpl);
          }
        }
        hypotheses[i] = backends.chat->generate_translation(prompt, gen_cfg);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    });
  }
  run_bounded(tasks, backends.chat->options().in_flight_limit);

  EvalRun run;
  run.system_name = system_name;
  run.test_set_name = test_set.name;
  run.mode = spec.mode;
  run.k = spec.k;
  run.config_snapshot["model_id"] = cfg.model_id;
  run.config_snapshot["temperature"] = std::to_string(cfg.temperature);
  run.config_snapshot["max_new_tokens"] = std::to_string(cfg.max_new_tokens);
  run.config_snapshot["strategy"] = selection_kind_name(spec.strategy.kind);
  run.config_snapshot["strategy_seed"] = std::to_string(spec.strategy.seed);
  if (spec.strategy.threshold)
    run.config_snapshot["frequency_threshold"] = std::to_string(*spec.strategy.threshold);
  run.config_snapshot["template_version"] = spec.tpl.version;
  run.config_snapshot["test_set_sha"] = test_set.file_sha;
  run.config_snapshot["aggregation"] = "sentence-mean";

  std::vector<ScoreItem> to_score;
  std::vector<size_t> scored_index;
  for (size_t i = 0; i < n; ++i) {
    if (errors[i]) {
      run.failures.emplace_back(test_set.pairs[i].id, *errors[i]);
    } else {
      ScoreItem item;
      item.id = test_set.pairs[i].id;
      item.source = test_set.pairs[i].source_leb;
      item.hypothesis = *hypotheses[i];
      item.reference = test_set.pairs[i].target_en;
      to_score.push_back(std::move(item));
      scored_index.push_back(i);
    }
  }
  if (run.failures.size() * 20 > n)  // failure budget: 5% of the test set
    throw ForgeError(ErrorCode::TooManyFailures,
                     std::to_string(run.failures.size()) + "/" + std::to_string(n) +
                         " sentences failed");
  run.scored = backends.scorer->score(to_score);
  return run;
}

void write_eval_run(const EvalRun& run, const std::filesystem::path& path) {
  nlohmann::ordered_json doc;
  doc["system"] = run.system_name;
  doc["test_set"] = run.test_set_name;
  doc["mode"] = prompt_mode_name(run.mode);
  doc["k"] = run.k;
  doc["config"] = run.config_snapshot;
  doc["scores"] = nlohmann::ordered_json::array();
  for (const ScoredSentence& s : run.scored) {
    nlohmann::ordered_json obj;
    obj["id"] = s.id;
    obj["hypothesis"] = s.hypothesis;
    obj["score"] = s.score;
    doc["scores"].push_back(std::move(obj));
  }
  doc["failures"] = nlohmann::ordered_json::array();
  for (const auto& [id, error] : run.failures) {
    nlohmann::ordered_json obj;
    obj["id"] = id;
    obj["error"] = error;
    doc["failures"].push_back(std::move(obj));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ForgeError(ErrorCode::IoError, "cannot write " + path.string());
  out << doc.dump(2) << "\n";
}

EvalRun read_eval_run(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ForgeError(ErrorCode::IoError, "cannot open " + path.string());
  nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded())
    throw ForgeError(ErrorCode::MalformedRecord, path.string() + " is invalid JSON");
  EvalRun run;
  try {
    run.system_name = doc.at("system").get<std::string>();
    run.test_set_name = doc.at("test_set").get<std::string>();
    run.mode = prompt_mode_from_name(doc.at("mode").get<std::string>());
    run.k = doc.at("k").get<int>();
    if (doc.contains("config"))
      for (const auto& [key, value] : doc["config"].items())
        run.config_snapshot[key] = value.get<std::string>();
    for (const auto& s : doc.at("scores"))
      run.scored.push_back({s.at("id").get<std::string>(),
                            s.value("hypothesis", std::string()),
                            s.at("score").get<double>()});
    if (doc.contains("failures"))
      for (const auto& f : doc["failures"])
        run.failures.emplace_back(f.at("id").get<std::string>(),
                                  f.value("error", std::string()));
  } catch (const nlohmann::json::exception& e) {
    throw ForgeError(ErrorCode::MalformedRecord, path.string() + ": " + e.what());
  }
  return run;
}

ResultsTable aggregate_table(const std::vector<EvalRun>& runs) {
  ResultsTable table;
  std::map<std::pair<std::string, std::string>, size_t> col_index;
  std::map<std::string, size_t> row_index;

  // Deterministic column order: test set, then mode rank, then k.
  auto mode_rank = [](PromptMode m) {
    return m == PromptMode::zero_shot ? 0 : m == PromptMode::few_shot ? 1 : 2;
  };
  std::vector<std::tuple<std::string, int, int>> col_keys;
  for (const EvalRun& run : runs) {
    std::tuple<std::string, int, int> key{run.test_set_name, mode_rank(run.mode), run.k};
    if (std::find(col_keys.begin(), col_keys.end(), key) == col_keys.end())
      col_keys.push_back(key);
  }
  std::sort(col_keys.begin(), col_keys.end());
  for (const auto& [set_name, rank, k] : col_keys) {
    PromptMode mode = rank == 0   ? PromptMode::zero_shot
                      : rank == 1 ? PromptMode::few_shot
                                  : PromptMode::contrastive_few_shot;
    col_index[{set_name, shot_label(mode, k)}] = table.columns.size();
    table.columns.emplace_back(set_name, shot_label(mode, k));
  }

  for (const EvalRun& run : runs) {
    if (!row_index.count(run.system_name)) {
      row_index[run.system_name] = table.systems.size();
      table.systems.push_back(run.system_name);
    }
  }
  table.cells.assign(table.systems.size(), std::vector<TableCell>(table.columns.size()));

  for (const EvalRun& run : runs) {
    size_t row = row_index[run.system_name];
    size_t col = col_index[{run.test_set_name, shot_label(run.mode, run.k)}];
    TableCell& cell = table.cells[row][col];
    if (cell.present)
      throw ForgeError(ErrorCode::InconsistentGrid,
                       "duplicate cell for " + run.system_name + " / " + run.test_set_name +
                           " " + shot_label(run.mode, run.k));
    if (run.scored.empty()) continue;  // missing cell stays absent, never zero
    cell.present = true;
    cell.mean = run.mean_score();
    cell.n = run.scored.size();
  }

  for (size_t c = 0; c < table.columns.size(); ++c) {
    double best = -1.0;
    for (size_t r = 0; r < table.systems.size(); ++r)
      if (table.cells[r][c].present) best = std::max(best, table.cells[r][c].mean);
    for (size_t r = 0; r < table.systems.size(); ++r)
      if (table.cells[r][c].present && table.cells[r][c].mean == best)
        table.cells[r][c].bold = true;
  }
  return table;
}

static std::string format_mean(double mean) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", mean);
  return buf;
}

std::string ResultsTable::render_text() const {
  std::vector<std::string> headers{"System"};
  for (const auto& [set_name, label] : columns) headers.push_back(set_name + " " + label);

  std::vector<std::vector<std::string>> rows;
  for (size_t r = 0; r < systems.size(); ++r) {
    std::vector<std::string> row{systems[r]};
    for (size_t c = 0; c < columns.size(); ++c) {
      const TableCell& cell = cells[r][c];
      if (!cell.present)
        row.push_back("-");
      else if (cell.bold)
        row.push_back("*" + format_mean(cell.mean) + "*");
      else
        row.push_back(format_mean(cell.mean));
    }
    rows.push_back(std::move(row));
  }

  std::vector<size_t> widths(headers.size());
  for (size_t c = 0; c < headers.size(); ++c) {
    widths[c] = headers[c].size();
    for (const auto& row : rows) widths[c] = std::max(widths[c], row[c].size());
  }
  std::ostringstream out;
  auto emit_row = [&](const std::vector<std::string>& row) {
    for (size_t c = 0; c < row.size(); ++c) {
      out << (c ? "  " : "");
      out << row[c] << std::string(widths[c] - row[c].size(), ' ');
    }
    out << "\n";
  };
  emit_row(headers);
  std::string rule;
  for (size_t c = 0; c < widths.size(); ++c) rule += std::string(widths[c], '-') + (c + 1 < widths.size() ? "  " : "");
  out << rule << "\n";
  for (const auto& row : rows) emit_row(row);
  return out.str();
}

std::string ResultsTable::render_csv() const {
  std::ostringstream out;
  out << "system,test_set,mode,mean_score,n_sentences,bold\n";
  for (size_t r = 0; r < systems.size(); ++r) {
    for (size_t c = 0; c < columns.size(); ++c) {
      const TableCell& cell = cells[r][c];
      if (!cell.present) continue;
      out << systems[r] << "," << columns[c].first << "," << columns[c].second << ","
          << format_mean(cell.mean) << "," << cell.n << "," << (cell.bold ? 1 : 0) << "\n";
    }
  }
  return out.str();
}

std::string ablation_sweep(const std::vector<SelectionStrategy>& strategies,
                           const std::vector<int>& ks, const TestSet& test_set,
                           const GenerationConfig& cfg, EvalBackends& backends) {
  std::ostringstream out;
  out << "strategy,k,mean_score,n_sentences\n";
  for (const SelectionStrategy& strategy : strategies) {
    for (int k : ks) {
      PromptSpec spec;
      spec.mode = PromptMode::few_shot;
      spec.k = k;
      spec.strategy = strategy;
      spec.strategy.k = k;
      std::string system =
          std::string(selection_kind_name(strategy.kind)) + "-k" + std::to_string(k);
      EvalRun run = run_eval(system, test_set, spec, cfg, backends);
      char mean_buf[32];
      std::snprintf(mean_buf, sizeof(mean_buf), "%.4f", run.mean_score());
      out << selection_kind_name(strategy.kind) << "," << k << "," << mean_buf << ","
          << run.scored.size() << "\n";
    }
  }
  return out.str();
}

}  // namespace forge
