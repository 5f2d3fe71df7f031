// forge: command-line front door for the Lebanese-English MT data pipeline.
// Subcommands cover ingest -> transliterate -> build-instructions ->
// gen-rejected / synth-grammar -> plan-curriculum / export-cpo ->
// build-prompts -> evaluate / ablate -> report. Output is files-first; every
// run drops a config snapshot beside its outputs.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "forge/corpus.hpp"
#include "forge/curriculum.hpp"
#include "forge/errors.hpp"
#include "forge/evaluate.hpp"
#include "forge/genclient.hpp"
#include "forge/instruct.hpp"
#include "forge/prompt.hpp"
#include "forge/select.hpp"
#include "forge/text.hpp"
#include "forge/transliterate.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::string env_or_empty(const char* name) {
  const char* value = std::getenv(name);
  return value ? value : "";
}

// Snapshot beside the output: <file>.config.json, or <dir>/config.json.
void write_config_snapshot(const fs::path& out, const ordered_json& snapshot) {
  fs::path target;
  if (fs::is_directory(out))
    target = out / "config.json";
  else
    target = out.string() + ".config.json";
  std::ofstream file(target, std::ios::binary);
  if (!file) throw forge::ForgeError(forge::ErrorCode::IoError, "cannot write " + target.string());
  file << snapshot.dump(2) << "\n";
}

forge::ClientOptions chat_options_from_env(int in_flight, int retry_base_ms) {
  std::string base = env_or_empty("FORGE_API_BASE");
  if (base.empty())
    throw forge::ForgeError(forge::ErrorCode::ConfigMissing,
                            "FORGE_API_BASE is not set (chat endpoint required)");
  forge::ClientOptions options;
  options.base_url = base;
  options.api_key = env_or_empty("FORGE_API_KEY");
  options.in_flight_limit = in_flight;
  options.backoff_base_ms = retry_base_ms;
  return options;
}

struct ScorerChoice {
  std::unique_ptr<forge::Scorer> scorer;
};

ScorerChoice make_scorer(bool local_metric, int retry_base_ms) {
  ScorerChoice choice;
  if (local_metric) {
    choice.scorer = std::make_unique<forge::LocalChrfScorer>();
    return choice;
  }
  std::string base = env_or_empty("FORGE_SCORER_BASE");
  if (base.empty())
    throw forge::ForgeError(forge::ErrorCode::ConfigMissing,
                            "FORGE_SCORER_BASE is not set and --local-metric not given");
  forge::ClientOptions options;
  options.base_url = base;
  options.backoff_base_ms = retry_base_ms;
  choice.scorer = std::make_unique<forge::RemoteScorer>(options);
  return choice;
}

forge::CorpusFormat format_from_name(const std::string& name) {
  if (name == "tsv") return forge::CorpusFormat::tsv_pair;
  if (name == "jsonl") return forge::CorpusFormat::jsonl;
  throw forge::ForgeError(forge::ErrorCode::InvalidArgument, "unknown format '" + name + "'");
}

forge::TestSetKind which_from_name(const std::string& name) {
  if (name == "flores_subset") return forge::TestSetKind::flores_subset;
  if (name == "lebeval") return forge::TestSetKind::lebeval;
  if (name == "custom") return forge::TestSetKind::custom;
  throw forge::ForgeError(forge::ErrorCode::InvalidArgument, "unknown test set '" + name + "'");
}

forge::InstructionKind kind_from_cli(const std::string& name) {
  if (name == "mt") return forge::InstructionKind::MT;
  if (name == "contrastive") return forge::InstructionKind::Contrastive;
  if (name == "grammar") return forge::InstructionKind::Grammar;
  throw forge::ForgeError(forge::ErrorCode::InvalidArgument,
                          "kind must be mt|contrastive|grammar, got '" + name + "'");
}

forge::Template template_for_version(const std::string& version) {
  if (version != "v1")
    throw forge::ForgeError(forge::ErrorCode::InvalidArgument,
                            "unknown template version '" + version + "'");
  return forge::Template::v1();
}

std::unique_ptr<forge::EmbeddingClient> make_embedder(const std::string& vectors_file,
                                                      int retry_base_ms) {
  std::string base = env_or_empty("FORGE_EMBED_BASE");
  if (!base.empty()) {
    forge::ClientOptions options;
    options.base_url = base;
    options.backoff_base_ms = retry_base_ms;
    return std::make_unique<forge::EmbeddingClient>(options);
  }
  if (!vectors_file.empty())
    return std::make_unique<forge::EmbeddingClient>(
        forge::read_embedding_sidecar(vectors_file));
  return nullptr;
}

struct GlobalArgs {
  std::uint64_t seed = 42;
  std::string template_version = "v1";
  int in_flight = 4;
  int retry_base_ms = 50;
};

int run(int argc, char** argv) {
  CLI::App app{"forge: Lebanese-English MT instruction-data compiler and eval harness"};
  app.require_subcommand(1);

  GlobalArgs global;
  app.add_option("--seed", global.seed, "Seed for all randomized steps")->capture_default_str();
  app.add_option("--template-version", global.template_version, "Instruction template version")
      ->capture_default_str();
  app.add_option("--in-flight", global.in_flight, "Max concurrent endpoint requests")
      ->capture_default_str();
  app.add_option("--retry-base-ms", global.retry_base_ms, "Retry backoff base in milliseconds")
      ->capture_default_str();

  // ---- ingest ----------------------------------------------------------
  auto* ingest = app.add_subcommand("ingest", "Load a raw corpus file into canonical JSONL");
  std::string ingest_input, ingest_format = "tsv", ingest_origin = "OTHER", ingest_out,
              ingest_name;
  bool ingest_dedup = false;
  ingest->add_option("input", ingest_input, "Input file")->required();
  ingest->add_option("--format", ingest_format, "tsv|jsonl")->capture_default_str();
  ingest->add_option("--origin", ingest_origin, "MADAR|OS|LW|LGID|LEBEVAL|OTHER")
      ->capture_default_str();
  ingest->add_option("-o,--out", ingest_out, "Output JSONL path")->required();
  ingest->add_option("--name", ingest_name, "Corpus name");
  ingest->add_flag("--dedup", ingest_dedup, "Drop duplicate (source, target) pairs");
  ingest->callback([&] {
    forge::Corpus corpus = forge::load_corpus(ingest_input, format_from_name(ingest_format),
                                              forge::origin_from_name(ingest_origin));
    if (!ingest_name.empty()) corpus.name = ingest_name;
    if (ingest_dedup) corpus = forge::dedup(corpus);
    forge::write_corpus_jsonl(corpus, ingest_out);
    write_config_snapshot(ingest_out,
                          ordered_json{{"subcommand", "ingest"},
                                       {"input", ingest_input},
                                       {"format", ingest_format},
                                       {"origin", ingest_origin},
                                       {"dedup", ingest_dedup},
                                       {"pairs", corpus.pairs.size()},
                                       {"seed", global.seed}});
    std::cerr << "ingested " << corpus.pairs.size() << " pairs\n";
  });

  // ---- transliterate ---------------------------------------------------
  auto* translit = app.add_subcommand("transliterate",
                                      "Arabizi to Arabic script, line by line (stdin to stdout)");
  std::string translit_rules, translit_in, translit_out;
  translit->add_option("--rules", translit_rules, "Rule table JSON (default: built-in v1)");
  translit->add_option("-i,--in", translit_in, "Input file (default: stdin)");
  translit->add_option("-o,--out", translit_out, "Output file (default: stdout)");
  translit->callback([&] {
    forge::RuleTable table = translit_rules.empty()
                                 ? forge::RuleTable::v1()
                                 : forge::RuleTable::from_json_file(translit_rules);
    std::ifstream file_in;
    std::ofstream file_out;
    if (!translit_in.empty()) {
      file_in.open(translit_in, std::ios::binary);
      if (!file_in)
        throw forge::ForgeError(forge::ErrorCode::IoError, "cannot open " + translit_in);
    }
    if (!translit_out.empty()) {
      file_out.open(translit_out, std::ios::binary);
      if (!file_out)
        throw forge::ForgeError(forge::ErrorCode::IoError, "cannot write " + translit_out);
    }
    std::istream& in = translit_in.empty() ? std::cin : file_in;
    std::ostream& out = translit_out.empty() ? std::cout : file_out;
    std::string line;
    size_t unmapped_total = 0;
    while (std::getline(in, line)) {
      forge::TransliterationResult result = forge::transliterate(line, table);
      unmapped_total += result.unmapped.size();
      out << result.output << "\n";
    }
    if (unmapped_total > 0)
      std::cerr << "left " << unmapped_total << " characters unmapped\n";
  });

  // ---- build-instructions ----------------------------------------------
  auto* build = app.add_subcommand("build-instructions",
                                   "Render a corpus as instruction JSONL of one kind");
  std::string build_kind = "mt", build_corpus, build_rejected, build_out;
  build->add_option("--kind", build_kind, "mt|contrastive|grammar")->capture_default_str();
  build->add_option("--corpus", build_corpus, "Canonical corpus JSONL")->required();
  build->add_option("--rejected", build_rejected, "Rejected translations JSONL (contrastive)");
  build->add_option("-o,--out", build_out, "Output instruction JSONL")->required();
  build->callback([&] {
    forge::Template tpl = template_for_version(global.template_version);
    forge::InstructionKind kind = kind_from_cli(build_kind);
    forge::Corpus corpus = forge::read_corpus_jsonl(build_corpus);
    forge::RejectedMap rejected;
    if (!build_rejected.empty()) rejected = forge::read_rejected_map(build_rejected);
    if (kind == forge::InstructionKind::Contrastive && build_rejected.empty())
      throw forge::ForgeError(forge::ErrorCode::ConfigMissing,
                              "contrastive instructions need --rejected");
    std::ofstream out(build_out, std::ios::binary);
    if (!out) throw forge::ForgeError(forge::ErrorCode::IoError, "cannot write " + build_out);
    size_t count = 0;
    for (const forge::SentencePair& pair : corpus.pairs) {
      out << forge::instruction_to_jsonl(
                 forge::build_instruction_for(kind, pair, &rejected, tpl), tpl)
          << "\n";
      ++count;
    }
    out.close();
    write_config_snapshot(build_out, ordered_json{{"subcommand", "build-instructions"},
                                                  {"kind", build_kind},
                                                  {"corpus", build_corpus},
                                                  {"records", count},
                                                  {"template_version", tpl.version},
                                                  {"seed", global.seed}});
    std::cerr << "wrote " << count << " instruction records\n";
  });

  // ---- gen-rejected ------------------------------------------------------
  auto* genrej = app.add_subcommand("gen-rejected",
                                    "Sample rejected translations from the base model");
  std::string genrej_corpus, genrej_out, genrej_model = "aya23-8b";
  double genrej_temperature = 0.7;
  int genrej_attempts = 3, genrej_max_tokens = 256;
  genrej->add_option("--corpus", genrej_corpus, "Canonical corpus JSONL")->required();
  genrej->add_option("-o,--out", genrej_out, "Output rejected JSONL")->required();
  genrej->add_option("--model", genrej_model, "Base model id")->capture_default_str();
  genrej->add_option("--temperature", genrej_temperature, "Sampling temperature (> 0)")
      ->capture_default_str();
  genrej->add_option("--max-attempts", genrej_attempts, "Attempts before dropping a pair")
      ->capture_default_str();
  genrej->add_option("--max-new-tokens", genrej_max_tokens, "Completion budget")
      ->capture_default_str();
  genrej->callback([&] {
    forge::Template tpl = template_for_version(global.template_version);
    forge::Corpus corpus = forge::read_corpus_jsonl(genrej_corpus);
    forge::ChatClient chat(chat_options_from_env(global.in_flight, global.retry_base_ms));
    forge::GenerationConfig cfg;
    cfg.model_id = genrej_model;
    cfg.temperature = genrej_temperature;
    cfg.max_new_tokens = genrej_max_tokens;
    cfg.stop_sequences = {forge::kDefaultStopSequence};
    cfg.seed = global.seed;
    forge::GenerateRejectedResult result =
        forge::generate_rejected(corpus.pairs, cfg, chat, tpl, genrej_attempts);
    forge::RejectedMap map;
    for (const forge::RejectedSample& sample : result.items)
      map[sample.pair_id] = sample.rejected;
    forge::write_rejected_map(map, genrej_out);
    for (const std::string& id : result.dropped)
      std::cerr << "AllSamplesDegenerate: dropped " << id << "\n";
    write_config_snapshot(genrej_out, ordered_json{{"subcommand", "gen-rejected"},
                                                   {"corpus", genrej_corpus},
                                                   {"model", genrej_model},
                                                   {"temperature", genrej_temperature},
                                                   {"max_attempts", genrej_attempts},
                                                   {"kept", result.items.size()},
                                                   {"dropped", result.dropped.size()},
                                                   {"seed", global.seed}});
    std::cerr << "kept " << result.items.size() << " rejected translations, dropped "
              << result.dropped.size() << "\n";
  });

  // ---- synth-grammar -----------------------------------------------------
  auto* synth = app.add_subcommand("synth-grammar",
                                   "Synthesize grammar-hinted pairs from book chapters");
  std::string synth_chapter, synth_dir, synth_out, synth_model = "synthesis-model";
  int synth_index = 1, synth_per_chunk = 8;
  synth->add_option("--chapter", synth_chapter, "Single chapter text file");
  synth->add_option("--index", synth_index, "Chapter index (with --chapter)")
      ->capture_default_str();
  synth->add_option("--chapters-dir", synth_dir, "Directory of chapter files (sorted order)");
  synth->add_option("-o,--out", synth_out, "Output corpus JSONL (origin LGID)")->required();
  synth->add_option("--model", synth_model, "Synthesis model id")->capture_default_str();
  synth->add_option("--per-chunk", synth_per_chunk, "Examples requested per chunk")
      ->capture_default_str();
  synth->callback([&] {
    if (synth_chapter.empty() == synth_dir.empty())
      throw forge::ForgeError(forge::ErrorCode::InvalidArgument,
                              "give exactly one of --chapter or --chapters-dir");
    forge::ChatClient chat(chat_options_from_env(global.in_flight, global.retry_base_ms));
    forge::GenerationConfig cfg;
    cfg.model_id = synth_model;
    cfg.temperature = 0.7;
    cfg.max_new_tokens = 2048;
    cfg.seed = global.seed;

    std::vector<std::pair<int, std::string>> chapters;  // (index, text)
    auto slurp = [](const fs::path& path) {
      std::ifstream in(path, std::ios::binary);
      if (!in) throw forge::ForgeError(forge::ErrorCode::IoError, "cannot open " + path.string());
      std::ostringstream ss;
      ss << in.rdbuf();
      return ss.str();
    };
    if (!synth_chapter.empty()) {
      chapters.emplace_back(synth_index, slurp(synth_chapter));
    } else {
      std::vector<fs::path> files;
      for (const auto& entry : fs::directory_iterator(synth_dir))
        if (entry.is_regular_file()) files.push_back(entry.path());
      std::sort(files.begin(), files.end());
      int index = 1;
      for (const fs::path& file : files) chapters.emplace_back(index++, slurp(file));
    }

    forge::Corpus corpus;
    corpus.name = "lgid";
    size_t discarded = 0;
    for (const auto& [index, text] : chapters) {
      forge::SynthesisResult result =
          forge::synthesize_grammar_examples(text, index, cfg, synth_per_chunk, chat);
      discarded += result.discarded;
      for (const forge::GrammarExample& ex : result.examples) corpus.pairs.push_back(ex.pair);
    }
    forge::write_corpus_jsonl(corpus, synth_out);
    write_config_snapshot(synth_out, ordered_json{{"subcommand", "synth-grammar"},
                                                  {"chapters", chapters.size()},
                                                  {"examples", corpus.pairs.size()},
                                                  {"discarded", discarded},
                                                  {"model", synth_model},
                                                  {"per_chunk", synth_per_chunk},
                                                  {"seed", global.seed}});
    std::cerr << "synthesized " << corpus.pairs.size() << " grammar examples (" << discarded
              << " discarded)\n";
  });

  // ---- build-freq-matrix -------------------------------------------------
  auto* freq = app.add_subcommand("build-freq-matrix",
                                  "Token frequency matrix over corpus files");
  std::vector<std::string> freq_inputs;
  std::string freq_out;
  freq->add_option("inputs", freq_inputs, "Text or .jsonl corpus files")->required();
  freq->add_option("-o,--out", freq_out, "Output JSON")->required();
  freq->callback([&] {
    std::vector<fs::path> paths(freq_inputs.begin(), freq_inputs.end());
    forge::FrequencyMatrix fm = forge::build_frequency_matrix(paths);
    forge::write_frequency_matrix(fm, freq_out);
    write_config_snapshot(freq_out, ordered_json{{"subcommand", "build-freq-matrix"},
                                                 {"inputs", freq_inputs},
                                                 {"total_tokens", fm.total_tokens},
                                                 {"distinct_tokens", fm.counts.size()},
                                                 {"tokenizer_version", fm.tokenizer_version}});
    std::cerr << "counted " << fm.total_tokens << " tokens (" << fm.counts.size()
              << " distinct)\n";
  });

  // ---- select-demos ------------------------------------------------------
  auto* demos = app.add_subcommand("select-demos", "Pick k demonstrations for one input");
  std::string demos_pool, demos_strategy = "random", demos_input, demos_input_file, demos_vectors,
              demos_freq, demos_out;
  int demos_k = 3;
  std::uint64_t demos_threshold = 5;
  demos->add_option("--pool", demos_pool, "Demonstration pool JSONL")->required();
  demos->add_option("--strategy", demos_strategy, "random|embedding|frequency")
      ->capture_default_str();
  demos->add_option("--k", demos_k, "Demonstrations to select")->capture_default_str();
  demos->add_option("--input", demos_input, "Input sentence");
  demos->add_option("--input-file", demos_input_file, "File with the input sentence");
  demos->add_option("--vectors", demos_vectors, "Embedding sidecar JSONL");
  demos->add_option("--freq", demos_freq, "Frequency matrix JSON");
  demos->add_option("--threshold", demos_threshold, "Rare-token threshold")
      ->capture_default_str();
  demos->add_option("-o,--out", demos_out, "Output JSONL of selected pairs")->required();
  demos->callback([&] {
    forge::Corpus pool_corpus = forge::read_corpus_jsonl(demos_pool);
    forge::ExamplePool pool;
    pool.pairs = pool_corpus.pairs;
    std::string input = demos_input;
    if (input.empty() && !demos_input_file.empty()) {
      std::ifstream in(demos_input_file);
      std::getline(in, input);
    }
    forge::SelectionKind kind = forge::selection_kind_from_name(demos_strategy);
    forge::Selection selection;
    if (kind == forge::SelectionKind::random) {
      selection = forge::select_random(pool, demos_k, global.seed);
    } else if (kind == forge::SelectionKind::embedding) {
      if (input.empty())
        throw forge::ForgeError(forge::ErrorCode::InvalidArgument,
                                "embedding strategy needs --input");
      if (!demos_vectors.empty())
        forge::attach_vectors(pool, forge::read_embedding_sidecar(demos_vectors));
      auto embedder = make_embedder(demos_vectors, global.retry_base_ms);
      if (!embedder)
        throw forge::ForgeError(forge::ErrorCode::ConfigMissing,
                                "set FORGE_EMBED_BASE or pass --vectors");
      if (!pool.vectors) {
        std::vector<std::string> texts;
        for (const auto& pair : pool.pairs) texts.push_back(pair.source_leb);
        pool.vectors = embedder->embed_batch(texts);
      }
      forge::EmbeddingVector query = embedder->embed_batch({input}).front();
      selection = forge::select_by_embedding(pool, query, demos_k);
    } else {
      if (input.empty())
        throw forge::ForgeError(forge::ErrorCode::InvalidArgument,
                                "frequency strategy needs --input");
      if (demos_freq.empty())
        throw forge::ForgeError(forge::ErrorCode::ConfigMissing,
                                "frequency strategy needs --freq");
      forge::FrequencyMatrix fm = forge::read_frequency_matrix(demos_freq);
      selection = forge::select_by_frequency(pool, input, fm, demos_threshold, demos_k,
                                             global.seed);
    }
    forge::Corpus out_corpus;
    out_corpus.name = "demos";
    out_corpus.pairs = selection.pairs;
    forge::write_corpus_jsonl(out_corpus, demos_out);
    if (selection.clamped) std::cerr << "warning: k clamped to pool size\n";
    write_config_snapshot(demos_out, ordered_json{{"subcommand", "select-demos"},
                                                  {"strategy", demos_strategy},
                                                  {"k", demos_k},
                                                  {"threshold", demos_threshold},
                                                  {"selected", selection.pairs.size()},
                                                  {"seed", global.seed}});
  });

  // ---- build-prompts ----------------------------------------------------
  auto* prompts = app.add_subcommand("build-prompts", "Batch prompts for a test set");
  std::string prompts_test, prompts_which = "custom", prompts_pool, prompts_strategy = "random",
              prompts_vectors, prompts_freq, prompts_rejected, prompts_out;
  std::string prompts_mode = "zero_shot";
  int prompts_k = 0;
  std::uint64_t prompts_threshold = 5;
  prompts->add_option("--test-set", prompts_test, "Test set JSONL")->required();
  prompts->add_option("--which", prompts_which, "flores_subset|lebeval|custom")
      ->capture_default_str();
  prompts->add_option("--mode", prompts_mode, "zero_shot|few_shot|contrastive_few_shot")
      ->capture_default_str();
  prompts->add_option("--k", prompts_k, "Demonstrations per prompt")->capture_default_str();
  prompts->add_option("--pool", prompts_pool, "Demonstration pool JSONL (few-shot modes)");
  prompts->add_option("--strategy", prompts_strategy, "random|embedding|frequency")
      ->capture_default_str();
  prompts->add_option("--vectors", prompts_vectors, "Embedding sidecar JSONL");
  prompts->add_option("--freq", prompts_freq, "Frequency matrix JSON");
  prompts->add_option("--threshold", prompts_threshold, "Rare-token threshold")
      ->capture_default_str();
  prompts->add_option("--rejected", prompts_rejected, "Rejected map JSONL (contrastive mode)");
  prompts->add_option("-o,--out", prompts_out, "Output prompts JSONL")->required();
  prompts->callback([&] {
    forge::Template tpl = template_for_version(global.template_version);
    forge::TestSet test_set = forge::load_test_set(prompts_test, which_from_name(prompts_which));
    forge::PromptMode mode = forge::prompt_mode_from_name(prompts_mode);
    if (mode != forge::PromptMode::zero_shot && prompts_k == 0) prompts_k = 3;

    forge::ExamplePool pool;
    forge::FrequencyMatrix fm;
    std::unique_ptr<forge::EmbeddingClient> embedder;
    forge::SelectionKind strategy = forge::selection_kind_from_name(prompts_strategy);
    if (mode != forge::PromptMode::zero_shot) {
      if (prompts_pool.empty())
        throw forge::ForgeError(forge::ErrorCode::ConfigMissing, "few-shot modes need --pool");
      pool.pairs = forge::read_corpus_jsonl(prompts_pool).pairs;
      if (strategy == forge::SelectionKind::embedding) {
        if (!prompts_vectors.empty())
          forge::attach_vectors(pool, forge::read_embedding_sidecar(prompts_vectors));
        embedder = make_embedder(prompts_vectors, global.retry_base_ms);
        if (!embedder)
          throw forge::ForgeError(forge::ErrorCode::ConfigMissing,
                                  "set FORGE_EMBED_BASE or pass --vectors");
        if (!pool.vectors) {
          std::vector<std::string> texts;
          for (const auto& pair : pool.pairs) texts.push_back(pair.source_leb);
          pool.vectors = embedder->embed_batch(texts);
        }
      }
      if (strategy == forge::SelectionKind::frequency) {
        if (prompts_freq.empty())
          throw forge::ForgeError(forge::ErrorCode::ConfigMissing,
                                  "frequency strategy needs --freq");
        fm = forge::read_frequency_matrix(prompts_freq);
      }
    }
    forge::RejectedMap rejected;
    if (!prompts_rejected.empty()) rejected = forge::read_rejected_map(prompts_rejected);
    if (mode == forge::PromptMode::contrastive_few_shot && prompts_rejected.empty())
      throw forge::ForgeError(forge::ErrorCode::ConfigMissing,
                              "contrastive prompts need --rejected (offline builder)");

    std::ofstream out(prompts_out, std::ios::binary);
    if (!out) throw forge::ForgeError(forge::ErrorCode::IoError, "cannot write " + prompts_out);
    for (size_t i = 0; i < test_set.pairs.size(); ++i) {
      const forge::SentencePair& pair = test_set.pairs[i];
      std::string prompt;
      if (mode == forge::PromptMode::zero_shot) {
        prompt = forge::build_zero_shot(pair.source_leb, tpl);
      } else {
        std::uint64_t sentence_seed = global.seed + i;
        forge::Selection selection;
        if (strategy == forge::SelectionKind::random) {
          selection = forge::select_random(pool, prompts_k, sentence_seed);
        } else if (strategy == forge::SelectionKind::embedding) {
          forge::EmbeddingVector query = embedder->embed_batch({pair.source_leb}).front();
          selection = forge::select_by_embedding(pool, query, prompts_k);
        } else {
          selection = forge::select_by_frequency(pool, pair.source_leb, fm, prompts_threshold,
                                                 prompts_k, sentence_seed);
        }
        if (mode == forge::PromptMode::few_shot) {
          prompt = forge::build_few_shot(pair.source_leb, selection.pairs, tpl);
        } else {
          std::vector<std::pair<forge::SentencePair, std::string>> contrastive;
          for (const forge::SentencePair& demo : selection.pairs) {
            auto it = rejected.find(demo.id);
            if (it == rejected.end())
              throw forge::ForgeError(forge::ErrorCode::InvalidArgument,
                                      "no rejected translation for demo " + demo.id);
            contrastive.emplace_back(demo, it->second);
          }
          prompt = forge::build_contrastive_few_shot(pair.source_leb, contrastive, tpl);
        }
      }
      ordered_json obj;
      obj["id"] = pair.id;
      obj["prompt"] = prompt;
      obj["mode"] = prompts_mode;
      obj["k"] = mode == forge::PromptMode::zero_shot ? 0 : prompts_k;
      out << obj.dump() << "\n";
    }
    out.close();
    write_config_snapshot(prompts_out, ordered_json{{"subcommand", "build-prompts"},
                                                    {"mode", prompts_mode},
                                                    {"k", prompts_k},
                                                    {"strategy", prompts_strategy},
                                                    {"test_set", prompts_test},
                                                    {"prompts", test_set.pairs.size()},
                                                    {"seed", global.seed}});
  });

  // ---- plan-curriculum ---------------------------------------------------
  auto* plan = app.add_subcommand("plan-curriculum", "Write a training plan directory");
  std::string plan_config, plan_data = "LW", plan_corpus, plan_grammar, plan_rejected, plan_out;
  plan->add_option("--config", plan_config,
                   "Instruct-MT|Instruct-Cont|Instruct-Grammar|CONT+MT|Grammar+CONT+MT")
      ->required();
  plan->add_option("--data", plan_data, "NN|LW")->capture_default_str();
  plan->add_option("--corpus", plan_corpus, "Translation corpus JSONL")->required();
  plan->add_option("--grammar-corpus", plan_grammar, "Grammar corpus JSONL (LGID)");
  plan->add_option("--rejected", plan_rejected, "Rejected map JSONL (contrastive stages)");
  plan->add_option("--out", plan_out, "Plan directory")->required();
  plan->callback([&] {
    forge::Template tpl = template_for_version(global.template_version);
    forge::DataFamily family = forge::data_family_from_name(plan_data);
    forge::TrainerHyperparams hp;
    forge::Corpus corpus = forge::read_corpus_jsonl(plan_corpus);
    forge::RejectedMap rejected;
    if (!plan_rejected.empty()) rejected = forge::read_rejected_map(plan_rejected);
    fs::create_directories(plan_out);

    forge::CurriculumPlan result;
    if (plan_config == "Instruct-MT") {
      result = forge::plan_single_task(forge::InstructionKind::MT, corpus, hp, family, nullptr,
                                       tpl, plan_out);
    } else if (plan_config == "Instruct-Cont") {
      result = forge::plan_single_task(forge::InstructionKind::Contrastive, corpus, hp, family,
                                       &rejected, tpl, plan_out);
    } else if (plan_config == "Instruct-Grammar") {
      forge::Corpus grammar =
          plan_grammar.empty() ? corpus : forge::read_corpus_jsonl(plan_grammar);
      result = forge::plan_single_task(forge::InstructionKind::Grammar, grammar, hp, family,
                                       nullptr, tpl, plan_out);
    } else if (plan_config == "CONT+MT") {
      result = forge::plan_cont_mt(corpus, hp, family, global.seed, rejected, tpl, plan_out);
    } else if (plan_config == "Grammar+CONT+MT") {
      if (plan_grammar.empty())
        throw forge::ForgeError(forge::ErrorCode::ConfigMissing,
                                "Grammar+CONT+MT needs --grammar-corpus");
      forge::Corpus grammar = forge::read_corpus_jsonl(plan_grammar);
      result = forge::plan_grammar_cont_mt(grammar, corpus, hp, family, global.seed, rejected,
                                           tpl, plan_out);
    } else {
      throw forge::ForgeError(forge::ErrorCode::InvalidArgument,
                              "unknown curriculum config '" + plan_config + "'");
    }
    write_config_snapshot(plan_out, ordered_json{{"subcommand", "plan-curriculum"},
                                                 {"config", plan_config},
                                                 {"data", plan_data},
                                                 {"stages", result.stages.size()},
                                                 {"seed", global.seed},
                                                 {"template_version", tpl.version}});
    std::cerr << "wrote " << result.stages.size() << "-stage plan to " << plan_out << "\n";
  });

  // ---- export-cpo --------------------------------------------------------
  auto* cpo = app.add_subcommand("export-cpo", "Preference JSONL for CPO-style trainers");
  std::string cpo_corpus, cpo_rejected, cpo_out;
  cpo->add_option("--corpus", cpo_corpus, "Canonical corpus JSONL")->required();
  cpo->add_option("--rejected", cpo_rejected, "Rejected map JSONL")->required();
  cpo->add_option("-o,--out", cpo_out, "Output preference JSONL")->required();
  cpo->callback([&] {
    forge::Template tpl = template_for_version(global.template_version);
    forge::Corpus corpus = forge::read_corpus_jsonl(cpo_corpus);
    forge::RejectedMap rejected = forge::read_rejected_map(cpo_rejected);
    std::vector<std::pair<forge::SentencePair, std::string>> pairs;
    size_t skipped = 0;
    for (const forge::SentencePair& pair : corpus.pairs) {
      auto it = rejected.find(pair.id);
      if (it == rejected.end()) {
        ++skipped;
        continue;
      }
      pairs.emplace_back(pair, it->second);
    }
    forge::export_cpo_dataset(pairs, tpl, cpo_out);
    if (skipped) std::cerr << "skipped " << skipped << " pairs without rejected translations\n";
    write_config_snapshot(cpo_out, ordered_json{{"subcommand", "export-cpo"},
                                                {"corpus", cpo_corpus},
                                                {"records", pairs.size()},
                                                {"skipped", skipped},
                                                {"template_version", tpl.version},
                                                {"seed", global.seed}});
    std::cerr << "wrote " << pairs.size() << " preference records\n";
  });

  // ---- evaluate ----------------------------------------------------------
  auto* eval = app.add_subcommand("evaluate", "Translate and score a test set");
  std::string eval_test, eval_which = "custom", eval_mode = "zero_shot", eval_system = "system",
              eval_pool, eval_strategy = "random", eval_vectors, eval_freq, eval_rejected,
              eval_out, eval_model = "aya23-8b";
  int eval_k = 0, eval_max_tokens = 256;
  double eval_temperature = 0.0;
  std::uint64_t eval_threshold = 5;
  bool eval_local_metric = false;
  eval->add_option("--test-set", eval_test, "Test set JSONL")->required();
  eval->add_option("--which", eval_which, "flores_subset|lebeval|custom")->capture_default_str();
  eval->add_option("--mode", eval_mode, "zero_shot|few_shot|contrastive_few_shot")
      ->capture_default_str();
  eval->add_option("--k", eval_k, "Demonstrations per prompt")->capture_default_str();
  eval->add_option("--system", eval_system, "System name for the run record")
      ->capture_default_str();
  eval->add_option("--pool", eval_pool, "Demonstration pool JSONL");
  eval->add_option("--strategy", eval_strategy, "random|embedding|frequency")
      ->capture_default_str();
  eval->add_option("--vectors", eval_vectors, "Embedding sidecar JSONL");
  eval->add_option("--freq", eval_freq, "Frequency matrix JSON");
  eval->add_option("--threshold", eval_threshold, "Rare-token threshold")->capture_default_str();
  eval->add_option("--rejected", eval_rejected, "Rejected map JSONL (contrastive demos)");
  eval->add_option("--model", eval_model, "Model id sent to the endpoint")
      ->capture_default_str();
  eval->add_option("--temperature", eval_temperature, "Sampling temperature")
      ->capture_default_str();
  eval->add_option("--max-new-tokens", eval_max_tokens, "Completion budget")
      ->capture_default_str();
  eval->add_flag("--local-metric", eval_local_metric,
                 "Score with the built-in chrF instead of the remote scorer");
  eval->add_option("-o,--out", eval_out, "Output run JSON")->required();
  eval->callback([&] {
    forge::Template tpl = template_for_version(global.template_version);
    forge::ChatClient chat(chat_options_from_env(global.in_flight, global.retry_base_ms));
    ScorerChoice scorer = make_scorer(eval_local_metric, global.retry_base_ms);
    forge::TestSet test_set = forge::load_test_set(eval_test, which_from_name(eval_which));

    forge::PromptSpec spec;
    spec.mode = forge::prompt_mode_from_name(eval_mode);
    if (spec.mode != forge::PromptMode::zero_shot && eval_k == 0) eval_k = 3;
    spec.k = eval_k;
    spec.tpl = tpl;
    spec.strategy.kind = forge::selection_kind_from_name(eval_strategy);
    spec.strategy.k = eval_k;
    spec.strategy.seed = global.seed;
    if (spec.strategy.kind == forge::SelectionKind::frequency)
      spec.strategy.threshold = eval_threshold;

    forge::GenerationConfig cfg;
    cfg.model_id = eval_model;
    cfg.temperature = eval_temperature;
    cfg.max_new_tokens = eval_max_tokens;
    cfg.seed = global.seed;

    forge::ExamplePool pool;
    forge::FrequencyMatrix fm;
    forge::RejectedMap rejected;
    std::unique_ptr<forge::EmbeddingClient> embedder;
    forge::EvalBackends backends;
    backends.chat = &chat;
    backends.scorer = scorer.scorer.get();

    if (spec.mode != forge::PromptMode::zero_shot) {
      if (eval_pool.empty())
        throw forge::ForgeError(forge::ErrorCode::ConfigMissing, "few-shot modes need --pool");
      pool.pairs = forge::read_corpus_jsonl(eval_pool).pairs;
      if (spec.strategy.kind == forge::SelectionKind::embedding) {
        if (!eval_vectors.empty())
          forge::attach_vectors(pool, forge::read_embedding_sidecar(eval_vectors));
        embedder = make_embedder(eval_vectors, global.retry_base_ms);
        if (!embedder)
          throw forge::ForgeError(forge::ErrorCode::ConfigMissing,
                                  "set FORGE_EMBED_BASE or pass --vectors");
        if (!pool.vectors) {
          std::vector<std::string> texts;
          for (const auto& pair : pool.pairs) texts.push_back(pair.source_leb);
          pool.vectors = embedder->embed_batch(texts);
        }
        backends.embedder = embedder.get();
      }
      if (spec.strategy.kind == forge::SelectionKind::frequency) {
        if (eval_freq.empty())
          throw forge::ForgeError(forge::ErrorCode::ConfigMissing,
                                  "frequency strategy needs --freq");
        fm = forge::read_frequency_matrix(eval_freq);
        backends.freq = &fm;
      }
      backends.pool = &pool;
    }
    if (!eval_rejected.empty()) {
      rejected = forge::read_rejected_map(eval_rejected);
      backends.rejected = &rejected;
    }

    forge::EvalRun run = forge::run_eval(eval_system, test_set, spec, cfg, backends);
    run.config_snapshot["seed"] = std::to_string(global.seed);
    run.config_snapshot["api_base"] = env_or_empty("FORGE_API_BASE");
    run.config_snapshot["scorer"] =
        eval_local_metric ? "local-chrf" : env_or_empty("FORGE_SCORER_BASE");
    forge::write_eval_run(run, eval_out);
    write_config_snapshot(eval_out, ordered_json{{"subcommand", "evaluate"},
                                                 {"system", eval_system},
                                                 {"mode", eval_mode},
                                                 {"k", eval_k},
                                                 {"scored", run.scored.size()},
                                                 {"failures", run.failures.size()},
                                                 {"seed", global.seed}});
    std::cout << eval_system << " " << test_set.name << " "
              << forge::shot_label(spec.mode, spec.k) << " mean=" << run.mean_score() << " n="
              << run.scored.size() << "\n";
  });

  // ---- ablate ------------------------------------------------------------
  auto* ablate = app.add_subcommand("ablate", "Strategy x K ablation grid (CSV)");
  std::string ablate_test, ablate_which = "custom", ablate_pool, ablate_vectors, ablate_freq,
              ablate_out;
  std::vector<int> ablate_ks{3, 5, 7};
  std::vector<std::string> ablate_strategies{"random", "embedding", "frequency"};
  std::uint64_t ablate_threshold = 5;
  bool ablate_local_metric = false;
  std::string ablate_model = "aya23-8b";
  ablate->add_option("--test-set", ablate_test, "Test set JSONL")->required();
  ablate->add_option("--which", ablate_which, "flores_subset|lebeval|custom")
      ->capture_default_str();
  ablate->add_option("--pool", ablate_pool, "Demonstration pool JSONL")->required();
  ablate->add_option("--ks", ablate_ks, "K values")->delimiter(',')->capture_default_str();
  ablate->add_option("--strategies", ablate_strategies, "Selection strategies")
      ->delimiter(',')
      ->capture_default_str();
  ablate->add_option("--vectors", ablate_vectors, "Embedding sidecar JSONL");
  ablate->add_option("--freq", ablate_freq, "Frequency matrix JSON");
  ablate->add_option("--threshold", ablate_threshold, "Rare-token threshold")
      ->capture_default_str();
  ablate->add_option("--model", ablate_model, "Model id")->capture_default_str();
  ablate->add_flag("--local-metric", ablate_local_metric, "Score with the built-in chrF");
  ablate->add_option("-o,--out", ablate_out, "Output CSV")->required();
  ablate->callback([&] {
    forge::Template tpl = template_for_version(global.template_version);
    forge::ChatClient chat(chat_options_from_env(global.in_flight, global.retry_base_ms));
    ScorerChoice scorer = make_scorer(ablate_local_metric, global.retry_base_ms);
    forge::TestSet test_set = forge::load_test_set(ablate_test, which_from_name(ablate_which));

    forge::ExamplePool pool;
    pool.pairs = forge::read_corpus_jsonl(ablate_pool).pairs;
    forge::FrequencyMatrix fm;
    std::unique_ptr<forge::EmbeddingClient> embedder;

    forge::EvalBackends backends;
    backends.chat = &chat;
    backends.scorer = scorer.scorer.get();
    backends.pool = &pool;

    std::vector<forge::SelectionStrategy> strategies;
    for (const std::string& name : ablate_strategies) {
      forge::SelectionStrategy strategy;
      strategy.kind = forge::selection_kind_from_name(name);
      strategy.seed = global.seed;
      if (strategy.kind == forge::SelectionKind::embedding) {
        if (!ablate_vectors.empty() && !pool.vectors)
          forge::attach_vectors(pool, forge::read_embedding_sidecar(ablate_vectors));
        if (!embedder) {
          embedder = make_embedder(ablate_vectors, global.retry_base_ms);
          if (!embedder)
            throw forge::ForgeError(forge::ErrorCode::ConfigMissing,
                                    "set FORGE_EMBED_BASE or pass --vectors");
          if (!pool.vectors) {
            std::vector<std::string> texts;
            for (const auto& pair : pool.pairs) texts.push_back(pair.source_leb);
            pool.vectors = embedder->embed_batch(texts);
          }
          backends.embedder = embedder.get();
        }
      }
      if (strategy.kind == forge::SelectionKind::frequency) {
        strategy.threshold = ablate_threshold;
        if (ablate_freq.empty())
          throw forge::ForgeError(forge::ErrorCode::ConfigMissing,
                                  "frequency strategy needs --freq");
        fm = forge::read_frequency_matrix(ablate_freq);
        backends.freq = &fm;
      }
      strategies.push_back(strategy);
    }

    forge::GenerationConfig cfg;
    cfg.model_id = ablate_model;
    cfg.seed = global.seed;
    std::string csv = forge::ablation_sweep(strategies, ablate_ks, test_set, cfg, backends);
    std::ofstream out(ablate_out, std::ios::binary);
    if (!out) throw forge::ForgeError(forge::ErrorCode::IoError, "cannot write " + ablate_out);
    out << csv;
    out.close();
    write_config_snapshot(ablate_out, ordered_json{{"subcommand", "ablate"},
                                                   {"strategies", ablate_strategies},
                                                   {"ks", ablate_ks},
                                                   {"threshold", ablate_threshold},
                                                   {"seed", global.seed}});
    std::cout << csv;
  });

  // ---- report ------------------------------------------------------------
  auto* report = app.add_subcommand("report", "Aggregate eval runs into the results table");
  std::vector<std::string> report_runs;
  std::string report_out, report_csv;
  report->add_option("--runs", report_runs, "Eval run JSON files")->required();
  report->add_option("--out", report_out, "Output text table");
  report->add_option("--csv", report_csv, "Output CSV table");
  report->callback([&] {
    std::vector<forge::EvalRun> runs;
    for (const std::string& path : report_runs) runs.push_back(forge::read_eval_run(path));
    forge::ResultsTable table = forge::aggregate_table(runs);
    std::string text = table.render_text();
    std::cout << text;
    if (!report_out.empty()) {
      std::ofstream out(report_out, std::ios::binary);
      if (!out)
        throw forge::ForgeError(forge::ErrorCode::IoError, "cannot write " + report_out);
      out << text;
      out.close();
      write_config_snapshot(report_out, ordered_json{{"subcommand", "report"},
                                                     {"runs", report_runs.size()}});
    }
    if (!report_csv.empty()) {
      std::ofstream out(report_csv, std::ios::binary);
      if (!out)
        throw forge::ForgeError(forge::ErrorCode::IoError, "cannot write " + report_csv);
      out << table.render_csv();
    }
  });

  // global flags (--seed, --template-version, ...) may follow the subcommand
  for (CLI::App* sub : app.get_subcommands([](CLI::App*) { return true; }))
    sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;  // usage error
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const forge::ForgeError& e) {
    std::cerr << "forge: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "forge: Internal: " << e.what() << "\n";
    return 1;
  }
}
