#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "forge/corpus.hpp"
#include "forge/instruct.hpp"
#include "forge/select.hpp"

namespace forge {

struct GenerationConfig {
  std::string model_id = "aya23-8b";
  double temperature = 0.7;
  int max_new_tokens = 256;
  std::vector<std::string> stop_sequences;
  std::optional<std::uint64_t> seed;

  void validate() const;
};

struct ClientOptions {
  std::string base_url;  // e.g. http://127.0.0.1:8080
  std::string api_key;
  int max_attempts = 5;
  int backoff_base_ms = 50;
  int in_flight_limit = 4;
};

struct ClientStats {
  std::atomic<std::uint64_t> requests{0};
  std::atomic<std::uint64_t> retries{0};
};

// Run tasks with at most `limit` in flight; rethrows the first task failure
// after all workers drain.
void run_bounded(const std::vector<std::function<void()>>& tasks, int limit);

// Close the calling thread's cached keep-alive connections. Needed when an
// endpoint goes away mid-process (tests tearing down mock servers); harmless
// otherwise.
void close_thread_connections();

// Chat-completion client over POST <base>/v1/chat/completions with the
// {model, messages, temperature, max_tokens, stop, seed} body. Transient
// failures (connection errors, 429, 5xx) are retried with exponential backoff
// and jitter up to max_attempts.
class ChatClient {
 public:
  explicit ChatClient(ClientOptions options);

  // First completion text with stop sequences stripped.
  std::string generate_translation(const std::string& prompt, const GenerationConfig& cfg);

  const ClientStats& stats() const { return stats_; }
  const ClientOptions& options() const { return options_; }

 private:
  ClientOptions options_;
  ClientStats stats_;
};

struct RejectedSample {
  std::string pair_id;
  std::string rejected;
};

struct GenerateRejectedResult {
  std::vector<RejectedSample> items;   // input order, dropped pairs omitted
  std::vector<std::string> dropped;    // pair ids where all samples were degenerate
};

// Sample one suboptimal translation per pair from the base model via
// zero-shot prompts. Candidates equal to the gold translation (normalized)
// are resampled; after max_attempts total attempts the pair is dropped and
// reported, never silently kept.
GenerateRejectedResult generate_rejected(const std::vector<SentencePair>& pairs,
                                         const GenerationConfig& cfg, ChatClient& chat,
                                         const Template& tpl, int max_attempts = 3);

// Embedding client: remote POST <base>/v1/embeddings {model, input:[str]}
// -> {data:[{embedding:[real]}]}, or an offline sidecar map keyed by the
// lookup string (pair id or raw text, caller's choice).
class EmbeddingClient {
 public:
  explicit EmbeddingClient(ClientOptions options);
  explicit EmbeddingClient(std::map<std::string, EmbeddingVector> sidecar);

  std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts);

 private:
  std::optional<ClientOptions> options_;
  std::map<std::string, EmbeddingVector> sidecar_;
};

struct ScoreItem {
  std::string id;
  std::string source;
  std::string hypothesis;
  std::optional<std::string> reference;
};

struct ScoredSentence {
  std::string id;
  std::string hypothesis;
  double score = 0.0;  // always on the [0,100] scale
};

class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual std::vector<ScoredSentence> score(const std::vector<ScoreItem>& items) = 0;
};

enum class ScoreScale { auto_detect, percent, unit };

// Remote scorer over POST <base>/score {items:[{src,mt,ref}]} -> {scores:[real]}.
// A batch reported entirely within [0,1] is treated as unit scale under
// auto_detect and rescaled to [0,100].
class RemoteScorer : public Scorer {
 public:
  explicit RemoteScorer(ClientOptions options, ScoreScale scale = ScoreScale::auto_detect);
  std::vector<ScoredSentence> score(const std::vector<ScoreItem>& items) override;

 private:
  ClientOptions options_;
  ScoreScale scale_;
};

// Split a grammar chapter at blank-line boundaries, merging adjacent
// fragments into 300-800 word chunks.
std::vector<std::string> chunk_chapter(const std::string& chapter_text);

// The fixed synthesis prompt wrapping one chunk; asks for `n` examples as
// machine-parsable LEB:/EN:/RULE: line triples.
std::string grammar_synthesis_prompt(const std::string& chunk, int n);

struct SynthesisResult {
  std::vector<GrammarExample> examples;
  size_t discarded = 0;  // started but incomplete triples
};

// Chunk the chapter, query the model per chunk, and parse complete triples
// into GrammarExamples (origin LGID, hint = rule text). Throws
// NoParsableExamples when nothing usable comes back.
SynthesisResult synthesize_grammar_examples(const std::string& chapter_text, int chapter_index,
                                            const GenerationConfig& cfg, int n, ChatClient& chat);

// Parse LEB:/EN:/RULE: triples from one model response (exposed for tests).
struct ParsedTriple {
  std::string source;
  std::string target;
  std::string rule;
};
std::vector<ParsedTriple> parse_synthesis_triples(const std::string& response, size_t* discarded);

}  // namespace forge
