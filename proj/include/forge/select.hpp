#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "forge/corpus.hpp"

namespace forge {

struct EmbeddingVector {
  std::vector<double> values;
  size_t dim() const { return values.size(); }
  bool operator==(const EmbeddingVector&) const = default;
};

// Demonstration store for few-shot selection. When vectors are present they
// parallel pairs one-to-one with a uniform dimension.
struct ExamplePool {
  std::vector<SentencePair> pairs;
  std::optional<std::vector<EmbeddingVector>> vectors;

  void validate() const;
};

struct FrequencyMatrix {
  std::map<std::string, std::uint64_t> counts;
  std::uint64_t total_tokens = 0;
  std::string tokenizer_version;
};

enum class SelectionKind { random, embedding, frequency };

const char* selection_kind_name(SelectionKind kind);
SelectionKind selection_kind_from_name(const std::string& name);

struct SelectionStrategy {
  SelectionKind kind = SelectionKind::random;
  int k = 3;
  std::optional<std::uint64_t> threshold;  // frequency kind only
  std::uint64_t seed = 42;
};

struct Selection {
  std::vector<SentencePair> pairs;
  bool clamped = false;  // k exceeded the pool size
};

// k distinct pairs sampled uniformly without replacement under seed. When
// k >= pool size the whole pool comes back shuffled with clamped set.
Selection select_random(const ExamplePool& pool, int k, std::uint64_t seed);

// Top-k by cosine similarity to query, descending; ties break toward the
// lower pool index.
Selection select_by_embedding(const ExamplePool& pool, const EmbeddingVector& query, int k);

// Rank pool pairs by the number of distinct rare input tokens they contain
// (rare: corpus count < threshold, absent tokens count 0); ties break toward
// the lower pool index; any shortfall is filled by select_random over the
// remaining pool under the given seed.
Selection select_by_frequency(const ExamplePool& pool, const std::string& input_sentence,
                              const FrequencyMatrix& fm, std::uint64_t threshold, int k,
                              std::uint64_t seed);

// Token counts over the version-stamped whitespace-and-punctuation tokenizer.
// Plain-text files count every line; .jsonl files count the source_leb field.
FrequencyMatrix build_frequency_matrix(const std::vector<std::filesystem::path>& corpus_paths);

// Persisted form: {"tokenizer_version", "total_tokens", "counts"}.
void write_frequency_matrix(const FrequencyMatrix& fm, const std::filesystem::path& path);
FrequencyMatrix read_frequency_matrix(const std::filesystem::path& path);

// Embedding sidecar JSONL: {"id": str, "vector": [real]}, keyed by pair id.
std::map<std::string, EmbeddingVector> read_embedding_sidecar(const std::filesystem::path& path);
void write_embedding_sidecar(const std::map<std::string, EmbeddingVector>& vectors,
                             const std::filesystem::path& path);

// Attach sidecar vectors to a pool in pair order. Throws MissingVectors when
// a pair has no entry, DimMismatch on non-uniform dims.
void attach_vectors(ExamplePool& pool, const std::map<std::string, EmbeddingVector>& by_id);

}  // namespace forge
