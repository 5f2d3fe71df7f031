#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace forge {

enum class Origin { MADAR, OS, LW, LGID, LEBEVAL, OTHER };

const char* origin_name(Origin origin);
Origin origin_from_name(const std::string& name);

// One aligned Lebanese/English sentence. source_leb and target_en are
// whitespace-normalized, non-empty; hint carries the grammar rule or
// preference note when present (always present for LGID pairs).
struct SentencePair {
  std::string id;
  std::string source_leb;
  std::string target_en;
  Origin origin = Origin::OTHER;
  std::optional<std::string> hint;

  bool operator==(const SentencePair&) const = default;
};

struct Corpus {
  std::string name;
  std::vector<SentencePair> pairs;
  std::map<std::string, std::string> metadata;

  bool operator==(const Corpus&) const = default;
  size_t size() const { return pairs.size(); }
};

struct GrammarExample {
  SentencePair pair;
  std::string rule_title;
  std::string rule_text;
  int chapter_index = 1;
};

enum class TestSetKind { flores_subset, lebeval, custom };

struct TestSet {
  std::string name;  // "flores_subset", "lebeval" or "custom"
  std::vector<SentencePair> pairs;
  std::string file_sha;  // FNV-1a of the source file, recorded for provenance
};

enum class CorpusFormat { tsv_pair, jsonl };

// Ingest a raw corpus file. TSV: exactly two tab-separated columns per line,
// no header; extra tabs are MalformedRecord. JSONL: one object per line with
// source_leb/target_en (hint honored when present). Ids are assigned as
// "<origin>-<zero-padded 6-digit 1-based line index>", input order preserved.
Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format, Origin origin);

// Canonical corpus JSONL: {"id","source_leb","target_en","origin","hint"}.
// read_corpus_jsonl preserves every field, so write/read round-trips exactly.
void write_corpus_jsonl(const Corpus& corpus, const std::filesystem::path& path);
Corpus read_corpus_jsonl(const std::filesystem::path& path, const std::string& name = "");

// Keep the first occurrence of each normalized (source, target) pair.
Corpus dedup(const Corpus& corpus);

// Deterministic shuffle under seed, then contiguous slices sized by
// round-half-up of the cumulative fractions (50/50 on odd n gives the first
// slice the extra element). Slices partition the input.
std::vector<Corpus> split_corpus(const Corpus& corpus, const std::vector<double>& fractions,
                                 std::uint64_t seed);

// Load a test set from canonical JSONL, validating the canonical sizes
// (flores_subset: 500, lebeval: 70) unless kind is custom.
TestSet load_test_set(const std::filesystem::path& path, TestSetKind kind);

inline constexpr size_t kFloresSubsetSize = 500;
inline constexpr size_t kLebEvalSize = 70;

}  // namespace forge
