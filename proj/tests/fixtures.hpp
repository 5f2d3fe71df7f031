#pragma once

// Synthetic corpus fixtures shaped like the released data files: same record
// schema, canonical sizes (LW ~3K with duplicates, LGID 2836 hinted pairs
// across 32 chapters, FLoRes subset 500, LebEval 70). Deterministic under
// fixed seeds so counts can be pinned.

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "forge/corpus.hpp"
#include "forge/select.hpp"

namespace forgetest {

// Post-dedup size of the synthetic LW release: 3019 unique pairs plus 93
// duplicated lines (3112 raw). Pinned; within 5% of the nominal 3K.
inline constexpr size_t kLwUniquePairs = 3019;
inline constexpr size_t kLwDuplicateLines = 93;
inline constexpr size_t kLgidPairs = 2836;
inline constexpr int kLgidChapters = 32;

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    dir_ = std::filesystem::temp_directory_path() /
           ("forge-" + tag + "-" + std::to_string(::getpid()) + "-" +
            std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(dir_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(dir_, ec);
  }
  const std::filesystem::path& path() const { return dir_; }
  std::filesystem::path operator/(const std::string& name) const { return dir_ / name; }

 private:
  std::filesystem::path dir_;
};

inline const std::vector<std::string>& arabic_words() {
  static const std::vector<std::string> words = {
      "مرحبا", "كيفك",  "شو",    "في",    "عم",    "يشرب", "قهوة",  "بيت",
      "كتير",  "منيح",  "يلا",   "هيدا",  "بدك",   "تاكل", "انا",   "بحبك",
      "الجو",  "حلو",   "اليوم", "حبيبي", "وينك",  "ما",   "شي",    "رح",
      "روح",   "الشغل", "بكرا",  "مبسوط", "كيف",   "خبر",  "طاولة", "كتاب",
      "سهرة",  "ضيعة",  "زعتر",  "كنافة", "ورق",   "عنب",  "جديد",  "قديم"};
  return words;
}

inline const std::vector<std::string>& english_words() {
  static const std::vector<std::string> words = {
      "the",    "house",  "coffee", "how",   "are",     "you",   "today", "good",
      "very",   "friend", "going",  "work",  "tomorrow", "happy", "weather", "nice",
      "what",   "this",   "table",  "book",  "evening", "village", "thyme", "pastry",
      "grape",  "leaves", "new",    "old",   "drink",   "eat",   "love",  "news"};
  return words;
}

inline std::string sentence_from(const std::vector<std::string>& bank, std::mt19937_64& rng,
                                 int min_words = 3, int max_words = 7) {
  int n = min_words + static_cast<int>(rng() % (max_words - min_words + 1));
  std::string out;
  for (int i = 0; i < n; ++i) {
    if (i) out += " ";
    out += bank[rng() % bank.size()];
  }
  return out;
}

struct RawPair {
  std::string source;
  std::string target;
};

inline std::vector<RawPair> unique_pairs(size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::set<std::string> seen;
  std::vector<RawPair> pairs;
  while (pairs.size() < count) {
    RawPair pair{sentence_from(arabic_words(), rng), sentence_from(english_words(), rng)};
    if (seen.insert(pair.source + "\t" + pair.target).second) pairs.push_back(std::move(pair));
  }
  return pairs;
}

// LW release: two-column TSV with kLwDuplicateLines duplicated lines mixed in.
inline void write_lw_release_tsv(const std::filesystem::path& path) {
  std::vector<RawPair> pairs = unique_pairs(kLwUniquePairs, 7001);
  std::vector<RawPair> lines = pairs;
  for (size_t j = 0; j < kLwDuplicateLines; ++j) {
    const RawPair& dup = pairs[(j * 32) % pairs.size()];
    size_t at = (j * 97) % lines.size();
    lines.insert(lines.begin() + static_cast<long>(at), dup);
  }
  std::ofstream out(path, std::ios::binary);
  for (const RawPair& pair : lines) out << pair.source << "\t" << pair.target << "\n";
}

// LGID release: foreign JSONL with a grammar hint per record, 32 chapters.
inline void write_lgid_release_jsonl(const std::filesystem::path& path) {
  std::vector<RawPair> pairs = unique_pairs(kLgidPairs, 7002);
  std::ofstream out(path, std::ios::binary);
  size_t per_chapter = kLgidPairs / kLgidChapters;  // 88; first 20 chapters take one extra
  size_t extra = kLgidPairs - per_chapter * kLgidChapters;
  size_t i = 0;
  for (int chapter = 1; chapter <= kLgidChapters; ++chapter) {
    size_t take = per_chapter + (static_cast<size_t>(chapter) <= extra ? 1 : 0);
    for (size_t j = 0; j < take; ++j, ++i) {
      std::string hint = "Chapter " + std::to_string(chapter) + " rule " + std::to_string(j + 1) +
                         ": the marker in this sentence signals its tense.";
      out << "{\"source_leb\": \"" << pairs[i].source << "\", \"target_en\": \""
          << pairs[i].target << "\", \"hint\": \"" << hint << "\"}\n";
    }
  }
}

inline void write_test_set_jsonl(const std::filesystem::path& path, size_t count,
                                 std::uint64_t seed) {
  std::vector<RawPair> pairs = unique_pairs(count, seed);
  std::ofstream out(path, std::ios::binary);
  for (const RawPair& pair : pairs)
    out << "{\"source_leb\": \"" << pair.source << "\", \"target_en\": \"" << pair.target
        << "\"}\n";
}

inline void write_flores_release(const std::filesystem::path& path) {
  write_test_set_jsonl(path, forge::kFloresSubsetSize, 7003);
}

inline void write_lebeval_release(const std::filesystem::path& path) {
  write_test_set_jsonl(path, forge::kLebEvalSize, 7004);
}

inline forge::Corpus make_corpus(size_t count, std::uint64_t seed, forge::Origin origin,
                                 const std::string& name) {
  std::vector<RawPair> raw = unique_pairs(count, seed);
  forge::Corpus corpus;
  corpus.name = name;
  for (size_t i = 0; i < raw.size(); ++i) {
    forge::SentencePair pair;
    char id[32];
    std::snprintf(id, sizeof(id), "%s-%06zu", origin_name(origin), i + 1);
    pair.id = id;
    pair.source_leb = raw[i].source;
    pair.target_en = raw[i].target;
    pair.origin = origin;
    corpus.pairs.push_back(std::move(pair));
  }
  return corpus;
}

inline forge::ExamplePool make_pool(size_t count, std::uint64_t seed) {
  forge::ExamplePool pool;
  pool.pairs = make_corpus(count, seed, forge::Origin::LW, "pool").pairs;
  return pool;
}

}  // namespace forgetest
