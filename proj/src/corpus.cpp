#include "forge/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_set>

#include "forge/errors.hpp"
#include "forge/text.hpp"
#include "json.hpp"

namespace forge {

const char* origin_name(Origin origin) {
  switch (origin) {
    case Origin::MADAR: return "MADAR";
    case Origin::OS: return "OS";
    case Origin::LW: return "LW";
    case Origin::LGID: return "LGID";
    case Origin::LEBEVAL: return "LEBEVAL";
    case Origin::OTHER: return "OTHER";
  }
  return "OTHER";
}

Origin origin_from_name(const std::string& name) {
  if (name == "MADAR") return Origin::MADAR;
  if (name == "OS") return Origin::OS;
  if (name == "LW") return Origin::LW;
  if (name == "LGID") return Origin::LGID;
  if (name == "LEBEVAL") return Origin::LEBEVAL;
  if (name == "OTHER") return Origin::OTHER;
  throw ForgeError(ErrorCode::InvalidArgument, "unknown origin '" + name + "'");
}

static std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ForgeError(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

static std::vector<std::string> split_lines(const std::string& content) {
  std::vector<std::string> lines;
  size_t start = 0;
  while (start < content.size()) {
    size_t end = content.find('\n', start);
    if (end == std::string::npos) end = content.size();
    std::string line = content.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    start = end + 1;
  }
  return lines;
}

static std::string make_id(Origin origin, size_t index1) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06zu", index1);
  return std::string(origin_name(origin)) + "-" + buf;
}

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format, Origin origin) {
  std::string content = read_file(path);
  if (content.empty()) throw ForgeError(ErrorCode::EmptyFile, path.string() + " is empty");
  if (!is_valid_utf8(content))
    throw ForgeError(ErrorCode::EncodingError, path.string() + " is not valid UTF-8");

  Corpus corpus;
  corpus.name = path.stem().string();
  corpus.metadata["source_file"] = path.filename().string();
  corpus.metadata["file_sha"] = fnv1a64_hex(content);

  std::vector<std::string> lines = split_lines(content);
  size_t line_no = 0;
  size_t next_index = 1;
  bool any_record = false;
  for (const std::string& line : lines) {
    ++line_no;
    if (line.empty()) continue;
    any_record = true;
    SentencePair pair;
    pair.origin = origin;
    if (format == CorpusFormat::tsv_pair) {
      size_t first_tab = line.find('\t');
      if (first_tab == std::string::npos)
        throw ForgeError(ErrorCode::MalformedRecord,
                         "line " + std::to_string(line_no) + ": expected 2 tab-separated columns");
      if (line.find('\t', first_tab + 1) != std::string::npos)
        throw ForgeError(ErrorCode::MalformedRecord,
                         "line " + std::to_string(line_no) + ": extra tab column");
      pair.source_leb = normalize_text(line.substr(0, first_tab));
      pair.target_en = normalize_text(line.substr(first_tab + 1));
    } else {
      nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
      if (obj.is_discarded() || !obj.is_object())
        throw ForgeError(ErrorCode::MalformedRecord,
                         "line " + std::to_string(line_no) + ": invalid JSON object");
      if (!obj.contains("source_leb") || !obj.contains("target_en"))
        throw ForgeError(ErrorCode::MalformedRecord,
                         "line " + std::to_string(line_no) + ": missing source_leb/target_en");
      pair.source_leb = normalize_text(obj["source_leb"].get<std::string>());
      pair.target_en = normalize_text(obj["target_en"].get<std::string>());
      if (obj.contains("hint") && !obj["hint"].is_null())
        pair.hint = normalize_text(obj["hint"].get<std::string>());
    }
    if (pair.source_leb.empty() || pair.target_en.empty())
      throw ForgeError(ErrorCode::MalformedRecord,
                       "line " + std::to_string(line_no) + ": empty source or target");
    if (pair.origin == Origin::LGID && !pair.hint)
      throw ForgeError(ErrorCode::MalformedRecord,
                       "line " + std::to_string(line_no) + ": LGID pair lacks the grammar hint");
    pair.id = make_id(origin, next_index++);
    corpus.pairs.push_back(std::move(pair));
  }
  if (!any_record) throw ForgeError(ErrorCode::EmptyFile, path.string() + " has no records");
  return corpus;
}

void write_corpus_jsonl(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ForgeError(ErrorCode::IoError, "cannot write " + path.string());
  for (const SentencePair& pair : corpus.pairs) {
    nlohmann::ordered_json obj;
    obj["id"] = pair.id;
    obj["source_leb"] = pair.source_leb;
    obj["target_en"] = pair.target_en;
    obj["origin"] = origin_name(pair.origin);
    obj["hint"] = pair.hint ? nlohmann::ordered_json(*pair.hint) : nlohmann::ordered_json(nullptr);
    out << obj.dump() << "\n";
  }
}

Corpus read_corpus_jsonl(const std::filesystem::path& path, const std::string& name) {
  std::string content = read_file(path);
  if (content.empty()) throw ForgeError(ErrorCode::EmptyFile, path.string() + " is empty");
  if (!is_valid_utf8(content))
    throw ForgeError(ErrorCode::EncodingError, path.string() + " is not valid UTF-8");

  Corpus corpus;
  corpus.name = name.empty() ? path.stem().string() : name;
  corpus.metadata["source_file"] = path.filename().string();
  corpus.metadata["file_sha"] = fnv1a64_hex(content);

  size_t line_no = 0;
  std::unordered_set<std::string> seen_ids;
  for (const std::string& line : split_lines(content)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.is_object())
      throw ForgeError(ErrorCode::MalformedRecord,
                       "line " + std::to_string(line_no) + ": invalid JSON object");
    SentencePair pair;
    try {
      pair.id = obj.at("id").get<std::string>();
      pair.source_leb = obj.at("source_leb").get<std::string>();
      pair.target_en = obj.at("target_en").get<std::string>();
      pair.origin = origin_from_name(obj.at("origin").get<std::string>());
      if (obj.contains("hint") && !obj["hint"].is_null()) pair.hint = obj["hint"].get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw ForgeError(ErrorCode::MalformedRecord,
                       "line " + std::to_string(line_no) + ": " + e.what());
    }
    if (pair.source_leb.empty() || pair.target_en.empty())
      throw ForgeError(ErrorCode::MalformedRecord,
                       "line " + std::to_string(line_no) + ": empty source or target");
    if (pair.origin == Origin::LGID && !pair.hint)
      throw ForgeError(ErrorCode::MalformedRecord,
                       "line " + std::to_string(line_no) + ": LGID pair lacks the grammar hint");
    if (!seen_ids.insert(pair.id).second)
      throw ForgeError(ErrorCode::MalformedRecord,
                       "line " + std::to_string(line_no) + ": duplicate id " + pair.id);
    corpus.pairs.push_back(std::move(pair));
  }
  if (corpus.pairs.empty()) throw ForgeError(ErrorCode::EmptyFile, path.string() + " has no records");
  return corpus;
}

Corpus dedup(const Corpus& corpus) {
  Corpus out;
  out.name = corpus.name;
  out.metadata = corpus.metadata;
  std::unordered_set<std::string> seen;
  for (const SentencePair& pair : corpus.pairs) {
    std::string key = normalize_text(pair.source_leb) + "\x1f" + normalize_text(pair.target_en);
    if (seen.insert(std::move(key)).second) out.pairs.push_back(pair);
  }
  return out;
}

// Fisher-Yates with an explicit bounded draw so the permutation is identical
// across standard libraries.
static void deterministic_shuffle(std::vector<size_t>& items, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (size_t i = items.size(); i > 1; --i) {
    size_t j = static_cast<size_t>(rng() % i);
    std::swap(items[i - 1], items[j]);
  }
}

std::vector<Corpus> split_corpus(const Corpus& corpus, const std::vector<double>& fractions,
                                 std::uint64_t seed) {
  if (fractions.empty())
    throw ForgeError(ErrorCode::InvalidFractions, "fractions must be non-empty");
  double sum = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0)) throw ForgeError(ErrorCode::InvalidFractions, "fractions must be > 0");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw ForgeError(ErrorCode::InvalidFractions, "fractions must sum to 1");

  const size_t n = corpus.pairs.size();
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  deterministic_shuffle(order, seed);

  // Boundaries at round-half-up of cumulative fraction * n; the first slice
  // of a 50/50 split gets the extra element on odd n.
  std::vector<size_t> bounds;
  double cum = 0.0;
  for (size_t s = 0; s + 1 < fractions.size(); ++s) {
    cum += fractions[s];
    bounds.push_back(static_cast<size_t>(std::floor(cum * static_cast<double>(n) + 0.5)));
  }
  bounds.push_back(n);

  std::vector<Corpus> slices;
  size_t start = 0;
  for (size_t s = 0; s < fractions.size(); ++s) {
    Corpus slice;
    slice.name = corpus.name + "-slice" + std::to_string(s + 1);
    slice.metadata = corpus.metadata;
    slice.metadata["split_seed"] = std::to_string(seed);
    slice.metadata["split_index"] = std::to_string(s + 1);
    size_t end = std::max(bounds[s], start);
    for (size_t i = start; i < end; ++i) slice.pairs.push_back(corpus.pairs[order[i]]);
    start = end;
    slices.push_back(std::move(slice));
  }
  return slices;
}

TestSet load_test_set(const std::filesystem::path& path, TestSetKind kind) {
  Origin origin = kind == TestSetKind::lebeval ? Origin::LEBEVAL : Origin::OTHER;
  std::string content = read_file(path);
  if (content.empty()) throw ForgeError(ErrorCode::EmptyFile, path.string() + " is empty");

  TestSet set;
  set.file_sha = fnv1a64_hex(content);
  set.name = kind == TestSetKind::flores_subset ? "flores_subset"
             : kind == TestSetKind::lebeval     ? "lebeval"
                                                : "custom";
  size_t line_no = 0;
  size_t next_index = 1;
  for (const std::string& line : split_lines(content)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.is_object())
      throw ForgeError(ErrorCode::MalformedRecord,
                       "line " + std::to_string(line_no) + ": invalid JSON object");
    if (!obj.contains("source_leb") || !obj.contains("target_en"))
      throw ForgeError(ErrorCode::MalformedRecord,
                       "line " + std::to_string(line_no) + ": missing source_leb/target_en");
    SentencePair pair;
    pair.source_leb = normalize_text(obj["source_leb"].get<std::string>());
    pair.target_en = normalize_text(obj["target_en"].get<std::string>());
    pair.origin = obj.contains("origin") && obj["origin"].is_string()
                      ? origin_from_name(obj["origin"].get<std::string>())
                      : origin;
    pair.id = obj.contains("id") && obj["id"].is_string() ? obj["id"].get<std::string>()
                                                          : make_id(origin, next_index);
    if (obj.contains("hint") && !obj["hint"].is_null()) pair.hint = obj["hint"].get<std::string>();
    ++next_index;
    set.pairs.push_back(std::move(pair));
  }

  size_t expected = kind == TestSetKind::flores_subset ? kFloresSubsetSize
                    : kind == TestSetKind::lebeval     ? kLebEvalSize
                                                       : set.pairs.size();
  if (set.pairs.size() != expected)
    throw ForgeError(ErrorCode::SizeMismatch, set.name + ": expected " + std::to_string(expected) +
                                                  " pairs, found " +
                                                  std::to_string(set.pairs.size()));
  return set;
}

}  // namespace forge
