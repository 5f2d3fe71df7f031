#include "forge/select.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "forge/errors.hpp"
#include "forge/text.hpp"
#include "json.hpp"

namespace forge {

const char* selection_kind_name(SelectionKind kind) {
  switch (kind) {
    case SelectionKind::random: return "random";
    case SelectionKind::embedding: return "embedding";
    case SelectionKind::frequency: return "frequency";
  }
  return "random";
}

SelectionKind selection_kind_from_name(const std::string& name) {
  if (name == "random") return SelectionKind::random;
  if (name == "embedding") return SelectionKind::embedding;
  if (name == "frequency") return SelectionKind::frequency;
  throw ForgeError(ErrorCode::InvalidArgument, "unknown selection strategy '" + name + "'");
}

void ExamplePool::validate() const {
  if (!vectors) return;
  if (vectors->size() != pairs.size())
    throw ForgeError(ErrorCode::DimMismatch, "pool vectors do not parallel pairs");
  for (const EmbeddingVector& v : *vectors) {
    if (v.dim() != vectors->front().dim())
      throw ForgeError(ErrorCode::DimMismatch, "pool vector dims are not uniform");
    for (double x : v.values)
      if (!std::isfinite(x))
        throw ForgeError(ErrorCode::InvariantViolation, "non-finite embedding entry");
  }
}

// Fisher-Yates prefix with an explicit bounded draw; identical permutations
// across standard libraries.
static std::vector<size_t> shuffled_indices(size_t n, std::uint64_t seed) {
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), size_t{0});
  std::mt19937_64 rng(seed);
  for (size_t i = n; i > 1; --i) {
    size_t j = static_cast<size_t>(rng() % i);
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

Selection select_random(const ExamplePool& pool, int k, std::uint64_t seed) {
  if (pool.pairs.empty()) throw ForgeError(ErrorCode::EmptyPool, "example pool is empty");
  if (k <= 0) throw ForgeError(ErrorCode::InvalidArgument, "k must be positive");
  std::vector<size_t> order = shuffled_indices(pool.pairs.size(), seed);
  Selection sel;
  sel.clamped = static_cast<size_t>(k) >= pool.pairs.size();
  size_t take = std::min<size_t>(k, pool.pairs.size());
  for (size_t i = 0; i < take; ++i) sel.pairs.push_back(pool.pairs[order[i]]);
  return sel;
}

Selection select_by_embedding(const ExamplePool& pool, const EmbeddingVector& query, int k) {
  if (pool.pairs.empty()) throw ForgeError(ErrorCode::EmptyPool, "example pool is empty");
  if (!pool.vectors) throw ForgeError(ErrorCode::MissingVectors, "pool carries no vectors");
  pool.validate();
  if (query.dim() != pool.vectors->front().dim())
    throw ForgeError(ErrorCode::DimMismatch,
                     "query dim " + std::to_string(query.dim()) + " vs pool dim " +
                         std::to_string(pool.vectors->front().dim()));

  const auto& vecs = *pool.vectors;
  Eigen::Map<const Eigen::VectorXd> q(query.values.data(), query.values.size());
  const double qnorm = q.norm();

  std::vector<double> sims(vecs.size());
  for (size_t i = 0; i < vecs.size(); ++i) {
    Eigen::Map<const Eigen::VectorXd> v(vecs[i].values.data(), vecs[i].values.size());
    double denom = v.norm() * qnorm;
    sims[i] = denom > 0.0 ? q.dot(v) / denom : 0.0;
  }

  std::vector<size_t> idx(vecs.size());
  std::iota(idx.begin(), idx.end(), size_t{0});
  std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
    if (sims[a] != sims[b]) return sims[a] > sims[b];
    return a < b;
  });

  Selection sel;
  size_t take = std::min<size_t>(k, pool.pairs.size());
  for (size_t i = 0; i < take; ++i) sel.pairs.push_back(pool.pairs[idx[i]]);
  return sel;
}

Selection select_by_frequency(const ExamplePool& pool, const std::string& input_sentence,
                              const FrequencyMatrix& fm, std::uint64_t threshold, int k,
                              std::uint64_t seed) {
  if (pool.pairs.empty()) throw ForgeError(ErrorCode::EmptyPool, "example pool is empty");
  if (threshold < 1) throw ForgeError(ErrorCode::InvalidArgument, "threshold must be >= 1");

  std::set<std::string> rare;
  for (const std::string& token : tokenize(input_sentence)) {
    auto it = fm.counts.find(token);
    std::uint64_t count = it == fm.counts.end() ? 0 : it->second;
    if (count < threshold) rare.insert(token);
  }

  // Candidates ranked by distinct rare tokens matched, ties to lower index.
  std::vector<std::pair<size_t, size_t>> candidates;  // (match count, pool index)
  for (size_t i = 0; i < pool.pairs.size(); ++i) {
    std::set<std::string> source_tokens;
    for (const std::string& token : tokenize(pool.pairs[i].source_leb))
      source_tokens.insert(token);
    size_t matches = 0;
    for (const std::string& token : rare)
      if (source_tokens.count(token)) ++matches;
    if (matches > 0) candidates.emplace_back(matches, i);
  }
  std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });

  Selection sel;
  std::set<size_t> taken;
  for (const auto& [matches, i] : candidates) {
    if (sel.pairs.size() == static_cast<size_t>(k)) break;
    sel.pairs.push_back(pool.pairs[i]);
    taken.insert(i);
  }

  if (sel.pairs.size() < static_cast<size_t>(k)) {
    ExamplePool remainder;
    for (size_t i = 0; i < pool.pairs.size(); ++i)
      if (!taken.count(i)) remainder.pairs.push_back(pool.pairs[i]);
    if (!remainder.pairs.empty()) {
      Selection fill =
          select_random(remainder, static_cast<int>(k - sel.pairs.size()), seed);
      for (SentencePair& pair : fill.pairs) sel.pairs.push_back(std::move(pair));
      sel.clamped = fill.clamped;
    } else {
      sel.clamped = true;
    }
  }
  return sel;
}

FrequencyMatrix build_frequency_matrix(const std::vector<std::filesystem::path>& corpus_paths) {
  if (corpus_paths.empty())
    throw ForgeError(ErrorCode::InvalidArgument, "no corpus files given");
  FrequencyMatrix fm;
  fm.tokenizer_version = kTokenizerVersion;
  for (const auto& path : corpus_paths) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ForgeError(ErrorCode::IoError, "cannot open " + path.string());
    std::string line;
    bool jsonl = path.extension() == ".jsonl";
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      if (!is_valid_utf8(line))
        throw ForgeError(ErrorCode::EncodingError, path.string() + " is not valid UTF-8");
      std::string text = line;
      if (jsonl) {
        nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
        if (obj.is_discarded() || !obj.contains("source_leb"))
          throw ForgeError(ErrorCode::MalformedRecord,
                           path.string() + ": jsonl line lacks source_leb");
        text = obj["source_leb"].get<std::string>();
      }
      for (const std::string& token : tokenize(text)) {
        ++fm.counts[token];
        ++fm.total_tokens;
      }
    }
  }
  return fm;
}

void write_frequency_matrix(const FrequencyMatrix& fm, const std::filesystem::path& path) {
  nlohmann::ordered_json doc;
  doc["tokenizer_version"] = fm.tokenizer_version;
  doc["total_tokens"] = fm.total_tokens;
  nlohmann::ordered_json counts = nlohmann::ordered_json::object();
  for (const auto& [token, count] : fm.counts) counts[token] = count;
  doc["counts"] = counts;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ForgeError(ErrorCode::IoError, "cannot write " + path.string());
  out << doc.dump(2) << "\n";
}

FrequencyMatrix read_frequency_matrix(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ForgeError(ErrorCode::IoError, "cannot open " + path.string());
  nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded() || !doc.is_object())
    throw ForgeError(ErrorCode::MalformedRecord, "frequency matrix is not a JSON object");
  FrequencyMatrix fm;
  fm.tokenizer_version = doc.at("tokenizer_version").get<std::string>();
  fm.total_tokens = doc.at("total_tokens").get<std::uint64_t>();
  for (const auto& [token, count] : doc.at("counts").items())
    fm.counts[token] = count.get<std::uint64_t>();
  return fm;
}

std::map<std::string, EmbeddingVector> read_embedding_sidecar(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ForgeError(ErrorCode::IoError, "cannot open " + path.string());
  std::map<std::string, EmbeddingVector> out;
  std::string line;
  size_t line_no = 0;
  std::optional<size_t> dim;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.contains("id") || !obj.contains("vector"))
      throw ForgeError(ErrorCode::MalformedRecord,
                       "sidecar line " + std::to_string(line_no) + " malformed");
    EmbeddingVector v;
    for (const auto& x : obj["vector"]) v.values.push_back(x.get<double>());
    if (dim && v.dim() != *dim)
      throw ForgeError(ErrorCode::DimMismatch,
                       "sidecar line " + std::to_string(line_no) + " dim mismatch");
    dim = v.dim();
    out[obj["id"].get<std::string>()] = std::move(v);
  }
  return out;
}

void write_embedding_sidecar(const std::map<std::string, EmbeddingVector>& vectors,
                             const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ForgeError(ErrorCode::IoError, "cannot write " + path.string());
  for (const auto& [id, vec] : vectors) {
    nlohmann::ordered_json obj;
    obj["id"] = id;
    obj["vector"] = vec.values;
    out << obj.dump() << "\n";
  }
}

void attach_vectors(ExamplePool& pool, const std::map<std::string, EmbeddingVector>& by_id) {
  std::vector<EmbeddingVector> vectors;
  vectors.reserve(pool.pairs.size());
  for (const SentencePair& pair : pool.pairs) {
    auto it = by_id.find(pair.id);
    if (it == by_id.end())
      throw ForgeError(ErrorCode::MissingVectors, "no vector for pair " + pair.id);
    vectors.push_back(it->second);
  }
  pool.vectors = std::move(vectors);
  pool.validate();
}

}  // namespace forge
