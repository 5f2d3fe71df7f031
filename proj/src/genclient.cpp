#include "forge/genclient.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <memory>
#include <random>
#include <sstream>
#include <thread>

#include "forge/errors.hpp"
#include "forge/prompt.hpp"
#include "forge/text.hpp"
#include "httplib.h"
#include "json.hpp"

namespace forge {

void GenerationConfig::validate() const {
  if (temperature < 0.0 || temperature > 2.0)
    throw ForgeError(ErrorCode::InvalidArgument, "temperature must be in [0, 2]");
  if (max_new_tokens < 1)
    throw ForgeError(ErrorCode::InvalidArgument, "max_new_tokens must be >= 1");
}

void run_bounded(const std::vector<std::function<void()>>& tasks, int limit) {
  if (limit < 1) throw ForgeError(ErrorCode::InvalidArgument, "in-flight limit must be >= 1");
  std::atomic<size_t> next{0};
  std::vector<std::exception_ptr> errors(tasks.size());
  auto worker = [&] {
    while (true) {
      size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      try {
        tasks[i]();
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  size_t n_workers = std::min<size_t>(static_cast<size_t>(limit), tasks.size());
  std::vector<std::thread> workers;
  workers.reserve(n_workers);
  for (size_t i = 0; i < n_workers; ++i) workers.emplace_back(worker);
  for (auto& w : workers) w.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

namespace {

struct HttpResult {
  int status = 0;
  std::string body;
};

int backoff_with_jitter_ms(int base_ms, int attempt) {
  thread_local std::mt19937_64 rng{std::random_device{}()};
  int expo = base_ms * (1 << std::min(attempt, 10));
  return expo + static_cast<int>(rng() % static_cast<std::uint64_t>(std::max(base_ms, 1)));
}

// One keep-alive connection per worker thread and endpoint, so corpus-scale
// batches do not churn through ephemeral ports.
std::map<std::string, std::unique_ptr<httplib::Client>>& client_cache() {
  thread_local std::map<std::string, std::unique_ptr<httplib::Client>> cache;
  return cache;
}

httplib::Client& client_for(const std::string& base_url) {
  auto& cache = client_cache();
  auto it = cache.find(base_url);
  if (it == cache.end()) {
    auto client = std::make_unique<httplib::Client>(base_url);
    client->set_connection_timeout(10, 0);
    client->set_read_timeout(300, 0);
    client->set_keep_alive(true);
    it = cache.emplace(base_url, std::move(client)).first;
  }
  return *it->second;
}

// POST with retries on connection errors, 429 and 5xx.
HttpResult post_json(const ClientOptions& options, const std::string& path,
                     const std::string& body, ClientStats* stats) {
  int last_status = 0;
  std::string last_error;
  for (int attempt = 0; attempt < options.max_attempts; ++attempt) {
    if (attempt > 0) {
      if (stats) stats->retries.fetch_add(1);
      std::this_thread::sleep_for(
          std::chrono::milliseconds(backoff_with_jitter_ms(options.backoff_base_ms, attempt - 1)));
    }
    httplib::Client& client = client_for(options.base_url);
    httplib::Headers headers;
    if (!options.api_key.empty())
      headers.emplace("Authorization", "Bearer " + options.api_key);
    if (stats) stats->requests.fetch_add(1);
    httplib::Result res = client.Post(path, headers, body, "application/json");
    if (!res) {
      last_status = 0;
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_status = res->status;
      last_error = "http " + std::to_string(res->status);
      continue;
    }
    return {res->status, res->body};
  }
  if (last_status == 429)
    throw ForgeError(ErrorCode::RateLimited,
                     options.base_url + path + " still rate-limited after " +
                         std::to_string(options.max_attempts) + " attempts");
  throw ForgeError(ErrorCode::EndpointUnreachable,
                   options.base_url + path + ": " + last_error + " after " +
                       std::to_string(options.max_attempts) + " attempts");
}

std::string strip_stop_sequences(std::string text, const std::vector<std::string>& stops) {
  size_t cut = std::string::npos;
  for (const std::string& stop : stops) {
    if (stop.empty()) continue;
    size_t at = text.find(stop);
    if (at != std::string::npos) cut = std::min(cut, at);
  }
  if (cut != std::string::npos) text.resize(cut);
  return text;
}

}  // namespace

void close_thread_connections() { client_cache().clear(); }

ChatClient::ChatClient(ClientOptions options) : options_(std::move(options)) {
  if (options_.base_url.empty())
    throw ForgeError(ErrorCode::ConfigMissing, "chat endpoint base URL not configured");
}

std::string ChatClient::generate_translation(const std::string& prompt,
                                             const GenerationConfig& cfg) {
  if (prompt.empty()) throw ForgeError(ErrorCode::InvalidArgument, "prompt is empty");
  cfg.validate();

  nlohmann::ordered_json body;
  body["model"] = cfg.model_id;
  body["messages"] = nlohmann::ordered_json::array(
      {nlohmann::ordered_json{{"role", "user"}, {"content", prompt}}});
  body["temperature"] = cfg.temperature;
  body["max_tokens"] = cfg.max_new_tokens;
  body["stop"] = cfg.stop_sequences;
  if (cfg.seed) body["seed"] = *cfg.seed;

  HttpResult res = post_json(options_, "/v1/chat/completions", body.dump(), &stats_);
  if (res.status != 200)
    throw ForgeError(ErrorCode::EndpointUnreachable,
                     "chat endpoint returned http " + std::to_string(res.status));
  nlohmann::json doc = nlohmann::json::parse(res.body, nullptr, false);
  if (doc.is_discarded() || !doc.contains("choices") || doc["choices"].empty())
    throw ForgeError(ErrorCode::MalformedRecord, "chat endpoint returned no choices");
  std::string content;
  try {
    content = doc["choices"][0].at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ForgeError(ErrorCode::MalformedRecord, std::string("chat response: ") + e.what());
  }
  content = strip_stop_sequences(std::move(content), cfg.stop_sequences);
  if (content.empty()) throw ForgeError(ErrorCode::EmptyCompletion, "completion was empty");
  return content;
}

GenerateRejectedResult generate_rejected(const std::vector<SentencePair>& pairs,
                                         const GenerationConfig& cfg, ChatClient& chat,
                                         const Template& tpl, int max_attempts) {
  if (cfg.temperature <= 0.0)
    throw ForgeError(ErrorCode::InvalidArgument,
                     "rejected sampling needs temperature > 0 for diversity");
  if (max_attempts < 1) throw ForgeError(ErrorCode::InvalidArgument, "max_attempts must be >= 1");

  std::vector<std::optional<std::string>> rejected(pairs.size());
  std::vector<std::function<void()>> tasks;
  tasks.reserve(pairs.size());
  for (size_t i = 0; i < pairs.size(); ++i) {
    tasks.push_back([&, i] {
      const SentencePair& pair = pairs[i];
      const std::string prompt = build_zero_shot(pair.source_leb, tpl);
      const std::string gold = normalize_text(pair.target_en);
      for (int attempt = 0; attempt < max_attempts; ++attempt) {
        GenerationConfig attempt_cfg = cfg;
        if (cfg.seed) attempt_cfg.seed = *cfg.seed + static_cast<std::uint64_t>(attempt);
        std::string candidate = chat.generate_translation(prompt, attempt_cfg);
        if (normalize_text(candidate) != gold) {
          rejected[i] = std::move(candidate);
          return;
        }
      }
      // All samples degenerate: the pair is dropped and reported by the caller.
    });
  }
  run_bounded(tasks, chat.options().in_flight_limit);

  GenerateRejectedResult result;
  for (size_t i = 0; i < pairs.size(); ++i) {
    if (rejected[i])
      result.items.push_back({pairs[i].id, std::move(*rejected[i])});
    else
      result.dropped.push_back(pairs[i].id);
  }
  return result;
}

EmbeddingClient::EmbeddingClient(ClientOptions options) : options_(std::move(options)) {
  if (options_->base_url.empty())
    throw ForgeError(ErrorCode::ConfigMissing, "embedding endpoint base URL not configured");
}

EmbeddingClient::EmbeddingClient(std::map<std::string, EmbeddingVector> sidecar)
    : sidecar_(std::move(sidecar)) {}

std::vector<EmbeddingVector> EmbeddingClient::embed_batch(const std::vector<std::string>& texts) {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  if (texts.empty()) return out;

  if (!options_) {
    for (const std::string& text : texts) {
      auto it = sidecar_.find(text);
      if (it == sidecar_.end())
        throw ForgeError(ErrorCode::MissingVectors, "sidecar has no vector for '" + text + "'");
      out.push_back(it->second);
    }
  } else {
    constexpr size_t kBatch = 128;
    for (size_t start = 0; start < texts.size(); start += kBatch) {
      size_t end = std::min(texts.size(), start + kBatch);
      nlohmann::ordered_json body;
      body["model"] = "embedding";
      body["input"] = std::vector<std::string>(texts.begin() + start, texts.begin() + end);
      HttpResult res = post_json(*options_, "/v1/embeddings", body.dump(), nullptr);
      if (res.status != 200)
        throw ForgeError(ErrorCode::EndpointUnreachable,
                         "embedding endpoint returned http " + std::to_string(res.status));
      nlohmann::json doc = nlohmann::json::parse(res.body, nullptr, false);
      if (doc.is_discarded() || !doc.contains("data"))
        throw ForgeError(ErrorCode::MalformedRecord, "embedding response lacks data");
      for (const auto& item : doc["data"]) {
        EmbeddingVector v;
        for (const auto& x : item.at("embedding")) v.values.push_back(x.get<double>());
        out.push_back(std::move(v));
      }
    }
    if (out.size() != texts.size())
      throw ForgeError(ErrorCode::MalformedRecord, "embedding count mismatch");
  }
  for (const EmbeddingVector& v : out)
    if (v.dim() != out.front().dim())
      throw ForgeError(ErrorCode::DimMismatch, "embedding dims are not uniform");
  return out;
}

RemoteScorer::RemoteScorer(ClientOptions options, ScoreScale scale)
    : options_(std::move(options)), scale_(scale) {
  if (options_.base_url.empty())
    throw ForgeError(ErrorCode::ConfigMissing, "scorer endpoint base URL not configured");
}

std::vector<ScoredSentence> RemoteScorer::score(const std::vector<ScoreItem>& items) {
  std::vector<ScoredSentence> out;
  if (items.empty()) return out;

  nlohmann::ordered_json body;
  body["items"] = nlohmann::ordered_json::array();
  for (const ScoreItem& item : items) {
    nlohmann::ordered_json obj;
    obj["src"] = item.source;
    obj["mt"] = item.hypothesis;
    obj["ref"] = item.reference ? nlohmann::ordered_json(*item.reference)
                                : nlohmann::ordered_json(nullptr);
    body["items"].push_back(std::move(obj));
  }
  HttpResult res = post_json(options_, "/score", body.dump(), nullptr);
  if (res.status != 200)
    throw ForgeError(ErrorCode::EndpointUnreachable,
                     "scorer endpoint returned http " + std::to_string(res.status));
  nlohmann::json doc = nlohmann::json::parse(res.body, nullptr, false);
  if (doc.is_discarded() || !doc.contains("scores"))
    throw ForgeError(ErrorCode::MalformedRecord, "scorer response lacks scores");
  std::vector<double> scores;
  for (const auto& s : doc["scores"]) scores.push_back(s.get<double>());
  if (scores.size() != items.size())
    throw ForgeError(ErrorCode::MalformedRecord, "scorer returned wrong count");

  bool unit = scale_ == ScoreScale::unit;
  if (scale_ == ScoreScale::auto_detect) {
    unit = std::all_of(scores.begin(), scores.end(),
                       [](double s) { return s >= 0.0 && s <= 1.0; });
  }
  for (size_t i = 0; i < scores.size(); ++i) {
    double s = unit ? scores[i] * 100.0 : scores[i];
    if (!std::isfinite(s) || s < 0.0 || s > 100.0)
      throw ForgeError(ErrorCode::ScoreOutOfRange,
                       "score " + std::to_string(scores[i]) + " for item " + std::to_string(i));
    out.push_back({items[i].id, items[i].hypothesis, s});
  }
  return out;
}

std::vector<std::string> chunk_chapter(const std::string& chapter_text) {
  // Paragraphs are blank-line separated.
  std::vector<std::string> paragraphs;
  std::string current;
  std::istringstream in(chapter_text);
  std::string line;
  auto flush = [&] {
    if (!current.empty()) {
      paragraphs.push_back(current);
      current.clear();
    }
  };
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    bool blank = line.find_first_not_of(" \t") == std::string::npos;
    if (blank) {
      flush();
    } else {
      if (!current.empty()) current += "\n";
      current += line;
    }
  }
  flush();

  auto word_count = [](const std::string& s) {
    std::istringstream ss(s);
    size_t n = 0;
    std::string w;
    while (ss >> w) ++n;
    return n;
  };

  std::vector<std::string> chunks;
  std::string chunk;
  size_t chunk_words = 0;
  for (const std::string& para : paragraphs) {
    size_t pw = word_count(para);
    if (!chunk.empty() && chunk_words >= 300 && chunk_words + pw > 800) {
      chunks.push_back(chunk);
      chunk.clear();
      chunk_words = 0;
    }
    if (!chunk.empty()) chunk += "\n\n";
    chunk += para;
    chunk_words += pw;
  }
  if (!chunk.empty()) chunks.push_back(chunk);
  return chunks;
}

std::string grammar_synthesis_prompt(const std::string& chunk, int n) {
  std::ostringstream out;
  out << "You are given a passage from a Lebanese Arabic grammar book. Write " << n
      << " new parallel translation examples that illustrate the rules described in the "
         "passage. For each example output exactly three lines:\n"
         "LEB: <sentence in Lebanese Arabic script>\n"
         "EN: <its English translation>\n"
         "RULE: <one-sentence statement of the rule the example illustrates>\n"
         "Separate examples with a blank line and output nothing else.\n\n"
         "Passage:\n"
      << chunk;
  return out.str();
}

std::vector<ParsedTriple> parse_synthesis_triples(const std::string& response,
                                                  size_t* discarded) {
  std::vector<ParsedTriple> triples;
  size_t bad = 0;
  std::istringstream in(response);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  auto after_tag = [](const std::string& s, const char* tag) {
    std::string rest = s.substr(std::string(tag).size());
    size_t at = rest.find_first_not_of(" \t");
    return at == std::string::npos ? std::string() : rest.substr(at);
  };
  for (size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].rfind("LEB:", 0) != 0) continue;
    if (i + 2 < lines.size() && lines[i + 1].rfind("EN:", 0) == 0 &&
        lines[i + 2].rfind("RULE:", 0) == 0) {
      ParsedTriple t;
      t.source = after_tag(lines[i], "LEB:");
      t.target = after_tag(lines[i + 1], "EN:");
      t.rule = after_tag(lines[i + 2], "RULE:");
      if (!t.source.empty() && !t.target.empty() && !t.rule.empty()) {
        triples.push_back(std::move(t));
        i += 2;
        continue;
      }
    }
    ++bad;  // started a triple but it never completed
  }
  if (discarded) *discarded = bad;
  return triples;
}

static std::string truncate_utf8(const std::string& text, size_t max_bytes) {
  if (text.size() <= max_bytes) return text;
  size_t cut = max_bytes;
  while (cut > 0 && (static_cast<unsigned char>(text[cut]) & 0xC0) == 0x80) --cut;
  return text.substr(0, cut);
}

SynthesisResult synthesize_grammar_examples(const std::string& chapter_text, int chapter_index,
                                            const GenerationConfig& cfg, int n,
                                            ChatClient& chat) {
  if (chapter_text.empty())
    throw ForgeError(ErrorCode::InvalidArgument, "chapter text is empty");
  cfg.validate();

  std::vector<std::string> chunks = chunk_chapter(chapter_text);
  std::vector<std::vector<ParsedTriple>> per_chunk(chunks.size());
  std::vector<size_t> per_chunk_bad(chunks.size(), 0);

  std::vector<std::function<void()>> tasks;
  tasks.reserve(chunks.size());
  for (size_t c = 0; c < chunks.size(); ++c) {
    tasks.push_back([&, c] {
      std::string reply = chat.generate_translation(grammar_synthesis_prompt(chunks[c], n), cfg);
      per_chunk[c] = parse_synthesis_triples(reply, &per_chunk_bad[c]);
    });
  }
  run_bounded(tasks, chat.options().in_flight_limit);

  SynthesisResult result;
  size_t seq = 1;
  for (size_t c = 0; c < chunks.size(); ++c) {
    result.discarded += per_chunk_bad[c];
    for (ParsedTriple& t : per_chunk[c]) {
      GrammarExample ex;
      char id[40];
      std::snprintf(id, sizeof(id), "LGID-ch%02d-%04zu", chapter_index, seq++);
      ex.pair.id = id;
      ex.pair.source_leb = normalize_text(t.source);
      ex.pair.target_en = normalize_text(t.target);
      ex.pair.origin = Origin::LGID;
      ex.pair.hint = normalize_text(t.rule);
      ex.rule_text = *ex.pair.hint;
      ex.rule_title = truncate_utf8(ex.rule_text, 64);
      ex.chapter_index = chapter_index;
      if (ex.pair.source_leb.empty() || ex.pair.target_en.empty() || ex.rule_text.empty()) {
        ++result.discarded;
        continue;
      }
      result.examples.push_back(std::move(ex));
    }
  }
  if (result.examples.empty())
    throw ForgeError(ErrorCode::NoParsableExamples,
                     "chapter " + std::to_string(chapter_index) + ": no usable triples");
  return result;
}

}  // namespace forge
