#include "forge/instruct.hpp"

#include <array>

#include "forge/errors.hpp"
#include "forge/text.hpp"
#include "json.hpp"

namespace forge {

const char* instruction_kind_name(InstructionKind kind) {
  switch (kind) {
    case InstructionKind::MT: return "MT";
    case InstructionKind::Contrastive: return "Contrastive";
    case InstructionKind::Grammar: return "Grammar";
  }
  return "MT";
}

InstructionKind instruction_kind_from_name(const std::string& name) {
  if (name == "MT") return InstructionKind::MT;
  if (name == "Contrastive") return InstructionKind::Contrastive;
  if (name == "Grammar") return InstructionKind::Grammar;
  throw ForgeError(ErrorCode::InvalidArgument, "unknown instruction kind '" + name + "'");
}

static size_t count_occurrences(const std::string& haystack, const std::string& needle) {
  size_t count = 0;
  for (size_t pos = haystack.find(needle); pos != std::string::npos;
       pos = haystack.find(needle, pos + needle.size()))
    ++count;
  return count;
}

InstructionRecord build_mt_instruction(const SentencePair& pair, const Template& t) {
  InstructionRecord r;
  r.kind = InstructionKind::MT;
  r.preamble = t.preamble;
  r.instruction = t.instruction;
  r.input = pair.source_leb;
  r.response = pair.target_en;
  r.origin = pair.origin;
  return r;
}

InstructionRecord build_contrastive_instruction(const SentencePair& pair,
                                                const std::string& rejected, const Template& t) {
  if (rejected.empty() || normalize_text(rejected) == normalize_text(pair.target_en))
    throw ForgeError(ErrorCode::DegeneratePair,
                     "rejected translation equals the gold translation for " + pair.id);
  if (pair.target_en.find(t.delimiter) != std::string::npos ||
      rejected.find(t.delimiter) != std::string::npos)
    throw ForgeError(ErrorCode::InvariantViolation,
                     "translation contains the delimiter literal; audit the corpus (" + pair.id +
                         ")");
  InstructionRecord r;
  r.kind = InstructionKind::Contrastive;
  r.preamble = t.preamble;
  r.instruction = t.instruction;
  r.input = pair.source_leb;
  r.hint = t.contrastive_hint;
  r.response = pair.target_en + t.delimiter + rejected;
  r.origin = pair.origin;
  return r;
}

InstructionRecord build_grammar_instruction(const GrammarExample& example, const Template& t) {
  if (example.rule_text.empty())
    throw ForgeError(ErrorCode::InvariantViolation, "grammar example has empty rule text");
  InstructionRecord r;
  r.kind = InstructionKind::Grammar;
  r.preamble = t.preamble;
  r.instruction = t.instruction;
  r.input = example.pair.source_leb;
  r.hint = example.rule_text;
  r.response = example.pair.target_en;
  r.origin = example.pair.origin;
  return r;
}

static void check_kind_invariants(const InstructionRecord& r, const Template& t) {
  // parse() anchors on the template preamble, so a record rendered with any
  // other preamble could not round-trip.
  if (r.preamble != t.preamble)
    throw ForgeError(ErrorCode::InvariantViolation, "record preamble differs from template");
  switch (r.kind) {
    case InstructionKind::MT:
      if (r.hint) throw ForgeError(ErrorCode::InvariantViolation, "MT record carries a hint");
      break;
    case InstructionKind::Contrastive: {
      if (!r.hint || r.hint->empty())
        throw ForgeError(ErrorCode::InvariantViolation, "contrastive record lacks a hint");
      size_t delims = count_occurrences(r.response, t.delimiter);
      if (delims != 1)
        throw ForgeError(ErrorCode::InvariantViolation,
                         "contrastive response must contain the delimiter exactly once, found " +
                             std::to_string(delims));
      if (r.response.find(t.legacy_delimiter) != std::string::npos)
        throw ForgeError(ErrorCode::InvariantViolation,
                         "contrastive response contains the legacy join literal");
      break;
    }
    case InstructionKind::Grammar:
      if (!r.hint || r.hint->empty())
        throw ForgeError(ErrorCode::InvariantViolation, "grammar record lacks a hint");
      // A delimiter inside a hint-bearing response would parse back as
      // Contrastive; reject instead of rendering ambiguous text.
      if (r.response.find(t.delimiter) != std::string::npos ||
          r.response.find(t.legacy_delimiter) != std::string::npos)
        throw ForgeError(ErrorCode::InvariantViolation,
                         "grammar response contains the contrastive delimiter");
      break;
  }
  if (r.kind != InstructionKind::Contrastive &&
      r.hint && r.hint->find(t.delimiter) != std::string::npos)
    throw ForgeError(ErrorCode::InvariantViolation, "hint contains the contrastive delimiter");
}

std::string render(const InstructionRecord& r, const Template& t) {
  check_kind_invariants(r, t);
  std::string out;
  out.reserve(r.preamble.size() + r.input.size() + r.response.size() + 160);
  out += r.preamble;
  out += "\n\n" + t.instruction_header + "\n" + r.instruction;
  out += "\n\n" + t.input_header + "\n" + r.input;
  if (r.hint) out += "\n\n" + t.hint_header + "\n" + *r.hint;
  out += "\n\n" + t.response_header + "\n" + r.response;
  out += "\n";

  // Each section-boundary marker must occur exactly as many times as the
  // layout emits it; field content composing an extra one (outright, or by
  // edge overlap with the blank-line separators) cannot round-trip.
  auto expect = [&](const std::string& header, size_t expected) {
    size_t found = count_occurrences(out, "\n\n" + header + "\n");
    if (found != expected)
      throw ForgeError(ErrorCode::InvariantViolation,
                       "record content forges a '" + header + "' section boundary");
  };
  expect(t.instruction_header, 1);
  expect(t.input_header, 1);
  expect(t.hint_header, r.hint ? 1 : 0);
  expect(t.response_header, 1);
  return out;
}

InstructionRecord parse(const std::string& text, const Template& t) {
  const std::string instruction_marker = "\n\n" + t.instruction_header + "\n";
  const std::string input_marker = "\n\n" + t.input_header + "\n";
  const std::string hint_marker = "\n\n" + t.hint_header + "\n";
  const std::string response_marker = "\n\n" + t.response_header + "\n";

  if (text.rfind(t.preamble, 0) != 0)
    throw ForgeError(ErrorCode::ParseError, "position 0: expected template preamble");

  size_t pos = t.preamble.size();
  if (text.compare(pos, instruction_marker.size(), instruction_marker) != 0)
    throw ForgeError(ErrorCode::ParseError,
                     "position " + std::to_string(pos) + ": expected " + t.instruction_header);
  pos += instruction_marker.size();

  size_t input_at = text.find(input_marker, pos);
  if (input_at == std::string::npos)
    throw ForgeError(ErrorCode::ParseError, "missing " + t.input_header);

  InstructionRecord r;
  r.preamble = t.preamble;
  r.instruction = text.substr(pos, input_at - pos);
  pos = input_at + input_marker.size();

  size_t hint_at = text.find(hint_marker, pos);
  size_t response_at = text.find(response_marker, pos);
  if (response_at == std::string::npos)
    throw ForgeError(ErrorCode::ParseError, "missing " + t.response_header);

  if (hint_at != std::string::npos && hint_at < response_at) {
    r.input = text.substr(pos, hint_at - pos);
    pos = hint_at + hint_marker.size();
    if (text.find(hint_marker, pos) != std::string::npos)
      throw ForgeError(ErrorCode::ParseError, "duplicated " + t.hint_header);
    r.hint = text.substr(pos, response_at - pos);
    pos = response_at + response_marker.size();
  } else {
    r.input = text.substr(pos, response_at - pos);
    pos = response_at + response_marker.size();
  }
  if (text.find(response_marker, pos) != std::string::npos)
    throw ForgeError(ErrorCode::ParseError, "duplicated " + t.response_header);
  if (text.find(input_marker, pos) != std::string::npos)
    throw ForgeError(ErrorCode::ParseError, "duplicated " + t.input_header);

  if (text.empty() || text.back() != '\n')
    throw ForgeError(ErrorCode::ParseError, "unterminated response section");
  r.response = text.substr(pos, text.size() - pos - 1);

  // Normalize the legacy contrastive join; never emitted by render.
  if (r.hint) {
    size_t legacy = count_occurrences(r.response, t.legacy_delimiter);
    size_t canonical = count_occurrences(r.response, t.delimiter);
    if (canonical == 0 && legacy == 1) {
      r.response.replace(r.response.find(t.legacy_delimiter), t.legacy_delimiter.size(),
                         t.delimiter);
      canonical = 1;
    }
    r.kind = canonical == 1 ? InstructionKind::Contrastive : InstructionKind::Grammar;
    if (r.hint->empty())
      throw ForgeError(ErrorCode::ParseError, "empty hint section");
  } else {
    r.kind = InstructionKind::MT;
  }
  return r;
}

std::string instruction_to_jsonl(const InstructionRecord& record, const Template& t) {
  nlohmann::ordered_json obj;
  obj["kind"] = instruction_kind_name(record.kind);
  obj["input"] = record.input;
  obj["hint"] = record.hint ? nlohmann::ordered_json(*record.hint) : nlohmann::ordered_json(nullptr);
  obj["response"] = record.response;
  obj["rendered"] = render(record, t);
  obj["origin"] = origin_name(record.origin);
  return obj.dump();
}

InstructionRecord instruction_from_jsonl(const std::string& line, const Template& t) {
  nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
  if (obj.is_discarded() || !obj.is_object())
    throw ForgeError(ErrorCode::MalformedRecord, "invalid instruction JSONL line");
  InstructionRecord r = parse(obj.at("rendered").get<std::string>(), t);
  r.origin = origin_from_name(obj.at("origin").get<std::string>());
  if (instruction_kind_name(r.kind) != obj.at("kind").get<std::string>())
    throw ForgeError(ErrorCode::MalformedRecord,
                     "instruction kind disagrees with rendered text");
  return r;
}

}  // namespace forge
