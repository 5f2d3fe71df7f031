#pragma once

#include <optional>
#include <string>

#include "forge/corpus.hpp"

namespace forge {

enum class InstructionKind { MT, Contrastive, Grammar };

const char* instruction_kind_name(InstructionKind kind);
InstructionKind instruction_kind_from_name(const std::string& name);

// The frozen rendering template. Section headers appear at most once per
// rendered record; the delimiter is never a substring of a header.
struct Template {
  std::string version = "v1";
  std::string preamble =
      "Below is an instruction that describes a task, paired with an input that provides further "
      "context. Write a response that appropriately completes the request.";
  std::string instruction = "Translate the following sentence from Lebanese Arabic to English.";
  std::string instruction_header = "### Instruction:";
  std::string input_header = "### Input:";
  std::string hint_header = "### Hint:";
  std::string response_header = "### Response:";
  std::string delimiter = "<p>";
  // Accepted by parse() as a contrastive join, never emitted.
  std::string legacy_delimiter = "<rather than>";
  std::string contrastive_hint = "We prefer the first translation to the second.";

  static Template v1() { return Template{}; }
};

// One serialized training example. For Contrastive records the response is
// "<chosen><delimiter><rejected>" with the chosen translation first. origin
// is carried to the JSONL output only; the rendered text has no origin slot.
struct InstructionRecord {
  InstructionKind kind = InstructionKind::MT;
  std::string preamble;
  std::string instruction;
  std::string input;
  std::optional<std::string> hint;
  std::string response;
  Origin origin = Origin::OTHER;

  bool operator==(const InstructionRecord&) const = default;
};

InstructionRecord build_mt_instruction(const SentencePair& pair, const Template& t);

// Throws DegeneratePair when rejected is empty or equals the gold translation
// after normalization; InvariantViolation when either side contains the
// delimiter literal (corpus audit beats an escaping grammar).
InstructionRecord build_contrastive_instruction(const SentencePair& pair,
                                                const std::string& rejected, const Template& t);

InstructionRecord build_grammar_instruction(const GrammarExample& example, const Template& t);

// Byte-exact canonical text. Throws InvariantViolation when the record breaks
// its kind invariants or a field would make the output unparseable (a section
// boundary marker embedded in content).
std::string render(const InstructionRecord& record, const Template& t);

// Inverse of render on its image. Throws ParseError with the offending
// position on malformed text (missing preamble, duplicated headers, ...).
InstructionRecord parse(const std::string& text, const Template& t);

// Instruction JSONL: {"kind","input","hint","response","rendered","origin"}.
std::string instruction_to_jsonl(const InstructionRecord& record, const Template& t);
InstructionRecord instruction_from_jsonl(const std::string& line, const Template& t);

}  // namespace forge
