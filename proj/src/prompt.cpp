#include "forge/prompt.hpp"

#include "forge/errors.hpp"
#include "forge/text.hpp"

namespace forge {

const char* prompt_mode_name(PromptMode mode) {
  switch (mode) {
    case PromptMode::zero_shot: return "zero_shot";
    case PromptMode::few_shot: return "few_shot";
    case PromptMode::contrastive_few_shot: return "contrastive_few_shot";
  }
  return "zero_shot";
}

PromptMode prompt_mode_from_name(const std::string& name) {
  if (name == "zero_shot") return PromptMode::zero_shot;
  if (name == "few_shot") return PromptMode::few_shot;
  if (name == "contrastive_few_shot") return PromptMode::contrastive_few_shot;
  throw ForgeError(ErrorCode::InvalidArgument, "unknown prompt mode '" + name + "'");
}

static std::string prompt_head(const Template& t) {
  return t.preamble + "\n\n" + t.instruction_header + "\n" + t.instruction;
}

static void append_input_block(std::string& out, const std::string& source, const Template& t) {
  out += "\n\n" + t.input_header + "\n" + source;
}

static void append_open_response(std::string& out, const Template& t) {
  out += "\n\n" + t.response_header + "\n";
}

std::string build_zero_shot(const std::string& source, const Template& t) {
  if (source.empty()) throw ForgeError(ErrorCode::InvalidArgument, "source sentence is empty");
  std::string out = prompt_head(t);
  append_input_block(out, source, t);
  append_open_response(out, t);
  return out;
}

std::string build_few_shot(const std::string& source, const std::vector<SentencePair>& demos,
                           const Template& t) {
  if (source.empty()) throw ForgeError(ErrorCode::InvalidArgument, "source sentence is empty");
  std::string out = prompt_head(t);
  for (const SentencePair& demo : demos) {
    append_input_block(out, demo.source_leb, t);
    out += "\n\n" + t.response_header + "\n" + demo.target_en;
  }
  append_input_block(out, source, t);
  append_open_response(out, t);
  return out;
}

std::string build_contrastive_few_shot(
    const std::string& source, const std::vector<std::pair<SentencePair, std::string>>& demos,
    const Template& t) {
  if (source.empty()) throw ForgeError(ErrorCode::InvalidArgument, "source sentence is empty");
  std::string out = prompt_head(t);
  for (const auto& [demo, rejected] : demos) {
    if (rejected.empty() || normalize_text(rejected) == normalize_text(demo.target_en))
      throw ForgeError(ErrorCode::DegeneratePair,
                       "demo " + demo.id + " has a degenerate rejected translation");
    if (demo.target_en.find(t.delimiter) != std::string::npos ||
        rejected.find(t.delimiter) != std::string::npos)
      throw ForgeError(ErrorCode::InvariantViolation,
                       "demo " + demo.id + " contains the delimiter literal");
    append_input_block(out, demo.source_leb, t);
    out += "\n\n" + t.hint_header + "\n" + t.contrastive_hint;
    out += "\n\n" + t.response_header + "\n" + demo.target_en + t.delimiter + rejected;
  }
  append_input_block(out, source, t);
  append_open_response(out, t);
  return out;
}

}  // namespace forge
