#pragma once

#include <string>
#include <utility>
#include <vector>

#include "forge/corpus.hpp"
#include "forge/instruct.hpp"
#include "forge/select.hpp"

namespace forge {

enum class PromptMode { zero_shot, few_shot, contrastive_few_shot };

const char* prompt_mode_name(PromptMode mode);
PromptMode prompt_mode_from_name(const std::string& name);

struct PromptSpec {
  PromptMode mode = PromptMode::zero_shot;
  int k = 0;
  SelectionStrategy strategy;
  Template tpl;
};

// Preamble + instruction + the open input block; ends with the bare response
// header so the completion starts the translation.
std::string build_zero_shot(const std::string& source, const Template& t);

// k completed Input/Response blocks in demo order, then the open block.
std::string build_few_shot(const std::string& source, const std::vector<SentencePair>& demos,
                           const Template& t);

// Like build_few_shot but every demo response shows chosen + delimiter +
// rejected under the preference hint; the open block carries no hint.
std::string build_contrastive_few_shot(
    const std::string& source, const std::vector<std::pair<SentencePair, std::string>>& demos,
    const Template& t);

// Default generation stop so the model does not invent further examples.
inline constexpr const char* kDefaultStopSequence = "### Input:";

}  // namespace forge
