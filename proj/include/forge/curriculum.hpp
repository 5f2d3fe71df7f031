#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "forge/corpus.hpp"
#include "forge/instruct.hpp"

namespace forge {

struct TrainerHyperparams {
  int lora_rank = 64;
  int batch_size = 16;
  int grad_accum_steps = 16;
  int epochs = 3;
  bool quantized_base = true;

  void validate() const;
  bool operator==(const TrainerHyperparams&) const = default;
};

enum class DataFamily { NN, LW };
const char* data_family_name(DataFamily family);
DataFamily data_family_from_name(const std::string& name);

// One training stage: a dataset file of one instruction kind plus the trainer
// settings, copied per stage so external trainers can run stages independently.
struct StageManifest {
  int stage_index = 1;          // contiguous from 1
  InstructionKind kind = InstructionKind::MT;
  std::string dataset_path;     // relative to the plan directory
  size_t record_count = 0;      // verified against the emitted file
  TrainerHyperparams hyperparams;
};

struct CurriculumPlan {
  std::string name;  // Instruct-MT | Instruct-Cont | Instruct-Grammar | CONT+MT | Grammar+CONT+MT
  DataFamily data_family = DataFamily::LW;
  std::uint64_t seed = 42;
  std::vector<StageManifest> stages;
};

using RejectedMap = std::map<std::string, std::string>;  // pair id -> rejected translation

// Render one pair in the requested kind. Contrastive looks the pair up in
// the rejected map; Grammar takes the rule from the pair's hint.
InstructionRecord build_instruction_for(InstructionKind kind, const SentencePair& pair,
                                        const RejectedMap* rejected, const Template& tpl);

// One stage over the full corpus in the requested kind. Contrastive needs a
// rejected translation per pair; Grammar needs a hint per pair.
CurriculumPlan plan_single_task(InstructionKind kind, const Corpus& corpus,
                                const TrainerHyperparams& hp, DataFamily family,
                                const RejectedMap* rejected, const Template& tpl,
                                const std::filesystem::path& out_dir);

// Two stages: 50/50 split, first slice as contrastive instructions (stage 1),
// second as translation instructions (stage 2).
CurriculumPlan plan_cont_mt(const Corpus& corpus, const TrainerHyperparams& hp, DataFamily family,
                            std::uint64_t seed, const RejectedMap& rejected, const Template& tpl,
                            const std::filesystem::path& out_dir);

// Three stages: the whole grammar corpus first, then the 50/50 contrastive/MT
// split of the translation corpus.
CurriculumPlan plan_grammar_cont_mt(const Corpus& grammar_corpus, const Corpus& mt_corpus,
                                    const TrainerHyperparams& hp, DataFamily family,
                                    std::uint64_t seed, const RejectedMap& rejected,
                                    const Template& tpl, const std::filesystem::path& out_dir);

// Preference JSONL for CPO-style trainers:
// {"prompt": zero-shot prompt, "chosen": gold, "rejected": model output}.
void export_cpo_dataset(const std::vector<std::pair<SentencePair, std::string>>& pairs,
                        const Template& tpl, const std::filesystem::path& path);

// plan.json beside the stage files; paths stay relative so the directory is
// relocatable.
void write_plan_json(const CurriculumPlan& plan, const std::filesystem::path& out_dir);
CurriculumPlan read_plan_json(const std::filesystem::path& plan_file);

RejectedMap read_rejected_map(const std::filesystem::path& path);
void write_rejected_map(const RejectedMap& rejected, const std::filesystem::path& path);

}  // namespace forge
