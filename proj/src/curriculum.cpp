#include "forge/curriculum.hpp"

#include <fstream>

#include "forge/errors.hpp"
#include "forge/prompt.hpp"
#include "forge/text.hpp"
#include "json.hpp"

namespace forge {

void TrainerHyperparams::validate() const {
  if (lora_rank <= 0 || batch_size <= 0 || grad_accum_steps <= 0 || epochs <= 0)
    throw ForgeError(ErrorCode::InvalidArgument, "hyperparameters must be positive");
}

const char* data_family_name(DataFamily family) {
  return family == DataFamily::NN ? "NN" : "LW";
}

DataFamily data_family_from_name(const std::string& name) {
  if (name == "NN") return DataFamily::NN;
  if (name == "LW") return DataFamily::LW;
  throw ForgeError(ErrorCode::InvalidArgument, "unknown data family '" + name + "'");
}

InstructionRecord build_instruction_for(InstructionKind kind, const SentencePair& pair,
                                        const RejectedMap* rejected, const Template& tpl) {
  switch (kind) {
    case InstructionKind::MT:
      return build_mt_instruction(pair, tpl);
    case InstructionKind::Contrastive: {
      if (!rejected)
        throw ForgeError(ErrorCode::InvalidArgument,
                         "contrastive stage needs a rejected-translation map");
      auto it = rejected->find(pair.id);
      if (it == rejected->end())
        throw ForgeError(ErrorCode::InvalidArgument,
                         "no rejected translation for pair " + pair.id);
      return build_contrastive_instruction(pair, it->second, tpl);
    }
    case InstructionKind::Grammar: {
      if (!pair.hint || pair.hint->empty())
        throw ForgeError(ErrorCode::InvariantViolation,
                         "pair " + pair.id + " lacks the grammar hint");
      GrammarExample ex;
      ex.pair = pair;
      ex.rule_text = *pair.hint;
      ex.rule_title = ex.rule_text.substr(0, 64);
      return build_grammar_instruction(ex, tpl);
    }
  }
  throw ForgeError(ErrorCode::InvalidArgument, "unknown instruction kind");
}

static size_t line_count(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ForgeError(ErrorCode::IoError, "cannot reopen " + path.string());
  size_t lines = 0;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ++lines;
  return lines;
}

static StageManifest write_stage(int index, InstructionKind kind,
                                 const std::vector<SentencePair>& pairs,
                                 const RejectedMap* rejected, const TrainerHyperparams& hp,
                                 const Template& tpl, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::string filename = "stage-" + std::to_string(index) + ".jsonl";
  std::filesystem::path path = out_dir / filename;
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ForgeError(ErrorCode::IoError, "cannot write " + path.string());
    for (const SentencePair& pair : pairs)
      out << instruction_to_jsonl(build_instruction_for(kind, pair, rejected, tpl), tpl) << "\n";
  }
  size_t on_disk = line_count(path);
  if (on_disk != pairs.size())
    throw ForgeError(ErrorCode::InvariantViolation,
                     path.string() + ": wrote " + std::to_string(pairs.size()) +
                         " records but file holds " + std::to_string(on_disk));
  StageManifest manifest;
  manifest.stage_index = index;
  manifest.kind = kind;
  manifest.dataset_path = filename;
  manifest.record_count = on_disk;
  manifest.hyperparams = hp;
  return manifest;
}

CurriculumPlan plan_single_task(InstructionKind kind, const Corpus& corpus,
                                const TrainerHyperparams& hp, DataFamily family,
                                const RejectedMap* rejected, const Template& tpl,
                                const std::filesystem::path& out_dir) {
  if (corpus.pairs.empty()) throw ForgeError(ErrorCode::EmptyCorpus, "corpus is empty");
  hp.validate();
  CurriculumPlan plan;
  plan.name = kind == InstructionKind::MT            ? "Instruct-MT"
              : kind == InstructionKind::Contrastive ? "Instruct-Cont"
                                                     : "Instruct-Grammar";
  plan.data_family = family;
  plan.stages.push_back(write_stage(1, kind, corpus.pairs, rejected, hp, tpl, out_dir));
  write_plan_json(plan, out_dir);
  return plan;
}

CurriculumPlan plan_cont_mt(const Corpus& corpus, const TrainerHyperparams& hp, DataFamily family,
                            std::uint64_t seed, const RejectedMap& rejected, const Template& tpl,
                            const std::filesystem::path& out_dir) {
  if (corpus.pairs.size() < 2)
    throw ForgeError(ErrorCode::EmptyCorpus, "need at least 2 pairs for a two-stage plan");
  hp.validate();
  std::vector<Corpus> slices = split_corpus(corpus, {0.5, 0.5}, seed);
  CurriculumPlan plan;
  plan.name = "CONT+MT";
  plan.data_family = family;
  plan.seed = seed;
  plan.stages.push_back(
      write_stage(1, InstructionKind::Contrastive, slices[0].pairs, &rejected, hp, tpl, out_dir));
  plan.stages.push_back(
      write_stage(2, InstructionKind::MT, slices[1].pairs, nullptr, hp, tpl, out_dir));
  write_plan_json(plan, out_dir);
  return plan;
}

CurriculumPlan plan_grammar_cont_mt(const Corpus& grammar_corpus, const Corpus& mt_corpus,
                                    const TrainerHyperparams& hp, DataFamily family,
                                    std::uint64_t seed, const RejectedMap& rejected,
                                    const Template& tpl, const std::filesystem::path& out_dir) {
  if (grammar_corpus.pairs.empty())
    throw ForgeError(ErrorCode::EmptyCorpus, "grammar corpus is empty");
  if (mt_corpus.pairs.size() < 2)
    throw ForgeError(ErrorCode::EmptyCorpus, "need at least 2 translation pairs");
  hp.validate();
  std::vector<Corpus> slices = split_corpus(mt_corpus, {0.5, 0.5}, seed);
  CurriculumPlan plan;
  plan.name = "Grammar+CONT+MT";
  plan.data_family = family;
  plan.seed = seed;
  plan.stages.push_back(
      write_stage(1, InstructionKind::Grammar, grammar_corpus.pairs, nullptr, hp, tpl, out_dir));
  plan.stages.push_back(
      write_stage(2, InstructionKind::Contrastive, slices[0].pairs, &rejected, hp, tpl, out_dir));
  plan.stages.push_back(
      write_stage(3, InstructionKind::MT, slices[1].pairs, nullptr, hp, tpl, out_dir));
  write_plan_json(plan, out_dir);
  return plan;
}

void export_cpo_dataset(const std::vector<std::pair<SentencePair, std::string>>& pairs,
                        const Template& tpl, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ForgeError(ErrorCode::IoError, "cannot write " + path.string());
  for (const auto& [pair, rejected] : pairs) {
    if (rejected.empty() || normalize_text(rejected) == normalize_text(pair.target_en))
      throw ForgeError(ErrorCode::DegeneratePair,
                       "pair " + pair.id + " has a degenerate rejected translation");
    nlohmann::ordered_json obj;
    obj["prompt"] = build_zero_shot(pair.source_leb, tpl);
    obj["chosen"] = pair.target_en;
    obj["rejected"] = rejected;
    out << obj.dump() << "\n";
  }
}

static nlohmann::ordered_json hyperparams_json(const TrainerHyperparams& hp) {
  nlohmann::ordered_json obj;
  obj["lora_rank"] = hp.lora_rank;
  obj["batch_size"] = hp.batch_size;
  obj["grad_accum_steps"] = hp.grad_accum_steps;
  obj["epochs"] = hp.epochs;
  obj["quantized_base"] = hp.quantized_base;
  return obj;
}

void write_plan_json(const CurriculumPlan& plan, const std::filesystem::path& out_dir) {
  nlohmann::ordered_json doc;
  doc["name"] = plan.name;
  doc["data_family"] = data_family_name(plan.data_family);
  doc["seed"] = plan.seed;
  doc["stages"] = nlohmann::ordered_json::array();
  for (const StageManifest& stage : plan.stages) {
    nlohmann::ordered_json s;
    s["stage_index"] = stage.stage_index;
    s["instruction_kind"] = instruction_kind_name(stage.kind);
    s["dataset_path"] = stage.dataset_path;
    s["record_count"] = stage.record_count;
    s["hyperparams"] = hyperparams_json(stage.hyperparams);
    doc["stages"].push_back(std::move(s));
  }
  std::ofstream out(out_dir / "plan.json", std::ios::binary);
  if (!out) throw ForgeError(ErrorCode::IoError, "cannot write plan.json");
  out << doc.dump(2) << "\n";
}

CurriculumPlan read_plan_json(const std::filesystem::path& plan_file) {
  std::ifstream in(plan_file);
  if (!in) throw ForgeError(ErrorCode::IoError, "cannot open " + plan_file.string());
  nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw ForgeError(ErrorCode::MalformedRecord, "plan.json is invalid");
  CurriculumPlan plan;
  plan.name = doc.at("name").get<std::string>();
  plan.data_family = data_family_from_name(doc.at("data_family").get<std::string>());
  plan.seed = doc.at("seed").get<std::uint64_t>();
  for (const auto& s : doc.at("stages")) {
    StageManifest stage;
    stage.stage_index = s.at("stage_index").get<int>();
    stage.kind = instruction_kind_from_name(s.at("instruction_kind").get<std::string>());
    stage.dataset_path = s.at("dataset_path").get<std::string>();
    stage.record_count = s.at("record_count").get<size_t>();
    const auto& hp = s.at("hyperparams");
    stage.hyperparams.lora_rank = hp.at("lora_rank").get<int>();
    stage.hyperparams.batch_size = hp.at("batch_size").get<int>();
    stage.hyperparams.grad_accum_steps = hp.at("grad_accum_steps").get<int>();
    stage.hyperparams.epochs = hp.at("epochs").get<int>();
    stage.hyperparams.quantized_base = hp.at("quantized_base").get<bool>();
    plan.stages.push_back(std::move(stage));
  }
  return plan;
}

RejectedMap read_rejected_map(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ForgeError(ErrorCode::IoError, "cannot open " + path.string());
  RejectedMap out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.contains("id") || !obj.contains("rejected"))
      throw ForgeError(ErrorCode::MalformedRecord,
                       path.string() + " line " + std::to_string(line_no) + " malformed");
    out[obj["id"].get<std::string>()] = obj["rejected"].get<std::string>();
  }
  return out;
}

void write_rejected_map(const RejectedMap& rejected, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ForgeError(ErrorCode::IoError, "cannot write " + path.string());
  for (const auto& [id, text] : rejected) {
    nlohmann::ordered_json obj;
    obj["id"] = id;
    obj["rejected"] = text;
    out << obj.dump() << "\n";
  }
}

}  // namespace forge
