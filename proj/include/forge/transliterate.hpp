#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace forge {

// A single-character rule. Vowels carry distinct word-position forms (the
// medial form is usually empty: Arabic orthography omits most short vowels);
// consonants and punctuation use the same form everywhere.
struct SingleRule {
  std::string initial;
  std::string medial;
  std::string final_form;

  static SingleRule fixed(std::string form) { return {form, form, form}; }
  bool operator==(const SingleRule&) const = default;
};

// Ordered Arabizi -> Arabic-script rule table. Ships as a versioned JSON data
// file ({version, multi, single, digits}) so the mapping can be revised
// without code changes; RuleTable::v1() is the built-in copy of that file.
struct RuleTable {
  std::string version;
  std::vector<std::pair<std::string, std::string>> multi_char_rules;  // longest-match-first
  std::map<char, SingleRule> single_char_rules;
  std::map<char, std::string> digit_rules;

  static RuleTable v1();
  static RuleTable from_json_file(const std::filesystem::path& path);

  // Longest-first ordering, no duplicate left-hand sides, Arabic-or-empty
  // right-hand sides. Throws ForgeError(InvariantViolation) on violation.
  void validate() const;

  bool operator==(const RuleTable&) const = default;
};

struct TransliterationResult {
  std::string output;
  // (codepoint index, char) of Latin letters / digits left untouched.
  std::vector<std::pair<size_t, char32_t>> unmapped;
  // Latin letters / ASCII digits consumed by some rule.
  size_t converted_latin_digit = 0;
};

// Left-to-right greedy longest-match conversion. Punctuation and whitespace
// are preserved, unmappable characters are reported and copied through, and
// the function is idempotent on pure Arabic-script input.
TransliterationResult transliterate(const std::string& text, const RuleTable& rules);

}  // namespace forge
