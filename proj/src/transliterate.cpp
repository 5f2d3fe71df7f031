#include "forge/transliterate.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "forge/errors.hpp"
#include "forge/text.hpp"
#include "json.hpp"

namespace forge {

static bool is_arabic_cp(char32_t cp) {
  return (cp >= 0x0600 && cp <= 0x06FF) || (cp >= 0x0750 && cp <= 0x077F) ||
         (cp >= 0x08A0 && cp <= 0x08FF) || (cp >= 0xFB50 && cp <= 0xFDFF) ||
         (cp >= 0xFE70 && cp <= 0xFEFF);
}

static bool is_arabic_or_empty(const std::string& s) {
  for (char32_t cp : decode_utf8(s))
    if (!is_arabic_cp(cp)) return false;
  return true;
}

void RuleTable::validate() const {
  for (size_t i = 1; i < multi_char_rules.size(); ++i) {
    if (multi_char_rules[i - 1].first.size() < multi_char_rules[i].first.size())
      throw ForgeError(ErrorCode::InvariantViolation, "multi rules not longest-first");
  }
  std::vector<std::string> lhs;
  for (const auto& [left, right] : multi_char_rules) {
    if (left.empty())
      throw ForgeError(ErrorCode::InvariantViolation, "empty multi rule left-hand side");
    if (std::find(lhs.begin(), lhs.end(), left) != lhs.end())
      throw ForgeError(ErrorCode::InvariantViolation, "duplicate multi rule '" + left + "'");
    lhs.push_back(left);
    if (!is_arabic_or_empty(right))
      throw ForgeError(ErrorCode::InvariantViolation,
                       "multi rule '" + left + "' maps outside Arabic script");
  }
  for (const auto& [ch, rule] : single_char_rules) {
    (void)ch;
    if (!is_arabic_or_empty(rule.initial) || !is_arabic_or_empty(rule.medial) ||
        !is_arabic_or_empty(rule.final_form))
      throw ForgeError(ErrorCode::InvariantViolation, "single rule maps outside Arabic script");
  }
  for (const auto& [ch, form] : digit_rules) {
    (void)ch;
    if (form.empty() || !is_arabic_or_empty(form))
      throw ForgeError(ErrorCode::InvariantViolation, "digit rule maps outside Arabic script");
  }
}

RuleTable RuleTable::v1() {
  RuleTable t;
  t.version = "v1";
  t.multi_char_rules = {
      {"aa", "ا"}, {"ee", "ي"}, {"oo", "و"}, {"ou", "و"}, {"sh", "ش"},
      {"ch", "ش"}, {"th", "ث"}, {"kh", "خ"}, {"gh", "غ"}, {"ph", "ف"},
  };
  auto fixed = [](const char* s) { return SingleRule::fixed(s); };
  t.single_char_rules = {
      {'b', fixed("ب")}, {'t', fixed("ت")}, {'j', fixed("ج")}, {'d', fixed("د")},
      {'r', fixed("ر")}, {'z', fixed("ز")}, {'s', fixed("س")}, {'f', fixed("ف")},
      {'q', fixed("ق")}, {'k', fixed("ك")}, {'l', fixed("ل")}, {'m', fixed("م")},
      {'n', fixed("ن")}, {'h', fixed("ه")}, {'w', fixed("و")}, {'y', fixed("ي")},
      {'g', fixed("غ")}, {'p', fixed("ب")}, {'v', fixed("ڤ")}, {'c', fixed("ك")},
      {'x', fixed("كس")},
      {'a', {"ا", "", "ا"}},
      {'e', {"ا", "", "ه"}},
      {'i', {"ا", "ي", "ي"}},
      {'o', {"ا", "و", "و"}},
      {'u', {"ا", "و", "و"}},
      {'?', fixed("؟")},
      {',', fixed("،")},
      {';', fixed("؛")},
  };
  t.digit_rules = {
      {'2', "ء"}, {'3', "ع"}, {'5', "خ"}, {'6', "ط"}, {'7', "ح"}, {'8', "غ"}, {'9', "ق"},
  };
  t.validate();
  return t;
}

RuleTable RuleTable::from_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ForgeError(ErrorCode::IoError, "cannot open rule table " + path.string());
  nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded() || !doc.is_object())
    throw ForgeError(ErrorCode::MalformedRecord, "rule table is not a JSON object");

  RuleTable t;
  try {
    t.version = doc.at("version").get<std::string>();
    for (const auto& entry : doc.at("multi")) {
      t.multi_char_rules.emplace_back(entry.at(0).get<std::string>(),
                                      entry.at(1).get<std::string>());
    }
    for (const auto& [key, value] : doc.at("single").items()) {
      if (key.size() != 1)
        throw ForgeError(ErrorCode::MalformedRecord, "single rule key must be one char: " + key);
      SingleRule rule;
      if (value.is_string()) {
        rule = SingleRule::fixed(value.get<std::string>());
      } else {
        rule.initial = value.at("initial").get<std::string>();
        rule.medial = value.at("medial").get<std::string>();
        rule.final_form = value.at("final").get<std::string>();
      }
      t.single_char_rules[key[0]] = rule;
    }
    for (const auto& [key, value] : doc.at("digits").items()) {
      if (key.size() != 1 || !std::isdigit(static_cast<unsigned char>(key[0])))
        throw ForgeError(ErrorCode::MalformedRecord, "digit rule key must be one digit: " + key);
      t.digit_rules[key[0]] = value.get<std::string>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ForgeError(ErrorCode::MalformedRecord, std::string("rule table: ") + e.what());
  }
  // Longest-first is part of the table invariant; enforce it on load so
  // hand-edited files stay valid.
  std::stable_sort(t.multi_char_rules.begin(), t.multi_char_rules.end(),
                   [](const auto& a, const auto& b) { return a.first.size() > b.first.size(); });
  t.validate();
  return t;
}

static bool is_ascii_letter(char32_t cp) {
  return (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z');
}
static bool is_ascii_digit(char32_t cp) { return cp >= '0' && cp <= '9'; }
static bool is_word_char(char32_t cp) { return is_ascii_letter(cp) || is_ascii_digit(cp); }
static char32_t fold(char32_t cp) { return cp >= 'A' && cp <= 'Z' ? cp + 32 : cp; }

TransliterationResult transliterate(const std::string& text, const RuleTable& rules) {
  std::vector<char32_t> cps = decode_utf8(text);
  const size_t n = cps.size();

  // Word runs (maximal Latin-letter/digit spans) drive vowel position forms.
  std::vector<size_t> word_start(n, 0), word_end(n, 0);
  size_t i = 0;
  while (i < n) {
    if (!is_word_char(cps[i])) {
      ++i;
      continue;
    }
    size_t j = i;
    while (j < n && is_word_char(cps[j])) ++j;
    for (size_t k = i; k < j; ++k) {
      word_start[k] = i;
      word_end[k] = j;
    }
    i = j;
  }

  TransliterationResult result;
  result.output.reserve(text.size());
  i = 0;
  while (i < n) {
    // Multi-char rules, longest first.
    bool matched = false;
    for (const auto& [left, right] : rules.multi_char_rules) {
      if (left.size() > n - i) continue;
      bool ok = true;
      for (size_t k = 0; k < left.size(); ++k) {
        if (fold(cps[i + k]) != static_cast<char32_t>(static_cast<unsigned char>(left[k]))) {
          ok = false;
          break;
        }
      }
      if (ok) {
        result.output += right;
        for (size_t k = 0; k < left.size(); ++k)
          if (is_word_char(cps[i + k])) ++result.converted_latin_digit;
        i += left.size();
        matched = true;
        break;
      }
    }
    if (matched) continue;

    char32_t cp = cps[i];
    char32_t folded = fold(cp);
    if (is_ascii_digit(cp)) {
      auto it = rules.digit_rules.find(static_cast<char>(cp));
      if (it != rules.digit_rules.end()) {
        result.output += it->second;
        ++result.converted_latin_digit;
      } else {
        result.unmapped.emplace_back(i, cp);
        append_utf8(result.output, cp);
      }
      ++i;
      continue;
    }
    if (folded < 0x80) {
      auto it = rules.single_char_rules.find(static_cast<char>(folded));
      if (it != rules.single_char_rules.end()) {
        const SingleRule& rule = it->second;
        if (is_ascii_letter(cp)) {
          if (i == word_start[i])
            result.output += rule.initial;
          else if (i + 1 == word_end[i])
            result.output += rule.final_form;
          else
            result.output += rule.medial;
          ++result.converted_latin_digit;
        } else {
          result.output += rule.initial;  // punctuation: position-independent
        }
        ++i;
        continue;
      }
    }
    if (is_ascii_letter(cp)) result.unmapped.emplace_back(i, cp);
    append_utf8(result.output, cp);
    ++i;
  }
  return result;
}

}  // namespace forge
