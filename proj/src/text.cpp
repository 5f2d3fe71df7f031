#include "forge/text.hpp"

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include <array>
#include <cstdio>

#include "forge/errors.hpp"

namespace forge {

bool is_valid_utf8(const std::string& text) {
  size_t i = 0;
  const auto* s = reinterpret_cast<const unsigned char*>(text.data());
  const size_t n = text.size();
  while (i < n) {
    unsigned char c = s[i];
    size_t len;
    char32_t cp;
    if (c < 0x80) {
      len = 1;
      cp = c;
    } else if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + len > n) return false;
    for (size_t j = 1; j < len; ++j) {
      if ((s[i + j] & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (s[i + j] & 0x3F);
    }
    // Reject overlongs, surrogates, and out-of-range values.
    if (len == 2 && cp < 0x80) return false;
    if (len == 3 && cp < 0x800) return false;
    if (len == 4 && cp < 0x10000) return false;
    if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return false;
    i += len;
  }
  return true;
}

std::vector<char32_t> decode_utf8(const std::string& text) {
  if (!is_valid_utf8(text)) throw ForgeError(ErrorCode::EncodingError, "invalid UTF-8 input");
  std::vector<char32_t> out;
  out.reserve(text.size());
  size_t i = 0;
  const auto* s = reinterpret_cast<const unsigned char*>(text.data());
  while (i < text.size()) {
    unsigned char c = s[i];
    size_t len = c < 0x80 ? 1 : (c & 0xE0) == 0xC0 ? 2 : (c & 0xF0) == 0xE0 ? 3 : 4;
    char32_t cp = len == 1 ? c : c & (0x7F >> len);
    for (size_t j = 1; j < len; ++j) cp = (cp << 6) | (s[i + j] & 0x3F);
    out.push_back(cp);
    i += len;
  }
  return out;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

static std::string nfc(const std::string& text) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* norm = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw ForgeError(ErrorCode::EncodingError, "ICU NFC unavailable");
  icu::UnicodeString input = icu::UnicodeString::fromUTF8(text);
  icu::UnicodeString result = norm->normalize(input, status);
  if (U_FAILURE(status)) throw ForgeError(ErrorCode::EncodingError, "NFC normalization failed");
  std::string out;
  result.toUTF8String(out);
  return out;
}

std::string normalize_text(const std::string& text) {
  if (!is_valid_utf8(text)) throw ForgeError(ErrorCode::EncodingError, "invalid UTF-8 input");
  std::string composed = nfc(text);
  std::vector<char32_t> cps = decode_utf8(composed);
  std::string out;
  out.reserve(composed.size());
  bool pending_space = false;
  bool seen_content = false;
  for (char32_t cp : cps) {
    if (u_isUWhiteSpace(static_cast<UChar32>(cp))) {
      pending_space = seen_content;
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    append_utf8(out, cp);
    seen_content = true;
  }
  return out;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char32_t cp : decode_utf8(text)) {
    auto c = static_cast<UChar32>(cp);
    bool word_char = u_isalnum(c) || u_charType(c) == U_NON_SPACING_MARK;
    if (word_char) {
      append_utf8(current, cp);
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string fnv1a64_hex(const std::string& data) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(data)));
  return std::string(buf);
}

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedRecord: return "MalformedRecord";
    case ErrorCode::EmptyFile: return "EmptyFile";
    case ErrorCode::EncodingError: return "EncodingError";
    case ErrorCode::SizeMismatch: return "SizeMismatch";
    case ErrorCode::InvalidFractions: return "InvalidFractions";
    case ErrorCode::DegeneratePair: return "DegeneratePair";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
    case ErrorCode::EndpointUnreachable: return "EndpointUnreachable";
    case ErrorCode::RateLimited: return "RateLimited";
    case ErrorCode::EmptyCompletion: return "EmptyCompletion";
    case ErrorCode::AllSamplesDegenerate: return "AllSamplesDegenerate";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::ScoreOutOfRange: return "ScoreOutOfRange";
    case ErrorCode::NoParsableExamples: return "NoParsableExamples";
    case ErrorCode::EmptyPool: return "EmptyPool";
    case ErrorCode::MissingVectors: return "MissingVectors";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::TooManyFailures: return "TooManyFailures";
    case ErrorCode::InconsistentGrid: return "InconsistentGrid";
    case ErrorCode::ConfigMissing: return "ConfigMissing";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoError: return "IoError";
  }
  return "UnknownError";
}

}  // namespace forge
