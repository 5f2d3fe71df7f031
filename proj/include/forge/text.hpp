#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace forge {

// Version stamp for the whitespace-and-punctuation tokenizer below. Bumped
// whenever tokenization rules change, so persisted frequency matrices can be
// matched against the tokenizer that produced them.
inline constexpr const char* kTokenizerVersion = "ws-punct-v1";

// NFC-normalize and collapse whitespace runs to single spaces, trimming the
// ends. Throws ForgeError(EncodingError) on invalid UTF-8.
std::string normalize_text(const std::string& text);

// True when the bytes form valid UTF-8.
bool is_valid_utf8(const std::string& text);

// Decode UTF-8 into codepoints. Throws ForgeError(EncodingError) on bad input.
std::vector<char32_t> decode_utf8(const std::string& text);

// Encode one codepoint as UTF-8 and append.
void append_utf8(std::string& out, char32_t cp);

// Unicode-aware split on whitespace and punctuation: a token is a maximal run
// of letters/digits/marks (Arabic letter sequences stay intact), no stemming,
// no case folding.
std::vector<std::string> tokenize(const std::string& text);

// FNV-1a 64-bit, used for provenance hashes and deterministic mock content.
std::uint64_t fnv1a64(const std::string& data);
std::string fnv1a64_hex(const std::string& data);

}  // namespace forge
