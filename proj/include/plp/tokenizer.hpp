#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace plp::embedder {

// Byte-level BPE in the CLIP convention: words end with "</w>", sequences are
// wrapped in <|startoftext|> ... <|endoftext|> and zero-padded to the context
// length. Over-long inputs are truncated with the end token kept last.
class BpeTokenizer {
public:
    static constexpr std::size_t kContextLength = 77;

    // vocab: JSON object token -> id. merges: one "a b" pair per line; a first
    // line starting with "#version" is skipped.
    BpeTokenizer(const std::filesystem::path& vocab_json, const std::filesystem::path& merges_txt);
    BpeTokenizer(std::unordered_map<std::string, std::int64_t> vocab,
                 std::vector<std::pair<std::string, std::string>> merges);

    // Token ids of the text without start/end tokens. Throws TokenizationError.
    std::vector<std::int64_t> encode(std::string_view text) const;

    // Fixed-length sequence fed to the text encoder.
    std::vector<std::int64_t> encode_padded(std::string_view text,
                                            std::size_t context_length = kContextLength) const;

    std::int64_t start_token() const noexcept { return sot_; }
    std::int64_t end_token() const noexcept { return eot_; }

    // Lowercased, whitespace-collapsed text split into pre-tokens.
    static std::vector<std::string> pre_tokenize(std::string_view text);

private:
    std::vector<std::string> bpe(const std::string& word) const;

    std::unordered_map<std::string, std::int64_t> vocab_;
    std::map<std::pair<std::string, std::string>, std::size_t> ranks_;
    std::int64_t sot_ = 0;
    std::int64_t eot_ = 0;
};

}  // namespace plp::embedder
