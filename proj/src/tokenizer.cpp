#include "plp/tokenizer.hpp"

#include <array>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <sstream>

#include "plp/errors.hpp"

namespace plp::embedder {

namespace {

constexpr std::string_view kStartToken = "<|startoftext|>";
constexpr std::string_view kEndToken = "<|endoftext|>";
constexpr std::string_view kWordEnd = "</w>";

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

// GPT-2 byte -> printable unicode table.
const std::array<std::string, 256>& byte_encoder() {
    static const auto table = [] {
        std::array<std::string, 256> t;
        std::array<bool, 256> direct{};
        for (int b = '!'; b <= '~'; ++b) direct[b] = true;
        for (int b = 0xA1; b <= 0xAC; ++b) direct[b] = true;
        for (int b = 0xAE; b <= 0xFF; ++b) direct[b] = true;
        char32_t next = 256;
        for (int b = 0; b < 256; ++b) {
            append_utf8(t[b], direct[b] ? static_cast<char32_t>(b) : next++);
        }
        return t;
    }();
    return table;
}

struct CodePoint {
    char32_t value;
    std::size_t offset;
    std::size_t length;
};

std::vector<CodePoint> decode_utf8(std::string_view s) {
    std::vector<CodePoint> out;
    std::size_t i = 0;
    while (i < s.size()) {
        const auto c = static_cast<unsigned char>(s[i]);
        std::size_t len;
        char32_t cp;
        if (c < 0x80) {
            len = 1;
            cp = c;
        } else if ((c >> 5) == 0x6) {
            len = 2;
            cp = c & 0x1F;
        } else if ((c >> 4) == 0xE) {
            len = 3;
            cp = c & 0x0F;
        } else if ((c >> 3) == 0x1E) {
            len = 4;
            cp = c & 0x07;
        } else {
            throw TokenizationError("invalid UTF-8 lead byte at offset " + std::to_string(i));
        }
        if (i + len > s.size()) throw TokenizationError("truncated UTF-8 sequence");
        for (std::size_t k = 1; k < len; ++k) {
            const auto cc = static_cast<unsigned char>(s[i + k]);
            if ((cc >> 6) != 0x2) throw TokenizationError("invalid UTF-8 continuation byte");
            cp = (cp << 6) | (cc & 0x3F);
        }
        out.push_back({cp, i, len});
        i += len;
    }
    return out;
}

bool is_space(char32_t c) {
    return c == ' ' || (c >= 0x09 && c <= 0x0D) || c == 0x85 || c == 0xA0 || c == 0x1680 ||
           (c >= 0x2000 && c <= 0x200A) || c == 0x2028 || c == 0x2029 || c == 0x202F || c == 0x205F ||
           c == 0x3000;
}

bool is_digit(char32_t c) { return (c >= '0' && c <= '9') || (c >= 0xFF10 && c <= 0xFF19); }

// Approximation of \p{L} without a Unicode database: ASCII letters exactly;
// non-ASCII code points count as letters outside the common punctuation and
// symbol blocks.
bool is_letter(char32_t c) {
    if (c < 0x80) return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
    if (is_space(c) || is_digit(c)) return false;
    if (c >= 0xA1 && c <= 0xBF) return c == 0xAA || c == 0xB5 || c == 0xBA;
    if (c == 0xD7 || c == 0xF7) return false;
    if (c >= 0x2000 && c <= 0x2BFF) return false;
    if (c >= 0x3000 && c <= 0x303F) return false;
    if (c >= 0xFE30 && c <= 0xFE4F) return false;
    if (c >= 0xFF00 && c <= 0xFF20) return false;
    if (c >= 0x1F000 && c <= 0x1FAFF) return false;
    return true;
}

std::string ascii_lower_collapse(std::string_view text) {
    std::string out;
    bool pending_space = false;
    for (const auto& cp : decode_utf8(text)) {
        if (is_space(cp.value)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        if (cp.value >= 'A' && cp.value <= 'Z') {
            out.push_back(static_cast<char>(cp.value - 'A' + 'a'));
        } else {
            out.append(text.substr(cp.offset, cp.length));
        }
    }
    return out;
}

}  // namespace

BpeTokenizer::BpeTokenizer(std::unordered_map<std::string, std::int64_t> vocab,
                           std::vector<std::pair<std::string, std::string>> merges)
    : vocab_(std::move(vocab)) {
    for (std::size_t i = 0; i < merges.size(); ++i) ranks_.emplace(std::move(merges[i]), i);
    const auto s = vocab_.find(std::string(kStartToken));
    const auto e = vocab_.find(std::string(kEndToken));
    if (s == vocab_.end() || e == vocab_.end()) {
        throw ConfigError("tokenizer vocabulary lacks start/end tokens");
    }
    sot_ = s->second;
    eot_ = e->second;
}

namespace {

std::unordered_map<std::string, std::int64_t> read_vocab(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open tokenizer vocabulary " + path.string());
    const auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ParseError(path.string() + ": vocabulary is not a JSON object");
    std::unordered_map<std::string, std::int64_t> vocab;
    for (const auto& [token, id] : j.items()) {
        if (!id.is_number_integer()) throw ParseError(path.string() + ": non-integer id for '" + token + "'");
        vocab.emplace(token, id.get<std::int64_t>());
    }
    return vocab;
}

std::vector<std::pair<std::string, std::string>> read_merges(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open tokenizer merges " + path.string());
    std::vector<std::pair<std::string, std::string>> merges;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (first && line.rfind("#version", 0) == 0) {
            first = false;
            continue;
        }
        first = false;
        if (line.empty()) continue;
        const auto sp = line.find(' ');
        if (sp == std::string::npos || sp == 0 || sp + 1 == line.size()) {
            throw ParseError(path.string() + ": malformed merge '" + line + "'");
        }
        merges.emplace_back(line.substr(0, sp), line.substr(sp + 1));
    }
    return merges;
}

}  // namespace

BpeTokenizer::BpeTokenizer(const std::filesystem::path& vocab_json, const std::filesystem::path& merges_txt)
    : BpeTokenizer(read_vocab(vocab_json), read_merges(merges_txt)) {}

std::vector<std::string> BpeTokenizer::pre_tokenize(std::string_view text) {
    const std::string clean = ascii_lower_collapse(text);
    const auto cps = decode_utf8(clean);
    std::vector<std::string> out;
    std::size_t i = 0;
    auto starts_with = [&](std::size_t at, std::string_view lit) {
        return clean.compare(cps[at].offset, lit.size(), lit) == 0;
    };
    while (i < cps.size()) {
        const char32_t c = cps[i].value;
        if (is_space(c)) {
            ++i;
            continue;
        }
        bool special = false;
        for (auto lit : {kStartToken, kEndToken}) {
            if (starts_with(i, lit)) {
                out.emplace_back(lit);
                i += lit.size();  // ASCII literal: one byte per code point
                special = true;
                break;
            }
        }
        if (special) continue;
        if (c == '\'') {
            bool matched = false;
            for (std::string_view suffix : {"'s", "'t", "'re", "'ve", "'m", "'ll", "'d"}) {
                if (starts_with(i, suffix)) {
                    out.emplace_back(suffix);
                    i += suffix.size();
                    matched = true;
                    break;
                }
            }
            if (matched) continue;
        }
        std::size_t j = i + 1;
        if (is_letter(c)) {
            while (j < cps.size() && is_letter(cps[j].value)) ++j;
        } else if (!is_digit(c)) {
            while (j < cps.size() && !is_space(cps[j].value) && !is_letter(cps[j].value) &&
                   !is_digit(cps[j].value)) {
                ++j;
            }
        }
        const std::size_t begin = cps[i].offset;
        const std::size_t end = j < cps.size() ? cps[j].offset : clean.size();
        out.push_back(clean.substr(begin, end - begin));
        i = j;
    }
    return out;
}

std::vector<std::string> BpeTokenizer::bpe(const std::string& word) const {
    const auto& enc = byte_encoder();
    std::vector<std::string> symbols;
    for (unsigned char b : word) symbols.push_back(enc[b]);
    if (symbols.empty()) return symbols;
    symbols.back() += kWordEnd;

    while (symbols.size() > 1) {
        std::size_t best_rank = std::numeric_limits<std::size_t>::max();
        std::size_t best_at = 0;
        for (std::size_t k = 0; k + 1 < symbols.size(); ++k) {
            const auto it = ranks_.find({symbols[k], symbols[k + 1]});
            if (it != ranks_.end() && it->second < best_rank) {
                best_rank = it->second;
                best_at = k;
            }
        }
        if (best_rank == std::numeric_limits<std::size_t>::max()) break;
        // Merge every occurrence of the best pair, left to right.
        const std::string first = symbols[best_at];
        const std::string second = symbols[best_at + 1];
        std::vector<std::string> merged;
        for (std::size_t k = 0; k < symbols.size();) {
            if (k + 1 < symbols.size() && symbols[k] == first && symbols[k + 1] == second) {
                merged.push_back(first + second);
                k += 2;
            } else {
                merged.push_back(symbols[k]);
                ++k;
            }
        }
        symbols = std::move(merged);
    }
    return symbols;
}

std::vector<std::int64_t> BpeTokenizer::encode(std::string_view text) const {
    std::vector<std::int64_t> ids;
    for (const auto& word : pre_tokenize(text)) {
        if (word == kStartToken) {
            ids.push_back(sot_);
            continue;
        }
        if (word == kEndToken) {
            ids.push_back(eot_);
            continue;
        }
        for (const auto& symbol : bpe(word)) {
            const auto it = vocab_.find(symbol);
            if (it == vocab_.end()) throw TokenizationError("no vocabulary entry for '" + symbol + "'");
            ids.push_back(it->second);
        }
    }
    return ids;
}

std::vector<std::int64_t> BpeTokenizer::encode_padded(std::string_view text, std::size_t context_length) const {
    if (context_length < 2) throw PreconditionError("context length must be >= 2");
    std::vector<std::int64_t> out;
    out.reserve(context_length);
    out.push_back(sot_);
    for (auto id : encode(text)) out.push_back(id);
    out.push_back(eot_);
    if (out.size() > context_length) {
        out.resize(context_length);
        out.back() = eot_;
    }
    out.resize(context_length, 0);
    return out;
}

}  // namespace plp::embedder
