#include <doctest.h>

#include <json.hpp>

#include "plp/errors.hpp"
#include "plp/tokenizer.hpp"
#include "test_util.hpp"

using namespace plp;
using namespace plp::embedder;

namespace {

BpeTokenizer fixture_tokenizer() {
    const std::filesystem::path dir = std::filesystem::path(PLP_TEST_DATA) / "local_model";
    return BpeTokenizer(dir / "vocab.json", dir / "merges.txt");
}

}  // namespace

TEST_SUITE("tokenizer") {

TEST_CASE("matches the reference CLIP tokenizer on the fixture vocabulary") {
    // Expected ids were produced by the Hugging Face CLIP tokenizer over the
    // same vocab/merges (tests/data/make_fixtures.py).
    const auto tok = fixture_tokenizer();
    const auto cases =
        nlohmann::json::parse(test::slurp(std::filesystem::path(PLP_TEST_DATA) / "tokenizer_expected.json"));
    REQUIRE(cases.size() >= 5);
    for (const auto& c : cases) {
        const auto text = c["text"].get<std::string>();
        const auto expected = c["ids"].get<std::vector<std::int64_t>>();
        auto got = tok.encode(text);
        got.insert(got.begin(), tok.start_token());
        got.push_back(tok.end_token());
        INFO("text: " << text);
        CHECK(got == expected);
    }
}

TEST_CASE("padding and truncation") {
    const auto tok = fixture_tokenizer();
    const auto short_ids = tok.encode_padded("a cat");
    CHECK(short_ids.size() == 77);
    CHECK(short_ids.front() == tok.start_token());
    CHECK(short_ids[3] == tok.end_token());
    CHECK(short_ids[4] == 0);
    CHECK(short_ids.back() == 0);

    std::string long_text;
    for (int i = 0; i < 200; ++i) long_text += "cat ";
    const auto long_ids = tok.encode_padded(long_text);
    CHECK(long_ids.size() == 77);
    CHECK(long_ids.front() == tok.start_token());
    CHECK(long_ids.back() == tok.end_token());
}

TEST_CASE("pre-tokenization") {
    CHECK(BpeTokenizer::pre_tokenize("  Hello,   WORLD!! ") ==
          std::vector<std::string>{"hello", ",", "world", "!!"});
    CHECK(BpeTokenizer::pre_tokenize("it's 2024") == std::vector<std::string>{"it", "'s", "2", "0", "2", "4"});
}

TEST_CASE("invalid UTF-8 is rejected") {
    const auto tok = fixture_tokenizer();
    CHECK_THROWS_AS(tok.encode(std::string("bad \xC3\x28 byte")), TokenizationError);
}

TEST_CASE("in-memory construction") {
    std::unordered_map<std::string, std::int64_t> vocab{{"<|startoftext|>", 0}, {"<|endoftext|>", 1},
                                                        {"a", 2},  {"b", 3}, {"b</w>", 4}, {"ab</w>", 5}, {"a</w>", 6}};
    BpeTokenizer tok(vocab, {{"a", "b</w>"}});
    CHECK(tok.encode("ab") == std::vector<std::int64_t>{5});
    CHECK(tok.encode("ab a") == std::vector<std::int64_t>{5, 6});
}

}
