#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "plp/clock.hpp"
#include "plp/dataset.hpp"

namespace plp::captiongen {

inline constexpr int kBundleSchemaVersion = 1;
inline constexpr std::string_view kCaptionTemplateId = "pc-v1";
inline constexpr std::string_view kCounterfactualTemplateId = "cf-v1";
// Recorded in every bundle; covers both templates used to produce it.
inline constexpr std::string_view kBundleTemplateId = "pc-v1+cf-v1";
inline constexpr std::string_view kApiKeyEnv = "PLP_LLM_API_KEY";
// base_url values starting with this select the in-process deterministic stub.
inline constexpr std::string_view kStubScheme = "stub:";
inline constexpr std::size_t kMaxCaptionWords = 60;
inline constexpr std::size_t kMinCaptionTokens = 3;
// Upper bound on class names listed in the counterfactual prompt.
inline constexpr std::size_t kMaxPromptLabels = 64;

struct LlmConfig {
    std::string base_url = "https://api.openai.com/v1";
    std::string model_name = "gpt-5-nano";
    double caption_temperature = 0.2;
    double counterfactual_temperature = 0.7;
    int max_retries = 2;
    double timeout_seconds = 60.0;
    int requests_per_minute = 60;
    int max_in_flight = 4;

    bool is_stub() const;
    // Throws ConfigError on out-of-range fields.
    void validate() const;
};

struct CaptionBundle {
    std::string dataset_id;
    std::string class_label;
    std::string image_ref;
    std::string plausible_caption;
    std::vector<std::string> counterfactuals;
    std::string llm_model;
    std::string prompt_template_id;
    std::string created_at;

    friend bool operator==(const CaptionBundle&, const CaptionBundle&) = default;
};

// Lowercase, whitespace-collapsed, trimmed form used for equality checks.
std::string normalize_caption(std::string_view text);

// Throws ValidationError when a bundle breaks its invariants.
void validate_bundle(const CaptionBundle& bundle, std::size_t expected_counterfactuals);

// ---- prompts ---------------------------------------------------------------

std::string render_caption_prompt(const std::string& class_label);
std::string render_counterfactual_prompt(const std::string& plausible_caption,
                                         const std::string& class_label,
                                         const std::vector<std::string>& other_labels,
                                         std::size_t count);

// ---- transport -------------------------------------------------------------

struct ChatReply {
    int status = 0;  // HTTP status; 0 when the request did not complete
    std::string body;
};

// Posts a serialized chat-completions request body and returns the raw reply.
class ChatTransport {
public:
    virtual ~ChatTransport() = default;
    virtual ChatReply post(const std::string& request_body) = 0;
};

class HttpChatTransport final : public ChatTransport {
public:
    HttpChatTransport(const LlmConfig& config, std::string api_key);
    ChatReply post(const std::string& request_body) override;

private:
    std::string base_url_;
    std::string api_key_;
    double timeout_seconds_;
};

// Deterministic offline endpoint. Reads the structured lines of the prompt
// templates and answers with well-formed JSON captions.
class StubChatTransport final : public ChatTransport {
public:
    ChatReply post(const std::string& request_body) override;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
std::optional<std::string> process_env(const std::string& name);

// Stub for stub: URLs; otherwise HTTP with the bearer token from
// PLP_LLM_API_KEY. Missing key is a ConfigError, raised before any request.
std::unique_ptr<ChatTransport> make_transport(const LlmConfig& config,
                                              const EnvLookup& env = process_env);

// ---- client ----------------------------------------------------------------

class LlmClient {
public:
    LlmClient(LlmConfig config, ChatTransport& transport, Clock& clock = system_clock());

    std::string generate_plausible_caption(const dataset::ProbeImage& image,
                                           std::span<const std::uint8_t> image_bytes);

    std::vector<std::string> generate_counterfactuals(const std::string& plausible_caption,
                                                      const std::string& class_label,
                                                      const std::vector<std::string>& other_labels,
                                                      std::size_t count);

    const LlmConfig& config() const noexcept { return config_; }
    std::size_t requests_sent() const noexcept { return requests_sent_.load(); }

private:
    template <typename Parse>
    auto request_with_retries(const std::string& body, Parse&& parse) -> decltype(parse(std::string{}));

    LlmConfig config_;
    ChatTransport& transport_;
    Clock& clock_;
    RateLimiter limiter_;
    std::atomic<std::size_t> requests_sent_{0};
};

// ---- persistence -----------------------------------------------------------

std::string file_component(const std::string& name);
std::filesystem::path bundle_path(const std::filesystem::path& dir, const std::string& dataset_id,
                                  const std::string& class_label);

std::string bundle_to_json(const CaptionBundle& bundle);
CaptionBundle bundle_from_json(const std::string& text, const std::string& source);

void store_bundles(std::span<const CaptionBundle> bundles, const std::filesystem::path& dir);
CaptionBundle load_bundle_file(const std::filesystem::path& path);
// Every bundle under dir, ordered by (dataset_id, class_label).
std::vector<CaptionBundle> load_bundles(const std::filesystem::path& dir);
std::vector<CaptionBundle> load_bundles(const std::filesystem::path& dir,
                                        const std::string& dataset_id);

// ---- orchestration ---------------------------------------------------------

struct CaptionRunStats {
    std::size_t generated = 0;
    std::size_t cached = 0;
    std::size_t requests = 0;
};

// Produces one bundle per probe image, reusing any stored bundle with the same
// (dataset_id, class_label, image_ref, prompt_template_id, llm_model). Runs up
// to config.max_in_flight classes concurrently. Returns bundles in probe order.
std::vector<CaptionBundle> generate_bundles(const dataset::DatasetManifest& manifest,
                                            const std::vector<dataset::ProbeImage>& probes,
                                            LlmClient& client, const std::filesystem::path& dir,
                                            std::size_t n_counterfactuals, std::uint64_t seed,
                                            CaptionRunStats* stats = nullptr);

// Class names offered to the counterfactual prompt for target.
std::vector<std::string> prompt_label_pool(const dataset::DatasetManifest& manifest,
                                           const std::string& target, std::uint64_t seed);

std::string utc_timestamp();

}  // namespace plp::captiongen
