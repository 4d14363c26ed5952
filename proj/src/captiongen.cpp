#include "plp/captiongen.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "plp/errors.hpp"
#include "plp/http.hpp"
#include "plp/image.hpp"
#include "plp/log.hpp"

namespace plp::captiongen {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr std::string_view kLabelLine = "Class label (JSON): ";
constexpr std::string_view kReferenceLine = "Reference caption (JSON): ";
constexpr std::string_view kOthersLine = "Other classes in the dataset (JSON): ";
constexpr std::string_view kCountLine = "Number of captions: ";

std::vector<std::string> split_words(std::string_view text) {
    std::vector<std::string> words;
    std::string current;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!current.empty()) words.push_back(std::move(current));
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    if (!current.empty()) words.push_back(std::move(current));
    return words;
}

std::string collapse_whitespace(std::string_view text) {
    std::string out;
    for (const auto& w : split_words(text)) {
        if (!out.empty()) out.push_back(' ');
        out += w;
    }
    return out;
}

// Accepts a bare JSON object or one wrapped in a ``` fence.
json parse_structured_content(const std::string& content) {
    const auto first = content.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) throw MalformedResponse("empty content");
    std::string trimmed = content.substr(first);
    if (trimmed.rfind("```", 0) == 0) {
        const auto nl = trimmed.find('\n');
        const auto close = trimmed.rfind("```");
        if (nl == std::string::npos || close <= nl) throw MalformedResponse("unterminated code fence");
        trimmed = trimmed.substr(nl + 1, close - nl - 1);
    }
    json parsed = json::parse(trimmed, nullptr, false);
    if (parsed.is_discarded() || !parsed.is_object()) {
        throw MalformedResponse("content is not a JSON object");
    }
    return parsed;
}

// Extracts the assistant content from a chat-completions reply body.
std::string assistant_content(const std::string& body) {
    json reply = json::parse(body, nullptr, false);
    if (reply.is_discarded() || !reply.is_object()) throw MalformedResponse("reply is not JSON");
    const auto choices = reply.find("choices");
    if (choices == reply.end() || !choices->is_array() || choices->empty()) {
        throw MalformedResponse("reply has no choices");
    }
    const json& choice = (*choices)[0];
    if (choice.contains("finish_reason") && choice["finish_reason"] == "content_filter") {
        throw PolicyRefusal("response blocked by content filter");
    }
    if (!choice.contains("message") || !choice["message"].is_object()) {
        throw MalformedResponse("choice has no message");
    }
    const json& message = choice["message"];
    if (message.contains("refusal") && message["refusal"].is_string() &&
        !message["refusal"].get<std::string>().empty()) {
        throw PolicyRefusal(message["refusal"].get<std::string>());
    }
    if (!message.contains("content") || !message["content"].is_string()) {
        throw MalformedResponse("message has no text content");
    }
    return message["content"].get<std::string>();
}

std::string chat_request(const std::string& model, double temperature, json content) {
    ordered_json body;
    body["model"] = model;
    body["temperature"] = temperature;
    body["response_format"] = {{"type", "json_object"}};
    body["messages"] = json::array({{{"role", "user"}, {"content", std::move(content)}}});
    return body.dump();
}

std::string find_line_value(const std::string& prompt, std::string_view prefix) {
    std::istringstream in(prompt);
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind(prefix, 0) == 0) return line.substr(prefix.size());
    }
    return {};
}

ChatReply stub_reply(const std::string& content) {
    ordered_json body;
    body["id"] = "stub";
    body["object"] = "chat.completion";
    body["choices"] = json::array(
        {{{"index", 0},
          {"message", {{"role", "assistant"}, {"content", content}}},
          {"finish_reason", "stop"}}});
    return {200, body.dump()};
}

std::string now_utc() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

}  // namespace

// ---- config / invariants ---------------------------------------------------

bool LlmConfig::is_stub() const { return base_url.rfind(kStubScheme, 0) == 0; }

void LlmConfig::validate() const {
    if (model_name.empty()) throw ConfigError("llm model name is empty");
    if (base_url.empty()) throw ConfigError("llm base_url is empty");
    if (!(caption_temperature >= 0.0) || !(counterfactual_temperature >= 0.0)) {
        throw ConfigError("llm temperature must be >= 0");
    }
    if (max_retries < 0 || max_retries > 5) throw ConfigError("max_retries must be in [0, 5]");
    if (!(timeout_seconds >= 1.0 && timeout_seconds <= 600.0)) {
        throw ConfigError("timeout must be in [1, 600] seconds");
    }
    if (requests_per_minute <= 0) throw ConfigError("requests_per_minute must be positive");
    if (max_in_flight <= 0) throw ConfigError("max_in_flight must be positive");
}

std::string normalize_caption(std::string_view text) {
    std::string out = collapse_whitespace(text);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

void validate_bundle(const CaptionBundle& b, std::size_t expected_counterfactuals) {
    const auto where = b.dataset_id + "/" + b.class_label;
    if (split_words(b.plausible_caption).size() < kMinCaptionTokens) {
        throw ValidationError(where + ": plausible caption has fewer than 3 tokens");
    }
    if (b.counterfactuals.size() != expected_counterfactuals) {
        throw ValidationError(where + ": expected " + std::to_string(expected_counterfactuals) +
                              " counterfactuals, found " + std::to_string(b.counterfactuals.size()));
    }
    const auto pc = normalize_caption(b.plausible_caption);
    for (const auto& cf : b.counterfactuals) {
        if (collapse_whitespace(cf).empty()) throw ValidationError(where + ": empty counterfactual");
        if (normalize_caption(cf) == pc) {
            throw ValidationError(where + ": counterfactual equals the plausible caption");
        }
    }
}

// ---- prompts ---------------------------------------------------------------

std::string render_caption_prompt(const std::string& class_label) {
    std::ostringstream p;
    p << "You are captioning a photograph that will be used to probe an image-text model.\n"
      << "The photograph is a labelled example of the class given below.\n"
      << "Write one concise, factual caption (a single sentence, at most 40 words) describing "
         "what is visible in the image. The caption must be consistent with the class label; "
         "the label itself may appear in the caption.\n"
      << "Respond with a JSON object of the form {\"caption\": \"...\"} and nothing else.\n"
      << kLabelLine << json(class_label).dump() << "\n";
    return p.str();
}

std::string render_counterfactual_prompt(const std::string& plausible_caption,
                                         const std::string& class_label,
                                         const std::vector<std::string>& other_labels,
                                         std::size_t count) {
    std::ostringstream p;
    p << "You are writing hard negative captions for an image-text model.\n"
      << "Below is a reference caption of an image of the given class, followed by the other "
         "classes of the same dataset.\n"
      << "Write exactly " << count
      << " counterfactual captions. Each must keep the structure, length and style of the "
         "reference caption but describe a different, visually confusable concept, preferably "
         "one of the other classes. If fewer other classes are listed than captions requested, "
         "also describe other concepts that are easily confused with the class. No caption may "
         "repeat the reference caption or another counterfactual.\n"
      << "Respond with a JSON object of the form {\"counterfactuals\": [\"...\", ...]} holding "
         "exactly "
      << count << " strings and nothing else.\n"
      << kReferenceLine << json(plausible_caption).dump() << "\n"
      << kLabelLine << json(class_label).dump() << "\n"
      << kOthersLine << json(other_labels).dump() << "\n"
      << kCountLine << count << "\n";
    return p.str();
}

// ---- transports ------------------------------------------------------------

HttpChatTransport::HttpChatTransport(const LlmConfig& config, std::string api_key)
    : base_url_(config.base_url), api_key_(std::move(api_key)), timeout_seconds_(config.timeout_seconds) {
    (void)http::parse_endpoint(base_url_);
}

ChatReply HttpChatTransport::post(const std::string& request_body) {
    const auto endpoint = http::parse_endpoint(base_url_);
    auto res = http::post_json(endpoint, "/chat/completions", request_body,
                               {{"Authorization", "Bearer " + api_key_}}, timeout_seconds_);
    if (res.status == 0) log::warning("llm request failed: " + res.error);
    return {res.status, std::move(res.body)};
}

ChatReply StubChatTransport::post(const std::string& request_body) {
    const json request = json::parse(request_body, nullptr, false);
    if (request.is_discarded()) return {400, R"({"error":"invalid JSON"})"};

    std::string prompt;
    for (const auto& message : request.value("messages", json::array())) {
        const json& content = message["content"];
        if (content.is_string()) {
            prompt += content.get<std::string>();
        } else if (content.is_array()) {
            for (const auto& part : content) {
                if (part.value("type", "") == "text") prompt += part.value("text", "");
            }
        }
    }

    const std::string label_json = find_line_value(prompt, kLabelLine);
    if (label_json.empty()) return {400, R"({"error":"unrecognized prompt"})"};
    const std::string label = json::parse(label_json).get<std::string>();
    const std::string count_text = find_line_value(prompt, kCountLine);

    if (count_text.empty()) {
        const std::string caption = "A close-up photograph of a " + label + " in clear natural light.";
        return stub_reply(json{{"caption", caption}}.dump());
    }

    const auto count = static_cast<std::size_t>(std::stoul(count_text));
    std::vector<std::string> others = json::parse(find_line_value(prompt, kOthersLine));
    static const char* const kSettings[] = {
        "in clear natural light",       "seen from a slightly different angle",
        "against a plain background",   "in dim indoor light",
        "photographed from above",      "with a blurred background",
    };
    constexpr std::size_t n_settings = std::size(kSettings);
    std::vector<std::string> captions;
    for (std::size_t i = 0; i < count; ++i) {
        const std::string subject = others.empty() ? "visually similar object number " + std::to_string(i + 1)
                                                   : others[i % others.size()];
        const std::size_t round = others.empty() ? 0 : i / others.size();
        std::string caption = "A close-up photograph of a " + subject + " " + kSettings[round % n_settings];
        if (round >= n_settings) caption += " (variation " + std::to_string(round) + ")";
        captions.push_back(caption + ".");
    }
    return stub_reply(json{{"counterfactuals", captions}}.dump());
}

std::optional<std::string> process_env(const std::string& name) {
    if (const char* v = std::getenv(name.c_str()); v != nullptr && *v != '\0') return std::string(v);
    return std::nullopt;
}

std::unique_ptr<ChatTransport> make_transport(const LlmConfig& config, const EnvLookup& env) {
    config.validate();
    if (config.is_stub()) return std::make_unique<StubChatTransport>();
    (void)http::parse_endpoint(config.base_url);
    auto key = env(std::string(kApiKeyEnv));
    if (!key) {
        throw ConfigError("environment variable " + std::string(kApiKeyEnv) +
                          " is required for endpoint " + config.base_url);
    }
    return std::make_unique<HttpChatTransport>(config, std::move(*key));
}

// ---- client ----------------------------------------------------------------

LlmClient::LlmClient(LlmConfig config, ChatTransport& transport, Clock& clock)
    : config_(std::move(config)),
      transport_(transport),
      clock_(clock),
      limiter_((config_.validate(), config_.requests_per_minute), clock) {}

template <typename Parse>
auto LlmClient::request_with_retries(const std::string& body, Parse&& parse)
    -> decltype(parse(std::string{})) {
    std::string last_problem;
    bool last_was_malformed = false;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        limiter_.acquire();
        ++requests_sent_;
        const ChatReply reply = transport_.post(body);

        if (reply.status == 0 || reply.status == 429 || reply.status >= 500) {
            last_problem = reply.status == 0 ? "no response" : "HTTP " + std::to_string(reply.status);
            last_was_malformed = false;
            if (attempt < config_.max_retries) {
                const auto backoff = std::chrono::milliseconds(std::min(8000, 500 << attempt));
                clock_.sleep_for(backoff);
            }
            continue;
        }
        if (reply.status < 200 || reply.status >= 300) {
            throw LlmUnavailable("HTTP " + std::to_string(reply.status) + ": " + reply.body.substr(0, 200));
        }
        try {
            return parse(assistant_content(reply.body));
        } catch (const MalformedResponse& e) {
            last_problem = e.what();
            last_was_malformed = true;
        }
    }
    const auto attempts = std::to_string(config_.max_retries + 1);
    if (last_was_malformed) throw MalformedResponse(last_problem + " (after " + attempts + " attempts)");
    throw LlmUnavailable(last_problem + " (after " + attempts + " attempts)");
}

std::string LlmClient::generate_plausible_caption(const dataset::ProbeImage& image,
                                                  std::span<const std::uint8_t> image_bytes) {
    if (image.class_label.empty()) throw PreconditionError("probe image has an empty class label");
    const auto jpeg = image::encode_for_llm(image_bytes);
    json content = json::array(
        {{{"type", "text"}, {"text", render_caption_prompt(image.class_label)}},
         {{"type", "image_url"},
          {"image_url", {{"url", "data:image/jpeg;base64," + image::base64_encode(jpeg)}}}}});
    const auto body = chat_request(config_.model_name, config_.caption_temperature, std::move(content));

    return request_with_retries(body, [](const std::string& content_text) {
        const json parsed = parse_structured_content(content_text);
        if (!parsed.contains("caption") || !parsed["caption"].is_string()) {
            throw MalformedResponse("missing string field 'caption'");
        }
        std::string caption = collapse_whitespace(parsed["caption"].get<std::string>());
        const auto words = split_words(caption).size();
        if (words < kMinCaptionTokens) throw MalformedResponse("caption shorter than 3 words");
        if (words > kMaxCaptionWords) throw MalformedResponse("caption longer than 60 words");
        return caption;
    });
}

std::vector<std::string> LlmClient::generate_counterfactuals(const std::string& plausible_caption,
                                                             const std::string& class_label,
                                                             const std::vector<std::string>& other_labels,
                                                             std::size_t count) {
    if (collapse_whitespace(plausible_caption).empty()) {
        throw PreconditionError("plausible caption is empty");
    }
    if (count == 0) throw PreconditionError("counterfactual count must be >= 1");
    const auto prompt = render_counterfactual_prompt(plausible_caption, class_label, other_labels, count);
    const auto body = chat_request(config_.model_name, config_.counterfactual_temperature, prompt);
    const auto reference = normalize_caption(plausible_caption);

    return request_with_retries(body, [&](const std::string& content_text) {
        const json parsed = parse_structured_content(content_text);
        if (!parsed.contains("counterfactuals") || !parsed["counterfactuals"].is_array()) {
            throw MalformedResponse("missing array field 'counterfactuals'");
        }
        const json& items = parsed["counterfactuals"];
        if (items.size() != count) {
            throw MalformedResponse("expected " + std::to_string(count) + " counterfactuals, got " +
                                    std::to_string(items.size()));
        }
        std::vector<std::string> out;
        std::set<std::string> seen;
        for (const auto& item : items) {
            if (!item.is_string()) throw MalformedResponse("counterfactual is not a string");
            std::string text = collapse_whitespace(item.get<std::string>());
            if (text.empty()) throw MalformedResponse("empty counterfactual");
            const auto key = normalize_caption(text);
            if (key == reference) throw MalformedResponse("counterfactual repeats the reference caption");
            if (!seen.insert(key).second) throw MalformedResponse("duplicate counterfactual");
            out.push_back(std::move(text));
        }
        return out;
    });
}

// ---- persistence -----------------------------------------------------------

std::string file_component(const std::string& name) {
    static constexpr char kHex[] = "0123456789ABCDEF";
    std::string out;
    for (std::size_t i = 0; i < name.size(); ++i) {
        const auto c = static_cast<unsigned char>(name[i]);
        const bool unsafe = c < 0x20 || c == 0x7F || c == '/' || c == '\\' || c == ':' || c == '*' ||
                            c == '?' || c == '"' || c == '<' || c == '>' || c == '|' || c == '%' ||
                            (i == 0 && c == '.');
        if (unsafe) {
            out.push_back('%');
            out.push_back(kHex[c >> 4]);
            out.push_back(kHex[c & 0xF]);
        } else {
            out.push_back(static_cast<char>(c));
        }
    }
    return out;
}

std::filesystem::path bundle_path(const std::filesystem::path& dir, const std::string& dataset_id,
                                  const std::string& class_label) {
    return dir / file_component(dataset_id) / (file_component(class_label) + ".json");
}

std::string bundle_to_json(const CaptionBundle& b) {
    ordered_json j;
    j["schema_version"] = kBundleSchemaVersion;
    j["dataset_id"] = b.dataset_id;
    j["class_label"] = b.class_label;
    j["image_ref"] = b.image_ref;
    j["plausible_caption"] = b.plausible_caption;
    j["counterfactuals"] = b.counterfactuals;
    j["llm_model"] = b.llm_model;
    j["prompt_template_id"] = b.prompt_template_id;
    j["created_at"] = b.created_at;
    return j.dump(2) + "\n";
}

CaptionBundle bundle_from_json(const std::string& text, const std::string& source) {
    const json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ParseError(source + ": not a JSON object");
    if (!j.contains("schema_version")) throw ParseError(source + ": missing field 'schema_version'");
    if (!j["schema_version"].is_number_integer() || j["schema_version"].get<int>() != kBundleSchemaVersion) {
        throw SchemaVersionMismatch(source + ": schema_version " + j["schema_version"].dump() +
                                    ", expected " + std::to_string(kBundleSchemaVersion));
    }
    auto str = [&](const char* field) {
        if (!j.contains(field)) throw ParseError(source + ": missing field '" + field + "'");
        if (!j[field].is_string()) throw ParseError(source + ": field '" + field + "' is not a string");
        return j[field].get<std::string>();
    };
    CaptionBundle b;
    b.dataset_id = str("dataset_id");
    b.class_label = str("class_label");
    b.image_ref = str("image_ref");
    b.plausible_caption = str("plausible_caption");
    if (!j.contains("counterfactuals")) throw ParseError(source + ": missing field 'counterfactuals'");
    if (!j["counterfactuals"].is_array()) throw ParseError(source + ": field 'counterfactuals' is not a list");
    for (const auto& item : j["counterfactuals"]) {
        if (!item.is_string()) throw ParseError(source + ": field 'counterfactuals' holds a non-string");
        b.counterfactuals.push_back(item.get<std::string>());
    }
    b.llm_model = str("llm_model");
    b.prompt_template_id = str("prompt_template_id");
    b.created_at = str("created_at");
    return b;
}

void store_bundles(std::span<const CaptionBundle> bundles, const std::filesystem::path& dir) {
    for (const auto& b : bundles) {
        const auto path = bundle_path(dir, b.dataset_id, b.class_label);
        std::filesystem::create_directories(path.parent_path());
        const auto tmp = path.string() + ".tmp";
        {
            std::ofstream out(tmp, std::ios::binary);
            if (!out) throw IoError("cannot write " + tmp);
            out << bundle_to_json(b);
        }
        std::filesystem::rename(tmp, path);
    }
}

CaptionBundle load_bundle_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return bundle_from_json(ss.str(), path.string());
}

std::vector<CaptionBundle> load_bundles(const std::filesystem::path& dir,
                                        const std::string& dataset_id) {
    const auto sub = dir / file_component(dataset_id);
    std::vector<CaptionBundle> out;
    if (!std::filesystem::is_directory(sub)) return out;
    for (const auto& entry : std::filesystem::directory_iterator(sub)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") {
            out.push_back(load_bundle_file(entry.path()));
        }
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        return std::tie(a.dataset_id, a.class_label) < std::tie(b.dataset_id, b.class_label);
    });
    return out;
}

std::vector<CaptionBundle> load_bundles(const std::filesystem::path& dir) {
    std::vector<CaptionBundle> out;
    if (!std::filesystem::is_directory(dir)) throw IoError("no bundle directory " + dir.string());
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_directory()) continue;
        for (const auto& f : std::filesystem::directory_iterator(entry.path())) {
            if (f.is_regular_file() && f.path().extension() == ".json") {
                out.push_back(load_bundle_file(f.path()));
            }
        }
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        return std::tie(a.dataset_id, a.class_label) < std::tie(b.dataset_id, b.class_label);
    });
    return out;
}

// ---- orchestration ---------------------------------------------------------

std::string utc_timestamp() { return now_utc(); }

std::vector<std::string> prompt_label_pool(const dataset::DatasetManifest& manifest,
                                           const std::string& target, std::uint64_t seed) {
    const std::size_t others = manifest.class_labels.size() - 1;
    if (others == 0) return {};
    if (others <= kMaxPromptLabels) {
        std::vector<std::string> out;
        for (const auto& l : manifest.class_labels) {
            if (l != target) out.push_back(l);
        }
        return out;
    }
    auto sampled = dataset::sample_other_labels(manifest, target, kMaxPromptLabels, seed);
    std::sort(sampled.begin(), sampled.end());
    return sampled;
}

std::vector<CaptionBundle> generate_bundles(const dataset::DatasetManifest& manifest,
                                            const std::vector<dataset::ProbeImage>& probes,
                                            LlmClient& client, const std::filesystem::path& dir,
                                            std::size_t n_counterfactuals, std::uint64_t seed,
                                            CaptionRunStats* stats) {
    const auto& cfg = client.config();
    const std::size_t requests_before = client.requests_sent();
    std::vector<CaptionBundle> results(probes.size());
    std::vector<bool> cached(probes.size(), false);
    std::atomic<std::size_t> next{0};
    std::mutex write_mutex;
    std::exception_ptr failure;
    std::mutex failure_mutex;

    auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= probes.size()) return;
            {
                std::lock_guard lock(failure_mutex);
                if (failure) return;
            }
            const auto& probe = probes[i];
            try {
                const auto path = bundle_path(dir, probe.dataset_id, probe.class_label);
                if (std::filesystem::exists(path)) {
                    auto existing = load_bundle_file(path);
                    if (existing.dataset_id == probe.dataset_id && existing.class_label == probe.class_label &&
                        existing.image_ref == probe.image_ref &&
                        existing.prompt_template_id == kBundleTemplateId &&
                        existing.llm_model == cfg.model_name &&
                        existing.counterfactuals.size() == n_counterfactuals) {
                        results[i] = std::move(existing);
                        cached[i] = true;
                        continue;
                    }
                }
                const auto bytes = manifest.read_image(probe.image_ref);
                CaptionBundle b;
                b.dataset_id = probe.dataset_id;
                b.class_label = probe.class_label;
                b.image_ref = probe.image_ref;
                b.plausible_caption = client.generate_plausible_caption(probe, bytes);
                b.counterfactuals = client.generate_counterfactuals(
                    b.plausible_caption, probe.class_label,
                    prompt_label_pool(manifest, probe.class_label, seed), n_counterfactuals);
                b.llm_model = cfg.model_name;
                b.prompt_template_id = std::string(kBundleTemplateId);
                b.created_at = now_utc();
                validate_bundle(b, n_counterfactuals);
                {
                    std::lock_guard lock(write_mutex);
                    store_bundles(std::span(&b, 1), dir);
                }
                results[i] = std::move(b);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                return;
            }
        }
    };

    const std::size_t n_workers =
        std::min<std::size_t>(static_cast<std::size_t>(cfg.max_in_flight), std::max<std::size_t>(probes.size(), 1));
    {
        std::vector<std::jthread> workers;
        for (std::size_t w = 0; w < n_workers; ++w) workers.emplace_back(work);
    }
    if (failure) std::rethrow_exception(failure);

    if (stats != nullptr) {
        stats->cached = static_cast<std::size_t>(std::count(cached.begin(), cached.end(), true));
        stats->generated = probes.size() - stats->cached;
        stats->requests = client.requests_sent() - requests_before;
    }
    return results;
}

}  // namespace plp::captiongen
