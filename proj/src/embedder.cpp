#include "plp/embedder.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "plp/errors.hpp"
#include "plp/http.hpp"
#include "plp/log.hpp"
#include "plp/rng.hpp"

namespace plp::embedder {

using nlohmann::json;

std::string_view to_string(BackendKind kind) {
    switch (kind) {
        case BackendKind::local_model: return "local-model";
        case BackendKind::remote_http: return "remote-http";
        case BackendKind::mock: return "mock";
    }
    return "unknown";
}

// ---- batching --------------------------------------------------------------

std::vector<EmbeddingVector> Backend::embed_texts(const std::vector<std::string>& texts) {
    for (const auto& t : texts) {
        if (t.empty()) throw PreconditionError("cannot embed an empty text");
    }
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (std::size_t start = 0; start < texts.size(); start += batch_size_) {
        const std::size_t end = std::min(texts.size(), start + batch_size_);
        std::vector<std::string> batch(texts.begin() + start, texts.begin() + end);
        auto part = embed_text_batch(batch);
        if (part.size() != batch.size()) throw BackendUnavailable("backend returned a short text batch");
        for (auto& v : part) out.push_back(std::move(v));
    }
    return out;
}

std::vector<EmbeddingVector> Backend::embed_images(const std::vector<image::Bytes>& images) {
    std::vector<EmbeddingVector> out;
    out.reserve(images.size());
    for (std::size_t start = 0; start < images.size(); start += batch_size_) {
        const std::size_t end = std::min(images.size(), start + batch_size_);
        std::vector<image::Bytes> batch(images.begin() + start, images.begin() + end);
        auto part = embed_image_batch(batch, start);
        if (part.size() != batch.size()) throw BackendUnavailable("backend returned a short image batch");
        for (auto& v : part) out.push_back(std::move(v));
    }
    return out;
}

// ---- mock ------------------------------------------------------------------

namespace {

constexpr std::uint64_t kImageNoiseTag = 0x696D616765ULL;  // "image"
constexpr std::uint64_t kTextNoiseTag = 0x74657874ULL;     // "text"

std::vector<std::string> word_tokens(std::string_view text) {
    std::vector<std::string> out;
    std::string current;
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isalnum(c) || c >= 0x80) {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else if (!current.empty()) {
            out.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) out.push_back(std::move(current));
    return out;
}

EmbeddingVector perturbed(const EmbeddingVector& prototype, double sigma, std::uint64_t key) {
    std::vector<double> v(prototype.values().begin(), prototype.values().end());
    if (sigma > 0.0) {
        const auto noise = rng::gaussian_vector(key, v.size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] += sigma * noise[i];
        return normalize(std::span<const double>(v));
    }
    return prototype;
}

}  // namespace

void MockSpec::validate() const {
    if (dim == 0) throw ConfigError("mock spec: dim must be positive");
    if (!std::isfinite(image_noise_sigma) || image_noise_sigma < 0.0 || !std::isfinite(text_noise_sigma) ||
        text_noise_sigma < 0.0) {
        throw ConfigError("mock spec: noise sigmas must be finite and >= 0");
    }
    if (class_prototypes.count(std::string(kBackgroundClass)) != 0) {
        throw ConfigError("mock spec: '" + std::string(kBackgroundClass) + "' is reserved");
    }
}

MockSpec load_mock_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open mock spec " + path.string());
    const json j = json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ParseError(path.string() + ": mock spec is not a JSON object");
    MockSpec spec;
    try {
        spec.dim = j.at("dim").get<std::size_t>();
        spec.image_noise_sigma = j.value("image_noise_sigma", 0.0);
        spec.text_noise_sigma = j.value("text_noise_sigma", 0.0);
        spec.seed = j.value("seed", std::uint64_t{0});
        const json protos = j.value("class_prototypes", json::object());
        for (const auto& [label, seed] : protos.items()) {
            spec.class_prototypes.emplace(label, seed.get<std::uint64_t>());
        }
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    spec.validate();
    return spec;
}

void save_mock_spec(const MockSpec& spec, const std::filesystem::path& path) {
    nlohmann::ordered_json j;
    j["dim"] = spec.dim;
    j["seed"] = spec.seed;
    j["image_noise_sigma"] = spec.image_noise_sigma;
    j["text_noise_sigma"] = spec.text_noise_sigma;
    nlohmann::ordered_json protos = nlohmann::ordered_json::object();
    for (const auto& [label, seed] : spec.class_prototypes) protos[label] = seed;
    j["class_prototypes"] = protos;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

std::string mock_reference_class(std::string_view text, const MockSpec& spec) {
    const auto tokens = word_tokens(text);
    const std::set<std::string> present(tokens.begin(), tokens.end());
    std::string best(kBackgroundClass);
    std::size_t best_overlap = 0;
    // std::map iterates labels in lexicographic order, so strict '>' keeps the
    // smaller label on ties.
    for (const auto& [label, seed] : spec.class_prototypes) {
        const auto label_tokens = word_tokens(label);
        const std::set<std::string> distinct(label_tokens.begin(), label_tokens.end());
        std::size_t overlap = 0;
        for (const auto& t : distinct) overlap += present.count(t);
        if (overlap > best_overlap) {
            best_overlap = overlap;
            best = label;
        }
    }
    return best;
}

EmbeddingVector mock_prototype(const MockSpec& spec, const std::string& class_label) {
    std::uint64_t class_seed = 0;
    if (const auto it = spec.class_prototypes.find(class_label); it != spec.class_prototypes.end()) {
        class_seed = it->second;
    }
    const std::uint64_t key = rng::mix(rng::mix(spec.seed, class_seed), rng::fnv1a64(class_label));
    const auto g = rng::gaussian_vector(key, spec.dim);
    return normalize(std::span<const double>(g));
}

MockBackend::MockBackend(MockSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

BackendDescriptor MockBackend::descriptor() const {
    std::ostringstream id;
    id << "mock-d" << spec_.dim << "-s" << spec_.seed << "-i" << spec_.image_noise_sigma << "-t"
       << spec_.text_noise_sigma;
    return {BackendKind::mock, spec_.dim, id.str(), "mock-v1"};
}

std::vector<EmbeddingVector> MockBackend::embed_text_batch(const std::vector<std::string>& texts) {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
        const auto proto = mock_prototype(spec_, mock_reference_class(text, spec_));
        const auto key = rng::mix(rng::mix(spec_.seed, kTextNoiseTag), rng::fnv1a64(text));
        out.push_back(perturbed(proto, spec_.text_noise_sigma, key));
    }
    return out;
}

std::vector<EmbeddingVector> MockBackend::embed_image_batch(const std::vector<image::Bytes>& images,
                                                            std::size_t first_index) {
    std::vector<EmbeddingVector> out;
    out.reserve(images.size());
    for (std::size_t i = 0; i < images.size(); ++i) {
        const auto& bytes = images[i];
        std::optional<std::string> label;
        try {
            label = image::mock_label(bytes, first_index + i);
        } catch (const DecodeError&) {
            // Not a mock PNG; any other decodable image embeds as background.
            (void)image::probe_size(bytes, first_index + i);
        }
        const auto proto = mock_prototype(spec_, label.value_or(std::string(kBackgroundClass)));
        const auto key = rng::mix(rng::mix(spec_.seed, kImageNoiseTag), rng::fnv1a64(bytes));
        out.push_back(perturbed(proto, spec_.image_noise_sigma, key));
    }
    return out;
}

// ---- remote ----------------------------------------------------------------

RemoteBackend::RemoteBackend(std::string base_url, std::size_t dim, double timeout_seconds)
    : base_url_(std::move(base_url)), timeout_seconds_(timeout_seconds), dim_(dim) {
    (void)http::parse_endpoint(base_url_);
}

BackendDescriptor RemoteBackend::descriptor() const {
    std::lock_guard lock(mutex_);
    return {BackendKind::remote_http, dim_, base_url_, "remote"};
}

std::vector<EmbeddingVector> RemoteBackend::call(const std::string& path, const std::string& body,
                                                 std::size_t expected, std::size_t first_index) {
    const auto res = http::post_json(http::parse_endpoint(base_url_), path, body, {}, timeout_seconds_);
    if (res.status == 0) throw BackendUnavailable(base_url_ + path + ": " + res.error);
    const json reply = json::parse(res.body, nullptr, false);
    if (res.status == 400 && reply.is_object() && reply.contains("index") && reply["index"].is_number_integer()) {
        throw DecodeError(first_index + reply["index"].get<std::size_t>(), reply.value("error", "rejected by server"));
    }
    if (res.status != 200) throw BackendUnavailable(base_url_ + path + ": HTTP " + std::to_string(res.status));
    if (reply.is_discarded() || !reply.is_object() || !reply.contains("vectors") || !reply["vectors"].is_array() ||
        !reply.contains("dim") || !reply["dim"].is_number_unsigned()) {
        throw BackendUnavailable(base_url_ + path + ": malformed response");
    }
    const auto dim = reply["dim"].get<std::size_t>();
    {
        std::lock_guard lock(mutex_);
        if (dim_ == 0) dim_ = dim;
        if (dim != dim_) {
            throw DimensionMismatch("remote backend returned dim " + std::to_string(dim) + ", expected " +
                                    std::to_string(dim_));
        }
    }
    const auto& vectors = reply["vectors"];
    if (vectors.size() != expected) throw BackendUnavailable(base_url_ + path + ": wrong vector count");
    std::vector<EmbeddingVector> out;
    out.reserve(expected);
    for (const auto& row : vectors) {
        if (!row.is_array() || row.size() != dim) throw BackendUnavailable(base_url_ + path + ": ragged vectors");
        std::vector<double> v;
        v.reserve(dim);
        for (const auto& x : row) {
            if (!x.is_number()) throw BackendUnavailable(base_url_ + path + ": non-numeric component");
            v.push_back(x.get<double>());
        }
        const double norm = l2_norm(v);
        if (std::abs(norm - 1.0) > kUnitNormTolerance) {
            log::warning("remote backend returned a vector with norm " + std::to_string(norm) + "; re-normalizing");
        }
        out.push_back(normalize(std::span<const double>(v)));
    }
    return out;
}

std::vector<EmbeddingVector> RemoteBackend::embed_text_batch(const std::vector<std::string>& texts) {
    return call("/embed/text", json{{"texts", texts}}.dump(), texts.size(), 0);
}

std::vector<EmbeddingVector> RemoteBackend::embed_image_batch(const std::vector<image::Bytes>& images,
                                                              std::size_t first_index) {
    json encoded = json::array();
    for (const auto& img : images) encoded.push_back(image::base64_encode(img));
    return call("/embed/image", json{{"images_b64", encoded}}.dump(), images.size(), first_index);
}

// ---- cache wrapper ---------------------------------------------------------

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error(ErrorCategory::internal, "DigestError", "SHA-256 failed");
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(kHex[digest[i] >> 4]);
        out.push_back(kHex[digest[i] & 0xF]);
    }
    return out;
}

CachedBackend::CachedBackend(std::unique_ptr<Backend> inner, const std::filesystem::path& dir)
    : inner_(std::move(inner)),
      text_cache_(dir / "text.plpe", inner_->descriptor().dim),
      image_cache_(dir / "image.plpe", inner_->descriptor().dim) {
    set_batch_size(inner_->batch_size());
}

std::string CachedBackend::key(std::string_view kind, std::string_view content) const {
    const auto d = inner_->descriptor();
    std::string material;
    material.reserve(d.model_id.size() + d.preprocess_id.size() + kind.size() + content.size() + 3);
    material.append(d.model_id).push_back('\0');
    material.append(d.preprocess_id).push_back('\0');
    material.append(kind).push_back('\0');
    material.append(content);
    return sha256_hex(material);
}

void CachedBackend::flush() {
    text_cache_.flush();
    image_cache_.flush();
}

std::vector<EmbeddingVector> CachedBackend::embed_text_batch(const std::vector<std::string>& texts) {
    std::vector<std::optional<EmbeddingVector>> found(texts.size());
    std::vector<std::string> keys(texts.size());
    std::vector<std::string> missing;
    std::vector<std::size_t> missing_at;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        keys[i] = key("text", texts[i]);
        found[i] = text_cache_.get(keys[i]);
        if (found[i]) {
            ++hits_;
        } else {
            missing.push_back(texts[i]);
            missing_at.push_back(i);
        }
    }
    if (!missing.empty()) {
        misses_ += missing.size();
        auto fresh = inner_->embed_texts(missing);
        for (std::size_t k = 0; k < fresh.size(); ++k) {
            const auto i = missing_at[k];
            text_cache_.put(keys[i], fresh[k]);
            found[i] = EmbeddingCache::round_trip(fresh[k]);
        }
    }
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (auto& v : found) out.push_back(std::move(*v));
    return out;
}

std::vector<EmbeddingVector> CachedBackend::embed_image_batch(const std::vector<image::Bytes>& images,
                                                              std::size_t first_index) {
    std::vector<std::optional<EmbeddingVector>> found(images.size());
    std::vector<std::string> keys(images.size());
    std::vector<image::Bytes> missing;
    std::vector<std::size_t> missing_at;
    for (std::size_t i = 0; i < images.size(); ++i) {
        keys[i] = key("image", std::string_view(reinterpret_cast<const char*>(images[i].data()), images[i].size()));
        found[i] = image_cache_.get(keys[i]);
        if (found[i]) {
            ++hits_;
        } else {
            missing.push_back(images[i]);
            missing_at.push_back(i);
        }
    }
    if (!missing.empty()) {
        misses_ += missing.size();
        std::vector<EmbeddingVector> fresh;
        try {
            fresh = inner_->embed_images(missing);
        } catch (const DecodeError& e) {
            throw DecodeError(first_index + missing_at.at(e.index()), e.what());
        }
        for (std::size_t k = 0; k < fresh.size(); ++k) {
            const auto i = missing_at[k];
            image_cache_.put(keys[i], fresh[k]);
            found[i] = EmbeddingCache::round_trip(fresh[k]);
        }
    }
    std::vector<EmbeddingVector> out;
    out.reserve(images.size());
    for (auto& v : found) out.push_back(std::move(*v));
    return out;
}

// ---- factory ---------------------------------------------------------------

std::unique_ptr<Backend> make_backend(const std::string& spec) {
    const auto colon = spec.find(':');
    if (colon == std::string::npos) {
        throw ConfigError("backend must be mock:<spec>, remote:<url> or local:<model_dir>, got '" + spec + "'");
    }
    const std::string kind = spec.substr(0, colon);
    const std::string arg = spec.substr(colon + 1);
    if (arg.empty()) throw ConfigError("backend '" + kind + "' needs an argument");
    if (kind == "mock") return std::make_unique<MockBackend>(load_mock_spec(arg));
    if (kind == "remote") return std::make_unique<RemoteBackend>(arg);
    if (kind == "local") return std::make_unique<LocalBackend>(arg);
    throw ConfigError("unknown backend kind '" + kind + "'");
}

}  // namespace plp::embedder
