#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "plp/core.hpp"
#include "plp/embedding_cache.hpp"
#include "plp/image.hpp"

namespace plp::embedder {

enum class BackendKind { local_model, remote_http, mock };

std::string_view to_string(BackendKind kind);

struct BackendDescriptor {
    BackendKind kind = BackendKind::mock;
    std::size_t dim = 0;
    std::string model_id;
    std::string preprocess_id;
};

inline constexpr std::size_t kDefaultBatchSize = 32;

// Uniform embedding interface. The public calls split inputs into batches of
// batch_size and forward each batch to the backend; batching never changes
// results because every item is embedded and normalized independently.
class Backend {
public:
    virtual ~Backend() = default;

    virtual BackendDescriptor descriptor() const = 0;

    std::vector<EmbeddingVector> embed_texts(const std::vector<std::string>& texts);
    std::vector<EmbeddingVector> embed_images(const std::vector<image::Bytes>& images);

    EmbeddingVector embed_text(const std::string& text) { return embed_texts({text}).front(); }

    void set_batch_size(std::size_t n) { batch_size_ = n == 0 ? 1 : n; }
    std::size_t batch_size() const noexcept { return batch_size_; }

protected:
    virtual std::vector<EmbeddingVector> embed_text_batch(const std::vector<std::string>& texts) = 0;
    // first_index is the position of images[0] in the caller's list, for DecodeError.
    virtual std::vector<EmbeddingVector> embed_image_batch(const std::vector<image::Bytes>& images,
                                                           std::size_t first_index) = 0;

private:
    std::size_t batch_size_ = kDefaultBatchSize;
};

// ---- mock ------------------------------------------------------------------

inline constexpr std::string_view kBackgroundClass = "__background__";

struct MockSpec {
    std::size_t dim = 64;
    std::map<std::string, std::uint64_t> class_prototypes;  // class_label -> seed
    double image_noise_sigma = 0.0;
    double text_noise_sigma = 0.0;
    std::uint64_t seed = 0;

    // Throws ConfigError on a broken spec.
    void validate() const;
};

MockSpec load_mock_spec(const std::filesystem::path& path);
void save_mock_spec(const MockSpec& spec, const std::filesystem::path& path);

// Class whose label shares the most lowercase word tokens with text; ties go
// to the lexicographically smaller label; no overlap maps to kBackgroundClass.
std::string mock_reference_class(std::string_view text, const MockSpec& spec);

// normalize(G(seed, class seed, label)); deterministic, backend independent.
EmbeddingVector mock_prototype(const MockSpec& spec, const std::string& class_label);

// Text: prototype(reference class) + text sigma * G(text).
// Image: prototype(label stored in the mock PNG) + image sigma * G(bytes);
// decodable images without a label use the background prototype.
class MockBackend final : public Backend {
public:
    explicit MockBackend(MockSpec spec);

    BackendDescriptor descriptor() const override;
    const MockSpec& spec() const noexcept { return spec_; }

protected:
    std::vector<EmbeddingVector> embed_text_batch(const std::vector<std::string>& texts) override;
    std::vector<EmbeddingVector> embed_image_batch(const std::vector<image::Bytes>& images,
                                                   std::size_t first_index) override;

private:
    MockSpec spec_;
};

// ---- remote ----------------------------------------------------------------

class RemoteBackend final : public Backend {
public:
    // dim == 0 adopts the dimension of the first response.
    explicit RemoteBackend(std::string base_url, std::size_t dim = 0, double timeout_seconds = 60.0);

    BackendDescriptor descriptor() const override;

protected:
    std::vector<EmbeddingVector> embed_text_batch(const std::vector<std::string>& texts) override;
    std::vector<EmbeddingVector> embed_image_batch(const std::vector<image::Bytes>& images,
                                                   std::size_t first_index) override;

private:
    std::vector<EmbeddingVector> call(const std::string& path, const std::string& body,
                                      std::size_t expected, std::size_t first_index);

    std::string base_url_;
    double timeout_seconds_;
    mutable std::mutex mutex_;
    std::size_t dim_;
};

// ---- local -----------------------------------------------------------------

struct ExportManifest {
    std::string model_id;
    std::size_t dim = 0;
    std::map<std::string, std::string> files;  // image_encoder, text_encoder, tokenizer_vocab, tokenizer_merges
    std::string preprocess_id;
};

ExportManifest load_export_manifest(const std::filesystem::path& model_dir);

class LocalBackend final : public Backend {
public:
    explicit LocalBackend(const std::filesystem::path& model_dir);
    ~LocalBackend() override;

    BackendDescriptor descriptor() const override;

protected:
    std::vector<EmbeddingVector> embed_text_batch(const std::vector<std::string>& texts) override;
    std::vector<EmbeddingVector> embed_image_batch(const std::vector<image::Bytes>& images,
                                                   std::size_t first_index) override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// ---- cache -----------------------------------------------------------------

std::string sha256_hex(std::string_view data);

// Serves repeat inputs from on-disk caches (text.plpe, image.plpe in dir).
// Misses are embedded by the wrapped backend and returned after the same f32
// round-trip a later hit would see, so results never depend on cache state.
class CachedBackend final : public Backend {
public:
    CachedBackend(std::unique_ptr<Backend> inner, const std::filesystem::path& dir);

    BackendDescriptor descriptor() const override { return inner_->descriptor(); }
    void flush();
    std::size_t hits() const noexcept { return hits_; }
    std::size_t misses() const noexcept { return misses_; }

protected:
    std::vector<EmbeddingVector> embed_text_batch(const std::vector<std::string>& texts) override;
    std::vector<EmbeddingVector> embed_image_batch(const std::vector<image::Bytes>& images,
                                                   std::size_t first_index) override;

private:
    std::string key(std::string_view kind, std::string_view content) const;

    std::unique_ptr<Backend> inner_;
    EmbeddingCache text_cache_;
    EmbeddingCache image_cache_;
    std::size_t hits_ = 0;
    std::size_t misses_ = 0;
};

// "mock:<spec.json>", "remote:<url>" or "local:<model_dir>".
std::unique_ptr<Backend> make_backend(const std::string& spec);

}  // namespace plp::embedder
