#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "plp/core.hpp"

namespace plp::embedder {

// Binary embedding store.
//
// Data file: "PLPE", u32 version (1), u32 dim, u32 count, then count*dim
// little-endian f32. Sidecar "<data>.idx": one "key<TAB>row" line per vector.
// Writes are buffered in memory and land on flush() (also run on destruction)
// through write-then-rename, so readers never observe a half-written file.
class EmbeddingCache {
public:
    static constexpr char kMagic[4] = {'P', 'L', 'P', 'E'};
    static constexpr std::uint32_t kVersion = 1;

    // dim == 0 accepts whatever dim an existing file declares (or the first put).
    // Throws CorruptCache on a bad header, size or index.
    EmbeddingCache(std::filesystem::path data_path, std::size_t dim = 0);
    ~EmbeddingCache();

    EmbeddingCache(const EmbeddingCache&) = delete;
    EmbeddingCache& operator=(const EmbeddingCache&) = delete;

    std::optional<EmbeddingVector> get(const std::string& key) const;
    void put(const std::string& key, const EmbeddingVector& v);
    void flush();

    std::size_t size() const;
    std::size_t dim() const;
    const std::filesystem::path& path() const noexcept { return data_path_; }
    static std::filesystem::path index_path(const std::filesystem::path& data_path);

    // Value a put/get round-trip produces: each component rounded to f32.
    static EmbeddingVector round_trip(const EmbeddingVector& v);

private:
    void load();

    std::filesystem::path data_path_;
    mutable std::shared_mutex mutex_;
    std::size_t dim_;
    std::vector<float> rows_;  // count * dim
    std::vector<std::string> keys_;
    std::unordered_map<std::string, std::size_t> index_;
    bool dirty_ = false;
};

}  // namespace plp::embedder
