#include "plp/embedding_cache.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <mutex>
#include <sstream>

#include "plp/errors.hpp"
#include "plp/log.hpp"

namespace plp::embedder {

namespace {

constexpr std::size_t kHeaderSize = 16;

std::uint32_t read_le32(const unsigned char* p) {
    return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) |
           (std::uint32_t{p[3]} << 24);
}

void put_le32(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
    out.push_back(static_cast<char>((v >> 16) & 0xFF));
    out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

void write_atomically(const std::filesystem::path& path, const std::string& bytes) {
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("short write to " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace

std::filesystem::path EmbeddingCache::index_path(const std::filesystem::path& data_path) {
    return data_path.string() + ".idx";
}

EmbeddingCache::EmbeddingCache(std::filesystem::path data_path, std::size_t dim)
    : data_path_(std::move(data_path)), dim_(dim) {
    if (std::filesystem::exists(data_path_)) load();
}

EmbeddingCache::~EmbeddingCache() {
    try {
        flush();
    } catch (const std::exception& e) {
        log::error(std::string("embedding cache flush failed: ") + e.what());
    }
}

void EmbeddingCache::load() {
    const auto where = data_path_.string();
    std::ifstream in(data_path_, std::ios::binary);
    if (!in) throw IoError("cannot open " + where);
    const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    if (bytes.size() < kHeaderSize) throw CorruptCache(where + ": truncated header");
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    if (std::memcmp(p, kMagic, 4) != 0) throw CorruptCache(where + ": bad magic");
    const std::uint32_t version = read_le32(p + 4);
    if (version != kVersion) throw CorruptCache(where + ": unsupported version " + std::to_string(version));
    const std::uint32_t dim = read_le32(p + 8);
    const std::uint32_t count = read_le32(p + 12);
    if (dim == 0) throw CorruptCache(where + ": zero dim");
    if (dim_ != 0 && dim != dim_) {
        throw CorruptCache(where + ": dim " + std::to_string(dim) + " but backend emits " + std::to_string(dim_));
    }
    const std::size_t expected = kHeaderSize + std::size_t{count} * dim * 4;
    if (bytes.size() != expected) {
        throw CorruptCache(where + ": size " + std::to_string(bytes.size()) + ", header implies " +
                           std::to_string(expected));
    }
    dim_ = dim;
    rows_.resize(std::size_t{count} * dim);
    for (std::size_t i = 0; i < rows_.size(); ++i) {
        rows_[i] = std::bit_cast<float>(read_le32(p + kHeaderSize + 4 * i));
    }

    std::ifstream idx(index_path(data_path_));
    if (!idx) throw CorruptCache(where + ": missing index file");
    keys_.assign(count, std::string{});
    std::string line;
    std::size_t lines = 0;
    while (std::getline(idx, line)) {
        if (line.empty()) continue;
        const auto tab = line.rfind('\t');
        if (tab == std::string::npos || tab == 0) throw CorruptCache(where + ": malformed index line");
        std::size_t row = 0;
        try {
            std::size_t used = 0;
            row = std::stoul(line.substr(tab + 1), &used);
            if (used != line.size() - tab - 1) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw CorruptCache(where + ": malformed index row");
        }
        if (row >= count || !keys_[row].empty()) throw CorruptCache(where + ": index row out of range or repeated");
        std::string key = line.substr(0, tab);
        if (!index_.emplace(key, row).second) throw CorruptCache(where + ": duplicate key in index");
        keys_[row] = std::move(key);
        ++lines;
    }
    if (lines != count) throw CorruptCache(where + ": index covers " + std::to_string(lines) + " of " +
                                           std::to_string(count) + " rows");
}

std::optional<EmbeddingVector> EmbeddingCache::get(const std::string& key) const {
    std::shared_lock lock(mutex_);
    const auto it = index_.find(key);
    if (it == index_.end()) return std::nullopt;
    const float* row = rows_.data() + it->second * dim_;
    return EmbeddingVector::adopt(std::vector<double>(row, row + dim_));
}

void EmbeddingCache::put(const std::string& key, const EmbeddingVector& v) {
    if (key.empty() || key.find_first_of("\t\n") != std::string::npos) {
        throw PreconditionError("cache key must be nonempty and free of tabs/newlines");
    }
    std::unique_lock lock(mutex_);
    if (dim_ == 0) dim_ = v.dim();
    if (v.dim() != dim_) {
        throw DimensionMismatch("cache holds dim " + std::to_string(dim_) + ", got " + std::to_string(v.dim()));
    }
    std::size_t row;
    if (const auto it = index_.find(key); it != index_.end()) {
        row = it->second;
    } else {
        row = keys_.size();
        keys_.push_back(key);
        index_.emplace(key, row);
        rows_.resize(rows_.size() + dim_);
    }
    for (std::size_t i = 0; i < dim_; ++i) rows_[row * dim_ + i] = static_cast<float>(v[i]);
    dirty_ = true;
}

void EmbeddingCache::flush() {
    std::unique_lock lock(mutex_);
    if (!dirty_) return;
    std::string data;
    data.reserve(kHeaderSize + rows_.size() * 4);
    data.append(kMagic, 4);
    put_le32(data, kVersion);
    put_le32(data, static_cast<std::uint32_t>(dim_));
    put_le32(data, static_cast<std::uint32_t>(keys_.size()));
    for (float f : rows_) put_le32(data, std::bit_cast<std::uint32_t>(f));

    std::string idx;
    for (std::size_t r = 0; r < keys_.size(); ++r) idx += keys_[r] + "\t" + std::to_string(r) + "\n";

    if (data_path_.has_parent_path()) std::filesystem::create_directories(data_path_.parent_path());
    write_atomically(index_path(data_path_), idx);
    write_atomically(data_path_, data);
    dirty_ = false;
}

std::size_t EmbeddingCache::size() const {
    std::shared_lock lock(mutex_);
    return keys_.size();
}

std::size_t EmbeddingCache::dim() const {
    std::shared_lock lock(mutex_);
    return dim_;
}

EmbeddingVector EmbeddingCache::round_trip(const EmbeddingVector& v) {
    std::vector<double> out(v.dim());
    for (std::size_t i = 0; i < v.dim(); ++i) out[i] = static_cast<double>(static_cast<float>(v[i]));
    return EmbeddingVector::adopt(std::move(out));
}

}  // namespace plp::embedder
