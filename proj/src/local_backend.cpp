#include <fstream>
#include <json.hpp>
#include <mutex>
#include <opencv2/dnn.hpp>

#include "plp/embedder.hpp"
#include "plp/errors.hpp"
#include "plp/tokenizer.hpp"

namespace plp::embedder {

namespace {

constexpr const char* kRoles[] = {"image_encoder", "text_encoder", "tokenizer_vocab", "tokenizer_merges"};

cv::dnn::Net read_graph(const std::filesystem::path& path) {
    try {
        auto net = cv::dnn::readNetFromONNX(path.string());
        if (net.empty()) throw BackendUnavailable("empty graph " + path.string());
        net.setPreferableBackend(cv::dnn::DNN_BACKEND_OPENCV);
        net.setPreferableTarget(cv::dnn::DNN_TARGET_CPU);
        return net;
    } catch (const cv::Exception& e) {
        throw BackendUnavailable("cannot load graph " + path.string() + ": " + e.what());
    }
}

EmbeddingVector run_graph(cv::dnn::Net& net, const cv::Mat& input, std::size_t dim) {
    cv::Mat out;
    try {
        net.setInput(input);
        out = net.forward();
    } catch (const cv::Exception& e) {
        throw BackendUnavailable(std::string("inference failed: ") + e.what());
    }
    if (out.total() != dim) {
        throw DimensionMismatch("graph emitted " + std::to_string(out.total()) + " values, manifest dim " +
                                std::to_string(dim));
    }
    cv::Mat flat = out.reshape(1, 1);
    if (flat.type() != CV_32F) flat.convertTo(flat, CV_32F);
    return normalize(std::span<const float>(flat.ptr<float>(), dim));
}

}  // namespace

ExportManifest load_export_manifest(const std::filesystem::path& model_dir) {
    const auto path = model_dir / "manifest.json";
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    const auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ParseError(path.string() + ": not a JSON object");
    ExportManifest m;
    try {
        m.model_id = j.at("model_id").get<std::string>();
        m.dim = j.at("dim").get<std::size_t>();
        m.preprocess_id = j.at("preprocess_id").get<std::string>();
        for (const char* role : kRoles) m.files[role] = j.at("files").at(role).get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    if (m.dim == 0) throw ParseError(path.string() + ": dim must be positive");
    for (const auto& [role, file] : m.files) {
        if (!std::filesystem::exists(model_dir / file)) {
            throw ConfigError(path.string() + ": missing " + role + " file " + file);
        }
    }
    return m;
}

struct LocalBackend::Impl {
    ExportManifest manifest;
    BpeTokenizer tokenizer;
    std::mutex image_mutex;
    std::mutex text_mutex;
    cv::dnn::Net image_net;
    cv::dnn::Net text_net;

    Impl(const std::filesystem::path& dir, ExportManifest m)
        : manifest(std::move(m)),
          tokenizer(dir / manifest.files.at("tokenizer_vocab"), dir / manifest.files.at("tokenizer_merges")),
          image_net(read_graph(dir / manifest.files.at("image_encoder"))),
          text_net(read_graph(dir / manifest.files.at("text_encoder"))) {}
};

LocalBackend::LocalBackend(const std::filesystem::path& model_dir)
    : impl_(std::make_unique<Impl>(model_dir, load_export_manifest(model_dir))) {}

LocalBackend::~LocalBackend() = default;

BackendDescriptor LocalBackend::descriptor() const {
    return {BackendKind::local_model, impl_->manifest.dim, impl_->manifest.model_id, impl_->manifest.preprocess_id};
}

std::vector<EmbeddingVector> LocalBackend::embed_text_batch(const std::vector<std::string>& texts) {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
        const auto ids = impl_->tokenizer.encode_padded(text);
        // The OpenCV importer feeds every graph input as float; ids < 2^24 are exact.
        const int shape[] = {1, static_cast<int>(ids.size())};
        cv::Mat input(2, shape, CV_32F);
        for (std::size_t i = 0; i < ids.size(); ++i) input.ptr<float>()[i] = static_cast<float>(ids[i]);
        std::lock_guard lock(impl_->text_mutex);
        out.push_back(run_graph(impl_->text_net, input, impl_->manifest.dim));
    }
    return out;
}

std::vector<EmbeddingVector> LocalBackend::embed_image_batch(const std::vector<image::Bytes>& images,
                                                             std::size_t first_index) {
    std::vector<EmbeddingVector> out;
    out.reserve(images.size());
    for (std::size_t i = 0; i < images.size(); ++i) {
        auto pixels = image::clip_preprocess(images[i], first_index + i);
        const int shape[] = {1, 3, image::kClipInputSize, image::kClipInputSize};
        cv::Mat input(4, shape, CV_32F, pixels.data());
        std::lock_guard lock(impl_->image_mutex);
        out.push_back(run_graph(impl_->image_net, input, impl_->manifest.dim));
    }
    return out;
}

}  // namespace plp::embedder
