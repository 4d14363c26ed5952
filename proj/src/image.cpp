#include "plp/image.hpp"

#include <openssl/evp.h>
#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "plp/errors.hpp"
#include "plp/rng.hpp"

namespace plp::image {

namespace {

constexpr std::uint8_t kPngSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
constexpr std::string_view kLabelKeyword = "plp-class";
constexpr std::string_view kItemKeyword = "plp-item";

cv::Mat decode(std::span<const std::uint8_t> bytes, std::size_t index) {
    if (bytes.empty()) throw DecodeError(index, "empty buffer");
    cv::Mat buf(1, static_cast<int>(bytes.size()), CV_8U, const_cast<std::uint8_t*>(bytes.data()));
    cv::Mat img;
    try {
        img = cv::imdecode(buf, cv::IMREAD_COLOR);
    } catch (const cv::Exception& e) {
        throw DecodeError(index, e.what());
    }
    if (img.empty()) throw DecodeError(index, "not a decodable image");
    return img;
}

std::uint32_t read_be32(const std::uint8_t* p) {
    return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) |
           std::uint32_t{p[3]};
}

void append_be32(Bytes& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

void append_text_chunk(Bytes& out, std::string_view keyword, std::string_view text) {
    Bytes body;
    body.insert(body.end(), {'t', 'E', 'X', 't'});
    body.insert(body.end(), keyword.begin(), keyword.end());
    body.push_back(0);
    body.insert(body.end(), text.begin(), text.end());
    append_be32(out, static_cast<std::uint32_t>(body.size() - 4));
    out.insert(out.end(), body.begin(), body.end());
    append_be32(out, static_cast<std::uint32_t>(crc32(0L, body.data(), static_cast<uInt>(body.size()))));
}

}  // namespace

Size probe_size(std::span<const std::uint8_t> bytes, std::size_t index) {
    const cv::Mat img = decode(bytes, index);
    return {img.cols, img.rows};
}

Bytes encode_for_llm(std::span<const std::uint8_t> bytes, int max_side) {
    cv::Mat img = decode(bytes, 0);
    const int longest = std::max(img.cols, img.rows);
    if (longest > max_side) {
        const double scale = static_cast<double>(max_side) / longest;
        const int w = std::max(1, static_cast<int>(std::lround(img.cols * scale)));
        const int h = std::max(1, static_cast<int>(std::lround(img.rows * scale)));
        cv::Mat resized;
        cv::resize(img, resized, cv::Size(w, h), 0, 0, cv::INTER_AREA);
        img = resized;
    }
    std::vector<std::uint8_t> out;
    if (!cv::imencode(".jpg", img, out, {cv::IMWRITE_JPEG_QUALITY, 90})) {
        throw DecodeError(0, "JPEG re-encode failed");
    }
    return out;
}

std::vector<float> clip_preprocess(std::span<const std::uint8_t> bytes, std::size_t index) {
    cv::Mat bgr = decode(bytes, index);
    cv::Mat rgb;
    cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);

    const int target = kClipInputSize;
    int w = rgb.cols;
    int h = rgb.rows;
    if (w <= h) {
        h = static_cast<int>(static_cast<long long>(h) * target / w);
        w = target;
    } else {
        w = static_cast<int>(static_cast<long long>(w) * target / h);
        h = target;
    }
    cv::Mat resized;
    if (w == rgb.cols && h == rgb.rows) {
        resized = rgb;
    } else {
        cv::resize(rgb, resized, cv::Size(w, h), 0, 0, cv::INTER_CUBIC);
    }

    const int top = static_cast<int>(std::lround((h - target) / 2.0));
    const int left = static_cast<int>(std::lround((w - target) / 2.0));
    const cv::Mat crop = resized(cv::Rect(left, top, target, target));

    std::vector<float> out(3 * target * target);
    const std::size_t plane = static_cast<std::size_t>(target) * target;
    for (int y = 0; y < target; ++y) {
        const auto* row = crop.ptr<cv::Vec3b>(y);
        for (int x = 0; x < target; ++x) {
            const std::size_t off = static_cast<std::size_t>(y) * target + x;
            for (int c = 0; c < 3; ++c) {
                const float v = static_cast<float>(row[x][c]) / 255.0f;
                out[c * plane + off] = (v - kClipMean[c]) / kClipStd[c];
            }
        }
    }
    return out;
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                  static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

Bytes base64_decode(std::string_view text) {
    if (text.size() % 4 != 0) throw ParseError("base64 length is not a multiple of 4");
    Bytes out(3 * text.size() / 4);
    const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                  static_cast<int>(text.size()));
    if (n < 0) throw ParseError("invalid base64");
    std::size_t len = static_cast<std::size_t>(n);
    // EVP_DecodeBlock keeps the zero bytes produced by '=' padding.
    if (!text.empty() && text.back() == '=') --len;
    if (text.size() >= 2 && text[text.size() - 2] == '=') --len;
    out.resize(len);
    return out;
}

Bytes make_mock_png(const std::string& class_label, const std::string& item_id) {
    const std::uint64_t h = rng::mix(rng::fnv1a64(class_label), rng::fnv1a64(item_id));
    cv::Mat img(8, 8, CV_8UC3);
    rng::Stream stream(h);
    for (int y = 0; y < img.rows; ++y) {
        for (int x = 0; x < img.cols; ++x) {
            const auto r = stream.next();
            img.at<cv::Vec3b>(y, x) = cv::Vec3b(static_cast<std::uint8_t>(r),
                                                static_cast<std::uint8_t>(r >> 8),
                                                static_cast<std::uint8_t>(r >> 16));
        }
    }
    Bytes png;
    cv::imencode(".png", img, png);

    // Insert the text chunks right after IHDR (signature 8 + IHDR 25 bytes).
    constexpr std::size_t after_ihdr = 8 + 25;
    Bytes out(png.begin(), png.begin() + after_ihdr);
    append_text_chunk(out, kLabelKeyword, class_label);
    append_text_chunk(out, kItemKeyword, item_id);
    out.insert(out.end(), png.begin() + after_ihdr, png.end());
    return out;
}

std::optional<std::string> mock_label(std::span<const std::uint8_t> bytes, std::size_t index) {
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kPngSignature, 8) != 0) {
        throw DecodeError(index, "not a PNG stream");
    }
    std::size_t pos = 8;
    std::optional<std::string> label;
    bool saw_end = false;
    while (pos < bytes.size()) {
        if (pos + 12 > bytes.size()) throw DecodeError(index, "truncated PNG chunk header");
        const std::uint32_t len = read_be32(&bytes[pos]);
        if (pos + 12 + std::size_t{len} > bytes.size()) throw DecodeError(index, "truncated PNG chunk");
        const std::uint8_t* type = &bytes[pos + 4];
        const std::uint32_t stored_crc = read_be32(&bytes[pos + 8 + len]);
        const auto actual_crc = static_cast<std::uint32_t>(crc32(0L, type, len + 4));
        if (stored_crc != actual_crc) throw DecodeError(index, "PNG chunk CRC mismatch");

        const std::string_view type_sv(reinterpret_cast<const char*>(type), 4);
        if (type_sv == "tEXt") {
            const std::string_view body(reinterpret_cast<const char*>(type + 4), len);
            const auto nul = body.find('\0');
            if (nul != std::string_view::npos && body.substr(0, nul) == kLabelKeyword) {
                label = std::string(body.substr(nul + 1));
            }
        } else if (type_sv == "IEND") {
            saw_end = true;
            break;
        }
        pos += 12 + len;
    }
    if (!saw_end) throw DecodeError(index, "PNG stream has no IEND chunk");
    return label;
}

}  // namespace plp::image
