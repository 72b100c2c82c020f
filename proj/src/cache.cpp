#include "metaspo/cache.hpp"

#include <openssl/evp.h>

#include <cinttypes>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "metaspo/errors.hpp"

namespace metaspo {

namespace {

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) { EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr); }
  ~Sha256() { EVP_MD_CTX_free(ctx_); }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(const void* data, std::size_t size) { EVP_DigestUpdate(ctx_, data, size); }

  void update_framed(std::string_view text) {
    const std::uint64_t size = text.size();
    std::uint8_t frame[8];
    for (int i = 0; i < 8; ++i) frame[i] = static_cast<std::uint8_t>(size >> (8 * i));
    update(frame, sizeof frame);
    update(text.data(), text.size());
  }

  std::array<std::uint8_t, 32> finish() {
    std::array<std::uint8_t, 32> out{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_, out.data(), &len);
    return out;
  }

 private:
  EVP_MD_CTX* ctx_;
};

std::string format_double(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

}  // namespace

CacheKey CacheKey::from_request(const ChatRequest& request) {
  Sha256 hasher;
  hasher.update_framed("metaspo.chat.v1");
  hasher.update_framed(request.model);
  for (const auto& message : request.messages) {
    hasher.update_framed(to_string(message.role));
    hasher.update_framed(message.content);
  }
  hasher.update_framed(format_double(request.temperature));
  hasher.update_framed(std::to_string(request.max_tokens));
  hasher.update_framed(request.seed ? std::to_string(*request.seed) : "none");
  hasher.update_framed(std::to_string(request.sample_index));
  return CacheKey{hasher.finish()};
}

std::string CacheKey::hex() const {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(64);
  for (std::uint8_t byte : digest) {
    out.push_back(digits[byte >> 4]);
    out.push_back(digits[byte & 0xf]);
  }
  return out;
}

DiskCache::DiskCache(std::filesystem::path root) : root_(std::move(root)) {
  std::filesystem::create_directories(root_);
}

std::filesystem::path DiskCache::path_for(const CacheKey& key) const {
  const std::string hex = key.hex();
  return root_ / hex.substr(0, 2) / (hex.substr(2) + ".json");
}

std::mutex& DiskCache::stripe_for(const CacheKey& key) {
  return stripes_[key.digest[0] % kStripes];
}

std::optional<ChatResponse> DiskCache::load(const CacheKey& key) const {
  const auto path = path_for(key);
  std::ifstream in(path);
  if (!in) return std::nullopt;
  nlohmann::json payload;
  try {
    in >> payload;
    ChatResponse response;
    response.content = payload.at("content").get<std::string>();
    response.usage.prompt_tokens = payload.value("prompt_tokens", std::int64_t{0});
    response.usage.completion_tokens = payload.value("completion_tokens", std::int64_t{0});
    response.cached = true;
    return response;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("corrupt cache entry " + path.string() + ": " + e.what());
  }
}

void DiskCache::store(const CacheKey& key, const ChatResponse& response) {
  const auto path = path_for(key);
  std::lock_guard lock(stripe_for(key));
  if (std::filesystem::exists(path)) return;  // append-only: first write wins
  std::filesystem::create_directories(path.parent_path());
  nlohmann::ordered_json payload{
      {"content", response.content},
      {"prompt_tokens", response.usage.prompt_tokens},
      {"completion_tokens", response.usage.completion_tokens},
  };
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw IoError("cannot write cache entry " + tmp);
    out << payload.dump();
    out.flush();
    if (!out) throw IoError("failed writing cache entry " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

CachingBackend::CachingBackend(std::shared_ptr<Backend> inner, std::filesystem::path cache_dir)
    : inner_(std::move(inner)), cache_(std::move(cache_dir)) {}

ChatResponse CachingBackend::complete(const ChatRequest& request) {
  const CacheKey key = CacheKey::from_request(request);
  if (auto hit = cache_.load(key)) {
    hits_.fetch_add(1);
    return *hit;
  }
  ChatResponse response = inner_->complete(request);
  response.cached = false;
  cache_.store(key, response);
  misses_.fetch_add(1);
  return response;
}

}  // namespace metaspo
