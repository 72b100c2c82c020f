#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>

#include "metaspo/backend.hpp"

namespace metaspo {

// 256-bit digest of (model, canonicalized messages, temperature, max_tokens,
// seed, sample_index). Canonicalization is length-prefixed framing of every
// field, so distinct inputs cannot collide structurally.
struct CacheKey {
  std::array<std::uint8_t, 32> digest{};

  static CacheKey from_request(const ChatRequest& request);
  std::string hex() const;

  friend bool operator==(const CacheKey&, const CacheKey&) = default;
};

// Append-only on-disk response store: one file per key under two-level
// fan-out directories. Safe to delete wholesale.
class DiskCache {
 public:
  explicit DiskCache(std::filesystem::path root);

  std::optional<ChatResponse> load(const CacheKey& key) const;
  void store(const CacheKey& key, const ChatResponse& response);

  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path path_for(const CacheKey& key) const;
  std::mutex& stripe_for(const CacheKey& key);

  std::filesystem::path root_;
  // Writes are serialized per key (striped); distinct keys do not contend on
  // a single global lock.
  static constexpr std::size_t kStripes = 64;
  std::array<std::mutex, kStripes> stripes_;
};

// Wraps any backend with the disk cache. Hits return the stored payload with
// cached=true; misses consult the inner backend and persist the response.
class CachingBackend : public Backend {
 public:
  CachingBackend(std::shared_ptr<Backend> inner, std::filesystem::path cache_dir);

  ChatResponse complete(const ChatRequest& request) override;

  std::uint64_t hits() const { return hits_.load(); }
  std::uint64_t misses() const { return misses_.load(); }

 private:
  std::shared_ptr<Backend> inner_;
  DiskCache cache_;
  std::atomic<std::uint64_t> hits_{0};
  std::atomic<std::uint64_t> misses_{0};
};

}  // namespace metaspo
