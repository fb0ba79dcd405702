#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

namespace fastgate {

// FNV-1a, used as the content hash for cache file names.
std::uint64_t fnv1a64(const std::string& data);

// File-backed memo keyed by a canonical JSON key. Lookups verify the stored
// key, so hash collisions degrade to misses.
class ResultCache {
 public:
  explicit ResultCache(std::string directory);

  std::optional<nlohmann::json> lookup(const nlohmann::json& key) const;
  void store(const nlohmann::json& key, const nlohmann::json& value) const;

  const std::string& directory() const { return dir_; }

 private:
  std::string path_for(const nlohmann::json& key) const;
  std::string dir_;
};

}  // namespace fastgate
