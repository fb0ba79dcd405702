#include "fastgate/cache.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

namespace fastgate {

std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

ResultCache::ResultCache(std::string directory) : dir_(std::move(directory)) {
  std::filesystem::create_directories(dir_);
}

std::string ResultCache::path_for(const nlohmann::json& key) const {
  std::ostringstream name;
  name << "fg-" << std::hex << fnv1a64(key.dump()) << ".json";
  return (std::filesystem::path(dir_) / name.str()).string();
}

std::optional<nlohmann::json> ResultCache::lookup(const nlohmann::json& key) const {
  std::ifstream in(path_for(key));
  if (!in) return std::nullopt;
  nlohmann::json record = nlohmann::json::parse(in, nullptr, false);
  if (record.is_discarded() || !record.contains("key") || record["key"] != key)
    return std::nullopt;
  return record["value"];
}

void ResultCache::store(const nlohmann::json& key, const nlohmann::json& value) const {
  std::ofstream out(path_for(key));
  out << nlohmann::json{{"key", key}, {"value", value}}.dump(2) << "\n";
}

}  // namespace fastgate
