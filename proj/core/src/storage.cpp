#include "edna/storage.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;

namespace edna {

const char* category_name(Category c) {
  switch (c) {
    case Category::CONFIG: return "config";
    case Category::LOG: return "log";
    case Category::MODEL: return "model";
    case Category::ARTIFACT: return "artifact";
    case Category::PLUGIN: return "plugin";
    case Category::METRIC: return "metric";
  }
  return "unknown";
}

void validate_storage_key(const std::string& key) {
  if (key.empty()) throw Error("storage key must be non-empty");
  if (key.front() == '/') throw Error("storage key must not start with '/'");
  if (key.find('\\') != std::string::npos) {
    throw Error("storage key must not contain backslashes: " + key);
  }
  std::size_t start = 0;
  while (start <= key.size()) {
    std::size_t end = key.find('/', start);
    if (end == std::string::npos) end = key.size();
    const std::string segment = key.substr(start, end - start);
    if (segment == "..") {
      throw Error("storage key must not contain '..' segments: " + key);
    }
    if (segment.empty() && end != key.size()) {
      throw Error("storage key must not contain empty segments: " + key);
    }
    if (end == key.size()) break;
    start = end + 1;
  }
}

void StorageBackend::put_text(Category category, const std::string& key,
                              const std::string& text) {
  put(category, key,
      std::span<const std::uint8_t>(
          reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string StorageBackend::get_text(Category category,
                                     const std::string& key) const {
  const std::vector<std::uint8_t> bytes = get(category, key);
  return std::string(bytes.begin(), bytes.end());
}

LocalFileBackend::LocalFileBackend(std::string name, std::string root)
    : StorageBackend(std::move(name), "local_file"), root_(std::move(root)) {
  if (root_.empty()) throw Error("local_file backend requires a root");
}

std::string LocalFileBackend::path_for(Category category,
                                       const std::string& key) const {
  return (fs::path(root_) / category_name(category) / key).string();
}

void LocalFileBackend::put(Category category, const std::string& key,
                           std::span<const std::uint8_t> bytes) {
  validate_storage_key(key);
  const fs::path target = path_for(category, key);
  std::error_code ec;
  fs::create_directories(target.parent_path(), ec);
  if (ec) {
    throw Error("backend '" + name() + "': cannot create directories for " +
                key + ": " + ec.message());
  }
  // Atomic replace: write a temp sibling, then rename over the target.
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) {
      throw Error("backend '" + name() + "': cannot open " + tmp.string());
    }
    f.write(reinterpret_cast<const char*>(bytes.data()),
            std::streamsize(bytes.size()));
    if (!f) {
      throw Error("backend '" + name() + "': short write to " + tmp.string());
    }
  }
  fs::rename(tmp, target, ec);
  if (ec) {
    throw Error("backend '" + name() + "': rename failed for " + key + ": " +
                ec.message());
  }
}

std::vector<std::uint8_t> LocalFileBackend::get(Category category,
                                                const std::string& key) const {
  validate_storage_key(key);
  const fs::path path = path_for(category, key);
  std::ifstream f(path, std::ios::binary);
  if (!f) {
    throw Error("backend '" + name() + "': key not found: " +
                std::string(category_name(category)) + "/" + key);
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return bytes;
}

bool LocalFileBackend::exists(Category category, const std::string& key) const {
  validate_storage_key(key);
  return fs::is_regular_file(path_for(category, key));
}

std::vector<std::string> LocalFileBackend::list(
    Category category, const std::string& prefix) const {
  std::vector<std::string> keys;
  const fs::path base = fs::path(root_) / category_name(category);
  if (!fs::is_directory(base)) return keys;
  for (const auto& entry : fs::recursive_directory_iterator(base)) {
    if (!entry.is_regular_file()) continue;
    const std::string rel =
        fs::relative(entry.path(), base).generic_string();
    if (rel.rfind(prefix, 0) == 0) keys.push_back(rel);
  }
  std::sort(keys.begin(), keys.end());
  return keys;
}

InMemoryBackend::InMemoryBackend(std::string name)
    : StorageBackend(std::move(name), "in_memory") {}

void InMemoryBackend::put(Category category, const std::string& key,
                          std::span<const std::uint8_t> bytes) {
  validate_storage_key(key);
  std::lock_guard<std::mutex> lock(mutex_);
  data_[{category, key}] = std::vector<std::uint8_t>(bytes.begin(), bytes.end());
}

std::vector<std::uint8_t> InMemoryBackend::get(Category category,
                                               const std::string& key) const {
  validate_storage_key(key);
  std::lock_guard<std::mutex> lock(mutex_);
  auto it = data_.find({category, key});
  if (it == data_.end()) {
    throw Error("backend '" + name() + "': key not found: " +
                std::string(category_name(category)) + "/" + key);
  }
  return it->second;
}

bool InMemoryBackend::exists(Category category, const std::string& key) const {
  validate_storage_key(key);
  std::lock_guard<std::mutex> lock(mutex_);
  return data_.count({category, key}) != 0;
}

std::vector<std::string> InMemoryBackend::list(Category category,
                                               const std::string& prefix) const {
  std::lock_guard<std::mutex> lock(mutex_);
  std::vector<std::string> keys;
  for (const auto& [k, _] : data_) {
    if (k.first == category && k.second.rfind(prefix, 0) == 0) {
      keys.push_back(k.second);
    }
  }
  return keys; // map iteration is already sorted
}

bool should_save(const BackupPolicy& policy, std::int64_t epoch) {
  if (!policy.enabled) return false;
  if (policy.frequency < 1) throw Error("backup frequency must be >= 1");
  return epoch >= 1 && epoch % policy.frequency == 0;
}

} // namespace edna
