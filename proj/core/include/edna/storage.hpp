#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "edna/error.hpp"

namespace edna {

/// Storage categories, each with its own backend and save frequency.
enum class Category { CONFIG, LOG, MODEL, ARTIFACT, PLUGIN, METRIC };

const char* category_name(Category c); // lowercase, stable

/// Keys are opaque strings with '/' as hierarchy separator. No '..'
/// segments, no leading separator.
void validate_storage_key(const std::string& key);

class StorageBackend {
public:
  StorageBackend(std::string name, std::string kind)
      : name_(std::move(name)), kind_(std::move(kind)) {}
  virtual ~StorageBackend() = default;

  const std::string& name() const { return name_; }
  const std::string& kind() const { return kind_; }

  virtual void put(Category category, const std::string& key,
                   std::span<const std::uint8_t> bytes) = 0;
  virtual std::vector<std::uint8_t> get(Category category,
                                        const std::string& key) const = 0;
  virtual bool exists(Category category, const std::string& key) const = 0;
  /// Lexicographically sorted keys under the prefix.
  virtual std::vector<std::string> list(Category category,
                                        const std::string& prefix) const = 0;

  void put_text(Category category, const std::string& key,
                const std::string& text);
  std::string get_text(Category category, const std::string& key) const;

private:
  std::string name_;
  std::string kind_;
};

/// Layout: {root}/{category-lowercase}/{key}; writes are atomic
/// (temp file + rename).
class LocalFileBackend final : public StorageBackend {
public:
  LocalFileBackend(std::string name, std::string root);

  void put(Category category, const std::string& key,
           std::span<const std::uint8_t> bytes) override;
  std::vector<std::uint8_t> get(Category category,
                                const std::string& key) const override;
  bool exists(Category category, const std::string& key) const override;
  std::vector<std::string> list(Category category,
                                const std::string& prefix) const override;

  const std::string& root() const { return root_; }

private:
  std::string path_for(Category category, const std::string& key) const;
  std::string root_;
};

class InMemoryBackend final : public StorageBackend {
public:
  explicit InMemoryBackend(std::string name);

  void put(Category category, const std::string& key,
           std::span<const std::uint8_t> bytes) override;
  std::vector<std::uint8_t> get(Category category,
                                const std::string& key) const override;
  bool exists(Category category, const std::string& key) const override;
  std::vector<std::string> list(Category category,
                                const std::string& prefix) const override;

private:
  mutable std::mutex mutex_;
  std::map<std::pair<Category, std::string>, std::vector<std::uint8_t>> data_;
};

struct BackupPolicy {
  Category category = Category::LOG;
  std::string backend_name = "local";
  bool enabled = false;
  std::int64_t frequency = 1; // epochs
};

/// True when enabled, epoch >= 1, and epoch is a multiple of frequency.
bool should_save(const BackupPolicy& policy, std::int64_t epoch);

} // namespace edna
