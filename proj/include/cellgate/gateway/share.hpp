#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace cellgate::gateway {

struct ShareEntry {
  std::string owner;
  std::string path;  // relative to the owner's space, '/'-separated
  std::uint64_t bytes = 0;
  std::string content_type;
  std::string updated_at;
};

nlohmann::json to_json(const ShareEntry& e);

// Letters, digits, '_', '-', '.'; not "." or "..".
bool valid_owner(std::string_view owner);
// Relative, no "..", no backslash or NUL, no empty segment.
bool valid_share_path(std::string_view path);

// Files under <root>/<owner>/<path>. Every caller may read; writes are checked by the caller.
class ShareStore {
 public:
  explicit ShareStore(std::filesystem::path root);

  // Throws Error(invalid_argument) for a bad owner or path.
  ShareEntry put(const std::string& owner, const std::string& path, std::string_view data,
                 const std::string& content_type);
  // nullopt when absent.
  std::optional<std::pair<ShareEntry, std::string>> get(const std::string& owner, const std::string& path) const;
  // Every regular file of the owner's space, sorted by path. Unknown owner -> empty.
  std::vector<ShareEntry> list(const std::string& owner) const;

  const std::filesystem::path& root() const noexcept { return root_; }

 private:
  std::filesystem::path resolve(const std::string& owner, const std::string& path) const;
  ShareEntry entry_for(const std::string& owner, const std::string& path, const std::filesystem::path& file) const;

  std::filesystem::path root_;
  mutable std::mutex mu_;
  std::map<std::string, std::string> content_types_;  // "owner/path" -> type given at upload
};

// Best guess from the file extension.
std::string guess_content_type(std::string_view path);

}  // namespace cellgate::gateway
