#include "cellgate/gateway/share.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>

#include "cellgate/error.hpp"
#include "cellgate/util.hpp"

namespace cellgate::gateway {

namespace fs = std::filesystem;

nlohmann::json to_json(const ShareEntry& e) {
  return {{"owner", e.owner},
          {"path", e.path},
          {"bytes", e.bytes},
          {"content_type", e.content_type},
          {"updated_at", e.updated_at}};
}

bool valid_owner(std::string_view owner) {
  if (owner.empty() || owner.size() > 64 || owner == "." || owner == "..") return false;
  for (char c : owner) {
    bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-' ||
              c == '.';
    if (!ok) return false;
  }
  return true;
}

bool valid_share_path(std::string_view path) {
  if (path.empty() || path.size() > 1024) return false;
  if (path.front() == '/' || path.back() == '/') return false;
  if (path.find("..") != std::string_view::npos) return false;
  if (path.size() >= 2 && path[1] == ':') return false;  // drive letter
  for (char c : path) {
    if (c == '\\' || c == '\0' || static_cast<unsigned char>(c) < 0x20) return false;
  }
  if (path.find("//") != std::string_view::npos) return false;
  for (const auto& seg : split(path, '/')) {
    if (seg == ".") return false;
  }
  return true;
}

std::string guess_content_type(std::string_view path) {
  static const std::map<std::string, std::string, std::less<>> types = {
      {".txt", "text/plain"},  {".json", "application/json"}, {".jpg", "image/jpeg"}, {".jpeg", "image/jpeg"},
      {".png", "image/png"},   {".gif", "image/gif"},         {".amr", "audio/amr"},  {".wav", "audio/wav"},
      {".3gp", "video/3gpp"},  {".mp4", "video/mp4"},         {".vcf", "text/vcard"}, {".html", "text/html"},
  };
  auto dot = path.rfind('.');
  if (dot != std::string_view::npos) {
    auto ext = std::string(path.substr(dot));
    for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (auto it = types.find(ext); it != types.end()) return it->second;
  }
  return "application/octet-stream";
}

namespace {

std::string iso_time(fs::file_time_type t) {
  auto sys = std::chrono::time_point_cast<std::chrono::seconds>(
      t - fs::file_time_type::clock::now() + std::chrono::system_clock::now());
  std::time_t tt = std::chrono::system_clock::to_time_t(sys);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

ShareStore::ShareStore(fs::path root) : root_(std::move(root)) {
  fs::create_directories(root_);
  root_ = fs::canonical(root_);
}

fs::path ShareStore::resolve(const std::string& owner, const std::string& path) const {
  if (!valid_owner(owner)) fail(Errc::invalid_argument, "invalid share owner");
  if (!valid_share_path(path)) fail(Errc::invalid_argument, "invalid share path");
  auto full = (root_ / owner / path).lexically_normal();
  auto rel = full.lexically_relative(root_);
  if (rel.empty() || *rel.begin() == "..") fail(Errc::invalid_argument, "path escapes the share root");
  return full;
}

ShareEntry ShareStore::entry_for(const std::string& owner, const std::string& path, const fs::path& file) const {
  ShareEntry e;
  e.owner = owner;
  e.path = path;
  e.bytes = fs::file_size(file);
  e.updated_at = iso_time(fs::last_write_time(file));
  std::lock_guard lk(mu_);
  auto it = content_types_.find(owner + "/" + path);
  e.content_type = it != content_types_.end() ? it->second : guess_content_type(path);
  return e;
}

ShareEntry ShareStore::put(const std::string& owner, const std::string& path, std::string_view data,
                           const std::string& content_type) {
  auto file = resolve(owner, path);
  std::error_code ec;
  fs::create_directories(file.parent_path(), ec);
  if (ec) fail(Errc::conflict, "cannot create the folder for " + path + ": " + ec.message());
  if (fs::is_directory(file, ec)) fail(Errc::conflict, path + " is a folder");
  auto tmp = file;
  tmp += ".part";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(Errc::invalid_argument, "cannot write " + path);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
  }
  fs::rename(tmp, file, ec);
  if (ec) {
    fs::remove(tmp, ec);
    fail(Errc::conflict, "cannot store " + path);
  }
  {
    std::lock_guard lk(mu_);
    content_types_[owner + "/" + path] = content_type.empty() ? guess_content_type(path) : content_type;
  }
  return entry_for(owner, path, file);
}

std::optional<std::pair<ShareEntry, std::string>> ShareStore::get(const std::string& owner,
                                                                  const std::string& path) const {
  auto file = resolve(owner, path);
  std::error_code ec;
  if (!fs::is_regular_file(file, ec)) return std::nullopt;
  std::ifstream in(file, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::make_pair(entry_for(owner, path, file), ss.str());
}

std::vector<ShareEntry> ShareStore::list(const std::string& owner) const {
  if (!valid_owner(owner)) fail(Errc::invalid_argument, "invalid share owner");
  std::vector<ShareEntry> out;
  auto dir = root_ / owner;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) return out;
  for (auto it = fs::recursive_directory_iterator(dir, ec); it != fs::recursive_directory_iterator(); ++it) {
    if (!it->is_regular_file()) continue;
    auto rel = it->path().lexically_relative(dir).generic_string();
    if (rel.ends_with(".part")) continue;
    out.push_back(entry_for(owner, rel, it->path()));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.path < b.path; });
  return out;
}

}  // namespace cellgate::gateway
