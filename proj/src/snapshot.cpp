#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "rtwatch/snapshot.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <sstream>

#include <fmt/chrono.h>
#include <fmt/format.h>
#include <httplib.h>
#include <json.hpp>
#include <openssl/evp.h>

#include "rtwatch/errors.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace rtwatch {

namespace {

constexpr std::string_view kSourceNames[] = {"owid", "oxcgrt", "mobility"};
constexpr std::size_t kDigestPrefix = 12;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SourceError("cannot read '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_atomic(const fs::path& path, std::string_view data) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw SourceError("cannot write '" + tmp.string() + "'");
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw SourceError("cannot write '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

// Exclusive advisory lock held for the lifetime of the object.
class DirLock {
 public:
  explicit DirLock(const fs::path& path) {
    fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) throw SourceError("cannot open lock '" + path.string() + "'");
    if (::flock(fd_, LOCK_EX) != 0) {
      ::close(fd_);
      throw SourceError("cannot lock '" + path.string() + "'");
    }
  }
  ~DirLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  int fd_ = -1;
};

std::string utc_timestamp() {
  auto now = std::chrono::time_point_cast<std::chrono::microseconds>(std::chrono::system_clock::now());
  auto secs = std::chrono::time_point_cast<std::chrono::seconds>(now);
  auto micros = (now - secs).count();
  return fmt::format("{:%Y%m%dT%H%M%S}.{:06d}Z", secs, micros);
}

json to_json(const Snapshot& s) {
  return {{"timestamp", s.timestamp}, {"digest", s.digest}, {"file", s.path.filename().string()},
          {"url", s.url},             {"bytes", s.bytes}};
}

std::vector<Snapshot> read_index(const fs::path& dir, std::string_view source) {
  std::vector<Snapshot> out;
  fs::path index = dir / "index.json";
  if (!fs::exists(index)) return out;
  json doc;
  try {
    doc = json::parse(read_file(index));
  } catch (const json::exception& e) {
    throw SourceError("corrupt snapshot index '" + index.string() + "': " + e.what());
  }
  for (const auto& entry : doc.value("snapshots", json::array())) {
    Snapshot s;
    s.source = std::string(source);
    s.timestamp = entry.at("timestamp").get<std::string>();
    s.digest = entry.at("digest").get<std::string>();
    s.path = dir / entry.at("file").get<std::string>();
    s.url = entry.value("url", "");
    s.bytes = entry.value("bytes", std::uintmax_t{0});
    out.push_back(std::move(s));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
  return out;
}

std::string http_get(const std::string& url) {
  auto scheme_end = url.find("://");
  auto path_start = url.find('/', scheme_end + 3);
  std::string origin = url.substr(0, path_start);
  std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

  httplib::Client client(origin);
  client.set_follow_location(true);
  client.set_connection_timeout(30);
  client.set_read_timeout(300);
  auto res = client.Get(path);
  if (!res) throw SourceError("source unavailable: " + url + " (" + httplib::to_string(res.error()) + ")");
  if (res->status != 200) throw SourceError(fmt::format("source unavailable: {} (HTTP {})", url, res->status));
  return std::move(res->body);
}

}  // namespace

std::string_view source_name(Source source) { return kSourceNames[static_cast<std::size_t>(source)]; }

std::optional<Source> parse_source(std::string_view name) {
  for (std::size_t i = 0; i < std::size(kSourceNames); ++i)
    if (kSourceNames[i] == name) return static_cast<Source>(i);
  return std::nullopt;
}

std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw SourceError("sha256 failed");
  std::string hex;
  hex.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", md[i]);
  return hex;
}

Downloader default_downloader() {
  return [](const std::string& url) -> std::string {
    if (url.starts_with("http://") || url.starts_with("https://")) {
      try {
        return http_get(url);
      } catch (const SourceError&) {
        throw;
      } catch (const std::exception& e) {
        throw SourceError("source unavailable: " + url + " (" + e.what() + ")");
      }
    }
    std::string path = url.starts_with("file://") ? url.substr(7) : url;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SourceError("source unavailable: " + url);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
  };
}

SnapshotCache::SnapshotCache(fs::path root) : root_(std::move(root)) {}

std::vector<Snapshot> SnapshotCache::list(Source source) const {
  return read_index(root_ / std::string(source_name(source)), source_name(source));
}

std::optional<Snapshot> SnapshotCache::latest(Source source) const {
  auto all = list(source);
  if (all.empty()) return std::nullopt;
  return all.back();
}

std::optional<Snapshot> SnapshotCache::find_by_digest(Source source, std::string_view digest_prefix) const {
  if (digest_prefix.empty()) return std::nullopt;
  auto all = list(source);
  for (auto it = all.rbegin(); it != all.rend(); ++it)
    if (it->digest.starts_with(digest_prefix)) return *it;
  return std::nullopt;
}

Snapshot SnapshotCache::store(Source source, std::string_view bytes, const std::string& url) {
  const std::string name(source_name(source));
  fs::path dir = root_ / name;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw SourceError("cannot create cache directory '" + dir.string() + "': " + ec.message());

  DirLock lock(dir / ".lock");
  auto existing = read_index(dir, name);

  Snapshot s;
  s.source = name;
  s.digest = sha256_hex(bytes);
  s.url = url;
  s.bytes = bytes.size();
  // Timestamps must be unique and increasing within a source.
  do {
    s.timestamp = utc_timestamp();
  } while (!existing.empty() && s.timestamp <= existing.back().timestamp);
  s.path = dir / (s.timestamp + "_" + s.digest.substr(0, kDigestPrefix) + ".csv");

  write_atomic(s.path, bytes);
  existing.push_back(s);
  json doc = {{"source", name}, {"snapshots", json::array()}};
  for (const auto& e : existing) doc["snapshots"].push_back(to_json(e));
  write_atomic(dir / "index.json", doc.dump(2) + "\n");
  return s;
}

std::string SnapshotCache::read(const Snapshot& snapshot) {
  std::string data;
  try {
    data = read_file(snapshot.path);
  } catch (const SourceError&) {
    throw SourceError("corrupt snapshot: missing file '" + snapshot.path.string() + "'");
  }
  if (sha256_hex(data) != snapshot.digest) throw SourceError("corrupt snapshot: digest mismatch for '" +
                                                             snapshot.path.string() + "'");
  return data;
}

FetchResult fetch_source(Source source, const fs::path& cache_dir, bool refresh, const std::string& url,
                         const Downloader& download) {
  SnapshotCache cache(cache_dir);
  if (!refresh) {
    if (auto hit = cache.latest(source)) return {*hit, true};
  }
  if (url.empty()) throw SourceError(fmt::format("source unavailable: no URL configured for {}", source_name(source)));
  std::string body = download(url);
  if (body.empty()) throw SourceError("source unavailable: empty response from " + url);
  return {cache.store(source, body, url), false};
}

}  // namespace rtwatch
