#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rtwatch {

enum class Source { owid, oxcgrt, mobility };

std::string_view source_name(Source source);
std::optional<Source> parse_source(std::string_view name);

// One immutable downloaded copy of an upstream CSV.
struct Snapshot {
  std::string source;
  std::string timestamp;  // UTC, YYYYMMDDTHHMMSS.ffffffZ
  std::string digest;     // SHA-256, lowercase hex
  std::filesystem::path path;
  std::string url;
  std::uintmax_t bytes = 0;
};

std::string sha256_hex(std::string_view data);

// Returns the body of `url` or throws SourceError.
using Downloader = std::function<std::string(const std::string& url)>;

// HTTP(S) via cpp-httplib, plus file:// and bare local paths.
Downloader default_downloader();

// Append-only store: <root>/<source>/<timestamp>_<digest12>.csv with an
// index.json per source. Writes for one source are serialized with a file lock.
class SnapshotCache {
 public:
  explicit SnapshotCache(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }

  std::vector<Snapshot> list(Source source) const;
  std::optional<Snapshot> latest(Source source) const;
  std::optional<Snapshot> find_by_digest(Source source, std::string_view digest_prefix) const;

  Snapshot store(Source source, std::string_view bytes, const std::string& url);

  // Contents of a snapshot after digest verification; throws SourceError("corrupt snapshot").
  static std::string read(const Snapshot& snapshot);

 private:
  std::filesystem::path root_;
};

struct FetchResult {
  Snapshot snapshot;
  bool from_cache = false;
};

// Warm cache without `refresh`: returns the latest snapshot and never calls
// `download`. Otherwise downloads and appends a new snapshot.
FetchResult fetch_source(Source source, const std::filesystem::path& cache_dir, bool refresh, const std::string& url,
                         const Downloader& download);

}  // namespace rtwatch
