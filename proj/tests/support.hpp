#pragma once

#include <sys/wait.h>

#include <array>
#include <atomic>
#include <cstdio>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

namespace kpe::test {

inline std::filesystem::path source_dir() { return KPE_SOURCE_DIR; }
inline std::filesystem::path toy_dir() { return source_dir() / "data" / "toy"; }

// Fresh directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = std::filesystem::temp_directory_path() /
            ("kpe-test-" + std::to_string(stamp) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(std::string_view name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& p, std::string_view content) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Minimal XML well-formedness check: balanced tags, quoted attributes,
// entity references limited to the predefined five.
inline bool xml_well_formed(std::string_view doc) {
  std::vector<std::string> open;
  bool root_seen = false;
  auto name_char = [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
           c == '-' || c == '_' || c == ':' || c == '.';
  };
  auto entity_ok = [&](std::size_t amp) {
    const auto semi = doc.find(';', amp);
    if (semi == std::string_view::npos) return false;
    const auto ent = doc.substr(amp + 1, semi - amp - 1);
    return ent == "amp" || ent == "lt" || ent == "gt" || ent == "quot" || ent == "apos";
  };
  std::size_t i = 0;
  while (i < doc.size()) {
    if (doc[i] == '&') {
      if (!entity_ok(i)) return false;
      ++i;
      continue;
    }
    if (doc[i] != '<') {
      if (doc[i] == '>') return false;
      if (open.empty() && doc[i] != '\n' && doc[i] != ' ') return false;
      ++i;
      continue;
    }
    if (doc.substr(i, 5) == "<?xml") {
      if (i != 0) return false;
      const auto end = doc.find("?>", i);
      if (end == std::string_view::npos) return false;
      i = end + 2;
      continue;
    }
    if (doc.substr(i, 4) == "<!--") {
      const auto end = doc.find("-->", i);
      if (end == std::string_view::npos) return false;
      i = end + 3;
      continue;
    }
    const bool closing = i + 1 < doc.size() && doc[i + 1] == '/';
    std::size_t j = i + (closing ? 2 : 1);
    const std::size_t name_start = j;
    while (j < doc.size() && name_char(doc[j])) ++j;
    if (j == name_start) return false;
    const std::string name(doc.substr(name_start, j - name_start));
    bool self_close = false;
    while (true) {
      while (j < doc.size() && (doc[j] == ' ' || doc[j] == '\n')) ++j;
      if (j >= doc.size()) return false;
      if (doc[j] == '>') break;
      if (doc[j] == '/' && j + 1 < doc.size() && doc[j + 1] == '>' && !closing) {
        self_close = true;
        ++j;
        break;
      }
      if (closing) return false;
      const std::size_t attr = j;
      while (j < doc.size() && name_char(doc[j])) ++j;
      if (j == attr || j + 1 >= doc.size() || doc[j] != '=') return false;
      const char quote = doc[j + 1];
      if (quote != '"' && quote != '\'') return false;
      j += 2;
      while (j < doc.size() && doc[j] != quote) {
        if (doc[j] == '<') return false;
        if (doc[j] == '&' && !entity_ok(j)) return false;
        ++j;
      }
      if (j >= doc.size()) return false;
      ++j;
    }
    i = j + 1;
    if (closing) {
      if (open.empty() || open.back() != name) return false;
      open.pop_back();
    } else if (!self_close) {
      if (open.empty() && root_seen) return false;
      root_seen = true;
      open.push_back(name);
    } else if (open.empty()) {
      if (root_seen) return false;
      root_seen = true;
    }
  }
  return root_seen && open.empty();
}

struct CommandResult {
  int exit_code = -1;
  std::string output;
};

// Runs a shell command line, capturing stdout (and stderr unless redirected).
inline CommandResult run_command(const std::string& command, bool merge_stderr = true) {
  CommandResult r;
  FILE* pipe = ::popen((command + (merge_stderr ? " 2>&1" : " 2>/dev/null")).c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.output.append(buf.data(), n);
  const int status = ::pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

inline std::string quoted(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

}  // namespace kpe::test
