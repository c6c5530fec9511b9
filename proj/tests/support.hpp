#pragma once

// Shared fixtures: temp directories, hand-built timelines, running the CLI.

#include <fcntl.h>
#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "cdrmob/cdrmob.hpp"

namespace testing_support {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (fs::temp_directory_path() / "cdrmob-test-XXXXXX").string();
    if (!::mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

// Local civil seconds.
inline std::int64_t at(int y, int mo, int d, int h = 0, int mi = 0, int s = 0) {
  return cdrmob::days_from_civil(y, mo, d) * 86400 + h * 3600 + mi * 60 + s;
}

// Timelines over named towers; each event is (timestamp, tower id).
struct Builder {
  std::vector<std::pair<std::string, cdrmob::LatLon>> towers;
  std::vector<std::pair<std::string, std::vector<std::pair<std::int64_t, std::string>>>> egos;

  cdrmob::Timelines build() const {
    auto reg = std::make_shared<const cdrmob::TowerRegistry>(towers);
    auto sorted = egos;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<std::string> names;
    std::vector<std::size_t> offsets{0};
    std::vector<cdrmob::TimelineEvent> events;
    for (auto& [id, evs] : sorted) {
      auto list = evs;
      std::sort(list.begin(), list.end());
      for (const auto& [ts, tower] : list) {
        const auto k = reg->find(tower);
        events.push_back({ts, reg->position(k), k, cdrmob::Kind::call, cdrmob::Direction::outgoing});
      }
      names.push_back(id);
      offsets.push_back(events.size());
    }
    return cdrmob::Timelines(std::move(names), std::move(offsets), std::move(events), reg);
  }
};

struct RunResult {
  int status = -1;
  std::string out, err;
  double seconds = 0.0;
  long max_rss_kb = 0;
};

// Runs `exe args...` and waits; stdout and stderr are captured to files.
inline RunResult run(const std::string& exe, const std::vector<std::string>& args) {
  TempDir io;
  const auto out_path = io / "stdout", err_path = io / "stderr";
  cdrmob::Stopwatch sw;
  const pid_t pid = ::fork();
  if (pid < 0) throw std::runtime_error("fork failed");
  if (pid == 0) {
    const int o = ::open(out_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    const int e = ::open(err_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    ::dup2(o, 1);
    ::dup2(e, 2);
    std::vector<char*> argv;
    argv.push_back(const_cast<char*>(exe.c_str()));
    for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
    argv.push_back(nullptr);
    ::execv(exe.c_str(), argv.data());
    ::_exit(127);
  }
  int status = 0;
  struct rusage usage {};
  ::wait4(pid, &status, 0, &usage);
  RunResult r;
  r.seconds = sw.seconds();
  r.status = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.max_rss_kb = usage.ru_maxrss;
  r.out = read_file(out_path);
  r.err = read_file(err_path);
  return r;
}

}  // namespace testing_support
