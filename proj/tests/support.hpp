#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <unistd.h>

#include "prpm/event_log.hpp"

namespace prpm::test {

inline Event make_event(const std::string& case_id, const std::string& activity, Timestamp ts,
                        std::initializer_list<std::pair<const std::string, AttributeValue>>
                            attributes = {}) {
  Event e;
  e.case_id = case_id;
  e.activity = activity;
  e.timestamp = ts;
  e.attributes = attributes;
  return e;
}

/// Trace with one event per activity, spaced `step` ms apart from `start`.
inline Trace make_trace(const std::string& case_id, const std::vector<std::string>& activities,
                        Timestamp start, Outcome outcome, bool treated = false,
                        Timestamp step = 1000) {
  Trace t;
  t.case_id = case_id;
  for (std::size_t i = 0; i < activities.size(); ++i) {
    t.events.push_back(make_event(case_id, activities[i], start + static_cast<Timestamp>(i) * step));
  }
  t.outcome = outcome;
  t.treated = treated;
  return t;
}

/// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("prpm_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

}  // namespace prpm::test
