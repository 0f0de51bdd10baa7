#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "temp_heal/corpus.hpp"

namespace testing_support {

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("temp_heal_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline temp::DialogueExample tod_example(std::string id, std::string dialogue, std::vector<std::string> actions,
                                         std::string response) {
  temp::DialogueExample ex;
  ex.id = std::move(id);
  ex.dialogue_id = std::move(dialogue);
  ex.context = "user : hello";
  ex.response = std::move(response);
  ex.actions = std::move(actions);
  return ex;
}

inline temp::DialogueExample chat_example(std::string id, std::vector<double> ctx, std::vector<double> resp,
                                          std::string response = "ok") {
  temp::DialogueExample ex;
  ex.id = std::move(id);
  ex.dialogue_id = "d0";
  ex.context = "hi";
  ex.response = std::move(response);
  ex.context_embedding = std::move(ctx);
  ex.response_embedding = std::move(resp);
  return ex;
}

}  // namespace testing_support
