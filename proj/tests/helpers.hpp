#pragma once

#include <doctest.h>
#include <unistd.h>

#include <filesystem>
#include <string>

#include "pgplan/error.hpp"

// Runs the statement and checks it throws pgplan::Error with the given code.
#define CHECK_PG_ERROR(code_, ...)                                     \
  do {                                                                 \
    bool caught_pg_error = false;                                      \
    try {                                                              \
      __VA_ARGS__;                                                     \
    } catch (const pgplan::Error& e) {                                 \
      caught_pg_error = true;                                          \
      CHECK_MESSAGE(e.code() == (code_), e.what());                    \
    }                                                                  \
    CHECK_MESSAGE(caught_pg_error, "expected pgplan::Error from: " #__VA_ARGS__); \
  } while (0)

// Per-test scratch directory, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    dir_ = std::filesystem::temp_directory_path() /
           ("pgplan_test_" + std::to_string(::getpid()) + "_" + tag + "_" +
            std::to_string(counter_++));
    std::filesystem::create_directories(dir_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(dir_, ec);
  }
  std::string path(const std::string& name) const {
    return (dir_ / name).string();
  }

 private:
  static inline int counter_ = 0;
  std::filesystem::path dir_;
};
