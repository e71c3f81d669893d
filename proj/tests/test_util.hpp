// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "greenhouse/series.hpp"
#include "greenhouse/types.hpp"

namespace testutil {

// Scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    dir_ = std::filesystem::temp_directory_path() /
           ("greenhouse_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(dir_, ec);
  }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

 private:
  std::filesystem::path dir_;
};

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline greenhouse::Series make_series(std::initializer_list<double> values,
                                      greenhouse::Timestamp start = 0,
                                      greenhouse::Timestamp step = 1) {
  greenhouse::Vector v(static_cast<greenhouse::Index>(values.size()));
  greenhouse::Index i = 0;
  for (double x : values) v[i++] = x;
  return greenhouse::Series(start, step, std::move(v));
}

}  // namespace testutil
