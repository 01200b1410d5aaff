#pragma once

#include <filesystem>
#include <string>

#ifndef GWBAYES_DATA_DIR
#define GWBAYES_DATA_DIR "data"
#endif
#ifndef GWBAYES_TEST_TMP
#define GWBAYES_TEST_TMP "test_tmp"
#endif

inline std::filesystem::path data_path(const std::string& name) {
  return std::filesystem::path(GWBAYES_DATA_DIR) / name;
}

/// Fresh, empty scratch directory under the build tree.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::path(GWBAYES_TEST_TMP) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string replace_once(std::string text, const std::string& what, const std::string& with) {
  const auto pos = text.find(what);
  if (pos != std::string::npos) text.replace(pos, what.size(), with);
  return text;
}
