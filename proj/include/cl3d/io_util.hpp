#pragma once

#include <bit>
#include <filesystem>
#include <fstream>
#include <string>

#include "cl3d/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "binary file formats assume a little-endian host");

namespace cl3d::io {

// write to a sibling temp file, then rename into place
class AtomicFile {
 public:
  explicit AtomicFile(const std::string& path)
      : path_(path), tmp_(path + ".tmp"), out_(tmp_, std::ios::binary | std::ios::trunc) {
    if (!out_) throw Error("io-error", "cannot open " + tmp_ + " for writing");
  }
  std::ofstream& stream() { return out_; }
  void commit() {
    out_.flush();
    if (!out_) throw Error("io-error", "write failed for " + tmp_);
    out_.close();
    std::error_code ec;
    std::filesystem::rename(tmp_, path_, ec);
    if (ec) throw Error("io-error", "cannot rename " + tmp_ + " to " + path_);
  }

 private:
  std::string path_;
  std::string tmp_;
  std::ofstream out_;
};

template <typename T>
void put(std::ofstream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T take(std::ifstream& in, const std::string& path) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw Error("bad-file", "truncated file " + path);
  return value;
}

}  // namespace cl3d::io
