#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "cl3d/detector/params.hpp"
#include "cl3d/io_util.hpp"

namespace cl3d {

// CLDS checkpoint: header {magic "CLDS", version u32, hidden u32, classes
// u32, tensor count u32, (rows u32, cols u32) per tensor}, then float32
// blobs column-major in declared parameter order.
inline constexpr std::uint32_t kCheckpointVersion = 1;

template <typename Scalar>
void save_checkpoint(const std::string& path, const DetectorParams<Scalar>& params) {
  io::AtomicFile file(path);
  auto& out = file.stream();
  out.write("CLDS", 4);
  io::put<std::uint32_t>(out, kCheckpointVersion);
  io::put<std::uint32_t>(out, static_cast<std::uint32_t>(params.dims.hidden));
  io::put<std::uint32_t>(out, static_cast<std::uint32_t>(params.dims.classes));
  std::uint32_t count = 0;
  params.visit([&](const char*, const auto&) { ++count; });
  io::put<std::uint32_t>(out, count);
  params.visit([&](const char*, const auto& m) {
    io::put<std::uint32_t>(out, static_cast<std::uint32_t>(m.rows()));
    io::put<std::uint32_t>(out, static_cast<std::uint32_t>(m.cols()));
  });
  params.visit([&](const char*, const auto& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i)
      io::put<float>(out, static_cast<float>(m.data()[i]));
  });
  file.commit();
}

template <typename Scalar>
DetectorParams<Scalar> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io-error", "cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "CLDS", 4) != 0)
    throw Error("bad-file", "not a CLDS checkpoint: " + path);
  if (io::take<std::uint32_t>(in, path) != kCheckpointVersion)
    throw Error("bad-file", "unsupported checkpoint version in " + path);
  DetectorDims dims;
  dims.hidden = static_cast<int>(io::take<std::uint32_t>(in, path));
  dims.classes = static_cast<int>(io::take<std::uint32_t>(in, path));
  if (dims.hidden <= 0 || dims.classes <= 0)
    throw Error("bad-file", "invalid dimensions in " + path);

  DetectorParams<Scalar> params;
  params.set_shapes(dims);
  std::vector<std::pair<std::uint32_t, std::uint32_t>> shapes;
  params.visit([&](const char*, const auto& m) {
    shapes.emplace_back(static_cast<std::uint32_t>(m.rows()),
                        static_cast<std::uint32_t>(m.cols()));
  });
  if (io::take<std::uint32_t>(in, path) != shapes.size())
    throw Error("bad-file", "checkpoint tensor count mismatch in " + path);
  for (const auto& [rows, cols] : shapes) {
    if (io::take<std::uint32_t>(in, path) != rows || io::take<std::uint32_t>(in, path) != cols)
      throw Error("bad-file", "checkpoint shape table mismatch in " + path);
  }
  params.visit([&](const char*, auto& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i)
      m.data()[i] = static_cast<Scalar>(io::take<float>(in, path));
  });
  return params;
}

}  // namespace cl3d
