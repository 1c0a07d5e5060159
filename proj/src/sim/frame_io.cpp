#include "cl3d/sim/frame_io.hpp"

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cl3d/error.hpp"
#include "cl3d/io_util.hpp"

namespace cl3d {

namespace {

constexpr char kMagic[4] = {'C', 'L', 'P', 'F'};
constexpr std::uint32_t kVersion = 1;

using io::AtomicFile;
using io::put;
using io::take;

}  // namespace

void write_clpf(const std::string& path, const PointFrame& frame) {
  AtomicFile file(path);
  auto& out = file.stream();
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(frame.points.rows()));
  put<std::uint8_t>(out, static_cast<std::uint8_t>(frame.device.kind));
  for (int i = 0; i < frame.points.rows(); ++i) {
    put<float>(out, static_cast<float>(frame.points(i, 0)));
    put<float>(out, static_cast<float>(frame.points(i, 1)));
    put<float>(out, static_cast<float>(frame.points(i, 2)));
  }
  file.commit();
}

PointFrame read_clpf(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io-error", "cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw Error("bad-file", "not a CLPF file: " + path);
  const auto version = take<std::uint32_t>(in, path);
  if (version != kVersion) throw Error("bad-file", "unsupported CLPF version in " + path);
  const auto count = take<std::uint32_t>(in, path);
  const auto kind = take<std::uint8_t>(in, path);
  if (kind > 1) throw Error("bad-file", "unknown device kind in " + path);

  PointFrame frame;
  frame.device = kind == 0 ? mechanical32_preset() : solidstate_preset();
  frame.points.resize(count, 3);
  for (std::uint32_t i = 0; i < count; ++i) {
    frame.points(i, 0) = take<float>(in, path);
    frame.points(i, 1) = take<float>(in, path);
    frame.points(i, 2) = take<float>(in, path);
  }
  return frame;
}

void write_labels_jsonl(const std::string& path, const std::vector<ObjectLabel>& labels) {
  AtomicFile file(path);
  auto& out = file.stream();
  for (const auto& label : labels) {
    nlohmann::json j;
    j["id"] = label.id;
    j["class"] = label.class_id;
    j["center"] = {label.box.center.x(), label.box.center.y(), label.box.center.z()};
    j["size"] = {label.box.size.x(), label.box.size.y(), label.box.size.z()};
    j["yaw"] = label.box.yaw;
    j["velocity"] = {label.velocity.x(), label.velocity.y()};
    j["confidence"] = label.confidence;
    out << j.dump() << '\n';
  }
  file.commit();
}

std::vector<ObjectLabel> read_labels_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("io-error", "cannot open " + path);
  std::vector<ObjectLabel> labels;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      throw Error("bad-file", path + ":" + std::to_string(line_no) + ": invalid JSON");
    }
    try {
      ObjectLabel label;
      label.id = j.at("id").get<std::int64_t>();
      label.class_id = j.at("class").get<int>();
      const auto& c = j.at("center");
      label.box.center = {c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>()};
      const auto& s = j.at("size");
      label.box.size = {s.at(0).get<double>(), s.at(1).get<double>(), s.at(2).get<double>()};
      label.box.yaw = j.at("yaw").get<double>();
      const auto& v = j.at("velocity");
      label.velocity = {v.at(0).get<double>(), v.at(1).get<double>()};
      label.confidence = j.at("confidence").get<double>();
      labels.push_back(label);
    } catch (const nlohmann::json::exception&) {
      throw Error("bad-file", path + ":" + std::to_string(line_no) + ": missing label field");
    }
  }
  return labels;
}

}  // namespace cl3d
