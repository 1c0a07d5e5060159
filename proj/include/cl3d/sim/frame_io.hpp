#pragma once

#include <string>
#include <vector>

#include "cl3d/types.hpp"

namespace cl3d {

// CLPF: little-endian binary point frame. Header {magic "CLPF", version u32,
// point count u32, device kind u8}, then float32 xyz triples. Device
// parameters beyond the kind are not stored; readers get the kind's preset.
void write_clpf(const std::string& path, const PointFrame& frame);
PointFrame read_clpf(const std::string& path);

// Labels as JSON lines: one object per line with id, class, center, size,
// yaw, velocity, confidence.
void write_labels_jsonl(const std::string& path, const std::vector<ObjectLabel>& labels);
std::vector<ObjectLabel> read_labels_jsonl(const std::string& path);

}  // namespace cl3d
