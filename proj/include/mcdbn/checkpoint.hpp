#pragma once

#include <map>
#include <string>

#include "mcdbn/model.hpp"

namespace mcdbn {

// Binary tensor container. Layout, all integers little-endian:
//   "MCDB" | version u32 = 1 | tensor count u32 |
//   per tensor (names in lexicographic order):
//     name length u32 | name bytes | ndims u32 = 2 | dims u64 each |
//     IEEE-754 doubles, row-major
void save_tensors(const std::string& path, const std::map<std::string, Mat>& tensors);
std::map<std::string, Mat> load_tensors(const std::string& path);

// Model parameters plus meta.* scalars recording the shape, so a checkpoint
// reloads without its config.
void save_checkpoint(const std::string& path, const McdbnModel& model);
McdbnModel load_checkpoint(const std::string& path);

}  // namespace mcdbn
