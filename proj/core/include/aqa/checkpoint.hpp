#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "aqa/config.hpp"
#include "aqa/heads.hpp"

namespace aqa {

// Everything needed to resume or evaluate a run: the config snapshot, the
// training-split score range, all parameter tensors in registry order and
// the optimizer moments. Serialization is deterministic, so
// save -> load -> save produces byte-identical files.
struct Checkpoint {
  RunConfig config;
  int epoch = 0;
  double score_min = 0.0;
  double score_max = 1.0;
  std::vector<std::string> names;
  std::vector<Tensor> tensors;
  AdamState adam;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace aqa
