#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "aqa/model.hpp"

namespace aqa {

// Flat key=value run configuration. Unknown keys are errors. '#' starts a
// comment; blank lines are ignored.
struct RunConfig {
  std::string mode = "dnla_delta_emb";
  int clip_len = 16;
  int input_channels = 2;
  int spatial_out = 32;
  int temporal1_out = 32;
  int temporal2_out = 64;
  int temporal_kernel = 9;
  int embed_dim = 0;  // 0 -> feature channels / 2
  double quantile_q = 0.25;
  int vfd_kernel = 200;
  int vfd_stride = 100;
  int mlp_hidden = 64;

  double loss_w = 1.0;
  double gender_loss_weight = 0.1;
  bool class_loss = true;

  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int epochs = 100;
  int batch_size = 4;

  std::uint64_t seed = 0;
  bool seed_set = false;

  std::string data_dir;
  std::string labels;
  std::string out_dir;

  int gradcheck_samples = 24;  // entries audited per parameter group; 0 = all

  ModelConfig model_config() const;
  LossWeights loss_weights() const;
  AdamConfig adam_config() const;
};

RunConfig parse_run_config_text(std::string_view text, const std::string& source_name);
RunConfig parse_run_config(const std::filesystem::path& path);
std::string serialize_run_config(const RunConfig& cfg);

// data_dir/labels must exist, seed must be set; throws ConfigError/IoError.
void validate_run_paths(const RunConfig& cfg, bool needs_out_dir);

}  // namespace aqa
