#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "aqa/skeleton.hpp"

namespace aqa {

// Desk-scale stand-in corpus: smooth random joint trajectories (sum of
// low-frequency sinusoids per joint plus a whole-body drift), Gaussian
// coordinate noise, occasional dropped joints and low-confidence spectator
// detections. The label score is a deterministic function of the clean
// trajectory; gender is drawn from an independent latent that also widens
// or narrows the arm span. Output formats match a real corpus: one
// directory of per-frame pose records per sample plus a label table.
struct SynthSpec {
  int n_samples = 16;
  int frames = 112;           // frames per sample
  double sigma = 0.01;        // coordinate noise
  std::uint64_t seed = 7;
  double drop_prob = 0.02;       // P(frame loses 1-5 joints)
  double spectator_prob = 0.05;  // P(frame carries a second, low-confidence person)
};

// score rule: clamp01(1 - var_t(E_t) / (mean_t(E_t)^2 + eps)) with E_t the
// mean squared frame-to-frame joint displacement. Constant-velocity motion
// scores exactly 1.
double motion_quality_score(const std::vector<RawFrame>& frames);

struct SynthStats {
  int samples = 0;
  std::filesystem::path labels_path;
};

SynthStats generate_corpus(const SynthSpec& spec, const std::filesystem::path& out_dir);

}  // namespace aqa
