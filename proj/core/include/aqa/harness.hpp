#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "aqa/checkpoint.hpp"
#include "aqa/config.hpp"
#include "aqa/seq_file.hpp"
#include "aqa/synth.hpp"

namespace aqa {

// Deterministic 80/20 split: a sample validates iff fnv1a64(id) % 5 == 0.
bool is_validation_sample(std::string_view sample_id);

struct PreprocessStats {
  int samples_written = 0;
  int samples_skipped = 0;
  std::filesystem::path report_path;
};

// Parses every per-sample pose-record directory under input_dir, selects
// the athlete per frame, filters/repairs/normalizes, and writes one
// cleaned-sequence file per surviving sample plus a per-sample report.
// Reruns on identical input produce byte-identical outputs.
PreprocessStats run_preprocess(const std::filesystem::path& input_dir,
                               const std::filesystem::path& labels_file,
                               const std::filesystem::path& out_dir);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double train_spearman = 0.0;
  double val_spearman = 0.0;
  double train_gender_accuracy = 0.0;
};

struct TrainResult {
  std::filesystem::path checkpoint_path;        // best.ckpt
  std::filesystem::path final_checkpoint_path;  // final.ckpt
  std::filesystem::path metrics_path;
  std::vector<EpochRecord> log;
};

// Trains the configured pipeline; writes out_dir/metrics.csv (header row,
// one row per epoch), keeps out_dir/best.ckpt at the best validation
// Spearman (train Spearman when the validation split is empty) and writes
// out_dir/final.ckpt for the last epoch. A NaN loss aborts with a
// diagnostic naming the first non-finite op.
TrainResult run_train(const RunConfig& cfg);

struct EvalResult {
  int samples = 0;
  double spearman = 0.0;
  double mae = 0.0;  // on denormalized scores
  double gender_accuracy = 0.0;
};

EvalResult run_eval(const std::filesystem::path& checkpoint_path,
                    const std::filesystem::path& corpus_dir,
                    const std::filesystem::path& labels_file);
std::string format_eval_record(const EvalResult& r);

struct GradcheckRow {
  std::string group;
  int checked = 0;
  double max_rel_err = 0.0;
  bool pass = false;
};

struct GradcheckResult {
  std::vector<GradcheckRow> rows;
  bool pass = true;
};

// Central-difference audit (h = 1e-5) of the training loss on one random
// 7-clip batch, for every parameter group of the configured mode. Up to
// cfg.gradcheck_samples entries per group are checked (0 = all), chosen by
// the run seed. Quantile masks recorded on the analytic pass are replayed
// during the probe forwards. corrupt_group, when nonempty, perturbs that
// group's analytic gradient so the audit must flag it (a self-test hook).
GradcheckResult run_gradcheck(const RunConfig& cfg, const std::string& corrupt_group = "");
double gradcheck_relative_error(double a, double b);
std::string format_gradcheck_table(const GradcheckResult& r);

// shared by train/eval: one training sample ready for the model
struct LoadedSample {
  std::string sample_id;
  ClipBatch batch;
  double score_raw = 0.0;
  Gender gender = Gender::female;
};

std::vector<LoadedSample> load_corpus(const std::filesystem::path& corpus_dir,
                                      const std::filesystem::path& labels_file, int clip_len,
                                      int channels);

}  // namespace aqa
