// aqa: skeleton-based action quality assessment pipeline.
//
// Subcommands: preprocess, synth, train, eval, gradcheck.
// Exit codes: 0 success, 1 validation/config, 2 I/O, 3 numeric failure
// (NaN loss / undefined correlation), 4 gradcheck failure.

#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "aqa/harness.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitIo = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitGradcheck = 4;

struct CommonOpts {
  std::string config_path;
  std::string mode;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_given = false;
  bool mode_given = false;
  bool out_given = false;
};

aqa::RunConfig load_config(const CommonOpts& opts) {
  aqa::RunConfig cfg;
  if (!opts.config_path.empty()) cfg = aqa::parse_run_config(opts.config_path);
  if (opts.seed_given) {
    cfg.seed = opts.seed;
    cfg.seed_set = true;
  }
  if (opts.mode_given) cfg.mode = opts.mode;
  if (opts.out_given) cfg.out_dir = opts.out;
  return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "run configuration file (key = value lines)");
  cmd->add_option("--seed", opts.seed, "seed override")->each([&opts](const std::string&) {
    opts.seed_given = true;
  });
  cmd->add_option("--mode", opts.mode,
                  "distill mode: vfd|nla_emb|nla_cat|dnla_mu_emb|dnla_mu_cat|dnla_delta_emb")
      ->each([&opts](const std::string&) { opts.mode_given = true; });
  cmd->add_option("--out", opts.out, "output directory override")
      ->each([&opts](const std::string&) { opts.out_given = true; });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"skeleton-based action quality assessment pipeline"};
  app.require_subcommand(1);

  CommonOpts opts;

  // preprocess
  auto* preprocess = app.add_subcommand(
      "preprocess", "parse pose-record directories, filter/repair/normalize, write .seq files");
  std::string pre_input, pre_labels;
  preprocess->add_option("--input", pre_input, "directory of per-sample pose-record directories")
      ->required();
  preprocess->add_option("--labels", pre_labels, "label table (csv)")->required();
  add_common(preprocess, opts);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic pose corpus plus labels");
  int synth_n = 16, synth_frames = 112;
  double synth_sigma = 0.01;
  synth->add_option("--samples", synth_n, "number of samples");
  synth->add_option("--frames", synth_frames, "frames per sample");
  synth->add_option("--sigma", synth_sigma, "coordinate noise");
  add_common(synth, opts);

  // train
  auto* train = app.add_subcommand("train", "train the configured pipeline");
  add_common(train, opts);

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a corpus");
  std::string eval_ckpt, eval_corpus, eval_labels;
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  eval->add_option("--corpus", eval_corpus, "directory of .seq files")->required();
  eval->add_option("--labels", eval_labels, "label table (csv)")->required();
  add_common(eval, opts);

  // gradcheck
  auto* gradcheck = app.add_subcommand(
      "gradcheck", "finite-difference audit of every parameter group of the configured mode");
  std::string corrupt_group;
  gradcheck->add_option("--corrupt-group", corrupt_group,
                        "self-test: perturb this group's analytic gradient so the audit fails");
  add_common(gradcheck, opts);

  CLI11_PARSE(app, argc, argv);

  try {
    if (preprocess->parsed()) {
      aqa::RunConfig cfg = load_config(opts);
      if (cfg.out_dir.empty()) throw aqa::ConfigError("preprocess: --out (or out_dir) required");
      const aqa::PreprocessStats stats = aqa::run_preprocess(pre_input, pre_labels, cfg.out_dir);
      std::cout << "written " << stats.samples_written << " samples, skipped "
                << stats.samples_skipped << "; report: " << stats.report_path.string() << '\n';
      return kExitOk;
    }
    if (synth->parsed()) {
      aqa::RunConfig cfg = load_config(opts);
      if (cfg.out_dir.empty()) throw aqa::ConfigError("synth: --out (or out_dir) required");
      if (!cfg.seed_set) throw aqa::ConfigError("synth: --seed required");
      aqa::SynthSpec spec;
      spec.n_samples = synth_n;
      spec.frames = synth_frames;
      spec.sigma = synth_sigma;
      spec.seed = cfg.seed;
      const aqa::SynthStats stats = aqa::generate_corpus(spec, cfg.out_dir);
      std::cout << "generated " << stats.samples << " samples under " << cfg.out_dir
                << "; labels: " << stats.labels_path.string() << '\n';
      return kExitOk;
    }
    if (train->parsed()) {
      const aqa::RunConfig cfg = load_config(opts);
      const aqa::TrainResult result = aqa::run_train(cfg);
      if (!result.log.empty()) {
        const aqa::EpochRecord& last = result.log.back();
        std::printf("epoch %d: train_loss %.6f train_sp %.4f val_sp %.4f gender_acc %.4f\n",
                    last.epoch, last.train_loss, last.train_spearman, last.val_spearman,
                    last.train_gender_accuracy);
      }
      std::cout << "metrics: " << result.metrics_path.string()
                << "\nbest checkpoint: " << result.checkpoint_path.string()
                << "\nfinal checkpoint: " << result.final_checkpoint_path.string() << '\n';
      return kExitOk;
    }
    if (eval->parsed()) {
      const aqa::EvalResult r = aqa::run_eval(eval_ckpt, eval_corpus, eval_labels);
      std::cout << aqa::format_eval_record(r);
      return kExitOk;
    }
    if (gradcheck->parsed()) {
      const aqa::RunConfig cfg = load_config(opts);
      const aqa::GradcheckResult r = aqa::run_gradcheck(cfg, corrupt_group);
      std::cout << aqa::format_gradcheck_table(r);
      return r.pass ? kExitOk : kExitGradcheck;
    }
  } catch (const aqa::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const aqa::SchemaError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const aqa::ShapeError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const aqa::CheckpointError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const aqa::DegenerateInputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const aqa::ParseError& e) {
    std::cerr << "error: " << e.what() << " (byte " << e.byte_offset << ")\n";
    return kExitIo;
  } catch (const aqa::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const aqa::NumericError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumeric;
  }
  return kExitOk;
}
