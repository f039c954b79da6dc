#include "aqa/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "aqa/rng.hpp"

namespace aqa {

namespace {

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::filesystem::path> sorted_entries(const std::filesystem::path& dir,
                                                  bool dirs_only) {
  if (!std::filesystem::exists(dir) || !std::filesystem::is_directory(dir)) {
    throw IoError("not a directory: " + dir.string());
  }
  std::vector<std::filesystem::path> out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (dirs_only ? e.is_directory() : e.is_regular_file()) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path.string());
  std::ostringstream buf;
  buf << is.rdbuf();
  return buf.str();
}

double candidate_mean_confidence(const RawFrame& f) {
  double sum = 0.0;
  int n = 0;
  for (const Joint& j : f.joints) {
    if (j.valid()) {
      sum += j.confidence;
      ++n;
    }
  }
  return n > 0 ? sum / n : 0.0;
}

}  // namespace

bool is_validation_sample(std::string_view sample_id) { return fnv1a64(sample_id) % 5 == 0; }

PreprocessStats run_preprocess(const std::filesystem::path& input_dir,
                               const std::filesystem::path& labels_file,
                               const std::filesystem::path& out_dir) {
  const std::vector<SampleLabel> labels = read_label_file(labels_file);
  std::map<std::string, const SampleLabel*> label_by_id;
  for (const SampleLabel& l : labels) label_by_id[l.sample_id] = &l;

  std::filesystem::create_directories(out_dir);
  const AdjacencyGraph adj = build_adjacency();

  PreprocessStats stats;
  std::ostringstream report;
  report << "sample_id,frames_total,no_skeleton,kept,flagged,discarded,demoted,multi_person,"
            "ambiguous_selection,status\n";

  for (const std::filesystem::path& sample_dir : sorted_entries(input_dir, /*dirs_only=*/true)) {
    const std::string sample_id = sample_dir.filename().string();
    FilterReport rep;
    SkeletonSequence seq;
    seq.sample_id = sample_id;
    int frames_total = 0;

    std::vector<std::filesystem::path> frame_files;
    for (const auto& p : sorted_entries(sample_dir, /*dirs_only=*/false)) {
      if (p.extension() == ".json") frame_files.push_back(p);
    }
    for (const std::filesystem::path& frame_path : frame_files) {
      const std::vector<RawFrame> people =
          parse_openpose_frame(read_text_file(frame_path), frames_total);
      ++frames_total;
      if (people.empty()) {
        ++rep.no_skeleton;
        continue;
      }
      if (people.size() > 1) {
        ++rep.multi_person;
        std::vector<double> means;
        for (const RawFrame& p : people) means.push_back(candidate_mean_confidence(p));
        std::sort(means.rbegin(), means.rend());
        if (means[0] - means[1] < 0.1) ++rep.ambiguous_selection;
      }
      if (auto athlete = select_athlete(people)) {
        athlete->frame_index = static_cast<int>(seq.frames.size());
        seq.frames.push_back(*athlete);
      }
    }

    std::string status = "ok";
    if (seq.frames.empty()) {
      status = "skipped_empty";
    } else if (label_by_id.find(sample_id) == label_by_id.end()) {
      status = "skipped_no_label";
    } else {
      try {
        FilterResult cleaned = clean_sequence(seq, adj);
        rep.kept = cleaned.report.kept;
        rep.flagged = cleaned.report.flagged;
        rep.discarded = cleaned.report.discarded;
        rep.demoted = cleaned.report.demoted;
        const SkeletonSequence normalized = normalize_sequence(cleaned.seq);
        write_sequence_file(out_dir / (sample_id + ".seq"), normalized);
      } catch (const EmptySequenceError& e) {
        rep.kept = e.report.kept;
        rep.flagged = e.report.flagged;
        rep.discarded = e.report.discarded;
        rep.demoted = e.report.demoted;
        status = "skipped_empty";
      } catch (const DegenerateInputError&) {
        status = "skipped_degenerate";
      }
    }

    if (status == "ok") {
      ++stats.samples_written;
    } else {
      ++stats.samples_skipped;
    }
    report << sample_id << ',' << frames_total << ',' << rep.no_skeleton << ',' << rep.kept << ','
           << rep.flagged << ',' << rep.discarded << ',' << rep.demoted << ',' << rep.multi_person
           << ',' << rep.ambiguous_selection << ',' << status << '\n';
  }

  stats.report_path = out_dir / "preprocess_report.csv";
  std::ofstream os(stats.report_path);
  if (!os) throw IoError("cannot write " + stats.report_path.string());
  os << report.str();
  return stats;
}

std::vector<LoadedSample> load_corpus(const std::filesystem::path& corpus_dir,
                                      const std::filesystem::path& labels_file, int clip_len,
                                      int channels) {
  const std::vector<SampleLabel> labels = read_label_file(labels_file);
  std::map<std::string, const SampleLabel*> label_by_id;
  for (const SampleLabel& l : labels) label_by_id[l.sample_id] = &l;

  std::vector<LoadedSample> out;
  for (const auto& p : sorted_entries(corpus_dir, /*dirs_only=*/false)) {
    if (p.extension() != ".seq") continue;
    SkeletonSequence seq = read_sequence_file(p);
    auto it = label_by_id.find(seq.sample_id);
    if (it == label_by_id.end()) {
      throw SchemaError("no label row for sample '" + seq.sample_id + "' (" + p.string() + ")");
    }
    LoadedSample s;
    s.sample_id = seq.sample_id;
    s.batch = segment_clips(seq, clip_len, channels);
    s.batch.label = *it->second;
    s.score_raw = it->second->total_score;
    s.gender = it->second->gender;
    out.push_back(std::move(s));
  }
  if (out.empty()) {
    throw IoError("no .seq files under " + corpus_dir.string());
  }
  return out;
}

namespace {

struct NormScale {
  double lo = 0.0;
  double hi = 1.0;
  double norm(double v) const { return (v - lo) / (hi - lo); }
  double denorm(double v) const { return lo + v * (hi - lo); }
};

NormScale score_scale(const std::vector<LoadedSample>& samples,
                      const std::vector<std::size_t>& idx) {
  NormScale s;
  s.lo = std::numeric_limits<double>::infinity();
  s.hi = -std::numeric_limits<double>::infinity();
  for (std::size_t i : idx) {
    s.lo = std::min(s.lo, samples[i].score_raw);
    s.hi = std::max(s.hi, samples[i].score_raw);
  }
  if (!(s.hi > s.lo)) {
    throw NumericError("degenerate training score range [" + fmt17(s.lo) + ", " + fmt17(s.hi) +
                       "]: min-max normalization undefined");
  }
  return s;
}

double spearman_or_nan(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  try {
    return spearman(a, b);
  } catch (const NumericError&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

[[noreturn]] void abort_nonfinite(const Graph& g, int epoch) {
  std::string diag = "non-finite loss at epoch " + std::to_string(epoch);
  if (auto id = g.first_nonfinite()) {
    diag += ": first NaN/Inf produced by op '" + g.op_name(*id) + "' (node " +
            std::to_string(*id) + ")";
  }
  throw NumericError(diag);
}

Checkpoint make_checkpoint(const RunConfig& cfg, Model& model, const AdamState& adam, int epoch,
                           const NormScale& scale) {
  Checkpoint ckpt;
  ckpt.config = cfg;
  ckpt.epoch = epoch;
  ckpt.score_min = scale.lo;
  ckpt.score_max = scale.hi;
  for (ParamRef& r : model.params()) {
    ckpt.names.push_back(r.name);
    ckpt.tensors.push_back(*r.tensor);
  }
  ckpt.adam = adam;
  return ckpt;
}

void restore_model(Model& model, const Checkpoint& ckpt) {
  auto refs = model.params();
  if (refs.size() != ckpt.names.size()) {
    throw CheckpointError("checkpoint layout mismatch: " + std::to_string(ckpt.names.size()) +
                          " tensors vs " + std::to_string(refs.size()) + " model parameters");
  }
  for (std::size_t i = 0; i < refs.size(); ++i) {
    if (refs[i].name != ckpt.names[i]) {
      throw CheckpointError("checkpoint layout mismatch at entry " + std::to_string(i) + ": '" +
                            ckpt.names[i] + "' vs expected '" + refs[i].name + "'");
    }
    if (!refs[i].tensor->same_shape(ckpt.tensors[i])) {
      throw CheckpointError("checkpoint shape mismatch for '" + refs[i].name + "': " +
                            ckpt.tensors[i].shape_str() + " vs expected " +
                            refs[i].tensor->shape_str());
    }
    *refs[i].tensor = ckpt.tensors[i];
  }
}

Prediction forward_sample(const Model& model, const LoadedSample& s) {
  Graph g;
  Model::Bound bound = model.bind(g);
  PredictionNodes nodes = model.forward(g, bound, s.batch.clips);
  return read_prediction(g, nodes);
}

}  // namespace

TrainResult run_train(const RunConfig& cfg) {
  validate_run_paths(cfg, /*needs_out_dir=*/true);
  if (cfg.epochs < 0 || cfg.batch_size < 1) {
    throw ConfigError("config: epochs must be >= 0 and batch_size >= 1");
  }
  std::filesystem::create_directories(cfg.out_dir);

  const std::vector<LoadedSample> samples =
      load_corpus(cfg.data_dir, cfg.labels, cfg.clip_len, cfg.input_channels);
  std::vector<std::size_t> train_idx, val_idx;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    (is_validation_sample(samples[i].sample_id) ? val_idx : train_idx).push_back(i);
  }
  if (train_idx.empty()) throw ConfigError("training split is empty");
  const NormScale scale = score_scale(samples, train_idx);

  Model model(cfg.model_config());
  SeededRng rng(cfg.seed);
  model.init(rng);
  auto refs = model.params();
  std::vector<Tensor*> param_ptrs;
  for (ParamRef& r : refs) param_ptrs.push_back(r.tensor);
  AdamState adam;
  adam_init(adam, param_ptrs);
  const LossWeights lw = cfg.loss_weights();
  const AdamConfig ac = cfg.adam_config();

  TrainResult result;
  result.checkpoint_path = std::filesystem::path(cfg.out_dir) / "best.ckpt";
  result.final_checkpoint_path = std::filesystem::path(cfg.out_dir) / "final.ckpt";
  result.metrics_path = std::filesystem::path(cfg.out_dir) / "metrics.csv";

  std::ofstream metrics(result.metrics_path);
  if (!metrics) throw IoError("cannot write " + result.metrics_path.string());
  metrics << "epoch,train_loss,train_spearman,val_spearman,train_gender_accuracy\n";

  save_checkpoint(result.checkpoint_path, make_checkpoint(cfg, model, adam, 0, scale));
  save_checkpoint(result.final_checkpoint_path, make_checkpoint(cfg, model, adam, 0, scale));
  double best_metric = -std::numeric_limits<double>::infinity();

  std::vector<std::size_t> order = train_idx;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    // seeded Fisher-Yates: deterministic epoch order
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(i)))]);
    }

    double loss_sum = 0.0;
    int batches = 0;
    std::vector<double> train_preds, train_targets;
    int gender_hits = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      Graph g;
      Model::Bound bound = model.bind(g);
      NodeId batch_loss = -1;
      for (std::size_t k = start; k < end; ++k) {
        const LoadedSample& s = samples[order[k]];
        PredictionNodes pred = model.forward(g, bound, s.batch.clips);
        NodeId loss = total_loss(g, pred, scale.norm(s.score_raw), s.gender, lw);
        batch_loss = batch_loss < 0 ? loss : g.add(batch_loss, loss);
        const Prediction p = read_prediction(g, pred);
        train_preds.push_back(p.score_norm);
        train_targets.push_back(s.score_raw);
        if (p.predicted_gender() == (s.gender == Gender::male ? 1 : 0)) ++gender_hits;
      }
      NodeId mean_loss = g.cscale(batch_loss, 1.0 / static_cast<double>(end - start));
      const double loss_value = g.value(mean_loss)[0];
      if (!std::isfinite(loss_value)) abort_nonfinite(g, epoch);
      g.backward(mean_loss);
      std::vector<Tensor> grads;
      grads.reserve(bound.ids.size());
      for (NodeId id : bound.ids) grads.push_back(g.grad(id));
      adam_step(param_ptrs, grads, adam, ac);
      loss_sum += loss_value;
      ++batches;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / batches;
    rec.train_spearman = spearman_or_nan(train_preds, train_targets);
    rec.train_gender_accuracy =
        static_cast<double>(gender_hits) / static_cast<double>(train_preds.size());

    std::vector<double> val_preds, val_targets;
    for (std::size_t i : val_idx) {
      const Prediction p = forward_sample(model, samples[i]);
      val_preds.push_back(p.score_norm);
      val_targets.push_back(samples[i].score_raw);
    }
    rec.val_spearman = spearman_or_nan(val_preds, val_targets);

    metrics << rec.epoch << ',' << fmt17(rec.train_loss) << ',' << fmt17(rec.train_spearman)
            << ',' << fmt17(rec.val_spearman) << ',' << fmt17(rec.train_gender_accuracy) << '\n';
    metrics.flush();
    result.log.push_back(rec);

    // ties refresh to the most recent epoch: with tiny validation splits the
    // metric is coarsely quantized and the later model is the better one
    const double selection = val_idx.empty() ? rec.train_spearman : rec.val_spearman;
    if (std::isfinite(selection) && selection >= best_metric) {
      best_metric = selection;
      save_checkpoint(result.checkpoint_path, make_checkpoint(cfg, model, adam, epoch, scale));
    }
  }
  if (cfg.epochs > 0) {
    save_checkpoint(result.final_checkpoint_path,
                    make_checkpoint(cfg, model, adam, cfg.epochs, scale));
  }
  return result;
}

EvalResult run_eval(const std::filesystem::path& checkpoint_path,
                    const std::filesystem::path& corpus_dir,
                    const std::filesystem::path& labels_file) {
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  Model model(ckpt.config.model_config());
  restore_model(model, ckpt);
  const std::vector<LoadedSample> samples =
      load_corpus(corpus_dir, labels_file, ckpt.config.clip_len, ckpt.config.input_channels);

  NormScale scale;
  scale.lo = ckpt.score_min;
  scale.hi = ckpt.score_max;

  std::vector<double> preds, targets;
  double abs_err = 0.0;
  int gender_hits = 0;
  for (const LoadedSample& s : samples) {
    const Prediction p = forward_sample(model, s);
    preds.push_back(p.score_norm);
    targets.push_back(s.score_raw);
    abs_err += std::abs(scale.denorm(p.score_norm) - s.score_raw);
    if (p.predicted_gender() == (s.gender == Gender::male ? 1 : 0)) ++gender_hits;
  }

  EvalResult r;
  r.samples = static_cast<int>(samples.size());
  r.spearman = spearman(preds, targets);  // NumericError surfaces to the caller
  r.mae = abs_err / static_cast<double>(samples.size());
  r.gender_accuracy = static_cast<double>(gender_hits) / static_cast<double>(samples.size());
  return r;
}

std::string format_eval_record(const EvalResult& r) {
  std::ostringstream os;
  os << "samples = " << r.samples << '\n';
  os << "spearman = " << fmt17(r.spearman) << '\n';
  os << "mae = " << fmt17(r.mae) << '\n';
  os << "gender_accuracy = " << fmt17(r.gender_accuracy) << '\n';
  return os.str();
}

double gradcheck_relative_error(double a, double b) {
  const double denom = std::max({std::abs(a), std::abs(b), 1e-5});
  return std::abs(a - b) / denom;
}

GradcheckResult run_gradcheck(const RunConfig& cfg, const std::string& corrupt_group) {
  if (!cfg.seed_set) throw ConfigError("config: seed is mandatory");
  constexpr double kStep = 1e-5;
  constexpr double kTolerance = 1e-4;

  Model model(cfg.model_config());
  SeededRng rng(cfg.seed);
  model.init_uniform(rng, 0.5);

  // one random sample: 7 clips, T frames, 25 joints
  Tensor clips({kClipCount, cfg.clip_len, kNumJoints, cfg.input_channels});
  for (std::int64_t i = 0; i < clips.numel(); ++i) clips[i] = rng.uniform(-1.0, 1.0);
  const double label01 = rng.uniform(0.2, 0.8);
  const Gender gender = rng.uniform() < 0.5 ? Gender::female : Gender::male;
  const LossWeights lw = cfg.loss_weights();

  // analytic pass; quantile masks recorded for replay
  std::vector<Tensor> mask_tape;
  std::vector<Tensor> analytic;
  {
    Graph g;
    g.record_masks(&mask_tape);
    Model::Bound bound = model.bind(g);
    PredictionNodes pred = model.forward(g, bound, clips);
    NodeId loss = total_loss(g, pred, label01, gender, lw);
    if (!std::isfinite(g.value(loss)[0])) abort_nonfinite(g, 0);
    g.backward(loss);
    for (NodeId id : bound.ids) analytic.push_back(g.grad(id));
  }

  auto probe_loss = [&]() {
    Graph g;
    g.replay_masks(&mask_tape);
    Model::Bound bound = model.bind(g);
    PredictionNodes pred = model.forward(g, bound, clips);
    NodeId loss = total_loss(g, pred, label01, gender, lw);
    return g.value(loss)[0];
  };

  auto refs = model.params();
  bool corrupt_seen = corrupt_group.empty();
  GradcheckResult result;
  for (std::size_t gi = 0; gi < refs.size(); ++gi) {
    Tensor& grads = analytic[gi];
    if (refs[gi].name == corrupt_group) {
      corrupt_seen = true;
      for (std::int64_t i = 0; i < grads.numel(); ++i) grads[i] = grads[i] * 1.05 + 1e-3;
    }
    Tensor& p = *refs[gi].tensor;
    const std::int64_t n = p.numel();
    std::vector<std::int64_t> picks;
    if (cfg.gradcheck_samples <= 0 || static_cast<std::int64_t>(cfg.gradcheck_samples) >= n) {
      picks.resize(static_cast<std::size_t>(n));
      for (std::int64_t i = 0; i < n; ++i) picks[static_cast<std::size_t>(i)] = i;
    } else {
      // seeded partial Fisher-Yates over entry indices
      std::vector<std::int64_t> all(static_cast<std::size_t>(n));
      for (std::int64_t i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i;
      for (int k = 0; k < cfg.gradcheck_samples; ++k) {
        const int j = k + rng.uniform_int(static_cast<int>(n) - k);
        std::swap(all[static_cast<std::size_t>(k)], all[static_cast<std::size_t>(j)]);
        picks.push_back(all[static_cast<std::size_t>(k)]);
      }
    }

    GradcheckRow row;
    row.group = refs[gi].name;
    row.checked = static_cast<int>(picks.size());
    for (std::int64_t e : picks) {
      // A probe interval that straddles a relu/max kink corrupts the central
      // difference without the gradient being wrong, so such probes are
      // re-measured at smaller steps (the pipeline-level analogue of the
      // op tests resampling away from kink points). A wrong gradient
      // disagrees at every step size.
      double best = std::numeric_limits<double>::infinity();
      for (const double h : {kStep, kStep * 0.1, kStep * 0.01}) {
        const double orig = p[e];
        p[e] = orig + h;
        const double up = probe_loss();
        p[e] = orig - h;
        const double down = probe_loss();
        p[e] = orig;
        const double numeric = (up - down) / (2.0 * h);
        best = std::min(best, gradcheck_relative_error(grads[e], numeric));
        if (best < kTolerance) break;
      }
      row.max_rel_err = std::max(row.max_rel_err, best);
    }
    row.pass = row.max_rel_err < kTolerance;
    if (!row.pass) result.pass = false;
    result.rows.push_back(std::move(row));
  }
  if (!corrupt_seen) {
    throw ConfigError("gradcheck: corrupt group '" + corrupt_group + "' is not a parameter group");
  }
  return result;
}

std::string format_gradcheck_table(const GradcheckResult& r) {
  std::ostringstream os;
  std::size_t width = 12;
  for (const GradcheckRow& row : r.rows) width = std::max(width, row.group.size());
  for (const GradcheckRow& row : r.rows) {
    os << row.group << std::string(width + 2 - row.group.size(), ' ');
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%4d entries  max_rel_err %.3e  %s\n", row.checked,
                  row.max_rel_err, row.pass ? "pass" : "FAIL");
    os << buf;
  }
  os << (r.pass ? "gradcheck: all groups pass" : "gradcheck: FAILURES detected") << '\n';
  return os.str();
}

}  // namespace aqa
