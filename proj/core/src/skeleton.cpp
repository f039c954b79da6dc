#include "aqa/skeleton.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include <json.hpp>

namespace aqa {

using nlohmann::json;

int RawFrame::valid_joints() const {
  int n = 0;
  for (const Joint& j : joints) {
    if (j.valid()) ++n;
  }
  return n;
}

Gender parse_gender(std::string_view s) {
  if (s == "female") return Gender::female;
  if (s == "male") return Gender::male;
  throw SchemaError("gender must be 'female' or 'male', got '" + std::string(s) + "'");
}

std::string_view gender_name(Gender g) { return g == Gender::female ? "female" : "male"; }

std::vector<RawFrame> parse_openpose_frame(std::string_view json_text, int frame_index) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError("pose record: " + std::string(e.what()), e.byte);
  }
  if (!doc.is_object() || !doc.contains("people") || !doc["people"].is_array()) {
    throw SchemaError("pose record: missing 'people' array");
  }
  std::vector<RawFrame> out;
  for (const auto& person : doc["people"]) {
    if (!person.is_object() || !person.contains("pose_keypoints_2d") ||
        !person["pose_keypoints_2d"].is_array()) {
      throw SchemaError("pose record: person without 'pose_keypoints_2d' array");
    }
    const auto& kp = person["pose_keypoints_2d"];
    if (kp.size() != static_cast<std::size_t>(3 * kNumJoints)) {
      throw SchemaError("pose record: expected 75 keypoint values, got " +
                        std::to_string(kp.size()));
    }
    RawFrame f;
    f.frame_index = frame_index;
    for (int j = 0; j < kNumJoints; ++j) {
      if (!kp[3 * j].is_number() || !kp[3 * j + 1].is_number() || !kp[3 * j + 2].is_number()) {
        throw SchemaError("pose record: non-numeric keypoint value");
      }
      f.joints[static_cast<std::size_t>(j)] = {kp[3 * j].get<double>(),
                                               kp[3 * j + 1].get<double>(),
                                               kp[3 * j + 2].get<double>()};
    }
    out.push_back(f);
  }
  return out;
}

std::string write_openpose_frame(const std::vector<RawFrame>& people) {
  json doc;
  doc["version"] = 1.3;
  doc["people"] = json::array();
  for (const RawFrame& f : people) {
    json kp = json::array();
    for (const Joint& j : f.joints) {
      kp.push_back(j.x);
      kp.push_back(j.y);
      kp.push_back(j.confidence);
    }
    doc["people"].push_back({{"pose_keypoints_2d", std::move(kp)}});
  }
  return doc.dump();
}

std::optional<RawFrame> select_athlete(const std::vector<RawFrame>& candidates) {
  if (candidates.empty()) return std::nullopt;
  std::size_t best = 0;
  double best_mean = -1.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    double sum = 0.0;
    int n = 0;
    for (const Joint& j : candidates[i].joints) {
      if (j.valid()) {
        sum += j.confidence;
        ++n;
      }
    }
    const double mean = n > 0 ? sum / n : 0.0;
    if (mean > best_mean) {  // strict: ties keep the lowest index
      best_mean = mean;
      best = i;
    }
  }
  return candidates[best];
}

FilterResult filter_frames(const SkeletonSequence& seq) {
  FilterResult res;
  res.seq.sample_id = seq.sample_id;
  for (const RawFrame& f : seq.frames) {
    const int valid = f.valid_joints();
    if (valid < 20) {
      ++res.report.discarded;
      continue;
    }
    if (valid < kNumJoints) ++res.report.flagged;
    ++res.report.kept;
    res.seq.frames.push_back(f);
  }
  if (res.seq.frames.empty()) {
    throw EmptySequenceError("no frames survived filtering for sample '" + seq.sample_id + "'",
                             res.report);
  }
  return res;
}

AdjacencyGraph build_adjacency() {
  AdjacencyGraph g;
  g.edges = {{0, 1},   {1, 2},   {2, 3},   {3, 4},   {1, 5},   {5, 6},
             {6, 7},   {1, 8},   {8, 9},   {9, 10},  {10, 11}, {8, 12},
             {12, 13}, {13, 14}, {0, 15},  {15, 17}, {0, 16},  {16, 18},
             {14, 19}, {19, 20}, {14, 21}, {11, 22}, {22, 23}, {11, 24}};
  g.a = Tensor({kNumJoints, kNumJoints});
  for (auto [i, j] : g.edges) {
    g.a.at({i, j}) = 1.0;
    g.a.at({j, i}) = 1.0;
  }
  // D^(-1/2) (A+I) D^(-1/2) with D the degree matrix of A+I
  Tensor a_hat = g.a;
  for (int i = 0; i < kNumJoints; ++i) a_hat.at({i, i}) += 1.0;
  std::array<double, kNumJoints> dinv_sqrt{};
  for (int i = 0; i < kNumJoints; ++i) {
    double deg = 0.0;
    for (int j = 0; j < kNumJoints; ++j) deg += a_hat.at({i, j});
    dinv_sqrt[static_cast<std::size_t>(i)] = 1.0 / std::sqrt(deg);
  }
  g.a_norm = Tensor({kNumJoints, kNumJoints});
  for (int i = 0; i < kNumJoints; ++i) {
    for (int j = 0; j < kNumJoints; ++j) {
      g.a_norm.at({i, j}) = dinv_sqrt[static_cast<std::size_t>(i)] * a_hat.at({i, j}) *
                            dinv_sqrt[static_cast<std::size_t>(j)];
    }
  }
  return g;
}

std::optional<RawFrame> interpolate_missing(const RawFrame& frame, const AdjacencyGraph& graph) {
  if (frame.valid_joints() == kNumJoints) return frame;  // nothing to repair
  if (frame.valid_joints() < 2) return std::nullopt;

  std::array<std::vector<int>, kNumJoints> neighbors;
  for (auto [i, j] : graph.edges) {
    neighbors[static_cast<std::size_t>(i)].push_back(j);
    neighbors[static_cast<std::size_t>(j)].push_back(i);
  }

  RawFrame out = frame;
  for (int missing = 0; missing < kNumJoints; ++missing) {
    if (frame.joints[static_cast<std::size_t>(missing)].valid()) continue;

    // Hop-by-hop expansion; traversal passes through invalid joints, only
    // valid ones are gathered. Validity is read from the original frame.
    std::array<int, kNumJoints> hop;
    hop.fill(-1);
    hop[static_cast<std::size_t>(missing)] = 0;
    std::queue<int> frontier;
    frontier.push(missing);
    std::vector<std::pair<int, int>> found;  // (hop, joint index)
    int gathered_through_hop = -1;
    while (!frontier.empty()) {
      const int cur = frontier.front();
      frontier.pop();
      const int h = hop[static_cast<std::size_t>(cur)];
      if (gathered_through_hop >= 0 && h >= gathered_through_hop) break;
      for (int nb : neighbors[static_cast<std::size_t>(cur)]) {
        if (hop[static_cast<std::size_t>(nb)] >= 0) continue;
        hop[static_cast<std::size_t>(nb)] = h + 1;
        frontier.push(nb);
        if (frame.joints[static_cast<std::size_t>(nb)].valid()) {
          found.emplace_back(h + 1, nb);
          if (found.size() >= 2 && gathered_through_hop < 0) gathered_through_hop = h + 1;
        }
      }
    }
    if (found.size() < 2) return std::nullopt;
    std::sort(found.begin(), found.end());
    const Joint& a = frame.joints[static_cast<std::size_t>(found[0].second)];
    const Joint& b = frame.joints[static_cast<std::size_t>(found[1].second)];
    Joint& dst = out.joints[static_cast<std::size_t>(missing)];
    dst.x = 0.5 * (a.x + b.x);
    dst.y = 0.5 * (a.y + b.y);
    dst.confidence = 0.5;  // marker: repaired, distinguishable from observed
  }
  return out;
}

SkeletonSequence normalize_sequence(const SkeletonSequence& seq) {
  if (seq.frames.empty()) {
    throw EmptySequenceError("normalize_sequence: empty sequence '" + seq.sample_id + "'",
                             FilterReport{});
  }
  std::vector<double> torso;
  torso.reserve(seq.frames.size());
  for (const RawFrame& f : seq.frames) {
    const Joint& neck = f.joints[kJointNeck];
    const Joint& hip = f.joints[kJointMidHip];
    torso.push_back(std::hypot(neck.x - hip.x, neck.y - hip.y));
  }
  std::sort(torso.begin(), torso.end());
  const std::size_t n = torso.size();
  const double median =
      n % 2 == 1 ? torso[n / 2] : 0.5 * (torso[n / 2 - 1] + torso[n / 2]);
  if (median < 1e-6) {
    throw DegenerateInputError("normalize_sequence: median torso length " +
                               std::to_string(median) + " below 1e-6 for sample '" +
                               seq.sample_id + "'");
  }
  SkeletonSequence out;
  out.sample_id = seq.sample_id;
  out.frames.reserve(seq.frames.size());
  const double inv = 1.0 / median;
  for (const RawFrame& f : seq.frames) {
    RawFrame g = f;
    const double cx = f.joints[kJointMidHip].x;
    const double cy = f.joints[kJointMidHip].y;
    for (Joint& j : g.joints) {
      j.x = (j.x - cx) * inv;
      j.y = (j.y - cy) * inv;
    }
    out.frames.push_back(g);
  }
  return out;
}

std::vector<int> clip_start_indices(int sequence_len, int frames_per_clip) {
  std::vector<int> starts(kClipCount);
  for (int i = 0; i < kClipCount; ++i) {
    starts[static_cast<std::size_t>(i)] = static_cast<int>(
        (static_cast<std::int64_t>(i) * (sequence_len - frames_per_clip)) / (kClipCount - 1));
  }
  return starts;
}

ClipBatch segment_clips(const SkeletonSequence& seq, int frames_per_clip, int channels) {
  if (frames_per_clip < 2) {
    throw ConfigError("segment_clips: frames_per_clip must be >= 2, got " +
                      std::to_string(frames_per_clip));
  }
  if (channels != 2 && channels != 3) {
    throw ConfigError("segment_clips: channels must be 2 or 3, got " + std::to_string(channels));
  }
  if (seq.frames.empty()) {
    throw EmptySequenceError("segment_clips: empty sequence '" + seq.sample_id + "'",
                             FilterReport{});
  }
  const int len = static_cast<int>(seq.frames.size());
  const int t = frames_per_clip;
  ClipBatch batch;
  batch.clips = Tensor({kClipCount, t, kNumJoints, channels});
  batch.label.sample_id = seq.sample_id;

  auto fill_frame = [&](int clip, int slot, const RawFrame& f) {
    for (int j = 0; j < kNumJoints; ++j) {
      const Joint& joint = f.joints[static_cast<std::size_t>(j)];
      batch.clips.at({clip, slot, j, 0}) = joint.x;
      batch.clips.at({clip, slot, j, 1}) = joint.y;
      if (channels == 3) batch.clips.at({clip, slot, j, 2}) = joint.confidence;
    }
  };

  if (len >= kClipCount * t) {
    const auto starts = clip_start_indices(len, t);
    for (int c = 0; c < kClipCount; ++c) {
      for (int s = 0; s < t; ++s) {
        fill_frame(c, s, seq.frames[static_cast<std::size_t>(starts[static_cast<std::size_t>(c)] + s)]);
      }
    }
  } else {
    // repeat-pad by cycling from frame 0, then split contiguously
    for (int c = 0; c < kClipCount; ++c) {
      for (int s = 0; s < t; ++s) {
        const int idx = (c * t + s) % len;
        fill_frame(c, s, seq.frames[static_cast<std::size_t>(idx)]);
      }
    }
  }
  return batch;
}

FilterResult clean_sequence(const SkeletonSequence& seq, const AdjacencyGraph& graph) {
  FilterResult filtered = filter_frames(seq);
  FilterResult res;
  res.seq.sample_id = seq.sample_id;
  res.report = filtered.report;
  for (const RawFrame& f : filtered.seq.frames) {
    if (f.valid_joints() == kNumJoints) {
      res.seq.frames.push_back(f);
      continue;
    }
    if (auto repaired = interpolate_missing(f, graph)) {
      res.seq.frames.push_back(*repaired);
    } else {
      ++res.report.demoted;
      --res.report.kept;
    }
  }
  if (res.seq.frames.empty()) {
    throw EmptySequenceError("all frames demoted during repair for sample '" + seq.sample_id + "'",
                             res.report);
  }
  return res;
}

}  // namespace aqa
