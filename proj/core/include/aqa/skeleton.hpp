#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "aqa/errors.hpp"
#include "aqa/tensor.hpp"

namespace aqa {

inline constexpr int kNumJoints = 25;
inline constexpr int kClipCount = 7;
inline constexpr int kJointNeck = 1;
inline constexpr int kJointMidHip = 8;

// One 2-D joint estimate. Undetected joints are encoded as (0,0,0);
// a joint is valid iff its confidence is strictly positive.
struct Joint {
  double x = 0.0;
  double y = 0.0;
  double confidence = 0.0;
  bool valid() const { return confidence > 0.0; }
};

struct RawFrame {
  std::array<Joint, kNumJoints> joints{};
  int frame_index = 0;

  int valid_joints() const;
  int missing_joints() const { return kNumJoints - valid_joints(); }
};

struct SkeletonSequence {
  std::vector<RawFrame> frames;
  std::string sample_id;
};

// 25-joint connectivity (BODY_25): 24 undirected edges, symmetric binary
// matrix with zero diagonal, and the symmetrically normalized form
// D^(-1/2) (A+I) D^(-1/2).
struct AdjacencyGraph {
  std::vector<std::pair<int, int>> edges;
  Tensor a;       // [25,25]
  Tensor a_norm;  // [25,25]
};

enum class Gender { female, male };

Gender parse_gender(std::string_view s);
std::string_view gender_name(Gender g);

struct SampleLabel {
  std::string sample_id;
  double total_score = 0.0;
  Gender gender = Gender::female;
  std::optional<double> difficulty;
  std::string event;
  int year = 2008;
};

// Sample reshaped into exactly 7 non-overlapping clips of T frames each.
struct ClipBatch {
  Tensor clips;  // [7, T, 25, C] with C = 2 (x,y) or 3 (x,y,confidence)
  SampleLabel label;
};

struct FilterReport {
  int kept = 0;                 // frames surviving the pipeline
  int flagged = 0;              // kept frames that required joint repair
  int discarded = 0;            // frames with fewer than 20 valid joints
  int demoted = 0;              // flagged frames whose repair failed
  int no_skeleton = 0;          // records with an empty people list
  int multi_person = 0;         // frames with more than one candidate
  int ambiguous_selection = 0;  // top-2 mean confidences within 0.1
};

struct EmptySequenceError : DegenerateInputError {
  FilterReport report;
  EmptySequenceError(const std::string& msg, FilterReport r)
      : DegenerateInputError(msg), report(r) {}
};

// Decodes one pose record: {"people":[{"pose_keypoints_2d":[75 floats]},...]}.
// Returns one RawFrame per person; an empty people list yields an empty
// vector (the frame is discarded later). Malformed text raises ParseError
// with a byte offset; a keypoint count other than 75 raises SchemaError.
std::vector<RawFrame> parse_openpose_frame(std::string_view json_text, int frame_index);

// Inverse of parse_openpose_frame; used by the synthetic generator and tests.
std::string write_openpose_frame(const std::vector<RawFrame>& people);

// Candidate with the highest mean confidence over detected joints; ties go
// to the lowest person index. Empty candidate list -> nullopt.
std::optional<RawFrame> select_athlete(const std::vector<RawFrame>& candidates);

struct FilterResult {
  SkeletonSequence seq;
  FilterReport report;
};

// Drops frames with fewer than 20 valid joints; frames with 20-24 valid
// joints are kept and flagged for repair. Throws EmptySequenceError
// (carrying the report) when nothing survives.
FilterResult filter_frames(const SkeletonSequence& seq);

AdjacencyGraph build_adjacency();

// Each missing joint becomes the mean of the two nearest valid joints,
// nearest by (hop distance, joint index) under breadth-first expansion of
// the joint graph. Repaired joints get confidence 0.5. All repairs read the
// original frame: repaired joints never feed other repairs. Returns nullopt
// when fewer than two valid joints are reachable (frame must be discarded).
std::optional<RawFrame> interpolate_missing(const RawFrame& frame, const AdjacencyGraph& graph);

// Subtracts the MidHip position per frame and divides by the sequence
// median Neck-MidHip distance; confidences are unchanged. Output is
// invariant to global translation and uniform scaling of the input.
SkeletonSequence normalize_sequence(const SkeletonSequence& seq);

// Exactly 7 clips of frames_per_clip frames. Long sequences spread clip
// starts as floor(i*(len-T)/6); short ones are repeat-padded by cycling
// from frame 0 and split contiguously.
ClipBatch segment_clips(const SkeletonSequence& seq, int frames_per_clip, int channels = 2);
std::vector<int> clip_start_indices(int sequence_len, int frames_per_clip);

// filter + per-frame repair; demoted frames are dropped from the output.
FilterResult clean_sequence(const SkeletonSequence& seq, const AdjacencyGraph& graph);

}  // namespace aqa
