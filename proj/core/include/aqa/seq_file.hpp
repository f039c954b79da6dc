#pragma once

#include <filesystem>
#include <vector>

#include "aqa/skeleton.hpp"

namespace aqa {

// Cleaned-sequence container:
//   magic "AQASEQ01"
//   u32 n_frames, u32 n_joints (25), u32 n_channels (3)
//   u32 id_len, id bytes
//   payload: f64 per frame, joint, (x, y, confidence), row-major
// All integers and floats little-endian. Writes are deterministic:
// identical sequences produce byte-identical files.
void write_sequence_file(const std::filesystem::path& path, const SkeletonSequence& seq);
SkeletonSequence read_sequence_file(const std::filesystem::path& path);

// Label table: comma-delimited, no header, one row per sample:
//   sample_id,total_score,gender,difficulty,event,year
// difficulty may be empty.
void write_label_file(const std::filesystem::path& path, const std::vector<SampleLabel>& labels);
std::vector<SampleLabel> read_label_file(const std::filesystem::path& path);

}  // namespace aqa
