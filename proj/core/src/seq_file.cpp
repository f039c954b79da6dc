#include "aqa/seq_file.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "binary_io.hpp"

namespace aqa {

namespace {
constexpr char kSeqMagic[] = "AQASEQ01";

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& field, const std::string& what) {
  double v = 0.0;
  const auto* first = field.data();
  const auto* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last) {
    throw SchemaError(what + ": bad numeric field '" + field + "'");
  }
  return v;
}

}  // namespace

void write_sequence_file(const std::filesystem::path& path, const SkeletonSequence& seq) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  os.write(kSeqMagic, 8);
  detail::put_u32(os, static_cast<std::uint32_t>(seq.frames.size()));
  detail::put_u32(os, kNumJoints);
  detail::put_u32(os, 3);
  detail::put_u32(os, static_cast<std::uint32_t>(seq.sample_id.size()));
  os.write(seq.sample_id.data(), static_cast<std::streamsize>(seq.sample_id.size()));
  for (const RawFrame& f : seq.frames) {
    for (const Joint& j : f.joints) {
      detail::put_f64(os, j.x);
      detail::put_f64(os, j.y);
      detail::put_f64(os, j.confidence);
    }
  }
  if (!os) throw IoError("write failed: " + path.string());
}

SkeletonSequence read_sequence_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path.string());
  const std::string what = "sequence file " + path.string();
  detail::expect_magic(is, kSeqMagic, what);
  const std::uint32_t n_frames = detail::get_u32(is, what);
  const std::uint32_t n_joints = detail::get_u32(is, what);
  const std::uint32_t n_channels = detail::get_u32(is, what);
  if (n_joints != kNumJoints || n_channels != 3) {
    throw SchemaError(what + ": expected 25 joints x 3 channels, got " +
                      std::to_string(n_joints) + " x " + std::to_string(n_channels));
  }
  const std::uint32_t id_len = detail::get_u32(is, what);
  SkeletonSequence seq;
  seq.sample_id.resize(id_len);
  if (id_len > 0 && !is.read(seq.sample_id.data(), id_len)) {
    throw SchemaError(what + ": truncated sample id");
  }
  seq.frames.resize(n_frames);
  for (std::uint32_t t = 0; t < n_frames; ++t) {
    RawFrame& f = seq.frames[t];
    f.frame_index = static_cast<int>(t);
    for (Joint& j : f.joints) {
      j.x = detail::get_f64(is, what);
      j.y = detail::get_f64(is, what);
      j.confidence = detail::get_f64(is, what);
    }
  }
  return seq;
}

void write_label_file(const std::filesystem::path& path, const std::vector<SampleLabel>& labels) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  for (const SampleLabel& l : labels) {
    os << l.sample_id << ',' << format_double(l.total_score) << ',' << gender_name(l.gender)
       << ',' << (l.difficulty ? format_double(*l.difficulty) : "") << ',' << l.event << ','
       << l.year << '\n';
  }
  if (!os) throw IoError("write failed: " + path.string());
}

std::vector<SampleLabel> read_label_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open: " + path.string());
  const std::string what = "label file " + path.string();
  std::vector<SampleLabel> out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.push_back("");
    if (fields.size() != 6) {
      throw SchemaError(what + ": line " + std::to_string(lineno) + " has " +
                        std::to_string(fields.size()) + " fields, expected 6");
    }
    SampleLabel l;
    l.sample_id = fields[0];
    l.total_score = parse_double(fields[1], what);
    l.gender = parse_gender(fields[2]);
    if (!fields[3].empty()) l.difficulty = parse_double(fields[3], what);
    l.event = fields[4];
    l.year = static_cast<int>(parse_double(fields[5], what));
    if (l.total_score < 0.0) {
      throw SchemaError(what + ": line " + std::to_string(lineno) + ": negative score");
    }
    if (l.year < 2008 || l.year > 2021) {
      throw SchemaError(what + ": line " + std::to_string(lineno) + ": year " +
                        std::to_string(l.year) + " outside [2008, 2021]");
    }
    out.push_back(std::move(l));
  }
  return out;
}

}  // namespace aqa
