#include "aqa/checkpoint.hpp"

#include <fstream>

#include "binary_io.hpp"

namespace aqa {

namespace {

constexpr char kCkptMagic[] = "AQACKP01";

void put_string(std::ostream& os, const std::string& s) {
  detail::put_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& is, const std::string& what) {
  const std::uint32_t n = detail::get_u32(is, what);
  std::string s(n, '\0');
  if (n > 0 && !is.read(s.data(), n)) throw CheckpointError(what + ": truncated string");
  return s;
}

void put_tensor(std::ostream& os, const Tensor& t) {
  detail::put_u32(os, static_cast<std::uint32_t>(t.rank()));
  for (int d = 0; d < t.rank(); ++d) detail::put_u32(os, static_cast<std::uint32_t>(t.dim(d)));
  for (std::int64_t i = 0; i < t.numel(); ++i) detail::put_f64(os, t[i]);
}

Tensor get_tensor(std::istream& is, const std::string& what) {
  const std::uint32_t rank = detail::get_u32(is, what);
  if (rank > 8) throw CheckpointError(what + ": implausible tensor rank");
  std::vector<int> shape(rank);
  for (std::uint32_t d = 0; d < rank; ++d) {
    shape[d] = static_cast<int>(detail::get_u32(is, what));
  }
  Tensor t(shape);
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = detail::get_f64(is, what);
  return t;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  if (ckpt.names.size() != ckpt.tensors.size() || ckpt.names.size() != ckpt.adam.m.size() ||
      ckpt.names.size() != ckpt.adam.v.size()) {
    throw CheckpointError("save_checkpoint: names/tensors/adam state count mismatch");
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  os.write(kCkptMagic, 8);
  put_string(os, serialize_run_config(ckpt.config));
  detail::put_u32(os, static_cast<std::uint32_t>(ckpt.epoch));
  detail::put_f64(os, ckpt.score_min);
  detail::put_f64(os, ckpt.score_max);
  detail::put_u64(os, static_cast<std::uint64_t>(ckpt.adam.t));
  detail::put_u32(os, static_cast<std::uint32_t>(ckpt.names.size()));
  for (std::size_t i = 0; i < ckpt.names.size(); ++i) {
    put_string(os, ckpt.names[i]);
    put_tensor(os, ckpt.tensors[i]);
    put_tensor(os, ckpt.adam.m[i]);
    put_tensor(os, ckpt.adam.v[i]);
  }
  if (!os) throw IoError("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path.string());
  const std::string what = "checkpoint " + path.string();
  try {
    detail::expect_magic(is, kCkptMagic, what);
    Checkpoint ckpt;
    ckpt.config = parse_run_config_text(get_string(is, what), what + " (embedded config)");
    ckpt.epoch = static_cast<int>(detail::get_u32(is, what));
    ckpt.score_min = detail::get_f64(is, what);
    ckpt.score_max = detail::get_f64(is, what);
    ckpt.adam.t = static_cast<std::int64_t>(detail::get_u64(is, what));
    const std::uint32_t n = detail::get_u32(is, what);
    for (std::uint32_t i = 0; i < n; ++i) {
      ckpt.names.push_back(get_string(is, what));
      ckpt.tensors.push_back(get_tensor(is, what));
      ckpt.adam.m.push_back(get_tensor(is, what));
      ckpt.adam.v.push_back(get_tensor(is, what));
    }
    return ckpt;
  } catch (const SchemaError& e) {
    throw CheckpointError(e.what());
  }
}

}  // namespace aqa
