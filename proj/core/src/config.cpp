#include "aqa/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace aqa {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

double to_double(const std::string& v, const std::string& key) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    throw ConfigError("config: bad numeric value '" + v + "' for key '" + key + "'");
  }
  return out;
}

int to_int(const std::string& v, const std::string& key) {
  int out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    throw ConfigError("config: bad integer value '" + v + "' for key '" + key + "'");
  }
  return out;
}

std::uint64_t to_u64(const std::string& v, const std::string& key) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    throw ConfigError("config: bad unsigned value '" + v + "' for key '" + key + "'");
  }
  return out;
}

bool to_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config: bad boolean value '" + v + "' for key '" + key + "'");
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

ModelConfig RunConfig::model_config() const {
  ModelConfig mc;
  mc.mode = parse_distill_mode(mode);
  mc.clip_len = clip_len;
  mc.jfe.in_channels = input_channels;
  mc.jfe.spatial_out = spatial_out;
  mc.jfe.t1_out = temporal1_out;
  mc.jfe.t2_out = temporal2_out;
  mc.jfe.kernel_t = temporal_kernel;
  mc.embed_dim = embed_dim;
  mc.quantile_q = quantile_q;
  mc.vfd_kernel = vfd_kernel;
  mc.vfd_stride = vfd_stride;
  mc.mlp_hidden = mlp_hidden;
  return mc;
}

LossWeights RunConfig::loss_weights() const {
  LossWeights lw;
  lw.w = loss_w;
  lw.lambda_gender = gender_loss_weight;
  lw.class_loss_enabled = class_loss;
  if (lw.w < 0.0 || lw.lambda_gender < 0.0) {
    throw ConfigError("config: loss weights must be nonnegative");
  }
  return lw;
}

AdamConfig RunConfig::adam_config() const {
  AdamConfig ac;
  ac.lr = lr;
  ac.beta1 = beta1;
  ac.beta2 = beta2;
  ac.eps = eps;
  return ac;
}

RunConfig parse_run_config_text(std::string_view text, const std::string& source_name) {
  RunConfig cfg;
  std::istringstream is{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string stripped = trim(line.substr(0, line.find('#')));
    if (stripped.empty()) continue;
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source_name + ":" + std::to_string(lineno) +
                        ": expected 'key = value', got '" + stripped + "'");
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key == "mode") cfg.mode = value;
    else if (key == "clip_len") cfg.clip_len = to_int(value, key);
    else if (key == "input_channels") cfg.input_channels = to_int(value, key);
    else if (key == "spatial_out") cfg.spatial_out = to_int(value, key);
    else if (key == "temporal1_out") cfg.temporal1_out = to_int(value, key);
    else if (key == "temporal2_out") cfg.temporal2_out = to_int(value, key);
    else if (key == "temporal_kernel") cfg.temporal_kernel = to_int(value, key);
    else if (key == "embed_dim") cfg.embed_dim = to_int(value, key);
    else if (key == "quantile_q") cfg.quantile_q = to_double(value, key);
    else if (key == "vfd_kernel") cfg.vfd_kernel = to_int(value, key);
    else if (key == "vfd_stride") cfg.vfd_stride = to_int(value, key);
    else if (key == "mlp_hidden") cfg.mlp_hidden = to_int(value, key);
    else if (key == "loss_w") cfg.loss_w = to_double(value, key);
    else if (key == "gender_loss_weight") cfg.gender_loss_weight = to_double(value, key);
    else if (key == "class_loss") cfg.class_loss = to_bool(value, key);
    else if (key == "lr") cfg.lr = to_double(value, key);
    else if (key == "beta1") cfg.beta1 = to_double(value, key);
    else if (key == "beta2") cfg.beta2 = to_double(value, key);
    else if (key == "eps") cfg.eps = to_double(value, key);
    else if (key == "epochs") cfg.epochs = to_int(value, key);
    else if (key == "batch_size") cfg.batch_size = to_int(value, key);
    else if (key == "seed") {
      cfg.seed = to_u64(value, key);
      cfg.seed_set = true;
    } else if (key == "data_dir") cfg.data_dir = value;
    else if (key == "labels") cfg.labels = value;
    else if (key == "out_dir") cfg.out_dir = value;
    else if (key == "gradcheck_samples") cfg.gradcheck_samples = to_int(value, key);
    else {
      throw ConfigError(source_name + ":" + std::to_string(lineno) + ": unknown key '" + key +
                        "'");
    }
  }
  return cfg;
}

RunConfig parse_run_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config: " + path.string());
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_run_config_text(buf.str(), path.string());
}

std::string serialize_run_config(const RunConfig& cfg) {
  std::ostringstream os;
  os << "mode = " << cfg.mode << '\n';
  os << "clip_len = " << cfg.clip_len << '\n';
  os << "input_channels = " << cfg.input_channels << '\n';
  os << "spatial_out = " << cfg.spatial_out << '\n';
  os << "temporal1_out = " << cfg.temporal1_out << '\n';
  os << "temporal2_out = " << cfg.temporal2_out << '\n';
  os << "temporal_kernel = " << cfg.temporal_kernel << '\n';
  os << "embed_dim = " << cfg.embed_dim << '\n';
  os << "quantile_q = " << format_double(cfg.quantile_q) << '\n';
  os << "vfd_kernel = " << cfg.vfd_kernel << '\n';
  os << "vfd_stride = " << cfg.vfd_stride << '\n';
  os << "mlp_hidden = " << cfg.mlp_hidden << '\n';
  os << "loss_w = " << format_double(cfg.loss_w) << '\n';
  os << "gender_loss_weight = " << format_double(cfg.gender_loss_weight) << '\n';
  os << "class_loss = " << (cfg.class_loss ? "true" : "false") << '\n';
  os << "lr = " << format_double(cfg.lr) << '\n';
  os << "beta1 = " << format_double(cfg.beta1) << '\n';
  os << "beta2 = " << format_double(cfg.beta2) << '\n';
  os << "eps = " << format_double(cfg.eps) << '\n';
  os << "epochs = " << cfg.epochs << '\n';
  os << "batch_size = " << cfg.batch_size << '\n';
  if (cfg.seed_set) os << "seed = " << cfg.seed << '\n';
  os << "data_dir = " << cfg.data_dir << '\n';
  os << "labels = " << cfg.labels << '\n';
  os << "out_dir = " << cfg.out_dir << '\n';
  os << "gradcheck_samples = " << cfg.gradcheck_samples << '\n';
  return os.str();
}

void validate_run_paths(const RunConfig& cfg, bool needs_out_dir) {
  if (!cfg.seed_set) throw ConfigError("config: seed is mandatory");
  if (cfg.data_dir.empty() || !std::filesystem::exists(cfg.data_dir)) {
    throw IoError("config: data_dir does not exist: '" + cfg.data_dir + "'");
  }
  if (cfg.labels.empty() || !std::filesystem::exists(cfg.labels)) {
    throw IoError("config: labels file does not exist: '" + cfg.labels + "'");
  }
  if (needs_out_dir && cfg.out_dir.empty()) {
    throw ConfigError("config: out_dir is required");
  }
}

}  // namespace aqa
