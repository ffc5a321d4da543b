#include "stpca/config.hpp"

#include "stpca/io.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <functional>
#include <sstream>

namespace stpca {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

int to_int(std::string_view key, std::string_view v) {
  int out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    throw UsageError("config key '" + std::string(key) + "': expected an integer, got '" + std::string(v) + "'");
  }
  return out;
}

std::uint64_t to_u64(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    throw UsageError("config key '" + std::string(key) + "': expected an unsigned integer, got '" + std::string(v) + "'");
  }
  return out;
}

double to_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    throw UsageError("config key '" + std::string(key) + "': expected a number, got '" + std::string(v) + "'");
  }
  return out;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw UsageError("config key '" + std::string(key) + "': expected true/false, got '" + std::string(v) + "'");
}

std::string fmt(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

using Setter = std::function<void(RunConfig&, std::string_view, std::string_view)>;
using Getter = std::function<std::string(const RunConfig&)>;

struct Field {
  Setter set;
  Getter get;
};

// Ordered so resolved() output is stable.
const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"data.path", {[](RunConfig& c, auto, auto v) { c.data_path = v; }, [](const RunConfig& c) { return c.data_path; }}},
      {"data.adjacency",
       {[](RunConfig& c, auto, auto v) { c.adjacency_path = v; }, [](const RunConfig& c) { return c.adjacency_path; }}},
      {"data.shifted_path",
       {[](RunConfig& c, auto, auto v) { c.shifted_path = v; }, [](const RunConfig& c) { return c.shifted_path; }}},
      {"data.split",
       {[](RunConfig& c, auto, auto v) { c.split = parse_ratios(v); },
        [](const RunConfig& c) { return fmt(c.split[0]) + "," + fmt(c.split[1]) + "," + fmt(c.split[2]); }}},
      {"data.norm_include_zeros",
       {[](RunConfig& c, auto k, auto v) { c.norm_include_zeros = to_bool(k, v); },
        [](const RunConfig& c) { return std::string(c.norm_include_zeros ? "true" : "false"); }}},
      {"data.steps_per_day",
       {[](RunConfig& c, auto k, auto v) { c.steps_per_day = to_int(k, v); },
        [](const RunConfig& c) { return std::to_string(c.steps_per_day); }}},
      {"window.l1", {[](RunConfig& c, auto k, auto v) { c.l1 = to_int(k, v); }, [](const RunConfig& c) { return std::to_string(c.l1); }}},
      {"window.l2", {[](RunConfig& c, auto k, auto v) { c.l2 = to_int(k, v); }, [](const RunConfig& c) { return std::to_string(c.l2); }}},
      {"embedding.strategy",
       {[](RunConfig& c, auto, auto v) { c.strategy = parse_strategy(v); },
        [](const RunConfig& c) { return std::string(to_string(c.strategy)); }}},
      {"embedding.dim",
       {[](RunConfig& c, auto k, auto v) { c.embed_dim = to_int(k, v); },
        [](const RunConfig& c) { return std::to_string(c.embed_dim); }}},
      {"embedding.theta",
       {[](RunConfig& c, auto k, auto v) { c.theta = to_double(k, v); }, [](const RunConfig& c) { return fmt(c.theta); }}},
      {"embedding.centered",
       {[](RunConfig& c, auto k, auto v) { c.centered = to_bool(k, v); },
        [](const RunConfig& c) { return std::string(c.centered ? "true" : "false"); }}},
      {"model.hidden_dim",
       {[](RunConfig& c, auto k, auto v) { c.hidden_dim = to_int(k, v); },
        [](const RunConfig& c) { return std::to_string(c.hidden_dim); }}},
      {"model.tod_dim",
       {[](RunConfig& c, auto k, auto v) { c.tod_dim = to_int(k, v); }, [](const RunConfig& c) { return std::to_string(c.tod_dim); }}},
      {"model.dow_dim",
       {[](RunConfig& c, auto k, auto v) { c.dow_dim = to_int(k, v); }, [](const RunConfig& c) { return std::to_string(c.dow_dim); }}},
      {"model.num_blocks",
       {[](RunConfig& c, auto k, auto v) { c.num_blocks = to_int(k, v); },
        [](const RunConfig& c) { return std::to_string(c.num_blocks); }}},
      {"model.use_graph",
       {[](RunConfig& c, auto k, auto v) { c.use_graph = to_bool(k, v); },
        [](const RunConfig& c) { return std::string(c.use_graph ? "true" : "false"); }}},
      {"train.lr", {[](RunConfig& c, auto k, auto v) { c.lr = to_double(k, v); }, [](const RunConfig& c) { return fmt(c.lr); }}},
      {"train.max_epochs",
       {[](RunConfig& c, auto k, auto v) { c.max_epochs = to_int(k, v); },
        [](const RunConfig& c) { return std::to_string(c.max_epochs); }}},
      {"train.patience",
       {[](RunConfig& c, auto k, auto v) { c.patience = to_int(k, v); },
        [](const RunConfig& c) { return std::to_string(c.patience); }}},
      {"train.batch_size",
       {[](RunConfig& c, auto k, auto v) { c.batch_size = to_int(k, v); },
        [](const RunConfig& c) { return std::to_string(c.batch_size); }}},
      {"train.grad_clip_norm",
       {[](RunConfig& c, auto k, auto v) { c.grad_clip_norm = to_double(k, v); },
        [](const RunConfig& c) { return fmt(c.grad_clip_norm); }}},
      {"seed", {[](RunConfig& c, auto k, auto v) { c.seed = to_u64(k, v); }, [](const RunConfig& c) { return std::to_string(c.seed); }}},
      {"output.dir", {[](RunConfig& c, auto, auto v) { c.output_dir = v; }, [](const RunConfig& c) { return c.output_dir; }}},
  };
  return table;
}

}  // namespace

std::array<double, 3> parse_ratios(std::string_view text) {
  std::array<double, 3> out{};
  std::size_t i = 0;
  while (true) {
    auto comma = text.find(',');
    auto part = trim(text.substr(0, comma));
    if (i >= 3) throw UsageError("split ratios need exactly three values");
    out[i++] = to_double("data.split", part);
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  if (i != 3) throw UsageError("split ratios need exactly three values");
  for (double r : out) {
    if (!(r > 0.0)) throw UsageError("split ratios must be positive");
  }
  if (std::abs(out[0] + out[1] + out[2] - 1.0) > 1e-9) throw UsageError("split ratios must sum to 1");
  return out;
}

void RunConfig::set(std::string_view key, std::string_view value) {
  key = trim(key);
  value = trim(value);
  for (const auto& [name, field] : fields()) {
    if (name == key) {
      field.set(*this, key, value);
      return;
    }
  }
  throw UsageError("unknown config key '" + std::string(key) + "'");
}

std::string RunConfig::resolved() const {
  std::ostringstream out;
  for (const auto& [name, field] : fields()) out << name << '=' << field.get(*this) << '\n';
  return out.str();
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.lr = lr;
  t.max_epochs = max_epochs;
  t.patience = patience;
  t.batch_size = batch_size;
  t.grad_clip_norm = grad_clip_norm;
  t.seed = seed;
  t.strategy = strategy;
  t.validate();
  return t;
}

ModelConfig RunConfig::model_config(int embed, int slots) const {
  ModelConfig m;
  m.l1 = l1;
  m.l2 = l2;
  m.embed_dim = embed;
  m.tod_dim = tod_dim;
  m.dow_dim = dow_dim;
  m.hidden_dim = hidden_dim;
  m.num_blocks = num_blocks;
  m.use_graph = use_graph;
  m.steps_per_day = slots;
  m.validate();
  return m;
}

RunConfig RunConfig::parse(std::string_view text) {
  RunConfig c;
  std::size_t line_no = 0;
  while (!text.empty()) {
    auto nl = text.find('\n');
    auto line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw UsageError("config line " + std::to_string(line_no) + ": expected key=value");
    }
    c.set(line.substr(0, eq), line.substr(eq + 1));
  }
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw UsageError("config file " + path.string() + " does not exist");
  return parse(read_file(path));
}

}  // namespace stpca
