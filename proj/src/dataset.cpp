#include "stpca/dataset.hpp"

#include "stpca/io.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <unordered_map>

namespace stpca {

namespace {

struct Timestamp {
  long long minutes = 0;  // since 1970-01-01 00:00
  int minute_of_day = 0;
  int dow = 0;  // Monday = 0
};

Timestamp parse_timestamp(const std::string& text, std::size_t line) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0;
  double sec = 0.0;
  char sep = 0;
  int n = std::sscanf(text.c_str(), "%d-%d-%d%c%d:%d:%lf", &y, &mo, &d, &sep, &h, &mi, &sec);
  if (n < 6 || (sep != 'T' && sep != ' ')) {
    throw Error("line " + std::to_string(line) + ": bad timestamp '" + text + "'");
  }
  using namespace std::chrono;
  year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h < 0 || h > 23 || mi < 0 || mi > 59) {
    throw Error("line " + std::to_string(line) + ": bad timestamp '" + text + "'");
  }
  sys_days days{ymd};
  Timestamp ts;
  ts.minute_of_day = h * 60 + mi;
  ts.minutes = static_cast<long long>(days.time_since_epoch().count()) * 1440 + ts.minute_of_day;
  ts.dow = static_cast<int>(weekday{days}.iso_encoding()) - 1;
  return ts;
}

std::string format_timestamp(long long minutes) {
  using namespace std::chrono;
  long long day_count = minutes >= 0 ? minutes / 1440 : -((-minutes + 1439) / 1440);
  int mod = static_cast<int>(minutes - day_count * 1440);
  year_month_day ymd{sys_days{days{day_count}}};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:00", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), mod / 60, mod % 60);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

}  // namespace

void TrafficSeries::validate() const {
  if (steps_per_day <= 0 || interval_minutes <= 0 || steps_per_day * interval_minutes != 1440) {
    throw Error("steps_per_day x interval_minutes must equal 1440");
  }
  if (start_slot < 0 || start_slot >= steps_per_day) throw Error("start_slot out of range");
  if (start_dow < 0 || start_dow >= 7) throw Error("start_dow out of range");
  if (total_steps() < static_cast<std::size_t>(steps_per_day)) throw Error("series holds less than one day");
  if (values.cols() == 0) throw Error("series has no nodes");
  if (node_ids.size() != num_nodes()) throw Error("node id count does not match value columns");
  if (!values.allFinite()) throw Error("non-finite reading");
  if ((values.array() < 0.0).any()) throw Error("negative reading");
  if (adjacency && (adjacency->rows() != values.cols() || adjacency->cols() != values.cols())) {
    throw Error("adjacency shape does not match node count");
  }
}

TrafficSeries ingest_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw Error(path.string() + ": empty file");
  auto header = split_csv_line(trim(line));
  if (header.size() < 2 || trim(header[0]) != "timestamp") {
    throw Error(path.string() + ": header must start with 'timestamp' followed by node ids");
  }
  TrafficSeries s;
  s.name = path.stem().string();
  for (std::size_t i = 1; i < header.size(); ++i) s.node_ids.push_back(trim(header[i]));
  const std::size_t n = s.node_ids.size();

  std::vector<double> flat;
  std::vector<Timestamp> stamps;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != n + 1) {
      throw Error("line " + std::to_string(line_no) + ": ragged row (" + std::to_string(cells.size()) +
                  " cells, expected " + std::to_string(n + 1) + ")");
    }
    stamps.push_back(parse_timestamp(trim(cells[0]), line_no));
    for (std::size_t j = 1; j <= n; ++j) {
      auto cell = trim(cells[j]);
      double v = 0.0;
      if (!cell.empty()) {
        char* end = nullptr;
        v = std::strtod(cell.c_str(), &end);
        if (end == cell.c_str() || *end != '\0') {
          throw Error("line " + std::to_string(line_no) + ": unparsable value '" + cell + "'");
        }
        if (!std::isfinite(v)) throw Error("line " + std::to_string(line_no) + ": non-finite reading");
        if (v < 0.0) throw Error("line " + std::to_string(line_no) + ": negative reading");
      }
      flat.push_back(v);
    }
  }
  if (stamps.size() < 2) throw Error(path.string() + ": less than one day of rows");

  long long interval = stamps[1].minutes - stamps[0].minutes;
  if (interval <= 0) throw Error("timestamps must be strictly increasing");
  for (std::size_t i = 1; i < stamps.size(); ++i) {
    long long delta = stamps[i].minutes - stamps[i - 1].minutes;
    if (delta <= 0) throw Error("line " + std::to_string(i + 2) + ": timestamps must be strictly increasing");
    if (delta != interval) throw Error("line " + std::to_string(i + 2) + ": non-uniform interval");
  }
  if (1440 % interval != 0) throw Error("interval of " + std::to_string(interval) + " minutes does not divide a day");

  s.interval_minutes = static_cast<int>(interval);
  s.steps_per_day = static_cast<int>(1440 / interval);
  s.start_slot = stamps[0].minute_of_day / s.interval_minutes;
  s.start_dow = stamps[0].dow;
  s.start_minute = stamps[0].minutes;
  if (stamps.size() < static_cast<std::size_t>(s.steps_per_day)) {
    throw Error(path.string() + ": less than one day of rows (" + std::to_string(stamps.size()) + " < " +
                std::to_string(s.steps_per_day) + ")");
  }
  s.values = Eigen::Map<Mat>(flat.data(), static_cast<Eigen::Index>(stamps.size()), static_cast<Eigen::Index>(n));
  s.validate();
  return s;
}

void ingest_adjacency(TrafficSeries& series, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::unordered_map<std::string, Eigen::Index> index;
  for (std::size_t i = 0; i < series.node_ids.size(); ++i) index[series.node_ids[i]] = static_cast<Eigen::Index>(i);
  const auto n = static_cast<Eigen::Index>(series.num_nodes());
  Mat adj = Mat::Zero(n, n);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || (line_no == 1 && line.rfind("src", 0) == 0)) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != 3) throw Error(path.string() + ":" + std::to_string(line_no) + ": expected src,dst,weight");
    auto src = index.find(trim(cells[0]));
    auto dst = index.find(trim(cells[1]));
    if (src == index.end() || dst == index.end()) {
      throw Error(path.string() + ":" + std::to_string(line_no) + ": unknown node id");
    }
    double w = std::stod(trim(cells[2]));
    if (!std::isfinite(w) || w < 0.0) throw Error(path.string() + ":" + std::to_string(line_no) + ": bad weight");
    adj(src->second, dst->second) = w;
  }
  series.adjacency = std::move(adj);
}

void write_series_csv(const TrafficSeries& s, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "timestamp";
  for (const auto& id : s.node_ids) out << ',' << id;
  out << '\n';
  long long base = s.start_minute;
  if (base < 0) {
    // 2024-01-01 is a Monday.
    base = 19723LL * 1440 + static_cast<long long>(s.start_dow) * 1440 +
           static_cast<long long>(s.start_slot) * s.interval_minutes;
  }
  out << std::setprecision(17);
  for (Eigen::Index t = 0; t < s.values.rows(); ++t) {
    out << format_timestamp(base + t * s.interval_minutes);
    for (Eigen::Index j = 0; j < s.values.cols(); ++j) out << ',' << s.values(t, j);
    out << '\n';
  }
  write_file_atomic(path, out.str());
}

SplitRanges split_chronological(std::size_t total, const std::array<double, 3>& ratios) {
  for (double r : ratios) {
    if (!(r > 0.0)) throw Error("split ratios must be positive");
  }
  if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9) throw Error("split ratios must sum to 1");
  auto a = static_cast<std::size_t>(std::floor(ratios[0] * static_cast<double>(total)));
  auto b = static_cast<std::size_t>(std::floor((ratios[0] + ratios[1]) * static_cast<double>(total)));
  SplitRanges s{{0, a}, {a, b}, {b, total}};
  if (s.train.empty() || s.val.empty() || s.test.empty()) throw Error("empty split");
  return s;
}

Normalizer fit_normalizer(const TrafficSeries& series, StepRange range, bool include_zeros) {
  if (range.empty() || range.end > series.total_steps()) throw Error("normalizer range is empty or out of bounds");
  auto block = series.values.middleRows(static_cast<Eigen::Index>(range.begin), static_cast<Eigen::Index>(range.size()));
  double sum = 0.0;
  std::size_t count = 0;
  for (Eigen::Index i = 0; i < block.rows(); ++i) {
    for (Eigen::Index j = 0; j < block.cols(); ++j) {
      double v = block(i, j);
      if (!include_zeros && v == 0.0) continue;
      sum += v;
      ++count;
    }
  }
  if (count == 0) throw Error("no values to fit normalizer");
  double mean = sum / static_cast<double>(count);
  double ss = 0.0;
  for (Eigen::Index i = 0; i < block.rows(); ++i) {
    for (Eigen::Index j = 0; j < block.cols(); ++j) {
      double v = block(i, j);
      if (!include_zeros && v == 0.0) continue;
      ss += (v - mean) * (v - mean);
    }
  }
  double sd = std::sqrt(ss / static_cast<double>(count));
  if (!(sd > 0.0)) throw Error("zero variance in normalizer range");
  return {mean, sd};
}

std::vector<Window> make_windows(const TrafficSeries& series, StepRange range, int l1, int l2) {
  if (l1 < 1 || l2 < 1) throw Error("window lengths must be positive");
  if (range.end > series.total_steps()) throw Error("window range out of bounds");
  const auto span = static_cast<std::size_t>(l1 + l2);
  if (range.size() < span) {
    throw Error("range of " + std::to_string(range.size()) + " steps is too short for windows of " +
                std::to_string(span));
  }
  std::vector<Window> out;
  out.reserve(range.size() - span + 1);
  for (std::size_t s = range.begin; s + span <= range.end; ++s) {
    std::size_t first_target = s + static_cast<std::size_t>(l1);
    out.push_back({s, series.slot_of(first_target), series.dow_of(first_target)});
  }
  return out;
}

StepRange day_aligned_prefix(const TrafficSeries& series, StepRange range) {
  const auto t = static_cast<std::size_t>(series.steps_per_day);
  std::size_t first = range.begin;
  while (first < range.end && series.slot_of(first) != 0) ++first;
  if (first >= range.end) return {range.begin, range.begin};
  std::size_t days = (range.end - first) / t;
  if (days == 0) return {range.begin, range.begin};
  return {range.begin, first + days * t};
}

DayTensor to_day_tensor(const TrafficSeries& series, StepRange range, const std::optional<Normalizer>& norm) {
  if (range.end > series.total_steps()) throw Error("day tensor range out of bounds");
  const auto t = static_cast<std::size_t>(series.steps_per_day);
  std::size_t first = range.begin;
  while (first < range.end && series.slot_of(first) != 0) ++first;
  std::size_t days = first < range.end ? (range.end - first) / t : 0;
  if (days == 0) throw Error("no complete day in range");

  const std::size_t n = series.num_nodes();
  DayTensor z;
  z.days = days;
  z.nodes = n;
  z.slots = t;
  z.origin = {first, first + days * t};
  z.data.resize(static_cast<Eigen::Index>(days * n), static_cast<Eigen::Index>(t));
  for (std::size_t d = 0; d < days; ++d) {
    for (std::size_t node = 0; node < n; ++node) {
      for (std::size_t k = 0; k < t; ++k) {
        double v = series.values(static_cast<Eigen::Index>(first + d * t + k), static_cast<Eigen::Index>(node));
        z.data(static_cast<Eigen::Index>(d * n + node), static_cast<Eigen::Index>(k)) = norm ? norm->apply(v) : v;
      }
    }
  }
  return z;
}

TrafficSeries slice_steps(const TrafficSeries& series, StepRange range) {
  if (range.empty() || range.end > series.total_steps()) throw Error("slice range out of bounds");
  TrafficSeries out = series;
  out.values = series.values.middleRows(static_cast<Eigen::Index>(range.begin), static_cast<Eigen::Index>(range.size()));
  out.start_slot = series.slot_of(range.begin);
  out.start_dow = series.dow_of(range.begin);
  if (series.start_minute >= 0) {
    out.start_minute = series.start_minute + static_cast<long long>(range.begin) * series.interval_minutes;
  }
  return out;
}

TrafficSeries select_nodes(const TrafficSeries& series, const std::vector<std::size_t>& nodes) {
  TrafficSeries out = series;
  out.values.resize(series.values.rows(), static_cast<Eigen::Index>(nodes.size()));
  out.node_ids.clear();
  for (std::size_t j = 0; j < nodes.size(); ++j) {
    if (nodes[j] >= series.num_nodes()) throw Error("node index out of range");
    out.values.col(static_cast<Eigen::Index>(j)) = series.values.col(static_cast<Eigen::Index>(nodes[j]));
    out.node_ids.push_back(series.node_ids[nodes[j]]);
  }
  out.adjacency.reset();
  return out;
}

}  // namespace stpca
