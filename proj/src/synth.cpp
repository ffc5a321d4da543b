#include "stpca/synth.hpp"

#include "stpca/io.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

namespace stpca {

namespace {

constexpr double kArCoefficient = 0.8;
constexpr long long kStartDay = 19723;  // 2024-01-01, a Monday

Mat simulate(const SynthSpec& spec, const std::vector<std::size_t>& roles, int start_dow, std::mt19937_64& rng) {
  const auto t = static_cast<std::size_t>(spec.steps_per_day);
  const std::size_t steps = spec.days * t;
  Mat values(static_cast<Eigen::Index>(steps), static_cast<Eigen::Index>(spec.n_nodes));
  std::normal_distribution<double> normal(0.0, 1.0);
  const double stationary = spec.noise_std / std::sqrt(1.0 - kArCoefficient * kArCoefficient);
  for (std::size_t node = 0; node < spec.n_nodes; ++node) {
    double e = stationary * normal(rng);
    for (std::size_t s = 0; s < steps; ++s) {
      if (s > 0) e = kArCoefficient * e + spec.noise_std * normal(rng);
      const int slot = static_cast<int>(s % t);
      const int dow = static_cast<int>((static_cast<std::size_t>(start_dow) + s / t) % 7);
      const double base = role_profile(roles[node], spec.n_roles, slot, spec.steps_per_day) * weekday_factor(dow);
      values(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(node)) = std::max(0.0, base + e);
    }
  }
  return values;
}

TrafficSeries make_series(const SynthSpec& spec, Mat values, int start_dow, std::size_t day_offset, std::string name) {
  TrafficSeries s;
  s.start_minute = (kStartDay + static_cast<long long>(day_offset)) * 1440;
  s.values = std::move(values);
  s.steps_per_day = spec.steps_per_day;
  s.interval_minutes = 1440 / spec.steps_per_day;
  s.start_slot = 0;
  s.start_dow = start_dow;
  s.name = std::move(name);
  for (std::size_t i = 0; i < spec.n_nodes; ++i) s.node_ids.push_back("node_" + std::to_string(i));
  return s;
}

}  // namespace

void SynthSpec::validate() const {
  if (n_nodes < 1 || n_roles < 1 || days < 1 || steps_per_day < 1) throw UsageError("synth: sizes must be positive");
  if (n_roles > n_nodes) throw UsageError("synth: more roles than nodes");
  if (1440 % steps_per_day != 0) throw UsageError("synth: steps_per_day must divide 1440");
  if (!(shift_fraction >= 0.0 && shift_fraction <= 1.0)) throw UsageError("synth: shift fraction must lie in [0, 1]");
  if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) throw UsageError("synth: noise std must be non-negative");
}

double role_profile(std::size_t role, std::size_t n_roles, int slot, int steps_per_day) {
  using std::numbers::pi;
  const double phi = 2.0 * pi * static_cast<double>(role) / static_cast<double>(n_roles);
  const double x = static_cast<double>(slot) / static_cast<double>(steps_per_day);
  return 50.0 + 30.0 * std::sin(2.0 * pi * x + phi) + 10.0 * std::sin(4.0 * pi * x + 2.0 * phi);
}

double weekday_factor(int dow) { return dow >= 5 ? 0.7 : 1.0; }

SynthResult generate(const SynthSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  SynthResult r;
  r.roles_train.resize(spec.n_nodes);
  for (std::size_t i = 0; i < spec.n_nodes; ++i) r.roles_train[i] = i % spec.n_roles;

  const int train_dow = 0;
  r.train = make_series(spec, simulate(spec, r.roles_train, train_dow, rng), train_dow, 0, "synth_train");

  r.roles_shifted = r.roles_train;
  const auto moved = static_cast<std::size_t>(std::ceil(spec.shift_fraction * static_cast<double>(spec.n_nodes)));
  std::vector<std::size_t> order(spec.n_nodes);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  if (spec.n_roles > 1) {
    std::uniform_int_distribution<std::size_t> offset(1, spec.n_roles - 1);
    for (std::size_t k = 0; k < std::min(moved, spec.n_nodes); ++k) {
      const std::size_t node = order[k];
      r.roles_shifted[node] = (r.roles_train[node] + offset(rng)) % spec.n_roles;
    }
  }

  const int shifted_dow = static_cast<int>(spec.days % 7);
  r.shifted = make_series(spec, simulate(spec, r.roles_shifted, shifted_dow, rng), shifted_dow, spec.days,
                           "synth_shifted");
  return r;
}

void write_synth(const SynthResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_series_csv(result.train, dir / "train.csv");
  write_series_csv(result.shifted, dir / "shifted.csv");
  std::ostringstream roles;
  roles << "node_id,role_train,role_shifted\n";
  for (std::size_t i = 0; i < result.roles_train.size(); ++i) {
    roles << result.train.node_ids[i] << ',' << result.roles_train[i] << ',' << result.roles_shifted[i] << '\n';
  }
  write_file_atomic(dir / "roles.csv", roles.str());
}

}  // namespace stpca
