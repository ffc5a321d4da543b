#pragma once

#include "stpca/dataset.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace stpca {

/// Seeded synthetic traffic built from a small library of periodic node
/// roles. The shifted series reassigns the roles of a subset of nodes.
struct SynthSpec {
  std::size_t n_nodes = 40;
  std::size_t n_roles = 4;
  std::size_t days = 28;
  int steps_per_day = 48;
  double shift_fraction = 0.5;
  double noise_std = 2.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SynthResult {
  TrafficSeries train;
  TrafficSeries shifted;  // starts where `train` ends
  std::vector<std::size_t> roles_train;
  std::vector<std::size_t> roles_shifted;
};

/// Noiseless role profile: 50 + 30 sin(2 pi t/T + phi) + 10 sin(4 pi t/T + 2 phi), phi = 2 pi r/R.
double role_profile(std::size_t role, std::size_t n_roles, int slot, int steps_per_day);

/// 1.0 Monday-Friday, 0.7 on weekends (dow 5, 6).
double weekday_factor(int dow);

SynthResult generate(const SynthSpec& spec);

/// Writes train.csv, shifted.csv and roles.csv into `dir`.
void write_synth(const SynthResult& result, const std::filesystem::path& dir);

}  // namespace stpca
