#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "brainage/numerics.hpp"
#include "brainage/rng.hpp"

namespace brainage {

struct Sample {
  RealVector features;
  double chron_age = 0.0;
  double brain_age = 0.0;  // latent; equals chron_age unless a severity offset applies
  std::string group;       // empty for lifespan data

  friend bool operator==(const Sample&, const Sample&) = default;
};

using Dataset = std::vector<Sample>;

enum class AgeDistribution { Uniform, LifespanMixture };

struct SynthConfig {
  std::size_t n = 5000;
  std::size_t d = 32;
  double age_lo = 8.0;
  double age_hi = 95.0;
  double noise_sigma = 0.1;     // on signal dimensions
  double nuisance_sigma = 0.5;  // on the d - signal_dims pure-noise dimensions
  std::size_t signal_dims = 8;
  double non_integer_fraction = 0.1;
  AgeDistribution distribution = AgeDistribution::Uniform;
  std::uint64_t seed = 0;        // drives sampling
  std::uint64_t shape_seed = 7;  // drives the age->feature map; keep fixed across datasets

  void validate() const;
};

struct SeverityGroup {
  std::string label;
  std::size_t count = 0;
  double gap_offset = 0.0;  // years of accelerated ageing
};

struct SeverityConfig {
  std::vector<SeverityGroup> groups;
  SynthConfig base;  // age range, feature map, noise and seed; base.n is ignored

  /// Five groups HC < HC-MCI < MCIs < MCI-AD < AD with offsets {0,1,2,4,6},
  /// 200 subjects each, ages 55-85.
  static SeverityConfig defaults();
  void validate() const;
};

/// Seeded monotone map from latent age to one signal feature:
/// offset + amplitude * tanh((age - center) / width) + slope * (age - mid).
struct SignalShape {
  double offset = 0.0;
  double amplitude = 0.0;
  double center = 0.0;
  double width = 1.0;
  double slope = 0.0;
  double mid = 0.0;

  double operator()(double age) const;
};

std::vector<SignalShape> signal_shapes(const SynthConfig& config);

Dataset generate_lifespan(const SynthConfig& config);
Dataset generate_severity(const SeverityConfig& config);

struct Split {
  Dataset train, val, test;
};
/// Shuffles each 4-year age bin and apportions it by largest remainder.
Split stratified_split(const Dataset& data, std::array<double, 3> fractions, std::uint64_t seed);

enum class OversampleMode { ByClass, ByAgeBin };

/// Tops every stratum up to the largest stratum's count by drawing with
/// replacement; keeps every original at least once; returns a shuffled set.
Dataset stratified_oversample(const Dataset& data, OversampleMode mode, Rng& rng);

/// Nearest integer, halves away from zero.
int round_age(double age);
/// 4-year stratification bin (8-12 -> 2, 12-16 -> 3, ...).
int age_bin(double age);

struct ClassedDataset {
  Dataset data;
  std::vector<int> labels;  // index into class_ages
  RealVector class_ages;    // every integer in [min, max] of the rounded ages
};
ClassedDataset round_to_classes(const Dataset& data);
/// Labels for `data` against an existing class set; out-of-range ages clamp to the ends.
std::vector<int> class_labels(const Dataset& data, std::span<const double> class_ages);

Matrix feature_matrix(const Dataset& data);
RealVector ages_of(const Dataset& data);

/// CSV: header `age,group,f0,...,f{d-1}`, LF endings, shortest round-trip decimals.
void write_csv(std::ostream& out, const Dataset& data);
void write_csv_file(const std::string& path, const Dataset& data);
/// Throws ConfigError (with line number) on a bad header, ragged row or bad number.
Dataset read_csv(std::istream& in);
Dataset read_csv_file(const std::string& path);

std::string format_double(double v);

}  // namespace brainage
