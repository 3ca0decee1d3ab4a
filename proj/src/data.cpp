#include "brainage/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace brainage {

namespace {

constexpr std::uint64_t kShapeStream = 0;
constexpr std::uint64_t kLifespanStream = 1;
constexpr std::uint64_t kSeverityStreamBase = 100;
constexpr std::uint64_t kSplitStream = 7;

// The age->feature map is laid out over the full lifespan range regardless of
// the sampled range, so cohorts drawn from narrower ranges share one map.
constexpr double kMapAgeLo = 8.0;
constexpr double kMapAgeHi = 95.0;

// Lifespan cohorts (count, mean, sd, lo, hi) for the skewed age option.
struct Cohort {
  double count, mean, sd, lo, hi;
};
constexpr Cohort kCohorts[] = {
    {4132, 67.5, 10.8, 18, 95},  // NACC
    {1432, 27.9, 20.7, 8, 94},   // OASIS
    {1101, 37.6, 15.4, 18, 80},  // ICBM
    {536, 48.8, 16.5, 20, 86},   // IXI
    {176, 26.1, 7.0, 18, 56},    // ABIDE
};

double draw_age(const SynthConfig& c, Rng& rng) {
  double age = 0.0;
  if (c.distribution == AgeDistribution::LifespanMixture) {
    double total = 0.0;
    for (const Cohort& k : kCohorts) total += k.count;
    double pick = rng.uniform() * total;
    const Cohort* cohort = &kCohorts[0];
    for (const Cohort& k : kCohorts) {
      cohort = &k;
      if (pick < k.count) break;
      pick -= k.count;
    }
    const double lo = std::max(c.age_lo, cohort->lo), hi = std::min(c.age_hi, cohort->hi);
    age = rng.uniform(c.age_lo, c.age_hi);
    for (int attempt = 0; attempt < 64 && lo < hi; ++attempt) {
      const double a = cohort->mean + cohort->sd * rng.normal();
      if (a >= lo && a <= hi) {
        age = a;
        break;
      }
    }
  } else {
    age = rng.uniform(c.age_lo, c.age_hi);
  }
  // Most ages are whole years; a fraction keep their fractional part.
  if (rng.uniform() >= c.non_integer_fraction) {
    const double lo = std::ceil(c.age_lo), hi = std::floor(c.age_hi);
    if (lo <= hi) age = std::clamp(std::round(age), lo, hi);
  }
  return age;
}

RealVector make_features(const SynthConfig& c, const std::vector<SignalShape>& shapes, double brain_age,
                         Rng& rng) {
  RealVector f(c.d);
  for (std::size_t j = 0; j < c.d; ++j) {
    const double noise = (j < shapes.size() ? c.noise_sigma : c.nuisance_sigma) * rng.normal();
    f[j] = (j < shapes.size() ? shapes[j](brain_age) : 0.0) + noise;
  }
  return f;
}

void check_group_label(const std::string& g) {
  if (g.find_first_of(",\n\r\"") != std::string::npos) {
    throw ConfigError("dataset group label '" + g + "' contains a comma, quote or newline");
  }
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

double parse_number(std::string_view field, std::size_t line_no, std::size_t column) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(v)) {
    throw ConfigError("line " + std::to_string(line_no) + ", column " + std::to_string(column + 1) +
                      ": not a finite number: '" + std::string(field) + "'");
  }
  return v;
}

}  // namespace

void SynthConfig::validate() const {
  if (!(age_lo < age_hi)) throw InvalidParameter("synth: age_lo must be < age_hi");
  if (d == 0) throw InvalidParameter("synth: d must be positive");
  if (signal_dims > d) throw InvalidParameter("synth: signal_dims must be <= d");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw InvalidParameter("synth: noise_sigma must be >= 0");
  if (!(nuisance_sigma >= 0.0) || !std::isfinite(nuisance_sigma)) {
    throw InvalidParameter("synth: nuisance_sigma must be >= 0");
  }
  if (!(non_integer_fraction >= 0.0 && non_integer_fraction <= 1.0)) {
    throw InvalidParameter("synth: non_integer_fraction must lie in [0, 1]");
  }
}

SeverityConfig SeverityConfig::defaults() {
  SeverityConfig c;
  c.groups = {{"HC", 200, 0.0}, {"HC-MCI", 200, 1.0}, {"MCIs", 200, 2.0}, {"MCI-AD", 200, 4.0}, {"AD", 200, 6.0}};
  c.base.age_lo = 55.0;
  c.base.age_hi = 85.0;
  c.base.seed = 1000;
  return c;
}

void SeverityConfig::validate() const {
  base.validate();
  if (groups.empty()) throw InvalidParameter("severity: at least one group is required");
  for (std::size_t g = 0; g < groups.size(); ++g) {
    check_group_label(groups[g].label);
    if (groups[g].label.empty()) throw InvalidParameter("severity: group labels must be nonempty");
    if (g > 0 && groups[g].gap_offset < groups[g - 1].gap_offset) {
      throw InvalidParameter("severity: gap offsets must be nondecreasing with severity rank");
    }
  }
}

double SignalShape::operator()(double age) const {
  return offset + amplitude * std::tanh((age - center) / width) + slope * (age - mid);
}

std::vector<SignalShape> signal_shapes(const SynthConfig& c) {
  Rng rng(c.shape_seed, kShapeStream);
  const double span = kMapAgeHi - kMapAgeLo;
  const double mid = 0.5 * (kMapAgeLo + kMapAgeHi);
  std::vector<SignalShape> shapes(c.signal_dims);
  for (SignalShape& s : shapes) {
    const double direction = rng.uniform() < 0.5 ? -1.0 : 1.0;
    s.center = rng.uniform(kMapAgeLo + 0.15 * span, kMapAgeHi - 0.15 * span);
    s.width = rng.uniform(0.05, 0.15) * span;
    s.amplitude = direction * rng.uniform(0.5, 1.0);
    // The linear part keeps the map strictly monotone where tanh saturates.
    s.slope = direction * rng.uniform(0.1 / 3, 0.1) / span;
    s.offset = rng.uniform(-0.5, 0.5);
    s.mid = mid;
  }
  return shapes;
}

Dataset generate_lifespan(const SynthConfig& config) {
  config.validate();
  const auto shapes = signal_shapes(config);
  Rng rng(config.seed, kLifespanStream);
  Dataset data;
  data.reserve(config.n);
  for (std::size_t i = 0; i < config.n; ++i) {
    Sample s;
    s.chron_age = draw_age(config, rng);
    s.brain_age = s.chron_age;
    s.features = make_features(config, shapes, s.brain_age, rng);
    data.push_back(std::move(s));
  }
  return data;
}

Dataset generate_severity(const SeverityConfig& config) {
  config.validate();
  const auto shapes = signal_shapes(config.base);
  Dataset data;
  for (std::size_t g = 0; g < config.groups.size(); ++g) {
    const SeverityGroup& group = config.groups[g];
    Rng rng(config.base.seed, kSeverityStreamBase + g);
    for (std::size_t i = 0; i < group.count; ++i) {
      Sample s;
      s.chron_age = draw_age(config.base, rng);
      s.brain_age = s.chron_age + group.gap_offset;
      s.features = make_features(config.base, shapes, s.brain_age, rng);
      s.group = group.label;
      data.push_back(std::move(s));
    }
  }
  return data;
}

int round_age(double age) {
  return static_cast<int>(std::round(age));  // std::round rounds halves away from zero
}

int age_bin(double age) {
  return static_cast<int>(std::floor(age / 4.0));
}

Split stratified_split(const Dataset& data, std::array<double, 3> fractions, std::uint64_t seed) {
  if (data.empty()) throw InvalidParameter("stratified_split: empty dataset");
  double total = 0.0;
  for (double f : fractions) {
    if (!(f >= 0.0)) throw InvalidParameter("stratified_split: fractions must be nonnegative");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw InvalidParameter("stratified_split: fractions must sum to 1");

  std::map<int, std::vector<std::size_t>> bins;
  for (std::size_t i = 0; i < data.size(); ++i) bins[age_bin(data[i].chron_age)].push_back(i);

  Rng rng(seed, kSplitStream);
  Split split;
  Dataset* parts[3] = {&split.train, &split.val, &split.test};
  for (auto& [bin, idx] : bins) {
    shuffle(idx, rng);
    // Largest-remainder apportionment; ties favour train, then val.
    const double n = static_cast<double>(idx.size());
    std::array<std::size_t, 3> counts{};
    std::array<double, 3> rem{};
    std::size_t assigned = 0;
    for (int p = 0; p < 3; ++p) {
      const double exact = fractions[p] * n;
      counts[p] = static_cast<std::size_t>(std::floor(exact + 1e-9));
      rem[p] = exact - static_cast<double>(counts[p]);
      assigned += counts[p];
    }
    while (assigned < idx.size()) {
      int best = 0;
      for (int p = 1; p < 3; ++p) {
        if (rem[p] > rem[best]) best = p;
      }
      ++counts[best];
      rem[best] = -1.0;
      ++assigned;
    }
    std::size_t pos = 0;
    for (int p = 0; p < 3; ++p) {
      for (std::size_t c = 0; c < counts[p]; ++c) parts[p]->push_back(data[idx[pos++]]);
    }
  }
  return split;
}

Dataset stratified_oversample(const Dataset& data, OversampleMode mode, Rng& rng) {
  if (data.empty()) return {};
  std::map<int, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double age = data[i].chron_age;
    strata[mode == OversampleMode::ByClass ? round_age(age) : age_bin(age)].push_back(i);
  }
  std::size_t largest = 0;
  for (const auto& [key, idx] : strata) largest = std::max(largest, idx.size());

  std::vector<std::size_t> picks;
  picks.reserve(largest * strata.size());
  for (const auto& [key, idx] : strata) {
    picks.insert(picks.end(), idx.begin(), idx.end());
    for (std::size_t extra = idx.size(); extra < largest; ++extra) picks.push_back(idx[rng.below(idx.size())]);
  }
  shuffle(picks, rng);
  Dataset out;
  out.reserve(picks.size());
  for (std::size_t i : picks) out.push_back(data[i]);
  return out;
}

ClassedDataset round_to_classes(const Dataset& data) {
  if (data.empty()) throw InvalidParameter("round_to_classes: empty dataset");
  ClassedDataset out;
  out.data = data;
  int lo = round_age(data.front().chron_age), hi = lo;
  for (const Sample& s : data) {
    lo = std::min(lo, round_age(s.chron_age));
    hi = std::max(hi, round_age(s.chron_age));
  }
  for (int a = lo; a <= hi; ++a) out.class_ages.push_back(static_cast<double>(a));
  out.labels = class_labels(data, out.class_ages);
  return out;
}

std::vector<int> class_labels(const Dataset& data, std::span<const double> class_ages) {
  if (class_ages.empty()) throw ContractViolation("class_labels: empty class set");
  const int lo = round_age(class_ages.front());
  const int last = static_cast<int>(class_ages.size()) - 1;
  std::vector<int> labels(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) labels[i] = std::clamp(round_age(data[i].chron_age) - lo, 0, last);
  return labels;
}

Matrix feature_matrix(const Dataset& data) {
  if (data.empty()) return {};
  Matrix m(data.size(), data.front().features.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data[i].features.size() != m.cols()) throw ContractViolation("feature_matrix: ragged feature vectors");
    std::copy(data[i].features.begin(), data[i].features.end(), m.row(i).begin());
  }
  return m;
}

RealVector ages_of(const Dataset& data) {
  RealVector ages(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) ages[i] = data[i].chron_age;
  return ages;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

void write_csv(std::ostream& out, const Dataset& data) {
  const std::size_t d = data.empty() ? 0 : data.front().features.size();
  out << "age,group";
  for (std::size_t j = 0; j < d; ++j) out << ",f" << j;
  out << '\n';
  for (const Sample& s : data) {
    if (s.features.size() != d) throw ContractViolation("write_csv: ragged feature vectors");
    check_group_label(s.group);
    out << format_double(s.chron_age) << ',' << s.group;
    for (double v : s.features) out << ',' << format_double(v);
    out << '\n';
  }
}

void write_csv_file(const std::string& path, const Dataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  write_csv(out, data);
}

Dataset read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("line 1: missing CSV header");
  const auto header = split_fields(line);
  if (header.size() < 2 || header[0] != "age" || header[1] != "group") {
    throw ConfigError("line 1: header must start with 'age,group'");
  }
  const std::size_t d = header.size() - 2;
  for (std::size_t j = 0; j < d; ++j) {
    if (header[j + 2] != "f" + std::to_string(j)) {
      throw ConfigError("line 1: expected column 'f" + std::to_string(j) + "', got '" + std::string(header[j + 2]) + "'");
    }
  }
  Dataset data;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                        " fields, got " + std::to_string(fields.size()));
    }
    Sample s;
    s.chron_age = parse_number(fields[0], line_no, 0);
    s.brain_age = s.chron_age;
    s.group = std::string(fields[1]);
    s.features.reserve(d);
    for (std::size_t j = 0; j < d; ++j) s.features.push_back(parse_number(fields[j + 2], line_no, j + 2));
    data.push_back(std::move(s));
  }
  return data;
}

Dataset read_csv_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  return read_csv(in);
}

}  // namespace brainage
