#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "brainage/data.hpp"
#include "brainage/metrics.hpp"

using namespace brainage;

namespace {

SynthConfig small_config(std::size_t n = 1000) {
  SynthConfig c;
  c.n = n;
  return c;
}

std::map<int, std::size_t> class_counts(const Dataset& d) {
  std::map<int, std::size_t> m;
  for (const Sample& s : d) ++m[round_age(s.chron_age)];
  return m;
}

Dataset toy(const std::vector<double>& ages) {
  Dataset d;
  for (double a : ages) d.push_back({{a, -a}, a, a, ""});
  return d;
}

}  // namespace

TEST(SynthConfig, Validation) {
  SynthConfig c;
  EXPECT_NO_THROW(c.validate());
  c.age_lo = 95;
  EXPECT_THROW(c.validate(), InvalidParameter);
  c = SynthConfig{};
  c.signal_dims = 33;
  EXPECT_THROW(c.validate(), InvalidParameter);
  c = SynthConfig{};
  c.noise_sigma = -0.1;
  EXPECT_THROW(c.validate(), InvalidParameter);
}

TEST(GenerateLifespan, AgesInRangeAndShape) {
  const Dataset d = generate_lifespan(small_config());
  ASSERT_EQ(d.size(), 1000u);
  std::size_t non_integer = 0;
  for (const Sample& s : d) {
    EXPECT_GE(s.chron_age, 8.0);
    EXPECT_LE(s.chron_age, 95.0);
    EXPECT_EQ(s.features.size(), 32u);
    EXPECT_EQ(s.brain_age, s.chron_age);
    EXPECT_TRUE(s.group.empty());
    if (s.chron_age != std::round(s.chron_age)) ++non_integer;
  }
  EXPECT_NEAR(non_integer / 1000.0, 0.1, 0.03);
}

TEST(GenerateLifespan, Deterministic) {
  EXPECT_EQ(generate_lifespan(small_config()), generate_lifespan(small_config()));
  SynthConfig other = small_config();
  other.seed = 1;
  EXPECT_NE(generate_lifespan(small_config()), generate_lifespan(other));
}

TEST(GenerateLifespan, SignalDimensionTracksAge) {
  const Dataset d = generate_lifespan(small_config());
  RealVector ages, f0;
  for (const Sample& s : d) {
    ages.push_back(s.chron_age);
    f0.push_back(s.features[0]);
  }
  EXPECT_GT(std::abs(pearson_corr(ages, f0)), 0.8);
}

TEST(GenerateLifespan, NoiselessSignalIsExactMonotoneFunctionOfAge) {
  SynthConfig c = small_config(400);
  c.noise_sigma = 0.0;
  c.non_integer_fraction = 0.0;
  const Dataset d = generate_lifespan(c);
  const auto shapes = signal_shapes(c);
  ASSERT_EQ(shapes.size(), c.signal_dims);
  for (const Sample& s : d) {
    for (std::size_t j = 0; j < shapes.size(); ++j) EXPECT_EQ(s.features[j], shapes[j](s.chron_age));
  }
  // Each map is strictly monotone, so L1 centroid distance from the youngest
  // class strictly increases with age.
  std::map<int, RealVector> by_age;
  for (const Sample& s : d) by_age.emplace(round_age(s.chron_age), RealVector(s.features.begin(), s.features.begin() + 8));
  const RealVector first = by_age.begin()->second;
  double prev = -1.0;
  for (const auto& [age, f] : by_age) {
    double dist = 0.0;
    for (std::size_t j = 0; j < 8; ++j) dist += std::abs(f[j] - first[j]);
    EXPECT_GT(dist, prev) << age;
    prev = dist;
  }
}

TEST(SignalShapes, IndependentOfSampledAgeRange) {
  SynthConfig narrow = small_config();
  narrow.age_lo = 55;
  narrow.age_hi = 85;
  const auto a = signal_shapes(small_config()), b = signal_shapes(narrow);
  for (std::size_t j = 0; j < a.size(); ++j) EXPECT_EQ(a[j](60.0), b[j](60.0));
}

TEST(GenerateLifespan, MixtureStaysInRange) {
  SynthConfig c = small_config(2000);
  c.distribution = AgeDistribution::LifespanMixture;
  const Dataset d = generate_lifespan(c);
  double mean = 0.0;
  for (const Sample& s : d) {
    EXPECT_GE(s.chron_age, 8.0);
    EXPECT_LE(s.chron_age, 95.0);
    mean += s.chron_age / d.size();
  }
  EXPECT_GT(mean, 45.0);  // dominated by the older cohort
}

TEST(GenerateSeverity, OffsetsAreExactInLatentGap) {
  const SeverityConfig c = SeverityConfig::defaults();
  const Dataset d = generate_severity(c);
  ASSERT_EQ(d.size(), 1000u);
  std::map<std::string, std::pair<double, std::size_t>> gaps;
  for (const Sample& s : d) {
    EXPECT_GE(s.chron_age, 55.0);
    EXPECT_LE(s.chron_age, 85.0);
    auto& [sum, n] = gaps[s.group];
    sum += s.brain_age - s.chron_age;
    ++n;
  }
  for (const SeverityGroup& g : c.groups) {
    EXPECT_EQ(gaps[g.label].second, 200u);
    EXPECT_NEAR(gaps[g.label].first / 200.0, g.gap_offset, 1e-12) << g.label;
  }
}

TEST(GenerateSeverity, NullOffsetsGiveIndistinguishableGroups) {
  SeverityConfig c = SeverityConfig::defaults();
  for (SeverityGroup& g : c.groups) g.gap_offset = 0.0;
  const Dataset d = generate_severity(c);
  for (const Sample& s : d) EXPECT_EQ(s.brain_age, s.chron_age);
}

TEST(GenerateSeverity, DefaultsAndValidation) {
  const SeverityConfig c = SeverityConfig::defaults();
  ASSERT_EQ(c.groups.size(), 5u);
  EXPECT_EQ(c.groups.front().label, "HC");
  EXPECT_EQ(c.groups.back().label, "AD");
  SeverityConfig bad = c;
  std::swap(bad.groups[0].gap_offset, bad.groups[4].gap_offset);
  EXPECT_THROW(bad.validate(), InvalidParameter);
}

TEST(RoundToClasses, HalfAwayFromZero) {
  EXPECT_EQ(round_age(53.4), 53);
  EXPECT_EQ(round_age(53.5), 54);
  EXPECT_EQ(round_age(60.0), 60);
  const ClassedDataset c = round_to_classes(toy({20.4, 23.5, 22}));
  EXPECT_EQ(c.class_ages, (RealVector{20, 21, 22, 23, 24}));
  EXPECT_EQ(c.labels, (std::vector<int>{0, 4, 2}));
  EXPECT_EQ(class_labels(toy({10, 30}), c.class_ages), (std::vector<int>{0, 4}));
}

TEST(AgeBin, FourYearBins) {
  EXPECT_EQ(age_bin(8.0), 2);
  EXPECT_EQ(age_bin(11.99), 2);
  EXPECT_EQ(age_bin(12.0), 3);
  EXPECT_EQ(age_bin(95.0), 23);
}

TEST(StratifiedSplit, DegenerateFractions) {
  const Dataset d = generate_lifespan(small_config(200));
  const Split s = stratified_split(d, {1.0, 0.0, 0.0}, 3);
  EXPECT_TRUE(s.val.empty());
  EXPECT_TRUE(s.test.empty());
  ASSERT_EQ(s.train.size(), d.size());
  EXPECT_TRUE(std::is_permutation(s.train.begin(), s.train.end(), d.begin(),
                                  [](const Sample& a, const Sample& b) { return a == b; }));
  EXPECT_THROW(stratified_split(Dataset{}, {0.7, 0.15, 0.15}, 0), InvalidParameter);
}

TEST(StratifiedSplit, PerBinApportioning) {
  const Dataset d = toy({20, 20.5, 21, 21.5, 22, 22.2, 22.4, 22.6, 22.8, 23});  // one 4-year bin
  const Split s = stratified_split(d, {0.8, 0.1, 0.1}, 0);
  EXPECT_EQ(s.train.size(), 8u);
  EXPECT_EQ(s.val.size(), 1u);
  EXPECT_EQ(s.test.size(), 1u);
}

TEST(StratifiedSplitProperty, EverySampleExactlyOnceAndDeterministic) {
  for (std::uint64_t seed : {0u, 1u, 2u}) {
    const Dataset d = generate_lifespan(small_config(500));
    const Split a = stratified_split(d, {0.7, 0.15, 0.15}, seed);
    const Split b = stratified_split(d, {0.7, 0.15, 0.15}, seed);
    EXPECT_EQ(a.train, b.train);
    EXPECT_EQ(a.test, b.test);
    Dataset all = a.train;
    all.insert(all.end(), a.val.begin(), a.val.end());
    all.insert(all.end(), a.test.begin(), a.test.end());
    ASSERT_EQ(all.size(), d.size());
    EXPECT_TRUE(std::is_permutation(all.begin(), all.end(), d.begin()));
  }
}

TEST(StratifiedOversample, EqualizesToLargestStratum) {
  Rng rng(1, 0);
  const Dataset out = stratified_oversample(toy({10, 20, 20.2, 19.9}), OversampleMode::ByClass, rng);
  const auto counts = class_counts(out);
  EXPECT_EQ(counts.at(10), 3u);
  EXPECT_EQ(counts.at(20), 3u);
}

TEST(StratifiedOversample, BalancedInputIsPermuted) {
  Rng rng(2, 0);
  const Dataset in = toy({10, 11, 12, 13, 14});
  const Dataset out = stratified_oversample(in, OversampleMode::ByClass, rng);
  EXPECT_TRUE(std::is_permutation(out.begin(), out.end(), in.begin()));
}

TEST(StratifiedOversampleProperty, AllStrataEqualAndOriginalsKept) {
  Rng rng(3, 0);
  for (int trial = 0; trial < 10; ++trial) {
    SynthConfig c = small_config(150);
    c.seed = trial;
    c.distribution = AgeDistribution::LifespanMixture;
    const Dataset in = generate_lifespan(c);
    for (OversampleMode mode : {OversampleMode::ByClass, OversampleMode::ByAgeBin}) {
      const Dataset out = stratified_oversample(in, mode, rng);
      std::map<int, std::size_t> counts;
      for (const Sample& s : out) ++counts[mode == OversampleMode::ByClass ? round_age(s.chron_age) : age_bin(s.chron_age)];
      std::set<std::size_t> distinct;
      for (const auto& [k, n] : counts) distinct.insert(n);
      EXPECT_EQ(distinct.size(), 1u);
      for (const Sample& s : in) EXPECT_NE(std::find(out.begin(), out.end(), s), out.end());
    }
  }
}

TEST(Csv, RoundTripIsExact) {
  Dataset d = generate_lifespan(small_config(50));
  d[3].group = "MCI-AD";
  std::stringstream ss;
  write_csv(ss, d);
  const std::string text = ss.str();
  EXPECT_EQ(text.substr(0, 16), "age,group,f0,f1,");
  EXPECT_EQ(text.find('\r'), std::string::npos);
  const Dataset back = read_csv(ss);
  ASSERT_EQ(back.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_EQ(back[i].chron_age, d[i].chron_age);
    EXPECT_EQ(back[i].features, d[i].features);
    EXPECT_EQ(back[i].group, d[i].group);
  }
}

TEST(Csv, RejectsMalformedInput) {
  const auto parse = [](const std::string& s) {
    std::istringstream in(s);
    return read_csv(in);
  };
  EXPECT_THROW(parse("age,grp,f0\n1,,2\n"), ConfigError);
  EXPECT_THROW(parse("age,group,f0,f1\n1,,2\n"), ConfigError);
  EXPECT_THROW(parse("age,group,f0\n1,,abc\n"), ConfigError);
  try {
    parse("age,group,f0\n1,,2\n3,,4,5\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(FormatDouble, ShortestRoundTrip) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(53.0), "53");
  const double x = 1.0 / 3.0;
  EXPECT_EQ(std::stod(format_double(x)), x);
}
