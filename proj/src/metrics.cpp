#include "brainage/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "brainage/data.hpp"

namespace brainage {

namespace {

void check_pair(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() != b.size()) throw ContractViolation(std::string(what) + ": length mismatch");
}

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Sample variance (n - 1 denominator).
double sample_variance(std::span<const double> v, double mean) {
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return s / static_cast<double>(v.size() - 1);
}

double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIterations = 500;
  constexpr double kEps = 1e-12;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIterations; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double mae(std::span<const double> pred_ages, std::span<const double> true_ages) {
  check_pair(pred_ages, true_ages, "mae");
  if (pred_ages.empty()) throw InvalidParameter("mae: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < pred_ages.size(); ++i) s += std::abs(pred_ages[i] - true_ages[i]);
  return s / static_cast<double>(pred_ages.size());
}

double pearson_corr(std::span<const double> a, std::span<const double> b) {
  check_pair(a, b, "pearson_corr");
  if (a.size() < 2) throw DegenerateInput("pearson_corr: need at least two points");
  const double ma = mean_of(a), mb = mean_of(b);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) throw DegenerateInput("pearson_corr: zero variance input");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double ordinality_score(const Matrix& features, std::span<const double> ages) {
  if (ages.size() != features.rows()) throw ContractViolation("ordinality_score: one age per feature row");
  struct Centroid {
    RealVector sum;
    std::size_t count = 0;
  };
  std::map<int, Centroid> classes;
  for (std::size_t i = 0; i < ages.size(); ++i) {
    Centroid& c = classes[round_age(ages[i])];
    if (c.sum.empty()) c.sum.assign(features.cols(), 0.0);
    const auto row = features.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) c.sum[j] += row[j];
    ++c.count;
  }
  if (classes.size() < 3) {
    throw DegenerateInput("ordinality_score: need at least 3 distinct age classes, got " +
                          std::to_string(classes.size()));
  }
  for (auto& [age, c] : classes) {
    for (double& v : c.sum) v /= static_cast<double>(c.count);
  }
  const auto first = classes.begin();
  RealVector dist, gap;
  for (auto it = std::next(first); it != classes.end(); ++it) {
    dist.push_back(lk_distance(first->second.sum, it->second.sum, 1.0));
    gap.push_back(static_cast<double>(it->first - first->first));
  }
  return pearson_corr(dist, gap);
}

SystematicBias systematic_bias(std::span<const double> pred_ages, std::span<const double> true_ages) {
  check_pair(pred_ages, true_ages, "systematic_bias");
  if (true_ages.empty()) throw InsufficientSamples("left", "systematic_bias: empty input");
  SystematicBias sb;
  sb.mean_age = mean_of(true_ages);
  double ss = 0.0;
  for (double t : true_ages) ss += (t - sb.mean_age) * (t - sb.mean_age);
  sb.sd_age = std::sqrt(ss / static_cast<double>(true_ages.size()));
  const double lo = sb.mean_age - sb.sd_age, hi = sb.mean_age + sb.sd_age;
  double left = 0.0, right = 0.0;
  for (std::size_t i = 0; i < true_ages.size(); ++i) {
    const double gap = pred_ages[i] - true_ages[i];
    if (true_ages[i] < lo) {
      left += gap;
      ++sb.n_left;
    } else if (true_ages[i] > hi) {
      right += gap;
      ++sb.n_right;
    }
  }
  if (sb.n_left == 0) throw InsufficientSamples("left", "systematic_bias: no samples below mean - sd");
  if (sb.n_right == 0) throw InsufficientSamples("right", "systematic_bias: no samples above mean + sd");
  sb.sb_left = left / static_cast<double>(sb.n_left);
  sb.sb_right = right / static_cast<double>(sb.n_right);
  return sb;
}

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw InvalidParameter("incomplete_beta: a and b must be positive");
  if (!(x >= 0.0 && x <= 1.0)) throw InvalidParameter("incomplete_beta: x must lie in [0, 1]");
  if (x == 0.0 || x == 1.0) return x;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double df) {
  if (!(df > 0.0)) throw InvalidParameter("student_t_two_sided_p: df must be positive");
  if (t == 0.0) return 1.0;
  if (std::isinf(t)) return 0.0;
  return std::clamp(incomplete_beta(0.5 * df, 0.5, df / (df + t * t)), 0.0, 1.0);
}

TTestResult welch_ttest(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw DegenerateInput("welch_ttest: each sample needs at least 2 values");
  const double ma = mean_of(a), mb = mean_of(b);
  const double va = sample_variance(a, ma) / static_cast<double>(a.size());
  const double vb = sample_variance(b, mb) / static_cast<double>(b.size());
  const double se2 = va + vb;
  if (se2 == 0.0) throw DegenerateInput("welch_ttest: both samples have zero variance");
  TTestResult r;
  r.t = (ma - mb) / std::sqrt(se2);
  r.df = se2 * se2 /
         (va * va / static_cast<double>(a.size() - 1) + vb * vb / static_cast<double>(b.size() - 1));
  r.p = student_t_two_sided_p(r.t, r.df);
  return r;
}

double severity_correlation(std::span<const double> group_means, std::span<const double> ranks) {
  check_pair(group_means, ranks, "severity_correlation");
  if (group_means.size() < 3) throw DegenerateInput("severity_correlation: need at least 3 groups");
  return pearson_corr(group_means, ranks);
}

GroupReport group_report(std::span<const double> pred_ages, std::span<const double> true_ages,
                         std::span<const std::size_t> group_of, const std::vector<std::string>& labels) {
  check_pair(pred_ages, true_ages, "group_report");
  if (group_of.size() != pred_ages.size()) throw ContractViolation("group_report: one group index per sample");
  const std::size_t g = labels.size();
  std::vector<RealVector> gaps(g);
  for (std::size_t i = 0; i < pred_ages.size(); ++i) {
    if (group_of[i] >= g) throw ContractViolation("group_report: group index out of range");
    gaps[group_of[i]].push_back(pred_ages[i] - true_ages[i]);
  }

  GroupReport report;
  report.labels = labels;
  for (std::size_t k = 0; k < g; ++k) {
    if (gaps[k].empty()) throw InsufficientSamples(labels[k], "group_report: group '" + labels[k] + "' is empty");
    report.ranks.push_back(static_cast<double>(k + 1));
    report.counts.push_back(gaps[k].size());
    report.mean_gap.push_back(mean_of(gaps[k]));
  }
  report.severity_correlation = severity_correlation(report.mean_gap, report.ranks);
  report.p_values.assign(g, std::vector<double>(g, 1.0));
  for (std::size_t a = 0; a < g; ++a) {
    for (std::size_t b = a + 1; b < g; ++b) {
      const double p = welch_ttest(gaps[a], gaps[b]).p;
      report.p_values[a][b] = p;
      report.p_values[b][a] = p;
    }
  }
  return report;
}

}  // namespace brainage
