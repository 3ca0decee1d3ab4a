#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "brainage/numerics.hpp"

namespace brainage {

double mae(std::span<const double> pred_ages, std::span<const double> true_ages);

/// Product-moment correlation. Throws DegenerateInput if either input is constant.
double pearson_corr(std::span<const double> a, std::span<const double> b);

/// Correlation between L1 distances of each age-class centroid from the
/// youngest class's centroid and the corresponding age differences. Ages are
/// grouped by nearest integer (half away from zero).
double ordinality_score(const Matrix& features, std::span<const double> ages);

struct SystematicBias {
  double sb_left = 0.0;   // mean(pred - true) where true < mu - sigma
  double sb_right = 0.0;  // mean(pred - true) where true > mu + sigma
  std::size_t n_left = 0;
  std::size_t n_right = 0;
  double mean_age = 0.0;
  double sd_age = 0.0;  // population standard deviation
};
SystematicBias systematic_bias(std::span<const double> pred_ages, std::span<const double> true_ages);

struct TTestResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;
};
/// Two-sided Welch unequal-variance t-test.
TTestResult welch_ttest(std::span<const double> a, std::span<const double> b);

/// Regularized incomplete beta I_x(a, b), continued fraction (modified Lentz),
/// at most 500 iterations, converged at relative change < 1e-12.
double incomplete_beta(double a, double b, double x);
/// Two-sided tail probability P(|T| >= |t|) for Student's t with df degrees of freedom.
double student_t_two_sided_p(double t, double df);

double severity_correlation(std::span<const double> group_means, std::span<const double> ranks);

struct MetricsReport {
  std::optional<double> mae;
  std::optional<double> ordinality;
  std::optional<SystematicBias> bias;
  std::map<int, std::size_t> per_class_counts;  // rounded true age -> count
  std::size_t n = 0;
  std::map<std::string, std::string> errors;    // metric name -> failure message

  bool complete() const { return errors.empty(); }
};

struct GroupReport {
  std::vector<std::string> labels;  // ordered by severity rank
  std::vector<double> ranks;
  std::vector<std::size_t> counts;
  std::vector<double> mean_gap;     // mean(pred - chronological) per group
  double severity_correlation = 0.0;
  std::vector<std::vector<double>> p_values;  // symmetric, unit diagonal
};

/// Builds a GroupReport from per-sample predictions; `group_of[i]` indexes
/// into `labels`, which must already be in severity order.
GroupReport group_report(std::span<const double> pred_ages, std::span<const double> true_ages,
                         std::span<const std::size_t> group_of,
                         const std::vector<std::string>& labels);

}  // namespace brainage
