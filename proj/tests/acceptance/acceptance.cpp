// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "brainage/cli.hpp"
#include "brainage/experiment.hpp"
#include "brainage/losses.hpp"
#include "brainage/metrics.hpp"
#include "brainage/model.hpp"
#include "oracles.hpp"

using namespace brainage;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSeeds[] = {0, 1, 2};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string join(const std::vector<double>& v, int precision = 3) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(precision);
  for (std::size_t i = 0; i < v.size(); ++i) s << (i ? "/" : "") << v[i];
  return s.str();
}

std::string fmt(double v, int precision = 3) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(precision) << v;
  return s.str();
}

std::string sci(double v) {
  std::ostringstream s;
  s << std::scientific << std::setprecision(2) << v;
  return s.str();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::function<Outcome()>& check) {
  Outcome o;
  const auto t0 = Clock::now();
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << " ["
            << fmt(seconds_since(t0), 1) << " s]" << std::endl;
}

// Criterion 1: analytic vs central-difference gradients, every loss kind.
Outcome gradient_suite() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  int instances = 0;
  bool all_passed = true;
  std::ostringstream per_kind;
  for (LossKind kind : kAllLossKinds) {
    double kind_worst = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      ModelConfig model;
      model.input_dim = 16;
      model.hidden_dims = {16, 16};
      model.head = is_classifier(kind) ? HeadKind::Classifier : HeadKind::Regressor;
      if (model.head == HeadKind::Classifier) model.class_ages = integer_class_ages(30, 39);
      LossConfig loss = LossConfig::defaults_for(kind);
      loss.class_ages = model.class_ages;
      GradcheckOptions options;
      options.batch = 4 + seed % 5;
      options.tolerance = 1e-5;
      const GradcheckReport r = gradcheck(model, loss, Rng(seed, 0), options);
      all_passed = all_passed && r.passed && r.worst < 1e-5;
      kind_worst = std::max(kind_worst, r.worst);
      ++instances;
    }
    worst = std::max(worst, kind_worst);
    per_kind << " " << to_string(kind) << "=" << sci(kind_worst);
  }
  const double elapsed = seconds_since(t0);
  return {all_passed && elapsed < 60.0, std::to_string(instances) + " instances, worst rel err " + sci(worst) +
                                            " (<1e-5);" + per_kind.str() + "; runtime " + fmt(elapsed, 1) + " s (<60)"};
}

// Criterion 2: vectorized ORDER value vs the naive double loop.
Outcome order_oracle() {
  Rng rng(2024, 5);
  double worst_scaled = 0.0, worst_abs = 0.0, largest = 0.0;
  int cases = 0;
  for (double k : {0.5, 2.0 / 3.0, 1.0, 2.0}) {
    for (std::size_t n : {2u, 3u, 4u, 8u, 13u, 16u, 31u, 32u, 47u, 64u}) {
      for (int rep = 0; rep < 3; ++rep) {
        const std::size_t d = 1 + static_cast<std::size_t>(rng.uniform() * 32);
        Matrix x(n, d);
        const double scale = std::exp(rng.uniform(-3.0, 3.0));
        for (double& v : x.values()) v = scale * rng.normal();
        RealVector ages(n);
        for (double& a : ages) a = rng.uniform(8.0, 95.0);
        const double oracle = testing::naive_order(x, ages, k);
        const double got = order_regularizer(x, ages, k).value;
        const double err = std::abs(got - oracle);
        worst_abs = std::max(worst_abs, err);
        worst_scaled = std::max(worst_scaled, err / std::max(1.0, std::abs(oracle)));
        largest = std::max(largest, std::abs(oracle));
        ++cases;
      }
    }
  }
  return {worst_scaled <= 1e-12, std::to_string(cases) + " batches N<=64, k in {1/2,2/3,1,2}; worst |diff|/max(1,|v|) " +
                                     sci(worst_scaled) + " (<=1e-12); worst |diff| " + sci(worst_abs) +
                                     " at |v| up to " + fmt(largest, 1)};
}

struct SeedRuns {
  std::map<LossKind, RunResult> runs;
  std::map<LossKind, double> seconds;
};

double metric(const RunResult& r, const char* name) {
  const MetricsReport& m = r.evaluation.report;
  const std::string n = name;
  if (n == "mae" && m.mae) return *m.mae;
  if (n == "ordinality" && m.ordinality) return *m.ordinality;
  if (n == "sb_left" && m.bias) return m.bias->sb_left;
  if (n == "sb_right" && m.bias) return m.bias->sb_right;
  throw std::runtime_error(std::string("metric ") + name + " unavailable: " +
                      (m.errors.count(n) ? m.errors.at(n) : std::string("not computed")));
}

ExperimentConfig default_experiment(std::uint64_t seed) {
  ExperimentConfig c;
  c.seed = seed;
  c.propagate();
  return c;
}

std::vector<SeedRuns> run_main_comparison() {
  std::vector<SeedRuns> out;
  for (std::uint64_t seed : kSeeds) {
    const ExperimentConfig c = default_experiment(seed);
    const Split split = make_split(c);
    SeedRuns s;
    for (LossKind kind : {LossKind::Ce, LossKind::Mse, LossKind::CeOrder}) {
      const auto t0 = Clock::now();
      LossConfig loss = LossConfig::defaults_for(kind);
      s.runs.emplace(kind, run_loss(c, loss, split));
      s.seconds[kind] = seconds_since(t0);
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<double> across(const std::vector<SeedRuns>& runs, LossKind kind, const char* name) {
  std::vector<double> v;
  for (const SeedRuns& s : runs) v.push_back(metric(s.runs.at(kind), name));
  return v;
}

std::vector<double> abs_all(std::vector<double> v) {
  for (double& x : v) x = std::abs(x);
  return v;
}

// Criterion 3: median test MAE ordering.
Outcome mae_ordering(const std::vector<SeedRuns>& runs) {
  const auto order = across(runs, LossKind::CeOrder, "mae");
  const auto ce = across(runs, LossKind::Ce, "mae");
  const auto mse = across(runs, LossKind::Mse, "mae");
  double slowest = 0.0;
  for (const SeedRuns& s : runs) {
    for (const auto& [kind, sec] : s.seconds) slowest = std::max(slowest, sec);
  }
  const double mo = median(order), mc = median(ce), mm = median(mse);
  return {mo < mc && mc < mm && slowest < 600.0,
          "median MAE ce_order " + fmt(mo) + " < ce " + fmt(mc) + " < mse " + fmt(mm) + " (seeds: ce_order " +
              join(order) + ", ce " + join(ce) + ", mse " + join(mse) + "); slowest run " + fmt(slowest, 1) +
              " s (<600)"};
}

// Criterion 4: ordinality and systematic bias of CE+ORDER.
Outcome ordinality_and_bias(const std::vector<SeedRuns>& runs) {
  const double ord = median(across(runs, LossKind::CeOrder, "ordinality"));
  const double ord_ce = median(across(runs, LossKind::Ce, "ordinality"));
  const auto ol = abs_all(across(runs, LossKind::CeOrder, "sb_left"));
  const auto orr = abs_all(across(runs, LossKind::CeOrder, "sb_right"));
  const auto ml = abs_all(across(runs, LossKind::Mse, "sb_left"));
  const auto mr = abs_all(across(runs, LossKind::Mse, "sb_right"));
  const bool ord_ok = ord >= 0.9 && ord > ord_ce;
  const bool left_ok = median(ol) < median(ml);
  const bool right_ok = median(orr) < median(mr);
  return {ord_ok && left_ok && right_ok,
          "median ordinality ce_order " + fmt(ord) + " (>=0.9) vs ce " + fmt(ord_ce) + (ord_ok ? " ok" : " FAIL") +
              "; median |SB-L| ce_order " + fmt(median(ol)) + " vs mse " + fmt(median(ml)) +
              (left_ok ? " ok" : " FAIL") + "; median |SB-R| ce_order " + fmt(median(orr)) + " vs mse " +
              fmt(median(mr)) + (right_ok ? " ok" : " FAIL") + " (per-seed |SB-L| " + join(ol) + " vs " +
              join(ml) + ", |SB-R| " + join(orr) + " vs " + join(mr) + ")"};
}

// Criterion 5: regression to the mean under MSE.
Outcome rtm(const std::vector<SeedRuns>& runs) {
  const auto left = across(runs, LossKind::Mse, "sb_left");
  const auto right = across(runs, LossKind::Mse, "sb_right");
  int hits = 0;
  for (std::size_t i = 0; i < left.size(); ++i) hits += left[i] > 0.0 && right[i] < 0.0;
  return {hits >= 2, "mse SB-L>0 and SB-R<0 in " + std::to_string(hits) + "/3 seeds (>=2); SB-L " + join(left) +
                         ", SB-R " + join(right)};
}

// Criterion 6: the L_k ablation grid.
Outcome ablation() {
  std::map<std::pair<double, LossKind>, std::vector<double>> maes, ords;
  for (std::uint64_t seed : kSeeds) {
    const ExperimentConfig c = default_experiment(seed);
    for (const AblationRow& row : run_ablation(c, make_split(c))) {
      if (!row.mae || !row.ordinality) throw std::runtime_error("ablation cell without MAE or ordinality");
      maes[{row.k, row.kind}].push_back(*row.mae);
      ords[{row.k, row.kind}].push_back(*row.ordinality);
    }
  }
  const std::pair<double, LossKind> best{1.0, LossKind::CeOrder};
  const double best_mae = median(maes.at(best)), best_ord = median(ords.at(best));
  bool mae_best = true, ord_best = true;
  std::ostringstream cells;
  for (const auto& [cell, v] : maes) {
    const double m = median(v), o = median(ords.at(cell));
    cells << " " << to_string(cell.second) << "@k=" << fmt(cell.first, 2) << ":" << fmt(m) << "/" << fmt(o);
    if (cell == best) continue;
    mae_best = mae_best && best_mae < m;
    ord_best = ord_best && best_ord > o;
  }
  const bool frac_worse = median(maes.at({0.5, LossKind::CeOrder})) > best_mae &&
                          median(maes.at({2.0 / 3.0, LossKind::CeOrder})) > best_mae;
  return {mae_best && ord_best && frac_worse,
          std::string("(k=1, ce_order) best median MAE ") + (mae_best ? "yes" : "NO") + ", highest median ordinality " +
              (ord_best ? "yes" : "NO") + ", fractional k worse on MAE " + (frac_worse ? "yes" : "NO") +
              "; median MAE/ordinality per cell:" + cells.str()};
}

// Criterion 7: severity correlation of the CE+ORDER models.
Outcome severity(const std::vector<SeedRuns>& runs) {
  std::vector<double> corr;
  std::string gaps;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const ExperimentConfig c = default_experiment(kSeeds[i]);
    const GroupReport g = run_severity(c, runs[i].runs.at(LossKind::CeOrder).trained.params);
    corr.push_back(g.severity_correlation);
    if (i == 0) gaps = join(g.mean_gap, 2);
  }
  const double m = median(corr);
  return {m >= 0.9, "median severity correlation " + fmt(m) + " (>=0.9), per seed " + join(corr) +
                        "; seed-0 group mean gaps " + gaps};
}

// Criterion 8: metric identities.
Outcome metric_identities() {
  const RealVector dir{0.3, -1.2, 2.0, 0.5};
  Matrix features(30, 4);
  RealVector ages;
  for (int a = 30; a < 40; ++a) {
    for (int rep = 0; rep < 3; ++rep) {
      const double jitter = rep == 0 ? -0.5 : (rep == 1 ? 0.5 : 0.0);
      for (std::size_t j = 0; j < 4; ++j) features(ages.size(), j) = (a + jitter) * dir[j];
      ages.push_back(a);
    }
  }
  const double ord = ordinality_score(features, ages);
  const bool ord_ok = std::abs(ord - 1.0) <= 1e-12;

  const SystematicBias sb = systematic_bias(RealVector{50, 50, 50, 50}, RealVector{10, 50, 50, 90});
  const bool sb_ok = sb.sb_left == 40.0 && sb.sb_right == -40.0;

  Rng rng(6, 0);
  double worst = 0.0;
  for (int c = 0; c < 20; ++c) {
    const std::size_t na = 3 + c % 7, nb = 4 + (c * 3) % 11;
    RealVector a(na), b(nb);
    const double shift = 0.25 * c - 1.5, sa = 0.5 + 0.1 * c, sbd = 1.5 - 0.05 * c;
    for (double& v : a) v = sa * rng.normal();
    for (double& v : b) v = shift + sbd * rng.normal();
    const TTestResult r = welch_ttest(a, b);
    worst = std::max(worst, std::abs(r.p - testing::t_two_sided_oracle(r.t, r.df)));
  }
  const bool welch_ok = worst < 1e-9;
  std::ostringstream d;
  d << std::setprecision(17) << "collinear ordinality " << ord << (ord_ok ? " ok" : " FAIL") << "; systematic_bias ("
    << sb.sb_left << ", " << sb.sb_right << ")" << (sb_ok ? " ok" : " FAIL") << "; welch p worst |diff| vs oracle "
    << sci(worst) << " over 20 cases (<1e-9)";
  return {ord_ok && sb_ok && welch_ok, d.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Criterion 9: byte-identical compare outputs across runs and thread counts.
Outcome determinism() {
  char tmpl[] = "/tmp/brainage_acceptance_XXXXXX";
  if (!mkdtemp(tmpl)) throw std::runtime_error("mkdtemp failed");
  const fs::path root(tmpl);
  ExperimentConfig c;
  c.seed = 11;
  c.synth.n = 1500;
  c.train.max_epochs = 4;
  c.train.patience = 4;
  c.propagate();
  const fs::path config = root / "config.json";
  std::ofstream(config) << c.to_json().dump(2);

  const std::vector<std::string> threads{"1", "4", "1", "3"};
  std::vector<fs::path> dirs;
  for (std::size_t i = 0; i < threads.size(); ++i) {
    dirs.push_back(root / ("run" + std::to_string(i)));
    std::ostringstream out, err;
    const int rc = dispatch({"compare", "--config", config.string(), "--out", dirs.back().string(), "--threads",
                             threads[i]},
                            out, err);
    if (rc != 0) throw std::runtime_error("compare exited " + std::to_string(rc) + ": " + err.str());
  }
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(dirs[0])) names.push_back(e.path().filename().string());
  std::sort(names.begin(), names.end());
  bool identical = !names.empty();
  std::size_t bytes = 0;
  std::string mismatch;
  for (std::size_t i = 1; i < dirs.size(); ++i) {
    std::vector<std::string> other;
    for (const auto& e : fs::directory_iterator(dirs[i])) other.push_back(e.path().filename().string());
    std::sort(other.begin(), other.end());
    if (other != names) {
      identical = false;
      mismatch = "file sets differ";
    }
    for (const std::string& n : names) {
      const std::string a = slurp(dirs[0] / n), b = slurp(dirs[i] / n);
      if (i == 1) bytes += a.size();
      if (a != b) {
        identical = false;
        mismatch = n + " differs in run " + std::to_string(i);
      }
    }
  }
  fs::remove_all(root);
  const bool has_kinds = std::any_of(names.begin(), names.end(), [](const std::string& n) { return n == "report.json"; }) &&
                         std::any_of(names.begin(), names.end(), [](const std::string& n) { return n.rfind("checkpoint_", 0) == 0; }) &&
                         std::any_of(names.begin(), names.end(), [](const std::string& n) { return n.rfind("embeddings_", 0) == 0; });
  return {identical && has_kinds, std::to_string(threads.size()) + " compare runs at threads " + threads[0] + "/" +
                                      threads[1] + "/" + threads[2] + "/" + threads[3] + ": " +
                                      std::to_string(names.size()) + " files, " + std::to_string(bytes) + " bytes " +
                                      (identical ? "byte-identical" : "DIFFER (" + mismatch + ")")};
}

// Criterion 10: noiseless data, 20 epochs.
Outcome exact_fit() {
  ExperimentConfig c = default_experiment(0);
  c.synth.noise_sigma = 0.0;
  c.train.max_epochs = 20;
  c.train.patience = 20;
  c.propagate();
  const Split split = make_split(c);
  const RunResult r = run_loss(c, LossConfig::defaults_for(LossKind::CeOrder), split);
  const TrainHistory& h = r.trained.history;
  double best = INFINITY;
  for (const EpochRecord& e : h.epochs) best = std::min(best, e.val_mae);
  return {best < 2.0, "ce_order best val MAE " + fmt(best) + " (<2) after " + std::to_string(h.epochs.size()) +
                          " epochs at noise_sigma 0"};
}

}  // namespace

int main() {
  std::cout << "acceptance: 10 criteria" << std::endl;
  report(1, gradient_suite);
  report(2, order_oracle);
  std::vector<SeedRuns> runs;
  bool runs_ok = true;
  std::string runs_error;
  try {
    runs = run_main_comparison();
  } catch (const std::exception& e) {
    runs_ok = false;
    runs_error = e.what();
  }
  auto with_runs = [&](Outcome (*f)(const std::vector<SeedRuns>&)) {
    return [&, f] {
      if (!runs_ok) return Outcome{false, "comparison runs failed: " + runs_error};
      return f(runs);
    };
  };
  report(3, with_runs(mae_ordering));
  report(4, with_runs(ordinality_and_bias));
  report(5, with_runs(rtm));
  report(6, ablation);
  report(7, with_runs(severity));
  report(8, metric_identities);
  report(9, determinism);
  report(10, exact_fit);
  std::cout << "acceptance: " << (10 - failures) << "/10 passed" << std::endl;
  return failures == 0 ? 0 : 1;
}
