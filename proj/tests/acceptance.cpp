// Acceptance checks 1-10. Usage: acceptance [N ...]; no arguments runs all.
// Prints one PASS/FAIL line per criterion and exits non-zero on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "pe/bayesopt.hpp"
#include "pe/gittins.hpp"
#include "pe/harness.hpp"
#include "pe/models.hpp"
#include "pe/policies.hpp"
#include "pe/schedule.hpp"
#include "pe/tuner.hpp"

using namespace pe;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  std::vector<std::string> problems;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      problems.push_back(what);
      pass = false;
    }
  }

  [[nodiscard]] std::string text() const {
    std::string s = detail.str();
    for (std::size_t i = 0; i < problems.size(); ++i) {
      s += i == 0 ? (s.empty() ? "failed: " : "; failed: ") : "; ";
      s += problems[i];
    }
    return s;
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// ---------------------------------------------------------------------------

void schedule_suite(Outcome& out) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int violations = 0;
  for (int k = 0; k < 1000; ++k) {
    const int T = 1 + static_cast<int>(u(rng) * 200);
    const double th0 = u(rng);
    const double th2 = kTheta2Min + u(rng) * (kTheta2Max - kTheta2Min);
    const Schedule s(th0, u(rng) * T, th2, T);
    double prev = s(0);
    for (int t = 0; t <= T; ++t) {
      const double e = s(t);
      if (!(e >= 0.0 && e <= th0 && e <= prev)) ++violations;
      prev = e;
    }
    const int mid = static_cast<int>(u(rng) * T);
    const Schedule m(th0, static_cast<double>(T - mid), th2, T);
    if (std::abs(m(mid) - th0 / 2) > 1e-12) ++violations;
  }
  out.require(violations == 0, std::to_string(violations) + " property violations");

  const long double third = 1.0L / (1.0L + std::exp(-0.1L * 25.0L));
  out.require(std::abs(evaluate_schedule(Schedule(0.2, 10, 0.7, 50), 40) - 0.1) <= 1e-9,
              "example 1");
  out.require(std::abs(evaluate_schedule(Schedule(0.0, 3, 1.0, 50), 7)) <= 1e-9, "example 2");
  out.require(std::abs(evaluate_schedule(Schedule(1.0, 25, 0.1, 50), 0) -
                       static_cast<double>(third)) <= 1e-9,
              "example 3");
  out.detail << "1000 random schedules checked";
}

void policy_suite(Outcome& out) {
  Rng gen(2);
  int mismatches = 0;
  for (int h = 0; h < 100; ++h) {
    const std::size_t k = 2 + uniform_index(5, gen);
    ArmStats stats(k);
    std::vector<BetaArmPosterior> beta(k);
    for (std::size_t a = 0; a < k; ++a) {
      const std::size_t n = 2 + uniform_index(8, gen);
      for (std::size_t i = 0; i < n; ++i) {
        const double r = uniform01(gen) < 0.5 ? 1.0 : 0.0;
        stats.update(a, r + 1e-3 * standard_normal(gen));
        beta[a] = update_posterior(beta[a], r);
      }
    }
    const auto& m = stats.means();
    const std::size_t greedy =
        static_cast<std::size_t>(std::max_element(m.begin(), m.end()) - m.begin());
    std::vector<double> pm(k);
    for (std::size_t a = 0; a < k; ++a) pm[a] = beta[a].mean();
    const double top = *std::max_element(pm.begin(), pm.end());
    Rng rng(static_cast<std::uint64_t>(h));
    if (epsilon_greedy_select(stats, 0.0, rng) != greedy) ++mismatches;
    if (ucb_select(stats, 0.5, rng) != greedy) ++mismatches;
    if (pm[ts_select(std::span<const BetaArmPosterior>(beta), 0.0, rng)] != top) ++mismatches;
  }
  out.require(mismatches == 0, std::to_string(mismatches) + " reduction mismatches");

  ArmStats stats(2);
  stats.update(0, 0.7);
  stats.update(1, 0.3);
  Rng rng(3);
  const int n = 1000000;
  int hits = 0;
  for (int i = 0; i < n; ++i) hits += epsilon_greedy_select(stats, 0.1, rng) == 0;
  const double p = 0.95;
  const double z = (hits / double(n) - p) / std::sqrt(p * (1 - p) / n);
  out.require(std::abs(z) <= 4.0, "frequency z = " + std::to_string(z));
  out.detail << "100 histories; eps-greedy frequency z = " << z;
}

void rollout_oracle(Outcome& out) {
  const BernoulliMab m({0.9, 0.1});
  const double exact = oracle::eps_greedy_regret({0.9, 0.1}, 0.2, 3);
  const PolicyPlan plan{PolicyKind::EpsilonGreedy, 3, {0.2, 0.2, 0.2, 0.2}};
  const TuningConfig cfg;
  const int n = 100000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double v = simulate(m, plan, nullptr, 1, cfg, derive_seed(31, {std::uint64_t(i)}));
    s += v;
    s2 += v * v;
  }
  const double mean = s / n;
  const double se = std::sqrt((s2 / n - mean * mean) / (n - 1));
  out.require(std::abs(mean - exact) <= 3 * se, "outside 3 SE");
  out.detail << "exact " << exact << ", Monte Carlo " << mean << " (SE " << se << ")";
}

double depth_two_oracle(int a, int b) {
  const double p = double(a) / (a + b);
  const double p1 = double(a + 1) / (a + b + 1);
  const double p0 = double(a) / (a + b + 1);
  double lo = 0, hi = 1;
  for (int i = 0; i < 200; ++i) {
    const double l = 0.5 * (lo + hi);
    const double gap = p + p * std::max(l, p1) + (1 - p) * std::max(l, p0) - 2 * l;
    (gap > 0 ? lo : hi) = l;
  }
  return 0.5 * (lo + hi);
}

void gittins_suite(Outcome& out) {
  int bad = 0;
  double worst = 0;
  for (int a = 1; a < 10; ++a) {
    for (int b = 1; a + b <= 10; ++b) {
      if (gittins_index(a, b, 1) != double(a) / double(a + b)) ++bad;
      worst = std::max(worst, std::abs(gittins_index(a, b, 2) - depth_two_oracle(a, b)));
      for (int r = 1; r < 8; ++r) {
        if (gittins_index(a, b, r + 1) < gittins_index(a, b, r) - 1e-12) ++bad;
      }
    }
  }
  out.require(bad == 0, std::to_string(bad) + " exactness/monotonicity violations");
  out.require(worst <= 1e-6, "depth-two error " + std::to_string(worst));
  out.detail << "max depth-two error " << worst;
}

void optimizer_benchmark(Outcome& out) {
  MinimizeOptions opts;
  opts.budget = 40;
  const std::vector<double> lo{0.0}, hi{1.0};
  int ok = 0;
  for (int seed = 0; seed < 100; ++seed) {
    Rng rng(1000 + static_cast<std::uint64_t>(seed));
    const auto r = minimize([](std::span<const double> x) { return (x[0] - 0.3) * (x[0] - 0.3); },
                            lo, hi, opts, rng);
    ok += std::abs(r.x[0] - 0.3) <= 0.05;
  }
  out.require(ok >= 95, "only " + std::to_string(ok) + "/100");
  out.detail << ok << "/100 runs within 0.05";
}

struct Row {
  double mean, se;
};

std::map<std::string, Row> run_rows(ExperimentConfig cfg, const std::set<std::string>& keep,
                                    int replicates, Outcome& out) {
  std::erase_if(cfg.variants, [&](const PolicyVariant& v) { return !keep.count(v.name); });
  cfg.replicates = replicates;
  const auto res = run_experiment(cfg);
  out.require(res.failures.empty(), std::to_string(res.failures.size()) + " failed episodes");
  std::map<std::string, Row> rows;
  for (const auto& r : res.rows) {
    if (r.summary) rows[r.name] = {r.summary->mean, r.summary->se};
  }
  for (const auto& k : keep) {
    if (!rows.count(k)) throw std::runtime_error("variant " + k + " missing");
  }
  return rows;
}

double pooled(const Row& a, const Row& b) { return std::sqrt(a.se * a.se + b.se * b.se); }

std::string describe(const std::string& name, const Row& r) {
  std::ostringstream s;
  s << name << " " << r.mean << " (SE " << r.se << ")";
  return s.str();
}

void bernoulli_ordering(Outcome& out) {
  const auto rows = run_rows(preset("table1-bern2"), {"tuned-eps", "eps-0.1", "tuned-ts", "ts"},
                             96, out);
  const Row& te = rows.at("tuned-eps");
  const Row& e1 = rows.at("eps-0.1");
  const Row& tt = rows.at("tuned-ts");
  const Row& ts = rows.at("ts");
  out.require(te.mean <= e1.mean + pooled(te, e1), "tuned eps-greedy above eps = 0.1 + 1 SE");
  out.require(tt.mean <= ts.mean + pooled(tt, ts), "tuned TS above TS + 1 SE");
  out.detail << describe("tuned-eps", te) << ", " << describe("eps-0.1", e1) << ", "
             << describe("tuned-ts", tt) << ", " << describe("ts", ts);
}

void gaussian_ordering(Outcome& out) {
  const auto rows = run_rows(preset("table2-gauss2-sigma0.1"), {"tuned-ts", "ts"}, 96, out);
  const Row& tt = rows.at("tuned-ts");
  const Row& ts = rows.at("ts");
  out.require(ts.mean - tt.mean >= pooled(tt, ts), "tuned TS not below TS by 1 SE");
  out.detail << describe("tuned-ts", tt) << ", " << describe("ts", ts);
}

void glucose_ordering(Outcome& out) {
  const auto rows = run_rows(preset("table4-glucose-T25"),
                             {"tuned-ar2-linear", "tuned-ar2-np", "eps-0.05"}, 48, out);
  const Row& lin = rows.at("tuned-ar2-linear");
  const Row& np = rows.at("tuned-ar2-np");
  const Row& eps = rows.at("eps-0.05");
  out.require(lin.mean >= eps.mean - pooled(lin, eps), "tuned AR(2) below eps = 0.05 - 1 SE");
  out.require(np.mean <= lin.mean, "nonparametric above AR(2) linear");
  out.detail << describe("tuned-ar2-linear", lin) << ", " << describe("tuned-ar2-np", np)
             << ", " << describe("eps-0.05", eps);
}

void dynamics_recovery(Outcome& out) {
  const GlucoseMdp mdp;
  int good = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Rng rng(derive_seed(99, {static_cast<std::uint64_t>(trial)}));
    const int n = 5000;
    Eigen::MatrixXd X(n, static_cast<Eigen::Index>(kAr2Features));
    Eigen::VectorXd y(n);
    GlucoseState s = mdp.initial_state(rng);
    for (int i = 0; i < n; ++i) {
      const int a = uniform01(rng) < 0.5 ? 1 : 0;
      const auto f = ar2_features(s, a);
      for (std::size_t j = 0; j < kAr2Features; ++j) X(i, static_cast<Eigen::Index>(j)) = f[j];
      const auto tr = glucose_step(mdp, s, a, rng);
      y(i) = tr.glucose;
      s = tr.next;
    }
    const auto fit = fit_ols(X, y);
    bool all = true;
    for (std::size_t j = 0; j < kAr2Features; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      if (std::abs(fit.coef(jj) - mdp.beta[j]) > 4.0 * std::sqrt(fit.cov(jj, jj))) all = false;
    }
    good += all;
  }
  out.require(good >= 95, "only " + std::to_string(good) + "/100");
  out.detail << good << "/100 trials recover every coefficient within 4 SE";
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void determinism(Outcome& out) {
  struct Case {
    const char* preset;
    int replicates;
    int horizon;
  };
  const auto root = std::filesystem::temp_directory_path() / "pe_acceptance_determinism";
  int compared = 0;
  for (const Case& c : {Case{"table1-bern2", 3, 0}, Case{"table3-contextual", 2, 0},
                        Case{"table4-glucose-T25", 1, 4}}) {
    ExperimentConfig cfg = preset(c.preset);
    cfg.replicates = c.replicates;
    if (c.horizon > 0) cfg.horizon = c.horizon;
    std::vector<std::filesystem::path> dirs;
    for (int run = 0; run < 3; ++run) {
      cfg.workers = run == 2 ? 3 : 1;
      const auto dir = root / (std::string(c.preset) + "_" + std::to_string(run));
      std::filesystem::remove_all(dir);
      write_outputs(cfg, run_experiment(cfg), dir);
      dirs.push_back(dir);
    }
    for (const char* file : {"summary.csv", "episodes.csv", "metadata.json"}) {
      const std::string ref = slurp(dirs[0] / file);
      out.require(!ref.empty(), std::string(c.preset) + " " + file + " empty");
      for (std::size_t k = 1; k < dirs.size(); ++k) {
        out.require(slurp(dirs[k] / file) == ref,
                    std::string(c.preset) + " " + file + " differs in run " + std::to_string(k));
        ++compared;
      }
    }
  }
  std::filesystem::remove_all(root);
  out.detail << compared << " file comparisons (same seed; 1 vs 1 vs 3 workers)";
}

struct Criterion {
  int id;
  const char* name;
  double time_limit;  // seconds; 0 means no limit
  std::function<void(Outcome&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, "schedule suite", 1.0, schedule_suite},
      {2, "policy reductions", 30.0, policy_suite},
      {3, "rollout oracle", 60.0, rollout_oracle},
      {4, "Gittins suite", 60.0, gittins_suite},
      {5, "optimizer benchmark", 60.0, optimizer_benchmark},
      {6, "Bernoulli ordering", 0.0, bernoulli_ordering},
      {7, "Gaussian ordering", 0.0, gaussian_ordering},
      {8, "glucose ordering", 0.0, glucose_ordering},
      {9, "dynamics recovery", 300.0, dynamics_recovery},
      {10, "determinism", 0.0, determinism},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::stoi(argv[i]));

  int failures = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    Outcome out;
    const auto t0 = Clock::now();
    try {
      c.run(out);
    } catch (const std::exception& e) {
      out.require(false, std::string("exception: ") + e.what());
    }
    const double secs = seconds_since(t0);
    if (c.time_limit > 0 && secs > c.time_limit) {
      out.require(false, "runtime " + std::to_string(secs) + " s over the limit");
    }
    failures += !out.pass;
    std::printf("criterion %d (%s): %s [%.1f s] %s\n", c.id, c.name, out.pass ? "PASS" : "FAIL",
                secs, out.text().c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
