// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
// criterion fails. Run from the build directory (ctest does this).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "protoloss/experiment.hpp"
#include "protoloss/geometry.hpp"
#include "protoloss/gradcheck.hpp"
#include "protoloss/losses.hpp"
#include "protoloss/trainer.hpp"

namespace fs = std::filesystem;
using namespace protoloss;

namespace {

constexpr double kDeg = 180.0 / std::numbers::pi;

const fs::path kBenchmarkConfig =
    fs::path(PROTOLOSS_SOURCE_DIR) / "configs" / "blobs-10-3.json";
const fs::path kWorkDir = fs::current_path() / "acceptance_runs";

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void report(int id, const char* name, const Outcome& o, double seconds) {
  std::printf("[%s] %d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, name,
              o.detail.c_str(), seconds);
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
      .count();
}

template <typename... Args>
std::string format(const char* fmt, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), fmt, args...);
  return buf;
}

Tensor uniform(Shape shape, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = u(rng);
  return t;
}

std::vector<Label> labels(std::size_t n, std::size_t m, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> u(0, m - 1);
  std::vector<Label> y(n);
  for (auto& v : y) v = u(rng);
  return y;
}

// ---- 1. gradient fidelity -------------------------------------------------

Outcome gradient_fidelity() {
  std::mt19937_64 rng(1001);
  std::uniform_int_distribution<std::size_t> b_dist(1, 8), m_dist(2, 6),
      d_dist(1, 5);
  double worst = 0.0, worst_variant = 0.0;
  std::string worst_term;
  std::size_t checks = 0;

  using Term = std::function<Var(Var h, Var c, std::span<const Label>)>;
  const LossWeights w{0.3, 0.4, 0.5};
  for (int instance = 0; instance < 20; ++instance) {
    const std::size_t B = b_dist(rng), M = m_dist(rng), d = d_dist(rng);
    const std::size_t D = 4;
    const double alpha = 3.0;
    const auto y = labels(B, M, rng);
    const Tensor x = uniform({B, D}, rng, -1, 1);
    const Tensor c = uniform({M, d}, rng, -2, 2);
    const FeatureExtractor fx = init_mlp({{D, 6, d}, Activation::kRelu,
                                          static_cast<std::uint64_t>(instance)});
    std::vector<Tensor> theta;
    for (std::size_t l = 0; l < fx.num_layers(); ++l) {
      theta.push_back(fx.weights()[l]);
      Tensor b = fx.biases()[l];
      for (double& v : b.data()) v = 0.05;  // keep units off the relu kink
      theta.push_back(std::move(b));
    }
    const Tensor h = embed(FeatureExtractor({theta[0], theta[2]}, {theta[1], theta[3]}), x);

    const RepulsionOptions euclid{1e-12, RepulsionNorm::kEuclidean};
    const RepulsionOptions coord{1e-12, RepulsionNorm::kCoordinateSum};
    const std::vector<std::pair<const char*, Term>> terms = {
        {"ce", [&](Var hv, Var cv, auto yy) { return ce_loss(logits({cv, alpha}, hv), yy); }},
        {"center", [&](Var hv, Var cv, auto yy) { return center_term(hv, cv, yy); }},
        {"dpp", [&](Var hv, Var cv, auto yy) { return dpp_loss(hv, {cv, alpha}, yy, w).total; }},
        {"sample_neg", [&](Var hv, Var cv, auto yy) { return sample_neg_loss(hv, cv, yy, euclid).value; }},
        {"class_neg", [&](Var, Var cv, auto) { return class_neg_loss(cv, euclid).value; }},
        {"dpnp", [&](Var hv, Var cv, auto yy) { return dpnp_loss(hv, {cv, alpha}, yy, w, euclid).total; }},
        {"sample_neg/coord", [&](Var hv, Var cv, auto yy) { return sample_neg_loss(hv, cv, yy, coord).value; }},
        {"class_neg/coord", [&](Var, Var cv, auto) { return class_neg_loss(cv, coord).value; }},
        {"dpnp/coord", [&](Var hv, Var cv, auto yy) { return dpnp_loss(hv, {cv, alpha}, yy, w, coord).total; }},
    };
    for (const auto& [name, term] : terms) {
      // With respect to h and C.
      const auto hc = check_gradients(
          [&](Tape&, std::span<const Var> in) { return term(in[0], in[1], y); },
          {h, c});
      // With respect to theta (through the network) and C.
      std::vector<Tensor> inputs = theta;
      inputs.push_back(c);
      const auto tc = check_gradients(
          [&](Tape& tape, std::span<const Var> in) {
            MlpBinding b{{in[0], in[2]}, {in[1], in[3]}};
            return term(forward(b, tape.constant(x)), in[4], y);
          },
          inputs);
      for (const auto* r : {&hc, &tc}) {
        checks += r->coordinates_checked;
        if (std::string_view(name).ends_with("/coord")) {
          worst_variant = std::max(worst_variant, r->max_relative_error);
        } else if (r->max_relative_error > worst) {
          worst = r->max_relative_error;
          worst_term = name;
        }
      }
    }
  }
  return {worst < 1e-4,
          format("max relative error %.2e (worst term: %s), tolerance 1e-4; "
                 "coordinate-sum repulsion variant %.2e (not gated); %zu coordinates",
                 worst, worst_term.empty() ? "-" : worst_term.c_str(), worst_variant,
                 checks)};
}

// ---- 2. oracle equivalence --------------------------------------------------

std::size_t scan_nearest(const Tensor& c, std::span<const double> p, std::size_t skip) {
  std::size_t best = c.rows();
  double best_d = INFINITY;
  for (std::size_t j = 0; j < c.rows(); ++j) {
    if (j == skip) continue;
    double s = 0.0;
    for (std::size_t t = 0; t < p.size(); ++t) s += (p[t] - c.at(j, t)) * (p[t] - c.at(j, t));
    if (s < best_d) {
      best_d = s;
      best = j;
    }
  }
  return best;
}

double loop_angle(std::span<const double> a, std::span<const double> b) {
  double aa = 0, bb = 0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    aa += a[t] * a[t];
    bb += b[t] * b[t];
  }
  const double na = std::sqrt(aa), nb = std::sqrt(bb);
  double ab = 0;
  for (std::size_t t = 0; t < a.size(); ++t) ab += (a[t] / na) * (b[t] / nb);
  return std::acos(std::clamp(ab, -1.0, 1.0)) * kDeg;
}

Outcome oracle_equivalence() {
  std::mt19937_64 rng(2002);
  std::uniform_int_distribution<std::size_t> m_dist(2, 12), d_dist(1, 6), b_dist(1, 32);
  std::size_t mismatches = 0, queries = 0;
  for (int instance = 0; instance < 200; ++instance) {
    const std::size_t M = m_dist(rng), d = d_dist(rng), B = b_dist(rng);
    Tensor c = uniform({M, d}, rng, -3, 3);
    // Occasionally duplicate a row so exact ties are exercised.
    if (instance % 5 == 0 && M > 2) {
      std::copy(c.row(0).begin(), c.row(0).end(), c.row(M - 1).begin());
    }
    const Tensor h = uniform({B, d}, rng, -3, 3);
    const auto y = labels(B, M, rng);
    const auto samples = nearest_negatives_for_samples(c, h, y);
    const auto classes = nearest_negatives_for_classes(c);
    for (std::size_t i = 0; i < B; ++i, ++queries) {
      const std::size_t oracle = scan_nearest(c, h.row(i), y[i]);
      mismatches += samples[i] != oracle;
      mismatches += *nearest_negative_for_sample(c, h.row(i), y[i]) != oracle;
    }
    for (std::size_t j = 0; j < M; ++j, ++queries) {
      const std::size_t oracle = scan_nearest(c, c.row(j), j);
      mismatches += classes[j] != oracle;
      mismatches += *nearest_negative_for_class(c, j) != oracle;
    }
  }

  double worst = 0.0;
  for (int instance = 0; instance < 50; ++instance) {
    const std::size_t M = m_dist(rng), d = std::max<std::size_t>(2, d_dist(rng));
    const Tensor c = uniform({M, d}, rng, -40, 40);
    const std::size_t N = 5 * M;
    const Tensor h = uniform({N, d}, rng, -10, 10);
    std::vector<Label> y(N);
    for (std::size_t i = 0; i < N; ++i) y[i] = i % M;

    const Tensor angles = geometry::inter_class_angles(c);
    std::vector<double> nearest(M, 180.0);
    double min_sep = 180.0;
    for (std::size_t j = 0; j < M; ++j) {
      for (std::size_t k = 0; k < M; ++k) {
        const double oracle = j == k ? 0.0 : loop_angle(c.row(j), c.row(k));
        worst = std::max(worst, std::abs(angles.at(j, k) - oracle));
        if (j != k) {
          nearest[j] = std::min(nearest[j], oracle);
          min_sep = std::min(min_sep, oracle);
        }
      }
    }
    double mean_sep = 0.0, var_sep = 0.0;
    for (double v : nearest) mean_sep += v / static_cast<double>(M);
    for (double v : nearest) var_sep += (v - mean_sep) * (v - mean_sep) / static_cast<double>(M);
    const auto stats = geometry::separation_stats(angles);
    worst = std::max({worst, std::abs(stats.min_sep - min_sep),
                      std::abs(stats.mean_sep - mean_sep),
                      std::abs(stats.std_sep - std::sqrt(var_sep))});
    const auto intra = geometry::intra_class_angles(h, y, c);
    for (std::size_t i = 0; i < N; ++i) {
      worst = std::max(worst, std::abs(intra.degrees[i] - loop_angle(h.row(i), c.row(y[i]))));
    }
    double total = 0.0;
    for (std::size_t j = 0; j < M; ++j) {
      double sep = INFINITY;
      for (std::size_t k = 0; k < M; ++k) {
        if (k != j) sep = std::min(sep, std::sqrt(squared_distance(c.row(j), c.row(k))));
      }
      double comp = 0.0;
      double n = 0.0;
      for (std::size_t i = 0; i < N; ++i) {
        if (y[i] != j) continue;
        comp += std::sqrt(squared_distance(h.row(i), c.row(j)));
        n += 1.0;
      }
      total += sep / (comp / n);
    }
    const double scr = geometry::scr(h, y, c).value;
    worst = std::max(worst, std::abs(scr - total / static_cast<double>(M)) /
                                std::max(1.0, std::abs(scr)));
  }
  return {mismatches == 0 && worst <= 1e-12,
          format("%zu nearest-negative mismatches over %zu queries (200 instances); "
                 "angle/separation/SCR max deviation %.1e over 50 instances, tolerance 1e-12",
                 mismatches, queries, worst)};
}

// ---- 3. simplex convergence -------------------------------------------------

// Independent oracle: projected gradient ascent on a soft minimum of the
// pairwise angles between unit vectors, with numerically differentiated
// objective and several restarts. Returns the best minimum angle found.
double max_min_angle_oracle(std::size_t M, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  const auto min_angle = [&](const std::vector<double>& u) {
    double best = 180.0;
    for (std::size_t j = 0; j < M; ++j) {
      for (std::size_t k = j + 1; k < M; ++k) {
        best = std::min(best, loop_angle({&u[j * d], d}, {&u[k * d], d}));
      }
    }
    return best;
  };
  const auto soft_min = [&](const std::vector<double>& u, double tau) {
    double s = 0.0;
    for (std::size_t j = 0; j < M; ++j) {
      for (std::size_t k = j + 1; k < M; ++k) {
        s += std::exp(-tau * loop_angle({&u[j * d], d}, {&u[k * d], d}) / kDeg);
      }
    }
    return -std::log(s) / tau;
  };
  const auto project = [&](std::vector<double>& u) {
    for (std::size_t j = 0; j < M; ++j) {
      double norm = 0.0;
      for (std::size_t t = 0; t < d; ++t) norm += u[j * d + t] * u[j * d + t];
      norm = std::sqrt(norm);
      for (std::size_t t = 0; t < d; ++t) u[j * d + t] /= norm;
    }
  };
  double best = 0.0;
  for (int restart = 0; restart < 5; ++restart) {
    std::vector<double> u(M * d);
    for (double& v : u) v = n(rng);
    project(u);
    for (int it = 0; it < 4000; ++it) {
      const double tau = 5.0 + 0.05 * it;
      std::vector<double> g(u.size());
      for (std::size_t i = 0; i < u.size(); ++i) {
        const double keep = u[i];
        u[i] = keep + 1e-6;
        const double up = soft_min(u, tau);
        u[i] = keep - 1e-6;
        const double down = soft_min(u, tau);
        u[i] = keep;
        g[i] = (up - down) / 2e-6;
      }
      for (std::size_t i = 0; i < u.size(); ++i) u[i] += 0.01 * g[i];
      project(u);
    }
    best = std::max(best, min_angle(u));
  }
  return best;
}

// Only the class-negative term, plain momentum SGD on the prototypes, with
// renormalization at the start of every epoch.
Tensor optimize_class_term(std::size_t M, std::size_t d, std::uint64_t seed) {
  PrototypeBank bank = init_prototypes(M, d, 40.0, seed);
  Tensor velocity(bank.centers().shape());
  const double lr = 5.0, momentum = 0.9;
  for (int epoch = 0; epoch < 2000; ++epoch) {
    renormalize(bank);
    for (int step = 0; step < 10; ++step) {
      Tape tape;
      const Var c = tape.leaf(bank.centers());
      const auto g = grad(class_neg_loss(c).value, std::vector{c});
      for (std::size_t i = 0; i < velocity.size(); ++i) {
        velocity[i] = momentum * velocity[i] + g[0][i];
        bank.centers()[i] -= lr * velocity[i];
      }
    }
  }
  renormalize(bank);
  return bank.centers();
}

Outcome simplex_convergence() {
  const double tri = std::acos(-0.5) * kDeg;         // 120
  const double tet = std::acos(-1.0 / 3.0) * kDeg;  // 109.47
  std::ostringstream detail;
  bool pass = true;

  const double oracle3 = max_min_angle_oracle(3, 2, 31);
  const double oracle4 = max_min_angle_oracle(4, 3, 41);
  const bool oracle_ok = std::abs(oracle3 - tri) < 0.5 && std::abs(oracle4 - tet) < 0.5;
  pass &= oracle_ok;
  detail << format("max-min oracle %.2f/%.2f deg; ", oracle3, oracle4);

  struct Case {
    std::size_t M, d;
    double target;
  };
  double worst = 0.0;
  std::string worst_case;
  for (const Case& k : {Case{3, 2, tri}, Case{3, 3, tri}, Case{4, 3, tet}, Case{4, 4, tet}}) {
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
      const Tensor angles = geometry::inter_class_angles(optimize_class_term(k.M, k.d, seed));
      for (std::size_t j = 0; j < k.M; ++j) {
        for (std::size_t l = j + 1; l < k.M; ++l) {
          const double dev = std::abs(angles.at(j, l) - k.target);
          if (dev > worst) {
            worst = dev;
            worst_case = format("M=%zu d=%zu seed %llu", k.M, k.d,
                                static_cast<unsigned long long>(seed));
          }
        }
      }
    }
  }
  pass &= worst <= 5.0;
  detail << format("max |angle - optimum| %.3f deg over M=3 (d=2,3) and M=4 (d=3,4), "
                   "4 seeds each (worst %s), tolerance 5 deg",
                   worst, worst_case.c_str());
  return {pass, detail.str()};
}

// ---- 4 & 8. benchmark comparison -------------------------------------------

struct CompareRun {
  int code = 0;
  std::vector<ComparisonRow> rows;
  std::string markdown;
  double seconds = 0.0;
  std::map<std::string, double> wall;  // "<method>_seed<k>" -> wall time
};

CompareRun run_compare() {
  CompareRun run;
  ExperimentConfig config = load_config(kBenchmarkConfig);
  config.output_dir = kWorkDir / "compare";
  fs::remove_all(config.output_dir);
  std::ostringstream log;
  const auto start = std::chrono::steady_clock::now();
  run.code = cmd_compare(config, {Method::kCE, Method::kCL, Method::kDPP, Method::kDPNP},
                         {1, 2, 3}, log);
  run.seconds = seconds_since(start);
  if (fs::exists(config.output_dir / "comparison.csv")) {
    run.rows = load_comparison_csv(config.output_dir / "comparison.csv");
  }
  std::ifstream md(config.output_dir / "comparison.md");
  std::ostringstream s;
  s << md.rdbuf();
  run.markdown = s.str();
  for (const auto& row : run.rows) {
    const std::string cell =
        std::string(to_string(row.method)) + "_seed" + std::to_string(row.seed);
    std::ifstream in(config.output_dir / cell / "summary.json");
    std::ostringstream text;
    text << in.rdbuf();
    const auto pos = text.str().find("\"wall_time_seconds\":");
    if (pos != std::string::npos) {
      run.wall[cell] = std::stod(text.str().substr(pos + 20));
    }
  }
  return run;
}

Outcome benchmark_analog(const CompareRun& run) {
  std::map<Method, std::map<std::uint64_t, ComparisonRow>> by;
  for (const auto& r : run.rows) by[r.method][r.seed] = r;
  for (Method m : {Method::kCE, Method::kCL, Method::kDPNP}) {
    if (by[m].size() != 3) return {false, "missing comparison rows for " + std::string(to_string(m))};
  }
  const auto mean = [&](Method m, auto field) {
    double s = 0.0;
    for (const auto& [seed, r] : by[m]) s += field(r);
    return s / 3.0;
  };
  const auto acc = [](const ComparisonRow& r) { return r.test_accuracy; };
  const auto scr = [](const ComparisonRow& r) { return r.scr; };
  const auto minsep = [](const ComparisonRow& r) { return r.min_sep; };

  bool paired = true;
  std::ostringstream seeds;
  for (std::uint64_t s = 1; s <= 3; ++s) {
    const double dp = by[Method::kDPNP][s].test_accuracy, ce = by[Method::kCE][s].test_accuracy;
    paired &= dp >= ce - 0.005;
    seeds << format("%s%.1f/%.1f", s > 1 ? " " : "", 100 * dp, 100 * ce);
  }
  const double acc_dpnp = mean(Method::kDPNP, acc), acc_ce = mean(Method::kCE, acc);
  const bool a = paired && acc_dpnp > acc_ce;
  const double s_dpnp = mean(Method::kDPNP, scr), s_cl = mean(Method::kCL, scr),
               s_ce = mean(Method::kCE, scr);
  const bool b = s_dpnp > s_cl && s_cl >= s_ce;
  const double ms = mean(Method::kDPNP, minsep);
  const bool c = ms >= 55.0;

  // Training time of the nine cells this criterion reads.
  double seconds = 0.0;
  for (Method m : {Method::kCE, Method::kCL, Method::kDPNP}) {
    for (std::uint64_t s = 1; s <= 3; ++s) {
      const auto it = run.wall.find(std::string(to_string(m)) + "_seed" + std::to_string(s));
      if (it != run.wall.end()) seconds += it->second;
    }
  }
  const bool fast = seconds < 600.0;
  return {a && b && c && fast,
          format("(a) %s acc DPNP/CE per seed %s %%, mean %.2f vs %.2f; "
                 "(b) %s SCR DPNP %.2f > CL %.2f >= CE %.2f; "
                 "(c) %s MinSep(DPNP) %.2f >= 55 deg; runtime %.0f s < 600",
                 a ? "ok" : "FAILED", seeds.str().c_str(), 100 * acc_dpnp, 100 * acc_ce,
                 b ? "ok" : "FAILED", s_dpnp, s_cl, s_ce, c ? "ok" : "FAILED", ms,
                 seconds)};
}

Outcome comparison_artifact(const CompareRun& run) {
  bool columns = true;
  for (const char* col : {"Test accuracy", "MinSep", "MeanSep", "Std", "SCR"}) {
    columns &= run.markdown.find(col) != std::string::npos;
  }
  std::size_t table_rows = 0;
  for (const char* m : {"| CE |", "| CL |", "| DPP |", "| DPNP |"}) {
    table_rows += run.markdown.find(m) != std::string::npos;
  }
  const bool pass = run.code == 0 && run.rows.size() == 12 && columns && table_rows == 4 &&
                    run.seconds < 1800.0;
  return {pass, format("exit %d, %zu/12 rows in comparison.csv, %zu/4 methods in "
                       "comparison.md, columns %s, %.0f s < 1800",
                       run.code, run.rows.size(), table_rows,
                       columns ? "complete" : "MISSING", run.seconds)};
}

// ---- 5. degeneration identities ---------------------------------------------

Outcome degeneration() {
  ExperimentConfig config = load_config(kBenchmarkConfig);
  const TrainTestSplit data = load_data(config.data);
  TrainConfig ce = config.train;
  ce.epochs = 8;
  ce.method = Method::kCE;
  TrainConfig dpnp = ce;
  dpnp.method = Method::kDPNP;
  dpnp.loss_weights = {0.0, 0.0, 0.0};
  const auto fresh = [&] {
    return std::pair{init_mlp({{16, 64, 64, 3}, Activation::kRelu, 5}),
                     init_prototypes(10, 3, ce.alpha, 6)};
  };
  auto [m1, b1] = fresh();
  auto [m2, b2] = fresh();
  const TrainResult a = train(m1, b1, data.train, &data.test, ce);
  const TrainResult b = train(m2, b2, data.train, &data.test, dpnp);
  bool stream_equal = a.history.size() == b.history.size() && a.state.bank == b.state.bank &&
                      a.state.model == b.state.model;
  for (std::size_t e = 0; stream_equal && e < a.history.size(); ++e) {
    const auto &x = a.history[e], &y = b.history[e];
    stream_equal = x.loss.ce == y.loss.ce && x.loss.total == y.loss.total &&
                   x.loss.pos == y.loss.pos && x.train_accuracy == y.train_accuracy &&
                   x.test_accuracy == y.test_accuracy && x.lr == y.lr;
  }

  std::mt19937_64 rng(5005);
  bool single_class_zero = true;
  double recomposition = 0.0;
  for (int instance = 0; instance < 50; ++instance) {
    const Tensor h = uniform({6, 3}, rng, -5, 5);
    {
      Tape tape;
      const auto y = labels(6, 1, rng);
      const BoundPrototypes c = bind(tape, init_prototypes(1, 3, 40.0, instance));
      const Objective o = dpnp_loss(tape.leaf(h), c, y, {0.1, 0.1, 0.1});
      single_class_zero &= o.breakdown.neg_sample == 0.0 && o.breakdown.neg_class == 0.0 &&
                           sample_neg_loss(tape.leaf(h), c.matrix, y).value.value().item() == 0.0 &&
                           class_neg_loss(c.matrix).value.value().item() == 0.0;
    }
    Tape tape;
    const auto y = labels(6, 5, rng);
    const BoundPrototypes c = bind(tape, init_prototypes(5, 3, 40.0, instance));
    const Var hv = tape.leaf(h);
    const double lambda = 0.05 * instance;
    const double dpp = dpp_loss(hv, c, y, {lambda, 0.0, 0.0}).total.value().item();
    const double ce_v = ce_loss(logits(c, hv), y).value().item();
    const double ct = center_term(hv, c.matrix, y).value().item();
    recomposition = std::max(recomposition, std::abs(dpp - (ce_v + lambda * ct)));
  }
  return {stream_equal && single_class_zero && recomposition <= 1e-10,
          format("zero-weight DPNP vs CE metrics stream %s over %zu epochs; "
                 "M=1 negative terms %s; DPP recomposition error %.1e <= 1e-10",
                 stream_equal ? "bitwise equal" : "DIFFERS", a.history.size(),
                 single_class_zero ? "exactly 0" : "NONZERO", recomposition)};
}

// ---- 6. renormalization contract --------------------------------------------

Outcome renormalization() {
  const ExperimentConfig config = load_config(kBenchmarkConfig);
  const TrainTestSplit data = load_data(config.data);
  std::size_t epochs = 0, violations = 0;
  double worst = 0.0;
  TrainHooks hooks;
  hooks.on_epoch_start = [&](std::size_t, const PrototypeBank& bank) {
    ++epochs;
    const double dev = max_norm_deviation(bank);
    worst = std::max(worst, dev);
    if (dev > 1e-9) ++violations;
  };
  train(init_mlp({{16, 64, 64, 3}, Activation::kRelu, derive_seed(1, 1)}),
        init_prototypes(10, 3, config.train.alpha, derive_seed(1, 2)), data.train,
        &data.test, config.train, hooks);
  return {violations == 0 && epochs == config.train.epochs,
          format("%zu violations over %zu epoch starts; max |norm - alpha|/alpha %.1e <= 1e-9",
                 violations, epochs, worst)};
}

// ---- 7. determinism -----------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism() {
  ExperimentConfig config = load_config(kBenchmarkConfig);
  std::ostringstream log;
  int codes = 0;
  for (const char* name : {"det_a", "det_b"}) {
    config.output_dir = kWorkDir / name;
    fs::remove_all(config.output_dir);
    codes += cmd_train(config, log);
  }
  std::size_t identical = 0;
  for (const char* f : {"metrics.csv", "prototypes.csv", "embeddings.csv"}) {
    const std::string a = slurp(kWorkDir / "det_a" / f), b = slurp(kWorkDir / "det_b" / f);
    identical += !a.empty() && a == b;
  }
  return {codes == 0 && identical == 3,
          format("%zu/3 of metrics.csv, prototypes.csv, embeddings.csv byte-identical "
                 "across two train runs",
                 identical)};
}

template <typename F>
void criterion(int id, const char* name, F&& f) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = f();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  report(id, name, o, seconds_since(start));
}

}  // namespace

int main() {
  fs::create_directories(kWorkDir);

  {
    const auto start = std::chrono::steady_clock::now();
    Outcome o = gradient_fidelity();
    const double t = seconds_since(start);
    if (t >= 30.0) o = {false, o.detail + format("; runtime %.1f s exceeds 30 s", t)};
    report(1, "gradient fidelity", o, t);
  }
  {
    const auto start = std::chrono::steady_clock::now();
    Outcome o = oracle_equivalence();
    const double t = seconds_since(start);
    if (t >= 10.0) o = {false, o.detail + format("; runtime %.1f s exceeds 10 s", t)};
    report(2, "oracle equivalence", o, t);
  }
  {
    const auto start = std::chrono::steady_clock::now();
    Outcome o = simplex_convergence();
    const double t = seconds_since(start);
    if (t >= 60.0) o = {false, o.detail + format("; runtime %.1f s exceeds 60 s", t)};
    report(3, "simplex convergence", o, t);
  }

  const auto compare_start = std::chrono::steady_clock::now();
  CompareRun compare;
  try {
    compare = run_compare();
  } catch (const std::exception& e) {
    compare.code = -1;
    std::printf("compare failed: %s\n", e.what());
  }
  const double compare_seconds = seconds_since(compare_start);
  report(4, "blobs-10-3 low-dimensional analog", benchmark_analog(compare), compare_seconds);

  criterion(5, "degeneration identities", degeneration);
  criterion(6, "renormalization contract", renormalization);
  criterion(7, "determinism", determinism);
  report(8, "comparison artifact", comparison_artifact(compare), compare_seconds);

  std::printf("%s: %d criterion(s) failed\n", failures ? "FAILED" : "ALL PASSED", failures);
  return failures ? 1 : 0;
}
