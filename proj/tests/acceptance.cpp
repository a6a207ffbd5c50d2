#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include "crh/crh.hpp"
#include "support/benchmark.hpp"
#include "support/oracles.hpp"

using namespace crh;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [fail: " << what << "]";
    }
  }
};

std::string fmt(double x) { return format_real(x); }

// Every benchmark configuration is trained at most once.
const TrainResult& run(const TrainConfig& cfg) {
  static std::map<std::string, TrainResult> cache;
  std::ostringstream key;
  key << cfg.bits << '/' << to_string(cfg.loss_mode) << '/' << to_string(cfg.variant) << '/'
      << cfg.seed << '/' << cfg.lambda_pseudo;
  auto it = cache.find(key.str());
  if (it == cache.end()) {
    const Clock::time_point t0 = Clock::now();
    it = cache.emplace(key.str(), train(bench::data(), cfg)).first;
    std::cerr << "  trained " << key.str() << " in " << fmt(seconds_since(t0)) << " s\n";
  }
  return it->second;
}

const TrainResult& run(std::size_t bits, LossMode mode, std::uint64_t seed,
                       Variant variant = Variant::sign, double lambda_pseudo = 1.0) {
  TrainConfig c = bench::config(bits, mode, seed, variant);
  c.lambda_pseudo = lambda_pseudo;
  return run(c);
}

void criterion1(Outcome& o) {
  const double ideal = std::ldexp(1.0, -12);
  int within = 0;
  double slowest = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Clock::time_point t0 = Clock::now();
    const RandomCodeStats st = random_code_stats(12, 1000000, derive_seed(seed, seed_tag::kSampling));
    slowest = std::max(slowest, seconds_since(t0));
    within += std::abs(st.collision_rate - ideal) <= 0.2 * ideal;
  }
  o.detail << "seeds within 20%: " << within << "/20, slowest run " << fmt(slowest) << " s";
  o.check(within >= 19, "fewer than 95% of seeds within 20%");
  o.check(slowest < 5.0, "runtime");
}

void criterion2(Outcome& o) {
  const Clock::time_point t0 = Clock::now();
  const RandomCodeStats st = random_code_stats(64, 100000, derive_seed(0, seed_tag::kSampling));
  const double secs = seconds_since(t0);
  o.detail << "mean " << fmt(st.mean_nhd) << ", std " << fmt(st.std_nhd) << ", " << fmt(secs) << " s";
  o.check(st.mean_nhd >= 0.995 && st.mean_nhd <= 1.005, "mean");
  o.check(st.std_nhd >= 0.112 && st.std_nhd <= 0.138, "std");
  o.check(secs < 1.0, "runtime");
}

int run_cli(const std::string& args, const fs::path& cwd) {
  const std::string cmd = "cd '" + cwd.string() + "' && " + std::string(CRH_CLI_PATH) + " " + args +
                          " >stdout.txt 2>stderr.txt";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void criterion3(Outcome& o) {
  const Clock::time_point t0 = Clock::now();
  GradcheckOptions opt;
  opt.instances = 100;
  opt.h = 1e-5;
  const std::vector<GradcheckResult> results = run_gradchecks(opt);
  double worst = 0.0;
  std::string worst_name;
  for (const GradcheckResult& r : results) {
    o.check(r.passed() && r.instances >= 100 && r.max_rel_error < 1e-4, r.name);
    if (r.max_rel_error >= worst) {
      worst = r.max_rel_error;
      worst_name = r.name;
    }
  }
  const fs::path dir = fs::temp_directory_path() / ("crh_acc_gc_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const int code = run_cli("gradcheck --instances 100 --step 1e-5 --out g.txt", dir);
  fs::remove_all(dir);
  const double secs = seconds_since(t0);
  o.detail << results.size() << " checks, worst " << worst_name << " " << fmt(worst)
           << ", cli exit " << code << ", " << fmt(secs) << " s";
  o.check(code == 0, "gradcheck exit code");
  o.check(secs < 30.0, "runtime");
}

void criterion4(Outcome& o) {
  std::mt19937_64 rng(derive_seed(4, seed_tag::kSampling));
  std::uniform_real_distribution<double> dist(0.0, 2.0), scale(0.5, 16.0);
  std::size_t ddii_bad = 0, ddij_bad = 0, checked = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t m = 1 + rng() % 64;
    RealVector neg(m);
    for (double& x : neg) x = dist(rng);
    const double dii = dist(rng), s = scale(rng);
    ddii_bad += !(loss_nhd_ddii(dii, neg, s) >= 0.0);
    for (std::size_t j = 0; j < m; ++j) {
      if (std::abs(neg[j] - 1.0) <= 1e-9) continue;
      ++checked;
      const double g = loss_nhd_ddij(dii, neg, j, s);
      const double want = neg[j] > 1.0 ? 1.0 : -1.0;
      ddij_bad += !((g > 0.0 ? 1.0 : g < 0.0 ? -1.0 : 0.0) == want);
    }
  }
  o.detail << "1000 configurations, " << checked << " negative terms, violations d_ii " << ddii_bad
           << ", d_ij " << ddij_bad;
  o.check(ddii_bad == 0, "positive-pair gradient sign");
  o.check(ddij_bad == 0, "negative-pair gradient sign");
}

void criterion5(Outcome& o) {
  std::mt19937_64 rng(derive_seed(5, seed_tag::kSampling));
  std::size_t collision_bad = 0;
  double map_err = 0.0;
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 2 + rng() % 511, bits = 1 + rng() % 12;
    const PackedCodeSet codes = oracle::random_codes(bits, n, rng, 1 + rng() % 64);
    collision_bad += collision_probability(codes) != oracle::collision_pairs(codes);

    const std::size_t nq = 1 + rng() % 64, nd = 1 + rng() % 64, qbits = 1 + rng() % 16;
    const PackedCodeSet q = oracle::random_codes(qbits, nq, rng, 0);
    const PackedCodeSet db = oracle::random_codes(qbits, nd, rng, 0);
    std::vector<std::uint32_t> ql(nq), dl(nd);
    const std::uint32_t classes = 1 + rng() % 4;
    for (auto& x : ql) x = static_cast<std::uint32_t>(rng() % classes);
    for (auto& x : dl) x = static_cast<std::uint32_t>(rng() % classes);
    dl[0] = ql[0];
    const double got = mean_ap(rank_by_hamming(q, db), ql, dl);
    const double want = oracle::mean_ap(q, ql, db, dl, false);
    map_err = std::max(map_err, std::abs(got - want));
  }
  o.detail << "50 instances, collision mismatches " << collision_bad << ", max mAP error " << fmt(map_err);
  o.check(collision_bad == 0, "collision probability");
  o.check(map_err <= 1e-12, "mAP");
}

int majority(const std::function<bool(std::uint64_t)>& trial, std::ostringstream& log) {
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const bool ok = trial(seed);
    wins += ok;
    log << (ok ? '+' : '-');
  }
  return wins;
}

void criterion6(Outcome& o) {
  const Clock::time_point t0 = Clock::now();
  const TrainResult& full = run(16, LossMode::nhd_full, 0);
  const double map0 = full.log.front().map, map = full.log.back().map;
  const double p0 = full.log.front().p_collision, p = full.log.back().p_collision;
  o.detail << "a: mAP " << fmt(map) << " (epoch 0 " << fmt(map0) << ")";
  o.check(map >= 0.70 && map - map0 >= 0.30, "6a");
  o.detail << "; b: P_coll " << fmt(p) << " vs untrained " << fmt(p0);
  o.check(p <= 0.1 * p0, "6b");

  std::ostringstream c_log, d_log;
  const int c = majority(
      [](std::uint64_t seed) {
        const EpochMetrics& f = run(12, LossMode::nhd_full, seed).log.back();
        const EpochMetrics& n = run(12, LossMode::nhd_only, seed).log.back();
        std::cerr << "  seed " << seed << " full P " << fmt(f.p_collision) << " mAP " << fmt(f.map)
                  << " | only P " << fmt(n.p_collision) << " mAP " << fmt(n.map) << '\n';
        return n.p_collision <= f.p_collision && f.map >= n.map;
      },
      c_log);
  o.detail << "; c: " << c << "/5 " << c_log.str();
  o.check(c >= 3, "6c");
  const int d = majority(
      [](std::uint64_t seed) {
        const double p1 = run(12, LossMode::nhd_full, seed).log.back().p_collision;
        const double p2 = run(12, LossMode::nhd_full, seed, Variant::sign, 2.0).log.back().p_collision;
        std::cerr << "  seed " << seed << " P(lambda 1) " << fmt(p1) << " P(lambda 2) " << fmt(p2) << '\n';
        return p2 >= p1;
      },
      d_log);
  o.detail << "; d: " << d << "/5 " << d_log.str();
  o.check(d >= 3, "6d");
  const double secs = seconds_since(t0);
  o.detail << "; " << fmt(secs) << " s";
  o.check(secs < 600.0, "runtime");
}

void criterion7(Outcome& o) {
  const TrainResult& l2 = run(16, LossMode::l2_baseline, 0);
  const double n0 = l2.log.front().mean_norm_v, n1 = l2.log.back().mean_norm_v;
  const double vhat = run(16, LossMode::nhd_full, 0).log.back().mean_abs_vhat;
  o.detail << "baseline norm " << fmt(n0) << " -> " << fmt(n1) << ", full mean |v_hat| " << fmt(vhat);
  o.check(n1 < 0.5 * n0, "norm shrinkage");
  o.check(vhat >= 0.95, "saturation");
}

void criterion8(Outcome& o) {
  const TrainResult& only = run(16, LossMode::nhd_only, 0);
  const double band = bench::fraction_in_band(encode(bench::data(), only.state), 0.5, 1.5);
  const double twin = bench::twin_nhd(bench::data(), only.state, SynthSpec{}.noise_sigma / 2.0, 0);
  o.detail << "inter-instance in [0.5,1.5]: " << fmt(band) << ", intra-instance NHD " << fmt(twin);
  o.check(band >= 0.9, "concentration");
  o.check(twin <= 0.25, "augmentation stability");
}

void criterion9(Outcome& o) {
  const TrainResult& cb = run(16, LossMode::nhd_full, 0, Variant::codebook);
  o.detail << "run mAP " << fmt(cb.log.back().map) << " P_coll " << fmt(cb.log.back().p_collision);
  o.check(cb.log.size() == 101 && cb.state.codebooks.has_value(), "standard run");

  std::mt19937_64 rng(derive_seed(9, seed_tag::kSampling));
  std::normal_distribution<double> g(0.0, 1.0);
  CodebookSet set{Matrix(24, 6), Matrix(24, 6)};
  for (double& x : set.mu0.flat()) x = g(rng);
  for (double& x : set.mu1.flat()) x = g(rng);
  std::size_t disagree = 0;
  for (int t = 0; t < 10000; ++t) {
    RealVector z(6);
    for (double& x : z) x = 3.0 * g(rng);
    const RealVector d = deltas(z, set);
    const BitCode c = codebook_encode(z, set);
    for (std::size_t k = 0; k < 24; ++k) disagree += c.bit(k) != (d[k] > 0.0);
  }
  o.detail << "; encode/deltas disagreements " << disagree;
  o.check(disagree == 0, "encode agreement");

  double min_dec = INFINITY;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 1 + rng() % 20, dim = 1 + rng() % 6, bits = 1 + rng() % 6;
    CodebookSet r{Matrix(bits, dim), Matrix(bits, dim)};
    for (double& x : r.mu0.flat()) x = g(rng);
    for (double& x : r.mu1.flat()) x = g(rng);
    Matrix z(n, dim);
    for (double& x : z.flat()) x = 2.0 * g(rng);
    min_dec = std::min(min_dec, dec_loss(z, r).value);
  }
  CodebookSet sym{Matrix(3, 2), Matrix(3, 2)};
  for (std::size_t k = 0; k < 3; ++k) {
    sym.mu0(k, 0) = -1.0 - static_cast<double>(k);
    sym.mu1(k, 0) = 1.0 + static_cast<double>(k);
  }
  Matrix zs(4, 2);
  for (std::size_t j = 0; j < 4; ++j) zs(j, 1) = static_cast<double>(j) - 1.5;
  const double sym_value = dec_loss(zs, sym).value;
  o.detail << "; min DEC " << fmt(min_dec) << ", symmetric DEC " << fmt(sym_value);
  o.check(min_dec >= 0.0, "DEC non-negative");
  o.check(std::abs(sym_value) <= 1e-15, "DEC symmetric zero");

  std::ostringstream log;
  const int wins = majority(
      [](std::uint64_t seed) {
        const double pf = run(12, LossMode::nhd_full, seed, Variant::codebook).log.back().p_collision;
        const double pn = run(12, LossMode::nhd_only, seed, Variant::codebook).log.back().p_collision;
        std::cerr << "  seed " << seed << " codebook P full " << fmt(pf) << " only " << fmt(pn) << '\n';
        return pn <= pf;
      },
      log);
  o.detail << "; ablation " << wins << "/5 " << log.str();
  o.check(wins >= 3, "codebook ablation");
}

std::map<std::string, std::string> output_digests(const fs::path& manifest) {
  std::map<std::string, std::string> out;
  std::ifstream is(manifest);
  std::string line;
  while (std::getline(is, line))
    if (line.rfind("output.", 0) == 0) {
      const auto tab = line.find('\t');
      out[line.substr(0, tab)] = line.substr(tab + 1);
    }
  return out;
}

void criterion10(Outcome& o) {
  struct Command {
    std::string name, args, manifest;
  };
  const std::vector<Command> commands = {
      {"gen-data", "gen-data --out d.crhf", "d.crhf.manifest"},
      {"augment", "augment --data d.crhf --out a.crhf --sigma 0.25 --seed 3", "a.crhf.manifest"},
      {"train", "train --data d.crhf --model m.crhm --codes m.crhb --log m.csv --bits 12 --epochs 3",
       "m.crhm.manifest"},
      {"encode", "encode --data a.crhf --model m.crhm --out e.crhb", "e.crhb.manifest"},
      {"eval", "eval --codes m.crhb --data d.crhf --out eval.txt", "eval.txt.manifest"},
      {"collision", "collision --codes m.crhb --out coll.txt", "coll.txt.manifest"},
      {"nhd-hist", "nhd-hist --codes m.crhb --pairs 5000 --seed 2 --out hist.txt", "hist.txt.manifest"},
      {"rand-stats", "rand-stats --bits 12 --pairs 100000 --seed 1 --out rand.txt", "rand.txt.manifest"},
      {"gradcheck", "gradcheck --instances 100 --out gc.txt", "gc.txt.manifest"},
      {"cluster", "cluster --data d.crhf --model m.crhm --out cl.txt", "cl.txt.manifest"},
  };
  const fs::path base = fs::temp_directory_path() / ("crh_acc_det_" + std::to_string(::getpid()));
  std::vector<fs::path> dirs = {base / "1", base / "2"};
  for (const fs::path& d : dirs) fs::create_directories(d);
  int identical = 0;
  for (const Command& c : commands) {
    bool ok = true;
    std::map<std::string, std::string> digests[2];
    for (int r = 0; r < 2; ++r) {
      ok = ok && run_cli(c.args, dirs[r]) == 0;
      digests[r] = output_digests(dirs[r] / c.manifest);
    }
    ok = ok && !digests[0].empty() && digests[0] == digests[1];
    identical += ok;
    if (!ok) o.detail << c.name << " differs; ";
  }
  fs::remove_all(base);
  o.detail << identical << "/" << commands.size() << " commands byte-identical";
  o.check(identical == 10, "determinism");
}

}  // namespace

int main() {
  const Clock::time_point t0 = Clock::now();
  const std::vector<std::pair<int, void (*)(Outcome&)>> criteria = {
      {1, criterion1}, {2, criterion2}, {3, criterion3}, {4, criterion4},  {5, criterion5},
      {6, criterion6}, {7, criterion7}, {8, criterion8}, {9, criterion9}, {10, criterion10},
  };
  int failed = 0;
  for (const auto& [id, fn] : criteria) {
    Outcome o;
    try {
      fn(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " [exception: " << e.what() << "]";
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << ": " << o.detail.str() << std::endl;
  }
  std::cout << "suite runtime " << fmt(seconds_since(t0)) << " s, " << failed << " failed" << std::endl;
  return failed == 0 ? 0 : 1;
}
