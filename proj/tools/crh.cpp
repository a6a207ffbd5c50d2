// crh: command-line front end for data generation, training, encoding and
// evaluation of collision-resistant hash codes.
//
// Exit codes: 0 ok, 2 usage, 3 bad or unreadable file, 4 numeric breakdown,
// 5 failed verification (gradcheck).

#include <openssl/evp.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "crh/crh.hpp"

namespace fs = std::filesystem;
using namespace crh;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitFormat = 3;
constexpr int kExitNumeric = 4;
constexpr int kExitVerify = 5;

struct VerificationFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// Writes through a temporary file in the same directory, then renames.
void write_atomic(const std::string& path, const std::string& bytes) {
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw FormatError("cannot write " + tmp.string());
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    os.flush();
    if (!os) throw FormatError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

class Manifest {
 public:
  explicit Manifest(std::string command) : command_(std::move(command)) {}

  Report& config() { return config_; }

  // Reads an input file and records its digest.
  std::string input(const std::string& path) {
    std::string bytes = slurp(path);
    io_.emplace_back("input." + path, sha256_hex(bytes));
    return bytes;
  }

  void output(const std::string& path, const std::string& bytes) {
    write_atomic(path, bytes);
    io_.emplace_back("output." + path, sha256_hex(bytes));
  }

  void write(const std::string& path) const {
    Report r;
    r.add("command", command_);
    for (const auto& [k, v] : config_.entries()) r.add("config." + k, v);
    for (const auto& [k, v] : io_) r.add(k, v);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    r.add("wall_time_s", secs);
    if (path.empty()) {
      std::cerr << r.str();
    } else {
      write_atomic(path, r.str());
    }
  }

 private:
  std::string command_;
  Report config_;
  std::vector<std::pair<std::string, std::string>> io_;
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

template <typename Fn>
std::string to_bytes(Fn&& fn) {
  std::ostringstream os(std::ios::binary);
  fn(os);
  return os.str();
}

template <typename T, typename Reader>
T parse_bytes(const std::string& bytes, Reader&& reader) {
  std::istringstream is(bytes, std::ios::binary);
  return reader(is);
}

std::string manifest_path(const std::string& flag, const std::string& primary) {
  if (!flag.empty()) return flag;
  return primary.empty() ? std::string() : primary + ".manifest";
}

void emit_report(Manifest& m, const std::string& out, const Report& r) {
  if (out.empty()) {
    std::cout << r.str();
  } else {
    m.output(out, r.str());
  }
}

std::string join_csv(const std::vector<EpochMetrics>& log) {
  std::string s = "epoch,loss,mean_norm_v,p_collision,map\n";
  for (const auto& m : log)
    s += std::to_string(m.epoch) + ',' + format_real(m.loss) + ',' + format_real(m.mean_norm_v) +
         ',' + format_real(m.p_collision) + ',' + format_real(m.map) + '\n';
  return s;
}

// ---------------------------------------------------------------------------

struct GenDataArgs {
  SynthSpec spec;
  std::string out, manifest;
};

void cmd_gen_data(const GenDataArgs& a) {
  Manifest m("gen-data");
  const Dataset d = generate(a.spec);
  m.config()
      .add("n_coarse", a.spec.n_coarse)
      .add("fines_per_coarse", a.spec.fines_per_coarse)
      .add("samples_per_fine", a.spec.samples_per_fine)
      .add("channels", a.spec.channels)
      .add("positions", a.spec.positions)
      .add("coarse_spread", a.spec.coarse_spread)
      .add("fine_spread", a.spec.fine_spread)
      .add("noise_sigma", a.spec.noise_sigma)
      .add("rare_patch_strength", a.spec.rare_patch_strength)
      .add("seed", a.spec.seed)
      .add("data_seed", derive_seed(a.spec.seed, seed_tag::kData))
      .add("N", d.size());
  m.output(a.out, to_bytes([&](std::ostream& os) { write_dataset(os, d); }));
  m.write(manifest_path(a.manifest, a.out));
}

struct TrainArgs {
  TrainConfig cfg;
  std::string loss_mode = "full", variant = "sign";
  bool no_csa = false;
  std::optional<double> preference;
  std::string data, model, codes, log, manifest;
};

void cmd_train(TrainArgs a) {
  Manifest m("train");
  TrainConfig& cfg = a.cfg;
  cfg.loss_mode = a.loss_mode == "full"   ? LossMode::nhd_full
                  : a.loss_mode == "only" ? LossMode::nhd_only
                                          : LossMode::l2_baseline;
  cfg.variant = a.variant == "codebook" ? Variant::codebook : Variant::sign;
  cfg.use_attention = !a.no_csa;
  cfg.ap.preference = a.preference;
  cfg.validate();

  const Dataset d = parse_bytes<Dataset>(m.input(a.data), read_dataset);
  m.config()
      .add("bits", cfg.bits)
      .add("epochs", cfg.epochs)
      .add("batch", cfg.batch_size)
      .add("lr", cfg.lr)
      .add("s", cfg.s)
      .add("s1", cfg.s1)
      .add("lambda_pseudo", cfg.lambda_pseudo)
      .add("lambda_att", cfg.lambda_att)
      .add("lambda_code", cfg.lambda_code)
      .add("pseudo_refresh", cfg.pseudo_refresh_epochs)
      .add("loss_mode", to_string(cfg.loss_mode))
      .add("variant", to_string(cfg.variant))
      .add("csa", cfg.use_attention ? 1 : 0)
      .add("anchor_sigma", cfg.anchor_sigma)
      .add("ap_damping", cfg.ap.damping)
      .add("ap_max_iter", cfg.ap.max_iter)
      .add("ap_window", cfg.ap.convergence_window)
      .add("ap_preference", cfg.ap.preference ? format_real(*cfg.ap.preference) : "median")
      .add("seed", cfg.seed)
      .add("init_seed", derive_seed(cfg.seed, seed_tag::kInit))
      .add("shuffle_seed", derive_seed(cfg.seed, seed_tag::kShuffle))
      .add("codebook_seed", derive_seed(cfg.seed, seed_tag::kCodebook))
      .add("augment_seed", derive_seed(cfg.seed, seed_tag::kAugment))
      .add("N", d.size());

  const TrainResult res = train(d, cfg);
  const PackedCodeSet codes = encode(d, res.state);
  m.output(a.model, to_bytes([&](std::ostream& os) { write_model(os, res.state); }));
  m.output(a.codes, to_bytes([&](std::ostream& os) { write_code_set(os, codes); }));
  m.output(a.log, join_csv(res.log));
  m.write(manifest_path(a.manifest, a.model));

  const EpochMetrics& last = res.log.back();
  Report r;
  r.add("epoch", last.epoch).add("loss", last.loss).add("mean_norm_v", last.mean_norm_v)
      .add("p_collision", last.p_collision).add("map", last.map);
  std::cout << r.str();
}

struct EncodeArgs {
  std::string data, model, out, manifest;
};

void cmd_encode(const EncodeArgs& a) {
  Manifest m("encode");
  const Dataset d = parse_bytes<Dataset>(m.input(a.data), read_dataset);
  const ModelState st = parse_bytes<ModelState>(m.input(a.model), read_model);
  if (st.channels() != d.channels) throw DomainError("model channels do not match the dataset");
  m.config().add("bits", st.bits()).add("variant", to_string(st.variant)).add("N", d.size());
  const PackedCodeSet codes = encode(d, st);
  m.output(a.out, to_bytes([&](std::ostream& os) { write_code_set(os, codes); }));
  m.write(manifest_path(a.manifest, a.out));
}

struct EvalArgs {
  std::string codes, data, query_codes, query_data, labels = "fine", out, manifest;
  std::optional<std::size_t> top_k;
};

void cmd_eval(const EvalArgs& a) {
  Manifest m("eval");
  const PackedCodeSet db = parse_bytes<PackedCodeSet>(m.input(a.codes), read_code_set);
  const Dataset dd = parse_bytes<Dataset>(m.input(a.data), read_dataset);
  if (!dd.has_labels()) throw DomainError("eval needs a labeled dataset");
  if (dd.size() != db.size()) throw DomainError("code and dataset sizes differ");
  const bool coarse = a.labels == "coarse";
  const auto& dbl = coarse ? dd.coarse_labels : dd.fine_labels;

  m.config().add("labels", a.labels).add("top_k", a.top_k ? std::to_string(*a.top_k) : "all");
  Report r;
  double map = 0.0;
  if (a.query_codes.empty() != a.query_data.empty())
    throw DomainError("--query-codes and --query-data go together");
  if (a.query_codes.empty()) {
    map = mean_ap(rank_by_hamming(db, db, a.top_k, true), dbl, dbl, a.top_k);
    r.add("protocol", "leave_one_out").add("queries", db.size());
  } else {
    const PackedCodeSet q = parse_bytes<PackedCodeSet>(m.input(a.query_codes), read_code_set);
    const Dataset qd = parse_bytes<Dataset>(m.input(a.query_data), read_dataset);
    if (!qd.has_labels() || qd.size() != q.size())
      throw DomainError("query dataset must be labeled and match the query codes");
    const auto& ql = coarse ? qd.coarse_labels : qd.fine_labels;
    map = mean_ap(rank_by_hamming(q, db, a.top_k), ql, dbl, a.top_k);
    r.add("protocol", "query_database").add("queries", q.size());
  }
  r.add("database", db.size()).add("bits", db.bits()).add("labels", a.labels)
      .add("top_k", a.top_k ? std::to_string(*a.top_k) : "all").add("map", map);
  emit_report(m, a.out, r);
  m.write(manifest_path(a.manifest, a.out));
}

struct CodesReportArgs {
  std::string codes, out, manifest;
  std::size_t pairs = 100000, bins = 20;
  std::uint64_t seed = 0;
};

void cmd_collision(const CodesReportArgs& a) {
  Manifest m("collision");
  const PackedCodeSet codes = parse_bytes<PackedCodeSet>(m.input(a.codes), read_code_set);
  Report r;
  r.add("n", codes.size()).add("bits", codes.bits());
  add_collision_report(r, collision_report(codes));
  emit_report(m, a.out, r);
  m.write(manifest_path(a.manifest, a.out));
}

void cmd_nhd_hist(const CodesReportArgs& a) {
  Manifest m("nhd-hist");
  const PackedCodeSet codes = parse_bytes<PackedCodeSet>(m.input(a.codes), read_code_set);
  const std::uint64_t seed = derive_seed(a.seed, seed_tag::kSampling);
  m.config().add("pairs", a.pairs).add("bins", a.bins).add("seed", a.seed).add("sampling_seed", seed);
  Report r;
  r.add("n", codes.size()).add("bits", codes.bits());
  add_histogram(r, nhd_histogram(codes, a.pairs, seed, a.bins));
  emit_report(m, a.out, r);
  m.write(manifest_path(a.manifest, a.out));
}

struct RandStatsArgs {
  std::size_t bits = 64, pairs = 100000;
  std::uint64_t seed = 0;
  std::string out, manifest;
};

void cmd_rand_stats(const RandStatsArgs& a) {
  Manifest m("rand-stats");
  const std::uint64_t seed = derive_seed(a.seed, seed_tag::kSampling);
  m.config().add("bits", a.bits).add("pairs", a.pairs).add("seed", a.seed).add("sampling_seed", seed);
  const RandomCodeStats st = random_code_stats(a.bits, a.pairs, seed);
  Report r;
  r.add("bits", a.bits).add("pairs", a.pairs).add("mean_nhd", st.mean_nhd)
      .add("std_nhd", st.std_nhd).add("collision_rate", st.collision_rate)
      .add("ideal_collision_rate", std::ldexp(1.0, -static_cast<int>(a.bits)))
      .add("analytic_std_nhd", 1.0 / std::sqrt(static_cast<double>(a.bits)));
  emit_report(m, a.out, r);
  m.write(manifest_path(a.manifest, a.out));
}

struct GradcheckArgs {
  GradcheckOptions opt;
  std::string out, manifest;
};

void cmd_gradcheck(const GradcheckArgs& a) {
  Manifest m("gradcheck");
  m.config().add("instances", a.opt.instances).add("h", a.opt.h).add("tolerance", a.opt.tolerance)
      .add("kink_margin", a.opt.kink_margin).add("seed", a.opt.seed);
  const std::vector<GradcheckResult> results = run_gradchecks(a.opt);
  Report r;
  const GradcheckResult* worst = nullptr;
  bool ok = true;
  for (const auto& g : results) {
    r.add(g.name + ".instances", g.instances).add(g.name + ".max_rel_error", g.max_rel_error)
        .add(g.name + ".status", g.passed() ? "pass" : "fail");
    ok = ok && g.passed();
    if (!worst || g.max_rel_error / g.tolerance > worst->max_rel_error / worst->tolerance) worst = &g;
  }
  r.add("worst_check", worst->name).add("worst_rel_error", worst->max_rel_error)
      .add("status", ok ? "pass" : "fail");
  emit_report(m, a.out, r);
  m.write(manifest_path(a.manifest, a.out));
  if (!ok)
    throw VerificationFailure("gradcheck failed: " + worst->name + " instance " +
                              std::to_string(worst->worst_instance) + " rel error " +
                              format_real(worst->max_rel_error));
}

struct AugmentArgs {
  double sigma = 0.25;
  std::uint64_t seed = 0;
  std::string data, out, manifest;
};

void cmd_augment(const AugmentArgs& a) {
  Manifest m("augment");
  Dataset d = parse_bytes<Dataset>(m.input(a.data), read_dataset);
  const std::uint64_t base = derive_seed(a.seed, seed_tag::kAugment);
  m.config().add("sigma", a.sigma).add("seed", a.seed).add("augment_seed", base).add("N", d.size());
  parallel_for(d.size(), [&](std::size_t i) {
    d.samples[i] = augment(d.samples[i], a.sigma, derive_seed(base, i));
  });
  m.output(a.out, to_bytes([&](std::ostream& os) { write_dataset(os, d); }));
  m.write(manifest_path(a.manifest, a.out));
}

struct ClusterArgs {
  double s1 = 8.0;
  APConfig ap;
  std::string data, model, out, manifest;
};

void cmd_cluster(const ClusterArgs& a) {
  Manifest m("cluster");
  a.ap.validate();
  const Dataset d = parse_bytes<Dataset>(m.input(a.data), read_dataset);
  const ModelState st = parse_bytes<ModelState>(m.input(a.model), read_model);
  if (st.channels() != d.channels) throw DomainError("model channels do not match the dataset");
  if (d.size() < 2) throw DomainError("clustering needs at least two samples");
  m.config().add("s1", a.s1).add("ap_damping", a.ap.damping).add("ap_max_iter", a.ap.max_iter)
      .add("ap_window", a.ap.convergence_window)
      .add("ap_preference", a.ap.preference ? format_real(*a.ap.preference) : "median");

  Matrix xhat(d.size(), st.bits());
  parallel_for(d.size(), [&](std::size_t i) {
    const detail::Representation rep = detail::represent(d.samples[i], st);
    try {
      tanh_normalize_into(rep.x, a.s1, xhat.row(i));
    } catch (const NumericError&) {
      throw NumericError("degenerate feature norm", i);
    }
  });
  const Clustering c = affinity_propagation(build_similarity(xhat, a.ap.preference), a.ap);
  Report r;
  r.add("n", d.size()).add("clusters", c.clusters()).add("iterations", c.iterations)
      .add("converged", c.converged ? 1 : 0);
  for (std::size_t k = 0; k < c.clusters(); ++k) r.add("exemplar." + std::to_string(k), c.exemplars[k]);
  for (std::size_t i = 0; i < d.size(); ++i) r.add("assign." + std::to_string(i), c.assignment[i]);
  emit_report(m, a.out, r);
  m.write(manifest_path(a.manifest, a.out));
}

void add_manifest_flag(CLI::App* sub, std::string& target) {
  sub->add_option("--manifest", target, "Manifest path (default: <output>.manifest)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Collision-resistant hashing toolkit"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* g = app.add_subcommand("gen-data", "Generate a synthetic CRHF dataset");
  g->add_option("--out", gen.out, "Dataset file")->required();
  g->add_option("--seed", gen.spec.seed);
  g->add_option("--n-coarse", gen.spec.n_coarse);
  g->add_option("--fines-per-coarse", gen.spec.fines_per_coarse);
  g->add_option("--samples-per-fine", gen.spec.samples_per_fine);
  g->add_option("--channels", gen.spec.channels);
  g->add_option("--positions", gen.spec.positions);
  g->add_option("--coarse-spread", gen.spec.coarse_spread);
  g->add_option("--fine-spread", gen.spec.fine_spread);
  g->add_option("--noise-sigma", gen.spec.noise_sigma);
  g->add_option("--rare-patch-strength", gen.spec.rare_patch_strength);
  add_manifest_flag(g, gen.manifest);

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train an encoder and write model, codes and metrics");
  t->add_option("--data", tr.data)->required();
  t->add_option("--model", tr.model, "CRHM output")->required();
  t->add_option("--codes", tr.codes, "CRHB output")->required();
  t->add_option("--log", tr.log, "Per-epoch metrics CSV")->required();
  t->add_option("--bits", tr.cfg.bits);
  t->add_option("--epochs", tr.cfg.epochs);
  t->add_option("--batch", tr.cfg.batch_size);
  t->add_option("--lr", tr.cfg.lr);
  t->add_option("--s", tr.cfg.s);
  t->add_option("--s1", tr.cfg.s1);
  t->add_option("--lambda-pseudo", tr.cfg.lambda_pseudo);
  t->add_option("--lambda-att", tr.cfg.lambda_att);
  t->add_option("--lambda-code", tr.cfg.lambda_code);
  t->add_option("--pseudo-refresh", tr.cfg.pseudo_refresh_epochs);
  t->add_option("--seed", tr.cfg.seed);
  t->add_option("--loss-mode", tr.loss_mode)->check(CLI::IsMember({"full", "only", "l2"}));
  t->add_option("--variant", tr.variant)->check(CLI::IsMember({"sign", "codebook"}));
  t->add_flag("--no-csa", tr.no_csa, "Global features only, no attention loss");
  t->add_option("--anchor-sigma", tr.cfg.anchor_sigma);
  t->add_option("--ap-damping", tr.cfg.ap.damping);
  t->add_option("--ap-max-iter", tr.cfg.ap.max_iter);
  t->add_option("--ap-window", tr.cfg.ap.convergence_window);
  t->add_option("--ap-preference", tr.preference);
  add_manifest_flag(t, tr.manifest);

  EncodeArgs en;
  auto* e = app.add_subcommand("encode", "Encode a dataset with a trained model");
  e->add_option("--data", en.data)->required();
  e->add_option("--model", en.model)->required();
  e->add_option("--out", en.out)->required();
  add_manifest_flag(e, en.manifest);

  EvalArgs ev;
  auto* v = app.add_subcommand("eval", "Hamming-ranking mAP");
  v->add_option("--codes", ev.codes, "Database codes")->required();
  v->add_option("--data", ev.data, "Labeled database dataset")->required();
  v->add_option("--query-codes", ev.query_codes);
  v->add_option("--query-data", ev.query_data);
  v->add_option("--labels", ev.labels)->check(CLI::IsMember({"fine", "coarse"}));
  v->add_option("--top-k", ev.top_k)->check(CLI::PositiveNumber);
  v->add_option("--out", ev.out, "Report file (default: stdout)");
  add_manifest_flag(v, ev.manifest);

  CodesReportArgs co;
  auto* c = app.add_subcommand("collision", "Collision census of a code set");
  c->add_option("--codes", co.codes)->required();
  c->add_option("--out", co.out, "Report file (default: stdout)");
  add_manifest_flag(c, co.manifest);

  CodesReportArgs nh;
  auto* h = app.add_subcommand("nhd-hist", "Histogram of pairwise code NHD");
  h->add_option("--codes", nh.codes)->required();
  h->add_option("--pairs", nh.pairs)->check(CLI::PositiveNumber);
  h->add_option("--bins", nh.bins)->check(CLI::PositiveNumber);
  h->add_option("--seed", nh.seed);
  h->add_option("--out", nh.out, "Report file (default: stdout)");
  add_manifest_flag(h, nh.manifest);

  RandStatsArgs rs;
  auto* r = app.add_subcommand("rand-stats", "NHD and collision statistics of random codes");
  r->add_option("--bits", rs.bits);
  r->add_option("--pairs", rs.pairs);
  r->add_option("--seed", rs.seed);
  r->add_option("--out", rs.out, "Report file (default: stdout)");
  add_manifest_flag(r, rs.manifest);

  GradcheckArgs gc;
  auto* k = app.add_subcommand("gradcheck", "Finite-difference check of every gradient");
  k->add_option("--instances", gc.opt.instances)->check(CLI::PositiveNumber);
  k->add_option("--seed", gc.opt.seed);
  k->add_option("--step", gc.opt.h, "Finite-difference step")->check(CLI::PositiveNumber);
  k->add_option("--tolerance", gc.opt.tolerance)->check(CLI::PositiveNumber);
  k->add_option("--out", gc.out, "Report file (default: stdout)");
  add_manifest_flag(k, gc.manifest);

  AugmentArgs au;
  auto* a = app.add_subcommand("augment", "Add seeded Gaussian noise to every sample");
  a->add_option("--data", au.data)->required();
  a->add_option("--out", au.out)->required();
  a->add_option("--sigma", au.sigma);
  a->add_option("--seed", au.seed);
  add_manifest_flag(a, au.manifest);

  ClusterArgs cl;
  std::optional<double> cl_pref;
  auto* u = app.add_subcommand("cluster", "Affinity propagation over a model's saturated features");
  u->add_option("--data", cl.data)->required();
  u->add_option("--model", cl.model)->required();
  u->add_option("--s1", cl.s1);
  u->add_option("--ap-damping", cl.ap.damping);
  u->add_option("--ap-max-iter", cl.ap.max_iter);
  u->add_option("--ap-window", cl.ap.convergence_window);
  u->add_option("--ap-preference", cl_pref);
  u->add_option("--out", cl.out, "Report file (default: stdout)");
  add_manifest_flag(u, cl.manifest);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::CallForAllHelp& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return kExitUsage;
  }

  try {
    if (*g) cmd_gen_data(gen);
    if (*t) cmd_train(tr);
    if (*e) cmd_encode(en);
    if (*v) cmd_eval(ev);
    if (*c) cmd_collision(co);
    if (*h) cmd_nhd_hist(nh);
    if (*r) cmd_rand_stats(rs);
    if (*k) cmd_gradcheck(gc);
    if (*a) cmd_augment(au);
    if (*u) {
      cl.ap.preference = cl_pref;
      cmd_cluster(cl);
    }
  } catch (const DomainError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitUsage;
  } catch (const FormatError& err) {
    std::cerr << "format error: " << err.what() << '\n';
    return kExitFormat;
  } catch (const NumericError& err) {
    std::cerr << "numeric error: " << err.what();
    if (err.sample()) std::cerr << " (sample " << *err.sample() << ')';
    std::cerr << '\n';
    return kExitNumeric;
  } catch (const VerificationFailure& err) {
    std::cerr << err.what() << '\n';
    return kExitVerify;
  } catch (const fs::filesystem_error& err) {
    std::cerr << "file error: " << err.what() << '\n';
    return kExitFormat;
  }
  return 0;
}
