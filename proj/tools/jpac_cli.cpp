// jpac: generate instances, solve, enumerate and benchmark.
//
// Exit codes: 0 success, 1 runtime or I/O failure, 2 usage error.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "jpac/bench.hpp"
#include "jpac/channel.hpp"
#include "jpac/deflation.hpp"
#include "jpac/io.hpp"
#include "jpac/oracle.hpp"

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// JPAC_SEED, when set, wins over --seed.
std::uint64_t master_seed(std::uint64_t flag_value) {
  const char* env = std::getenv("JPAC_SEED");
  if (env == nullptr || *env == '\0') return flag_value;
  try {
    std::size_t used = 0;
    const auto v = std::stoull(env, &used);
    if (used != std::string(env).size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw UsageError(std::string("JPAC_SEED must be a non-negative integer, got '") + env + "'");
  }
}

std::string join_links(const jpac::LinkSet& set) {
  std::ostringstream os;
  for (std::size_t i = 0; i < set.size(); ++i) os << (i ? "," : "") << set[i] + 1;
  return os.str();
}

std::string join_values(const jpac::Vector& v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits);
  for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? "," : "") << v(i);
  return os.str();
}

struct GenArgs {
  std::size_t links = 4;
  double spread = 0.0;
  std::optional<std::size_t> samples;
  bool auto_samples = false;
  double epsilon = 0.1;
  double delta = 0.05;
  std::optional<std::size_t> k_supported;
  std::uint64_t seed = 1;
  double gamma_db = 2.0;
  double noise_dbm = -90.0;
  std::string out;
};

int cmd_gen(const GenArgs& a) {
  if (!(a.spread >= 0.0 && a.spread < 1.0))
    throw UsageError("--spread must satisfy 0 <= S < 1 (perturbations must keep gains positive)");
  if (a.links < 1) throw UsageError("--links must be >= 1");
  if (a.samples && a.auto_samples) throw UsageError("--samples and --auto-samples are mutually exclusive");
  if (a.samples && *a.samples < 1) throw UsageError("--samples must be >= 1");

  std::size_t N = 0;
  if (a.samples) {
    N = *a.samples;
  } else {
    try {
      N = jpac::required_sample_size(a.epsilon, a.delta, a.k_supported.value_or(a.links));
    } catch (const std::domain_error& e) {
      throw UsageError(e.what());
    }
  }

  const std::uint64_t seed = master_seed(a.seed);
  jpac::io::Instance inst;
  inst.seed = seed;
  inst.gamma_db = a.gamma_db;
  inst.noise_dbm = a.noise_dbm;
  inst.nominal = jpac::generate_nominal(a.links, jpac::nominal_seed(seed, a.links, 0), jpac::Geometry{}, a.gamma_db,
                                        a.noise_dbm);
  inst.samples = jpac::sample_perturbed(inst.nominal, N, a.spread, jpac::perturbation_seed(seed, a.links, 0));
  jpac::io::write_instance(a.out, inst);
  std::cout << "wrote " << a.out << ": K=" << a.links << " N=" << N << " S=" << a.spread << " seed=" << seed << '\n';
  return 0;
}

struct SolveArgs {
  std::string instance;
  std::string algo = "pabb";
  std::string removal = "footprint";
  bool oracle_check = false;
  std::size_t subgrad_iters = 20000;
  std::string out;
};

jpac::RemovalStrategy parse_strategy(const std::string& s) {
  if (s == "footprint") return jpac::RemovalStrategy::footprint;
  if (s == "excess") return jpac::RemovalStrategy::excess;
  if (s == "violation") return jpac::RemovalStrategy::violation;
  throw UsageError("unknown removal strategy '" + s + "'");
}

int cmd_solve(const SolveArgs& a) {
  jpac::DeflationConfig cfg;
  cfg.strategy = parse_strategy(a.removal);
  if (a.algo == "pabb")
    cfg.solver = jpac::RelaxationSolver::pabb;
  else if (a.algo == "subgrad")
    cfg.solver = jpac::RelaxationSolver::subgradient;
  else
    throw UsageError("unknown algorithm '" + a.algo + "'");
  cfg.subgradient_iters = a.subgrad_iters;

  const auto inst = jpac::io::read_instance(a.instance);
  const auto problem = jpac::normalize(inst.samples, inst.nominal);
  const auto res = jpac::deflate(problem, cfg);

  jpac::Vector watts(res.q.size());
  for (std::size_t i = 0; i < res.supported.size(); ++i)
    watts(static_cast<Eigen::Index>(i)) =
        res.q(static_cast<Eigen::Index>(i)) * inst.nominal.budget(static_cast<Eigen::Index>(res.supported[i]));

  std::cout << "supported: " << join_links(res.supported) << "; q = " << join_values(res.q, 3) << '\n';
  std::cout << "power_w: " << join_values(watts, 6) << " (total " << res.total_power << ")\n";
  for (const auto& r : res.removals)
    std::cout << "removed link " << r.link + 1 << " (" << jpac::to_string(r.phase) << ", score " << r.score << ")\n";
  if (!res.readmitted.empty()) std::cout << "readmitted: " << join_links(res.readmitted) << '\n';

  auto doc = jpac::io::deflation_to_json(res, inst.nominal.budget);
  doc["algo"] = a.algo;
  doc["removal"] = a.removal;
  doc["seed"] = inst.seed;
  if (a.oracle_check) {
    if (problem.links() > 12) throw UsageError("--oracle-check needs K <= 12");
    const auto oracle = jpac::enumerate_optimal(problem);
    const auto gap = static_cast<long>(oracle.m_star) - static_cast<long>(res.supported.size());
    std::cout << "oracle: m_star = " << oracle.m_star << ", gap = " << gap << '\n';
    doc["oracle"] = jpac::io::oracle_to_json(oracle);
    doc["oracle_gap"] = gap;
  }
  if (!a.out.empty()) jpac::io::write_text_file(a.out, doc.dump(1) + "\n");
  return 0;
}

struct EnumerateArgs {
  std::string instance;
  std::size_t max_k = 12;
  std::string out;
};

int cmd_enumerate(const EnumerateArgs& a) {
  const auto inst = jpac::io::read_instance(a.instance);
  const auto problem = jpac::normalize(inst.samples, inst.nominal);
  if (problem.links() > a.max_k) throw UsageError("instance has more links than --max-k allows");
  const auto res = jpac::enumerate_optimal(problem, a.max_k);
  std::cout << "m_star: " << res.m_star << '\n';
  for (const auto& set : res.best_sets)
    std::cout << "  {" << join_links(set) << "} power_w " << res.power_per_set.at(set) << '\n';
  std::cout << "subsets checked: " << res.subsets_checked << '\n';
  if (!a.out.empty()) jpac::io::write_text_file(a.out, jpac::io::oracle_to_json(res).dump(1) + "\n");
  return 0;
}

struct BenchArgs {
  std::vector<std::size_t> links{4};
  std::vector<double> spreads{0.0, 0.1, 0.2};
  std::size_t runs = 200;
  std::uint64_t seed = 1;
  std::vector<std::string> algos;
  std::optional<std::size_t> samples;
  unsigned jobs = 1;
  bool timings = false;
  std::string out_dir = ".";
};

int cmd_bench(const BenchArgs& a) {
  jpac::BenchConfig cfg;
  cfg.links = a.links;
  cfg.spreads = a.spreads;
  cfg.runs = a.runs;
  cfg.samples = a.samples;
  cfg.jobs = a.jobs;
  cfg.timings = a.timings;
  cfg.master_seed = master_seed(a.seed);
  try {
    for (const auto& s : a.algos) cfg.algorithms.push_back(jpac::parse_algorithm(s));
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  const auto out = jpac::run_montecarlo(cfg);

  namespace fs = std::filesystem;
  const fs::path dir(a.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create '" + dir.string() + "': " + ec.message());
  jpac::io::write_text_file((dir / "results.csv").string(), jpac::io::records_to_csv(out.records));
  jpac::io::write_text_file((dir / "summary.json").string(),
                            jpac::io::summary_to_json(out.summary, cfg).dump(1) + "\n");
  for (const auto& [name, text] : jpac::io::figure_data(out.summary))
    jpac::io::write_text_file((dir / name).string(), text);

  std::cout << "N=" << cfg.sample_count() << " runs=" << cfg.runs << " seed=" << cfg.master_seed << '\n';
  for (const auto& c : out.summary.cells) {
    std::cout << "K=" << c.K << " S=" << c.spread << ' ' << jpac::to_string(c.algo) << ": " << c.distribution
              << "  mean " << std::fixed << std::setprecision(3) << c.mean_supported << std::defaultfloat
              << std::setprecision(6) << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint power and admission control under channel uncertainty"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "generate a random instance file");
  g->add_option("--links", gen.links, "number of links K");
  g->add_option("--spread", gen.spread, "perturbation spread S, 0 <= S < 1");
  g->add_option("--samples", gen.samples, "number of channel samples N");
  g->add_flag("--auto-samples", gen.auto_samples, "derive N from epsilon, delta and k-supported");
  g->add_option("--epsilon", gen.epsilon, "outage tolerance");
  g->add_option("--delta", gen.delta, "confidence parameter");
  g->add_option("--k-supported", gen.k_supported, "link count used in the sample-size bound (default K)");
  g->add_option("--seed", gen.seed, "master seed (JPAC_SEED overrides)");
  g->add_option("--gamma-db", gen.gamma_db, "SINR target in dB");
  g->add_option("--noise-dbm", gen.noise_dbm, "noise power in dBm");
  g->add_option("--out", gen.out, "output instance file")->required();

  SolveArgs solve;
  auto* s = app.add_subcommand("solve", "run deflation on an instance");
  s->add_option("instance", solve.instance, "instance file")->required();
  s->add_option("--algo", solve.algo, "pabb or subgrad");
  s->add_option("--removal", solve.removal, "footprint, excess or violation");
  s->add_flag("--oracle-check", solve.oracle_check, "compare against exhaustive enumeration");
  s->add_option("--subgrad-iters", solve.subgrad_iters, "subgradient iteration count");
  s->add_option("--out", solve.out, "result JSON file");

  EnumerateArgs en;
  auto* e = app.add_subcommand("enumerate", "find the maximum admissible set by enumeration");
  e->add_option("instance", en.instance, "instance file")->required();
  e->add_option("--max-k", en.max_k, "refuse instances with more links");
  e->add_option("--out", en.out, "result JSON file");

  BenchArgs bench;
  auto* b = app.add_subcommand("bench", "Monte-Carlo benchmark");
  b->add_option("--links", bench.links, "comma-separated K values")->delimiter(',');
  b->add_option("--spreads", bench.spreads, "comma-separated S values")->delimiter(',');
  b->add_option("--runs", bench.runs, "runs per K");
  b->add_option("--seed", bench.seed, "master seed (JPAC_SEED overrides)");
  b->add_option("--algos", bench.algos, "pabb, subgrad, benchmark (default: benchmark at S=0, pabb otherwise)")
      ->delimiter(',');
  b->add_option("--samples", bench.samples, "channel samples N (default from epsilon=0.1, delta=0.05, K=10)");
  b->add_option("--jobs", bench.jobs, "worker threads");
  b->add_flag("--timings", bench.timings, "record wall times (output is then not reproducible)");
  b->add_option("--out-dir", bench.out_dir, "directory for CSV, summary and figure data");

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
    if (*g) return cmd_gen(gen);
    if (*s) return cmd_solve(solve);
    if (*e) return cmd_enumerate(en);
    if (*b) return cmd_bench(bench);
  } catch (const UsageError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
