// Command-line front end: experiment runner (CSV), quantile runner (CSV),
// and the debug utilities (cover viewer, privacy checker).
//
// Exit codes: 0 success, 2 usage error, 3 capacity error, 4 failed
// --assert check.  All numeric output uses '.' decimals regardless of locale,
// and a run is byte-identical when repeated with the same configuration.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ldpr/consistency.hpp"
#include "ldpr/errors.hpp"
#include "ldpr/harness.hpp"
#include "ldpr/query_engine.hpp"

namespace {

using nlohmann::json;

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string fmt_fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out.push_back(sep);
    out += parts[i];
  }
  return out;
}

// Output resolution: empty path means stdout; a relative path lands in
// $LDPR_OUT_DIR when that is set.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (path.empty()) return;
    std::string full = path;
    const char* dir = std::getenv("LDPR_OUT_DIR");
    if (dir != nullptr && *dir != '\0' && path.front() != '/') {
      full = std::string(dir) + "/" + path;
    }
    file_.open(full);
    if (!file_) throw std::runtime_error("cannot open output file " + full);
  }
  std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

 private:
  std::ofstream file_;
};

struct ExperimentFlags {
  int d_exp = 8;
  int n_exp = 20;
  std::vector<std::string> methods = {"flat", "hh:4", "hh_c:4", "haar"};
  std::vector<std::uint32_t> branchings;
  double p = 0.4;
  double height = -1.0;
  std::uint64_t stride = 1;
  int reps = 5;
  std::uint64_t seed = 1;
  bool slow = false;
  bool overall_only = false;
  std::string out;
};

void add_experiment_flags(CLI::App* cmd, ExperimentFlags& flags) {
  cmd->add_option("--d-exp", flags.d_exp, "Domain size exponent, d = 2^x")
      ->check(CLI::Range(1, 22))
      ->capture_default_str();
  cmd->add_option("--n-exp", flags.n_exp, "Population exponent, n = 2^x")
      ->check(CLI::Range(1, 40))
      ->capture_default_str();
  cmd->add_option("--methods", flags.methods,
                  "Comma-separated methods: flat, hh:B, hh_c:B, haar")
      ->delimiter(',')
      ->capture_default_str();
  cmd->add_option("--b", flags.branchings,
                  "Branching factors used to expand a bare hh or hh_c entry")
      ->delimiter(',');
  cmd->add_option("--p", flags.p, "Data distribution center, fraction of d")
      ->capture_default_str();
  cmd->add_option("--height", flags.height,
                  "Data distribution spread; negative means d/10")
      ->capture_default_str();
  cmd->add_option("--stride", flags.stride,
                  "Query-start stride (1 = every start; capped at d <= 2^16)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--reps", flags.reps, "Independent repetitions")
      ->check(CLI::Range(1, 1000))
      ->capture_default_str();
  cmd->add_option("--seed", flags.seed, "Master seed")->capture_default_str();
  cmd->add_flag("--slow", flags.slow,
                "Use the per-user reference paths instead of the binomial "
                "shortcuts");
  cmd->add_flag("--overall-only", flags.overall_only,
                "Emit only the range_length=0 summary rows");
  cmd->add_option("--out", flags.out,
                  "Output file (default stdout; relative paths resolve "
                  "against $LDPR_OUT_DIR)");
}

std::vector<ldpr::MethodSpec> resolve_methods(const ExperimentFlags& flags) {
  std::vector<ldpr::MethodSpec> out;
  for (const auto& name : flags.methods) {
    if ((name == "hh" || name == "hh_c") && !flags.branchings.empty()) {
      for (const auto b : flags.branchings) {
        out.push_back(ldpr::parse_method(name + ":" + std::to_string(b)));
      }
    } else {
      out.push_back(ldpr::parse_method(name));
    }
  }
  if (out.empty()) throw std::invalid_argument("no methods requested");
  return out;
}

ldpr::ExperimentConfig to_config(const ExperimentFlags& flags, double eps) {
  ldpr::ExperimentConfig cfg;
  cfg.d = 1ULL << flags.d_exp;
  cfg.n = 1LL << flags.n_exp;
  cfg.epsilon = eps;
  cfg.methods = resolve_methods(flags);
  cfg.p = flags.p;
  cfg.height = flags.height;
  cfg.stride = flags.stride;
  cfg.reps = flags.reps;
  cfg.seed = flags.seed;
  cfg.use_fast_paths = !flags.slow;
  return cfg;
}

void write_config_comments(std::ostream& os, const std::string& command,
                           const ExperimentFlags& flags,
                           const std::string& eps_text) {
  std::vector<std::string> names;
  for (const auto& m : resolve_methods(flags)) {
    names.push_back(ldpr::method_name(m));
  }
  const double resolved_height =
      flags.height < 0.0 ? static_cast<double>(1ULL << flags.d_exp) / 10.0
                         : flags.height;
  os << "# command=" << command << "\n"
     << "# d=" << (1ULL << flags.d_exp) << "\n"
     << "# n=" << (1LL << flags.n_exp) << "\n"
     << "# epsilon=" << eps_text << "\n"
     << "# methods=" << join(names, ',') << "\n"
     << "# p=" << fmt(flags.p) << "\n"
     << "# height=" << fmt(resolved_height) << "\n"
     << "# stride=" << flags.stride << "\n"
     << "# reps=" << flags.reps << "\n"
     << "# seed=" << flags.seed << "\n"
     << "# fast=" << (flags.slow ? 0 : 1) << "\n";
}

void write_experiment_rows(std::ostream& os, const ldpr::ExperimentResult& res,
                           bool overall_only) {
  const auto& cfg = res.config;
  // Lengths that the query set actually contains.
  std::vector<std::uint64_t> per_length(cfg.d + 1, 0);
  ldpr::build_query_set(cfg.d, cfg.stride)
      .for_each([&](std::uint64_t a, std::uint64_t b) {
        ++per_length[b - a + 1];
      });
  for (const auto& cells : res.methods) {
    const auto spec = ldpr::parse_method(cells.method);
    const std::string prefix = cells.method + "," + std::to_string(spec.b) +
                               "," + std::to_string(cfg.d) + "," +
                               fmt(cfg.epsilon) + "," + std::to_string(cfg.n);
    os << prefix << ",0," << fmt(cells.overall_mse) << ","
       << fmt(cells.overall_mse_std) << "," << cfg.seed << "\n";
    if (overall_only) continue;
    for (std::uint64_t r = 1; r <= cfg.d; ++r) {
      if (per_length[r] == 0) continue;
      os << prefix << "," << r << "," << fmt(cells.mse_by_length[r]) << ","
         << fmt(cells.mse_std_by_length[r]) << "," << cfg.seed << "\n";
    }
  }
}

constexpr char kCsvHeader[] =
    "method,B,D,epsilon,N,range_length,mse,stddev,seed";

void cmd_simulate(const ExperimentFlags& flags, double eps) {
  const auto result = ldpr::run_experiment(to_config(flags, eps));
  Output output(flags.out);
  auto& os = output.stream();
  write_config_comments(os, "simulate", flags, fmt(eps));
  for (const auto& cells : result.methods) {
    os << "# overall_mae " << cells.method << "=" << fmt(cells.overall_mae)
       << "\n";
  }
  os << kCsvHeader << "\n";
  write_experiment_rows(os, result, flags.overall_only);
}

void cmd_sweep(const ExperimentFlags& flags, const std::vector<double>& grid) {
  if (grid.empty()) throw std::invalid_argument("empty epsilon grid");
  std::vector<ldpr::ExperimentResult> results;
  for (const double eps : grid) {
    results.push_back(ldpr::run_experiment(to_config(flags, eps)));
  }
  Output output(flags.out);
  auto& os = output.stream();
  std::vector<std::string> eps_text;
  for (const double eps : grid) eps_text.push_back(fmt(eps));
  write_config_comments(os, "sweep", flags, join(eps_text, ' '));
  for (const auto& res : results) {
    for (const auto& cells : res.methods) {
      os << "# overall_mae eps=" << fmt(res.config.epsilon) << " "
         << cells.method << "=" << fmt(cells.overall_mae) << "\n";
    }
  }
  os << kCsvHeader << "\n";
  for (const auto& res : results) {
    write_experiment_rows(os, res, flags.overall_only);
  }
}

void cmd_quantiles(const ExperimentFlags& flags, double eps,
                   const std::vector<double>& p_list) {
  if (p_list.empty()) throw std::invalid_argument("empty p list");
  const std::uint64_t d = 1ULL << flags.d_exp;
  const std::int64_t n = 1LL << flags.n_exp;
  const ldpr::PrivacySpec priv(eps);
  const auto methods = resolve_methods(flags);

  Output output(flags.out);
  auto& os = output.stream();
  std::vector<std::string> p_text;
  for (const double p : p_list) p_text.push_back(fmt(p));
  write_config_comments(os, "quantiles", flags, fmt(eps));
  os << "# p_list=" << join(p_text, ' ') << "\n";
  os << "method,p,phi,true_value,est_value,value_error,quantile_error\n";

  for (std::size_t pi = 0; pi < p_list.size(); ++pi) {
    ldpr::SplitMix64 data_rng =
        ldpr::substream(flags.seed, 0xda7a, static_cast<std::uint64_t>(pi));
    const auto counts = ldpr::sample_cauchy(
        ldpr::DataSpec{d, n, p_list[pi], flags.height}, data_rng);
    for (const auto& method : methods) {
      ldpr::Estimator est = [&] {
        const std::uint64_t mseed =
            ldpr::derive_seed(flags.seed, 0x9e7, pi, method.b);
        switch (method.kind) {
          case ldpr::EstimatorKind::kFlat:
            return ldpr::Estimator::flat(
                ldpr::simulate_flat_oue(counts, priv, mseed, !flags.slow), d);
          case ldpr::EstimatorKind::kTree:
          case ldpr::EstimatorKind::kConsistentTree: {
            const auto layout = ldpr::TreeLayout::for_domain(d, method.b);
            auto tree = flags.slow
                            ? ldpr::simulate_tree_per_user(
                                  counts, layout, priv,
                                  ldpr::InnerOracle::kOue, mseed)
                            : ldpr::simulate_tree_oue_fast(counts, layout,
                                                           priv, mseed);
            if (method.kind == ldpr::EstimatorKind::kTree) {
              return ldpr::Estimator::tree(std::move(tree));
            }
            return ldpr::Estimator::consistent_tree(ldpr::enforce(tree));
          }
          case ldpr::EstimatorKind::kHaar: {
            const auto layout = ldpr::HaarLayout::for_domain(d);
            return ldpr::Estimator::haar(
                !flags.slow
                    ? ldpr::simulate_haar_fast(counts, layout, priv, mseed)
                    : ldpr::simulate_haar_per_user(counts, layout, priv,
                                                   mseed));
          }
        }
        throw std::logic_error("unknown method kind");
      }();
      for (int i = 1; i <= 9; ++i) {
        const double phi = i / 10.0;
        const auto res = ldpr::quantile(est, phi, counts);
        os << ldpr::method_name(method) << "," << fmt(p_list[pi]) << ","
           << fmt(phi) << "," << ldpr::true_quantile(counts, phi) << ","
           << res.index << "," << fmt(res.value_error) << ","
           << fmt(res.quantile_error) << "\n";
      }
    }
  }
}

void cmd_decompose(std::uint64_t d, std::uint32_t branching, std::uint64_t a,
                   std::uint64_t b, bool as_json, const std::string& out) {
  const auto layout = ldpr::TreeLayout::for_domain(d, branching);
  const auto cover = ldpr::b_adic_decompose(a, b, layout);
  Output output(out);
  auto& os = output.stream();
  if (as_json) {
    json root;
    root["d"] = d;
    root["branching"] = branching;
    root["a"] = a;
    root["b"] = b;
    root["blocks"] = json::array();
    for (const auto& blk : cover) {
      root["blocks"].push_back({{"level", blk.level},
                                {"node", blk.index},
                                {"leaf_lo", blk.leaf_lo},
                                {"leaf_hi", blk.leaf_hi}});
    }
    os << root.dump(2) << "\n";
    return;
  }
  os << "[" << a << ", " << b << "] over " << d << " leaves (branching "
     << branching << "): " << cover.size() << " blocks\n";
  for (const auto& blk : cover) {
    os << "  level " << blk.level << " node " << blk.index << " covers ["
       << blk.leaf_lo << ", " << blk.leaf_hi << "]\n";
  }
}

int cmd_privacy_check(const std::string& mechanism, std::uint64_t d,
                      double eps, bool assert_pass, const std::string& out) {
  const ldpr::PrivacySpec priv(eps);
  double ratio = 0.0;
  if (mechanism == "haar") {
    ratio = ldpr::haar_ratio_check(ldpr::HaarLayout::for_domain(d), priv);
  } else {
    static const std::map<std::string, ldpr::Mechanism> kMechanisms = {
        {"rr1", ldpr::Mechanism::kRr1},
        {"oue", ldpr::Mechanism::kOue},
        {"olh", ldpr::Mechanism::kOlh},
        {"olh-inner", ldpr::Mechanism::kOlhInner},
        {"hrr", ldpr::Mechanism::kHrr},
    };
    const auto it = kMechanisms.find(mechanism);
    if (it == kMechanisms.end()) {
      throw std::invalid_argument("unknown mechanism '" + mechanism +
                                  "'; expected rr1, oue, olh, olh-inner, "
                                  "hrr or haar");
    }
    ratio = ldpr::ldp_ratio_check(it->second, ldpr::DomainSpec(d), priv);
  }
  const bool pass = ratio <= priv.e_eps * (1.0 + 1e-9);
  Output output(out);
  output.stream() << "mechanism " << mechanism << " d " << d << " epsilon "
                  << fmt(eps) << ": ratio " << fmt_fixed6(ratio) << " budget "
                  << fmt_fixed6(priv.e_eps) << " "
                  << (pass ? "PASS" : "FAIL") << "\n";
  return (assert_pass && !pass) ? 4 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Locally private range-query simulator: frequency oracles, "
      "hierarchical histograms, and wavelet estimates over a shared "
      "experiment harness."};
  app.require_subcommand(1);
  app.set_config("--config", "",
                 "Read defaults from an INI file (flags take precedence)");

  ExperimentFlags sim_flags;
  double sim_eps = 1.1;
  auto* sim = app.add_subcommand(
      "simulate", "Run one experiment and emit per-length MSE rows as CSV");
  add_experiment_flags(sim, sim_flags);
  sim->add_option("--eps", sim_eps, "Privacy budget")->capture_default_str();

  ExperimentFlags sweep_flags;
  std::vector<double> sweep_grid = {0.2, 0.4, 0.6, 0.8, 1.0, 1.1, 1.2, 1.4};
  auto* sweep = app.add_subcommand(
      "sweep", "Run the experiment over a privacy-budget grid");
  add_experiment_flags(sweep, sweep_flags);
  sweep->add_option("--eps", sweep_grid,
                    "Comma-separated privacy budgets")
      ->delimiter(',')
      ->capture_default_str();

  ExperimentFlags q_flags;
  q_flags.d_exp = 16;
  q_flags.methods = {"hh_c:4", "haar"};
  double q_eps = 1.1;
  std::vector<double> q_ps = {0.1, 0.5};
  auto* quant = app.add_subcommand(
      "quantiles", "Estimate all deciles and emit their errors as CSV");
  add_experiment_flags(quant, q_flags);
  quant->add_option("--eps", q_eps, "Privacy budget")->capture_default_str();
  quant->add_option("--p-list", q_ps,
                    "Comma-separated data distribution centers")
      ->delimiter(',')
      ->capture_default_str();

  std::uint64_t dec_d = 32, dec_a = 2, dec_b = 22;
  std::uint32_t dec_branching = 2;
  bool dec_json = false;
  std::string dec_out;
  auto* dec = app.add_subcommand(
      "decompose", "Show the aligned block cover of a range");
  dec->add_option("--d", dec_d, "Domain size (leaves)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  dec->add_option("--branch", dec_branching, "Branching factor")
      ->check(CLI::Range(2u, 1u << 16))
      ->capture_default_str();
  dec->add_option("--a", dec_a, "Range start (inclusive)")
      ->capture_default_str();
  dec->add_option("--b", dec_b, "Range end (inclusive)")
      ->capture_default_str();
  dec->add_flag("--json", dec_json, "Emit JSON instead of text");
  dec->add_option("--out", dec_out, "Output file (default stdout)");

  std::string pc_mechanism = "oue";
  std::uint64_t pc_d = 8;
  double pc_eps = 1.1;
  bool pc_assert = false;
  std::string pc_out;
  auto* pc = app.add_subcommand(
      "privacy-check",
      "Enumerate a mechanism's channel and compare the worst likelihood "
      "ratio against the budget");
  pc->add_option("--mechanism", pc_mechanism,
                 "rr1, oue, olh, olh-inner, hrr or haar")
      ->capture_default_str();
  pc->add_option("--d", pc_d, "Domain size")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  pc->add_option("--eps", pc_eps, "Privacy budget")->capture_default_str();
  pc->add_flag("--assert", pc_assert, "Exit 4 when the check fails");
  pc->add_option("--out", pc_out, "Output file (default stdout)");

  int exit_code = 0;
  sim->callback([&] { cmd_simulate(sim_flags, sim_eps); });
  sweep->callback([&] { cmd_sweep(sweep_flags, sweep_grid); });
  quant->callback([&] { cmd_quantiles(q_flags, q_eps, q_ps); });
  dec->callback(
      [&] { cmd_decompose(dec_d, dec_branching, dec_a, dec_b, dec_json,
                          dec_out); });
  pc->callback([&] {
    exit_code = cmd_privacy_check(pc_mechanism, pc_d, pc_eps, pc_assert,
                                  pc_out);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const ldpr::capacity_error& e) {
    std::cerr << "capacity error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return exit_code;
}
