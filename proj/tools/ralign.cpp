#include "ralign/ralign.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using namespace ralign;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumeric = 4;

struct AlgoSpec {
  std::string name;   // exhaustive | sampled | prob | kabsch | icp |
                      // approx-match | p-icp-refined
  int beta = 0;       // for sampled / approx-match / p-icp-refined (0 = exhaustive)
  double r = 1.0;     // for prob
};

AlgoSpec parse_algo(const std::string& text) {
  AlgoSpec a;
  const auto colon = text.find(':');
  a.name = text.substr(0, colon);
  const std::string arg =
      colon == std::string::npos ? "" : text.substr(colon + 1);
  if (a.name == "sampled") {
    if (arg.empty()) throw InvalidArgument("sampled requires a beta, e.g. sampled:40");
    a.beta = std::stoi(arg);
  } else if (a.name == "prob") {
    a.r = arg.empty() ? 1.0 : std::stod(arg);
  } else if (a.name == "approx-match" || a.name == "p-icp-refined") {
    a.beta = arg.empty() ? 0 : std::stoi(arg);
  } else if (a.name == "exhaustive" || a.name == "kabsch" || a.name == "icp") {
    if (!arg.empty()) throw InvalidArgument("algorithm takes no argument: " + text);
  } else {
    throw InvalidArgument("unknown algorithm: " + text);
  }
  return a;
}

bool is_register_algo(const AlgoSpec& a) {
  return a.name == "icp" || a.name == "approx-match" || a.name == "p-icp-refined";
}

std::string format_algo(const AlgoSpec& a) {
  if (a.name == "sampled") return "sampled:" + std::to_string(a.beta);
  if (a.name == "prob") {
    std::ostringstream os;
    os << "prob:" << a.r;
    return os.str();
  }
  if (a.name == "approx-match" || a.name == "p-icp-refined")
    return a.beta > 0 ? a.name + ":" + std::to_string(a.beta) : a.name;
  return a.name;
}

InstanceSpec echo_spec(const PointCloud& P, std::uint64_t seed) {
  InstanceSpec s;
  s.n = P.size();
  s.d = P.dim;
  s.seed = seed;
  return s;
}

/// Alignment-only solve on clouds with known (identity) correspondence.
RunReport run_align(const PointCloud& P, const PointCloud& Q, const AlgoSpec& algo,
                    const CostSpec& spec, std::uint64_t seed, int jobs) {
  if (P.size() != Q.size()) throw InvalidArgument("cloud size mismatch");
  const auto t0 = std::chrono::steady_clock::now();
  RunReport rep;
  rep.algorithm = format_algo(algo);
  rep.instance = echo_spec(P, seed);
  rep.cost_spec = spec;
  rep.seed = seed;

  if (algo.name == "kabsch") {
    rep.alignment = kabsch_ssd(P, Q);
    rep.cost = eval_cost(P, Q, rep.alignment, spec);
    rep.candidates_evaluated = 1;
  } else if (algo.name == "exhaustive") {
    const BestSearchResult res = best_alignment_exhaustive(P, Q, spec, jobs);
    rep.alignment = res.alignment;
    rep.cost = res.cost;
    rep.candidates_evaluated = res.candidates;
  } else {
    CandidateSet cands;
    if (algo.name == "sampled")
      cands = approx_alignment_sampled(P, Q, algo.beta, seed);
    else if (algo.name == "prob")
      cands = prob_alignment(P, Q, algo.r, seed);
    else
      throw InvalidArgument("not an alignment algorithm: " + algo.name);
    auto [best, cost] = best_alignment(P, Q, cands, spec, jobs);
    rep.alignment = best;
    rep.cost = cost;
    rep.candidates_evaluated = cands.size();
  }

  if (spec.is_ssd() && P.size() >= P.dim) {
    const Alignment opt = kabsch_ssd(P, Q);
    const double opt_cost = eval_cost(P, Q, opt, spec);
    rep.optimal_ssd_cost = opt_cost;
    if (opt_cost > 0.0) rep.ratio = rep.cost / opt_cost;
  }
  rep.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

/// Registration solve (correspondence unknown).
RunReport run_register(const PointCloud& P, const PointCloud& Q,
                       const AlgoSpec& algo, const CostSpec& spec,
                       std::uint64_t seed, bool bijective,
                       const TruthRecord* truth) {
  const auto t0 = std::chrono::steady_clock::now();
  RunReport rep;
  rep.algorithm = format_algo(algo);
  rep.instance = echo_spec(P, seed);
  rep.cost_spec = spec;
  rep.seed = seed;

  RegistrationResult res;
  if (algo.name == "icp") {
    res = icp(P, Q, Alignment::identity(P.dim));
  } else {
    const WitnessBudget budget = algo.beta > 0 ? WitnessBudget::sampled(algo.beta)
                                               : WitnessBudget::all();
    if (algo.name == "approx-match")
      res = align_and_match(P, Q, spec, budget, seed, bijective);
    else if (algo.name == "p-icp-refined")
      res = p_icp_refined(P, Q, spec, budget, seed, bijective);
    else
      throw InvalidArgument("not a registration algorithm: " + algo.name);
  }

  rep.alignment = res.alignment;
  rep.matching = res.matching;
  rep.cost = eval_matched_cost(P, Q, res.matching, res.alignment, spec);
  rep.candidates_evaluated = res.candidates_evaluated;
  rep.note = res.note;

  if (truth != nullptr) {
    if (spec.is_ssd() && P.size() >= P.dim) {
      const Alignment opt = kabsch_ssd(P, Q, &truth->true_matching);
      const double opt_cost =
          eval_matched_cost(P, Q, truth->true_matching, opt, spec);
      rep.optimal_ssd_cost = opt_cost;
      if (opt_cost > 0.0) rep.ratio = rep.cost / opt_cost;
    }
    std::set<int> outliers(truth->outlier_indices.begin(),
                           truth->outlier_indices.end());
    int hits = 0, total = 0;
    for (int i = 0; i < P.size(); ++i) {
      if (outliers.count(i)) continue;
      ++total;
      if ((*rep.matching)(i) == truth->true_matching(i)) ++hits;
    }
    if (total > 0)
      rep.match_recovery = static_cast<double>(hits) / total;
  }
  rep.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

void emit_report(const RunReport& rep, const std::string& out_path) {
  if (out_path.empty())
    std::cout << report_to_json(rep).dump(2) << "\n";
  else
    save_report(rep, out_path);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

int run(int argc, char** argv) {
  CLI::App app{"Rigid point-cloud alignment and registration toolkit"};
  app.require_subcommand(1);

  // ---- generate -------------------------------------------------------
  auto* gen = app.add_subcommand("generate", "Generate a benchmark instance");
  InstanceSpec gspec;
  std::string gen_model, gen_out_dir = ".";
  bool gen_synthetic = false;
  gen->add_flag("--synthetic", gen_synthetic, "Uniform samples from the unit cube");
  gen->add_option("--model", gen_model, "Point file (csv or ascii ply) to sample from");
  gen->add_option("--d", gspec.d, "Dimension")->default_val(3);
  gen->add_option("--n", gspec.n, "Number of points")->required();
  gen->add_option("--sigma2", gspec.sigma2, "Gaussian noise variance")->default_val(0.0);
  gen->add_option("--translation-bound", gspec.translation_bound,
                  "Max translation norm")->default_val(0.1);
  gen->add_flag("--shuffle", gspec.shuffle, "Shuffle P, recording the permutation");
  gen->add_option("--outliers", gspec.outlier_fraction,
                  "Fraction of points receiving extra noise")->default_val(0.0);
  gen->add_option("--outlier-sigma2", gspec.outlier_sigma2,
                  "Outlier noise variance")->default_val(1.0);
  gen->add_option("--seed", gspec.seed, "RNG seed")->required();
  gen->add_option("--out-dir", gen_out_dir, "Output directory")->default_val(".");

  // ---- align ----------------------------------------------------------
  auto* aln = app.add_subcommand("align", "Solve alignment with known correspondence");
  std::string aln_p, aln_q, aln_algo = "exhaustive",
              aln_cost = "z=2,loss=power:2,agg=sum", aln_out;
  std::uint64_t aln_seed = 0;
  int aln_jobs = static_cast<int>(std::thread::hardware_concurrency());
  aln->add_option("--p", aln_p, "Source cloud file")->required();
  aln->add_option("--q", aln_q, "Target cloud file")->required();
  aln->add_option("--algo", aln_algo,
                  "exhaustive | sampled:BETA | prob:R | kabsch");
  aln->add_option("--cost", aln_cost, "Cost spec");
  aln->add_option("--seed", aln_seed, "RNG seed");
  aln->add_option("--jobs", aln_jobs, "Worker threads");
  aln->add_option("--out", aln_out, "Report path (default: stdout)");

  // ---- register -------------------------------------------------------
  auto* reg = app.add_subcommand("register", "Solve registration (unknown correspondence)");
  std::string reg_p, reg_q, reg_algo = "icp",
              reg_cost = "z=2,loss=power:2,agg=sum", reg_out, reg_truth;
  std::uint64_t reg_seed = 0;
  bool reg_bijective = false;
  reg->add_option("--p", reg_p, "Source cloud file")->required();
  reg->add_option("--q", reg_q, "Target cloud file")->required();
  reg->add_option("--algo", reg_algo,
                  "icp | approx-match[:BETA] | p-icp-refined[:BETA]");
  reg->add_option("--cost", reg_cost, "Cost spec");
  reg->add_option("--seed", reg_seed, "RNG seed");
  reg->add_flag("--bijective", reg_bijective,
                "Optimal bijection instead of nearest neighbor");
  reg->add_option("--truth", reg_truth, "truth.json for recovery metrics");
  reg->add_option("--out", reg_out, "Report path (default: stdout)");

  // ---- benchmark ------------------------------------------------------
  auto* bench = app.add_subcommand("benchmark", "Seeded sweep with aggregate CSV");
  std::string b_algos, b_cost = "z=2,loss=power:2,agg=sum", b_out_dir;
  std::string b_n_list = "100", b_outlier_list = "0";
  int b_d = 3, b_runs = 10;
  double b_sigma2 = 0.0, b_outlier_sigma2 = 1.0;
  bool b_shuffle = false;
  std::uint64_t b_seed = 0;
  int b_jobs = static_cast<int>(std::thread::hardware_concurrency());
  bench->add_option("--algos", b_algos, "Comma list of algorithms")->required();
  bench->add_option("--cost", b_cost, "Cost spec");
  bench->add_option("--n-list", b_n_list, "Comma list of cloud sizes");
  bench->add_option("--outlier-list", b_outlier_list, "Comma list of outlier fractions");
  bench->add_option("--d", b_d, "Dimension");
  bench->add_option("--sigma2", b_sigma2, "Gaussian noise variance");
  bench->add_option("--outlier-sigma2", b_outlier_sigma2, "Outlier noise variance");
  bench->add_flag("--shuffle", b_shuffle, "Shuffle instances (registration sweeps)");
  bench->add_option("--runs", b_runs, "Seeds per cell");
  bench->add_option("--seed", b_seed, "Base RNG seed (required)")->required();
  bench->add_option("--jobs", b_jobs, "Worker threads");
  bench->add_option("--out-dir", b_out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (gen->parsed()) {
    if (gen_synthetic == !gen_model.empty())
      throw InvalidArgument("exactly one of --synthetic / --model is required");
    gspec.source = gen_model;
    const GeneratedInstance inst = generate_instance(gspec);
    fs::create_directories(gen_out_dir);
    save_cloud(inst.P, gen_out_dir + "/P.csv", CloudFormat::Csv);
    save_cloud(inst.Q, gen_out_dir + "/Q.csv", CloudFormat::Csv);
    nlohmann::json truth = truth_to_json(inst);
    truth["instance"] = detail::instance_to_json(gspec);
    std::ofstream out(gen_out_dir + "/truth.json", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write truth.json");
    out << truth.dump(2) << "\n";
    return kExitOk;
  }

  if (aln->parsed()) {
    const PointCloud P = load_cloud(aln_p);
    const PointCloud Q = load_cloud(aln_q);
    const RunReport rep = run_align(P, Q, parse_algo(aln_algo),
                                    parse_cost_spec(aln_cost), aln_seed,
                                    std::max(1, aln_jobs));
    emit_report(rep, aln_out);
    return kExitOk;
  }

  if (reg->parsed()) {
    const PointCloud P = load_cloud(reg_p);
    const PointCloud Q = load_cloud(reg_q);
    TruthRecord truth;
    const bool have_truth = !reg_truth.empty();
    if (have_truth) truth = load_truth(reg_truth, P.size());
    const RunReport rep =
        run_register(P, Q, parse_algo(reg_algo), parse_cost_spec(reg_cost),
                     reg_seed, reg_bijective, have_truth ? &truth : nullptr);
    emit_report(rep, reg_out);
    return kExitOk;
  }

  // benchmark
  const CostSpec spec = parse_cost_spec(b_cost);
  fs::create_directories(b_out_dir);
  std::ofstream csv(b_out_dir + "/aggregate.csv", std::ios::binary);
  if (!csv) throw std::runtime_error("cannot write aggregate.csv");
  csv << "algo,cost_spec,n,sigma2,outlier_frac,beta,mean_cost,var_cost,"
         "mean_ratio,mean_wall_s,runs\n";

  for (const std::string& algo_text : split_list(b_algos)) {
    const AlgoSpec algo = parse_algo(algo_text);
    if (!is_register_algo(algo) && b_shuffle)
      throw InvalidArgument("alignment algorithms need unshuffled instances");
    for (const std::string& n_text : split_list(b_n_list)) {
      const int n = std::stoi(n_text);
      for (const std::string& frac_text : split_list(b_outlier_list)) {
        const double frac = std::stod(frac_text);
        double sum_cost = 0.0, sum_sq = 0.0, sum_wall = 0.0;
        double sum_ratio = 0.0;
        int ratio_count = 0;
        for (int run_i = 0; run_i < b_runs; ++run_i) {
          InstanceSpec ispec;
          ispec.n = n;
          ispec.d = b_d;
          ispec.sigma2 = b_sigma2;
          ispec.shuffle = b_shuffle;
          ispec.outlier_fraction = frac;
          ispec.outlier_sigma2 = b_outlier_sigma2;
          ispec.seed = b_seed + static_cast<std::uint64_t>(run_i);
          const GeneratedInstance inst = generate_instance(ispec);
          RunReport rep;
          if (is_register_algo(algo)) {
            TruthRecord truth{inst.true_alignment, inst.true_matching,
                              inst.outlier_indices};
            rep = run_register(inst.P, inst.Q, algo, spec, ispec.seed, false,
                               &truth);
          } else {
            rep = run_align(inst.P, inst.Q, algo, spec, ispec.seed,
                            std::max(1, b_jobs));
          }
          rep.instance = ispec;
          std::ostringstream name;
          name << b_out_dir << "/run_" << format_algo(algo) << "_n" << n
               << "_f" << frac << "_s" << run_i << ".json";
          std::string path = name.str();
          for (auto& c : path)
            if (c == ':') c = '-';
          save_report(rep, path);
          sum_cost += rep.cost;
          sum_sq += rep.cost * rep.cost;
          sum_wall += rep.wall_time_seconds;
          if (rep.ratio) {
            sum_ratio += *rep.ratio;
            ++ratio_count;
          }
        }
        const double mean = sum_cost / b_runs;
        const double var = std::max(0.0, sum_sq / b_runs - mean * mean);
        char line[512];
        std::snprintf(line, sizeof line, "%s,%s,%d,%.17g,%.17g,%d,%.17g,%.17g,%.17g,%.6f,%d\n",
                      format_algo(algo).c_str(), format_cost_spec(spec).c_str(),
                      n, b_sigma2, frac, algo.beta, mean, var,
                      ratio_count > 0 ? sum_ratio / ratio_count
                                      : std::nan(""),
                      sum_wall / b_runs, b_runs);
        csv << line;
      }
    }
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::runtime_error& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  }
}
