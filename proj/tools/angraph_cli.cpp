// angraph: build and benchmark augmented neighborhood graph indexes.
//
//   angraph groundtruth --base b.bvecs --queries q.bvecs --format bvecs --k 100 --out gt.ivecs
//   angraph build       --base b.bvecs --format bvecs --out idx.annb
//   angraph search      --index idx.annb --base b.bvecs --queries q.bvecs --truth gt.ivecs --visits 100,500
//   angraph ivf-build   --base b.bvecs --format bvecs --lists 1024 --out idx.annv
//   angraph ivf-search  --index idx.annv --base b.bvecs --queries q.bvecs --truth gt.ivecs --visits 1000,3000

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ang/bench.hpp"
#include "ang/synth.hpp"

namespace {

struct Common {
  std::string base, queries, truth, index, out, format = "fvecs";
  int threads = 0;
  std::uint32_t seed = 0;
};

void add_common(CLI::App* cmd, Common& c, bool needs_queries) {
  cmd->add_option("--base", c.base, "Reference vectors")->required();
  if (needs_queries) cmd->add_option("--queries", c.queries, "Query vectors")->required();
  cmd->add_option("--format", c.format, "Vector file format")->check(CLI::IsMember({"fvecs", "bvecs"}));
  cmd->add_option("--threads", c.threads, "Worker threads (0 = all cores)");
  cmd->add_option("--seed", c.seed, "RNG seed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Augmented neighborhood graph ANN search: index build and benchmark"};
  app.require_subcommand(1);
  Common c;

  auto* gt = app.add_subcommand("groundtruth", "Exact k nearest neighbors of each query (ivecs)");
  add_common(gt, c, true);
  int gt_k = 100;
  gt->add_option("--k", gt_k, "Neighbors per query");
  gt->add_option("--out", c.out, "Output ivecs file")->required();

  ang::BuildParams bp;
  auto* build = app.add_subcommand("build", "Build an augmented graph index (ANNB)");
  add_common(build, c, false);
  build->add_option("--partitions", bp.m, "Subspace partitions m");
  build->add_option("--clusters", bp.n, "Clusters per partition n");
  build->add_option("--degree", bp.degree, "Neighborhood graph degree R");
  build->add_option("--bridge-t", bp.bridge_t, "Nearest bridges per reference");
  build->add_option("--bridge-b", bp.bridge_b, "References kept per bridge");
  build->add_option("--out", c.out, "Output index file")->required();

  std::string ks = "1", visits = "100", engines = "augmented";
  int plain_seeds = 3, probes = 16, probe_budget = 0;
  bool no_timing = false;
  auto add_sweep = [&](CLI::App* cmd, bool ivf) {
    cmd->add_option("--index", c.index, "Index file")->required();
    cmd->add_option("--truth", c.truth, "Ground truth ivecs")->required();
    cmd->add_option("--k", ks, "Comma-separated k values (recall cutoffs for ivfadc)");
    cmd->add_option("--visits", visits, ivf ? "Comma-separated re-rank list lengths L" : "Comma-separated visit budgets T");
    cmd->add_option("--out", c.out, "Output CSV (default stdout)");
    cmd->add_flag("--no-timing", no_timing, "Write mean_us as 0 for reproducible output");
  };
  auto* search = app.add_subcommand("search", "Query sweep, one CSV row per (engine, k, T)");
  add_common(search, c, true);
  add_sweep(search, false);
  search->add_option("--engine", engines, "Comma-separated: augmented, plain, exact, ivfadc");
  search->add_option("--plain-seeds", plain_seeds, "Random seeds per query for the plain engine");
  search->add_option("--probes", probes, "Inverted lists visited (ivfadc)");

  ang::IvfBuildParams ip;
  auto* ivf_build = app.add_subcommand("ivf-build", "Build an inverted file with graph-searched coarse centers (ANNV)");
  add_common(ivf_build, c, false);
  ivf_build->add_option("--lists", ip.lists, "Coarse centers K");
  ivf_build->add_option("--partitions", ip.residual_m, "Residual code partitions");
  ivf_build->add_option("--clusters", ip.residual_n, "Residual clusters per partition");
  ivf_build->add_option("--coarse-partitions", ip.coarse.m, "Center graph partitions");
  ivf_build->add_option("--coarse-clusters", ip.coarse.n, "Center graph clusters per partition");
  ivf_build->add_option("--degree", ip.coarse.degree, "Center graph degree");
  ivf_build->add_option("--bridge-t", ip.coarse.bridge_t, "Center graph bridges per center");
  ivf_build->add_option("--bridge-b", ip.coarse.bridge_b, "Center graph centers per bridge");
  ivf_build->add_option("--assign-budget", ip.assign_budget, "Visit budget for assigning a vector to its list");
  ivf_build->add_option("--out", c.out, "Output index file")->required();

  auto* ivf_search = app.add_subcommand("ivf-search", "Recall@k sweep over re-rank list lengths");
  add_common(ivf_search, c, true);
  add_sweep(ivf_search, true);
  ivf_search->add_option("--probes", probes, "Inverted lists visited");
  ivf_search->add_option("--probe-budget", probe_budget, "Visit budget when locating lists (0 = auto)");

  ang::SynthParams sp;
  std::string synth_base, synth_queries;
  auto* synth = app.add_subcommand("synth", "Generate clustered byte-valued vectors (bvecs)");
  synth->add_option("--count", sp.base, "Reference vectors");
  synth->add_option("--query-count", sp.queries, "Query vectors");
  synth->add_option("--dim", sp.dim, "Dimension");
  synth->add_option("--latent-dim", sp.latent_dim, "Latent dimension of the mixture");
  synth->add_option("--mixture", sp.clusters, "Mixture components");
  synth->add_option("--separation", sp.separation, "Spread of component means (latent units)");
  synth->add_option("--noise", sp.noise, "Isotropic noise level");
  synth->add_option("--seed", sp.seed, "RNG seed");
  synth->add_option("--base", synth_base, "Output base bvecs")->required();
  synth->add_option("--queries", synth_queries, "Output query bvecs")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    const auto format = ang::parse_format(c.format);
    if (*gt) {
      ang::cmd_groundtruth({c.base, c.queries, c.out, format, gt_k, c.threads});
    } else if (*build) {
      bp.seed = c.seed;
      bp.threads = c.threads;
      ang::cmd_build({c.base, c.out, format, bp}, std::cout);
    } else if (*search || *ivf_search) {
      ang::SearchCommand cmd{c.index, c.base, c.queries, c.truth, c.out, format};
      cmd.sweep.engines = *ivf_search ? std::vector<std::string>{"ivfadc"} : ang::parse_name_list(engines);
      cmd.sweep.ks = ang::parse_int_list(ks);
      cmd.sweep.visits = ang::parse_int_list(visits);
      cmd.sweep.plain_seeds = plain_seeds;
      cmd.sweep.seed = c.seed;
      cmd.sweep.threads = c.threads;
      cmd.sweep.timing = !no_timing;
      cmd.ivf.ks = cmd.sweep.ks;
      cmd.ivf.list_lens = cmd.sweep.visits;
      cmd.ivf.probes = probes;
      cmd.ivf.probe_budget = probe_budget;
      cmd.ivf.threads = c.threads;
      cmd.ivf.timing = !no_timing;
      ang::cmd_search(cmd, std::cout);
    } else if (*ivf_build) {
      ip.seed = c.seed;
      ip.threads = c.threads;
      ang::cmd_ivf_build({c.base, c.out, format, ip}, std::cout);
    } else if (*synth) {
      const auto [base, queries] = ang::make_sift_like(sp);
      ang::save_dataset(base, synth_base, ang::VecFormat::bvecs);
      ang::save_dataset(queries, synth_queries, ang::VecFormat::bvecs);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
