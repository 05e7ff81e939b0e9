// gold: command-line front end for the federated multi-granular clustering pipeline.

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "gold/gold.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string config_path;
  std::string out_dir = ".";
};

struct Settings {
  gold::RunConfig run;
  gold::PartitionSpec partition;
};

Settings load_settings(const Globals& g) {
  Settings s;
  if (!g.config_path.empty()) {
    std::ifstream in(g.config_path);
    if (!in) throw gold::invalid_input("cannot open config " + g.config_path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw gold::parse_error(std::string("config: ") + e.what());
    }
    if (j.contains("run")) s.run = j.at("run").get<gold::RunConfig>();
    if (j.contains("partition")) s.partition = j.at("partition").get<gold::PartitionSpec>();
  }
  if (g.seed) {
    s.run.seed = *g.seed;
    s.partition.seed = *g.seed;
  }
  s.run.validate();
  s.partition.validate();
  return s;
}

void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw gold::invalid_input("cannot write " + p.string());
  out << text;
}

void write_json(const fs::path& p, const ordered_json& j) { write_text(p, j.dump(2) + "\n"); }

// A split directory as written by `partition`.
gold::FederationSplit load_split(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw gold::invalid_input("no manifest.json in " + dir.string());
  nlohmann::json m;
  in >> m;
  gold::FederationSplit split;
  if (m.contains("spec")) split.spec = m.at("spec").get<gold::PartitionSpec>();
  for (const auto& c : m.at("clients")) {
    auto ds = gold::load_csv((dir / c.at("file").get<std::string>()).string(), true, gold::Scaling::none);
    ds.name = c.at("file").get<std::string>();
    split.clients.push_back(std::move(ds));
  }
  if (m.contains("global") && m.at("global").is_string()) {
    split.global = gold::load_csv((dir / m.at("global").get<std::string>()).string(), true, gold::Scaling::none);
  }
  return split;
}

ordered_json provenance_json(const gold::FederationSplit& split) {
  auto all = ordered_json::array();
  for (const auto& client : split.provenance) {
    auto rows = ordered_json::array();
    for (const auto& o : client) rows.push_back({o.global_index, o.global_cluster, o.subcluster});
    all.push_back(std::move(rows));
  }
  return all;
}

std::vector<std::size_t> read_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw gold::invalid_input("cannot open " + path);
  std::vector<std::size_t> out;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    const auto t = gold::detail::trim(line);
    if (t.empty()) continue;
    const double v = gold::detail::parse_double(t, row);
    if (v < 0.0 || v != std::floor(v)) throw gold::parse_error("row " + std::to_string(row) + ": bad label");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

std::vector<std::size_t> parse_points(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.push_back(static_cast<std::size_t>(std::stoull(tok)));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated clustering of non-independently, completely distributed data"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Seed for every random stream")->capture_default_str();
  app.add_option("--config", g.config_path, "JSON config with optional 'run' and 'partition' objects");
  app.add_option("--out", g.out_dir, "Output directory")->capture_default_str();

  // partition
  auto* part = app.add_subcommand("partition", "Split a labelled CSV into non-ICD clients");
  std::string part_data;
  std::string lambda_level;
  bool part_no_scale = false;
  part->add_option("--data", part_data, "Labelled CSV (last column = class)")->required();
  part->add_option("--lambda-level", lambda_level, "low | medium | high preset for cluster coverage");
  part->add_flag("--no-scale", part_no_scale, "Skip min-max scaling of the input");

  // lambda
  auto* lam = app.add_subcommand("lambda", "Measure the non-ICD degree of a split");
  std::string lam_split;
  lam->add_option("--split", lam_split, "Split directory")->required();

  // run
  auto* run = app.add_subcommand("run", "Run the full pipeline on a split");
  std::string run_split;
  std::size_t run_k = 0;
  bool run_no_lambda = false;
  run->add_option("--split", run_split, "Split directory")->required();
  run->add_option("-k,--k-star", run_k, "Number of global clusters")->required();
  run->add_flag("--no-lambda", run_no_lambda, "Skip the lambda measurement");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Score a labelling against ground truth");
  std::string ev_data, ev_pred;
  ev->add_option("--data", ev_data, "Labelled CSV giving features and truth")->required();
  ev->add_option("--pred", ev_pred, "One predicted cluster id per line")->required();

  // ablate
  auto* abl = app.add_subcommand("ablate", "Run one ablation variant");
  std::string abl_split, abl_mode = "full";
  std::size_t abl_k = 0, abl_level = 0;
  bool abl_dump_stack = false;
  abl->add_option("--split", abl_split, "Split directory")->required();
  abl->add_option("-k,--k-star", abl_k, "Number of global clusters")->required();
  abl->add_option("--mode", abl_mode, "full | no_fcpl | no_mcpl | neither | drop_level | prefix_levels")
      ->capture_default_str();
  abl->add_option("--level", abl_level, "Level for drop_level, count for prefix_levels");
  abl->add_flag("--dump-stack", abl_dump_stack, "Also write the granularity stack");

  // bench
  auto* bench = app.add_subcommand("bench", "Time the pipeline over growing sizes");
  std::string bench_axis = "objects", bench_points;
  std::size_t bench_repeats = 3;
  bool bench_parallel = false;
  bench->add_option("--axis", bench_axis, "objects | dims")->capture_default_str();
  bench->add_option("--points", bench_points, "Comma-separated sizes")->required();
  bench->add_option("--repeats", bench_repeats, "Best-of repeats per size")->capture_default_str();
  bench->add_flag("--parallel", bench_parallel, "Fit clients concurrently");

  CLI11_PARSE(app, argc, argv);

  try {
    Settings s = load_settings(g);
    const fs::path out(g.out_dir);
    fs::create_directories(out);

    if (*part) {
      auto data = gold::load_csv(part_data, true, part_no_scale ? gold::Scaling::none : gold::Scaling::min_max);
      if (!lambda_level.empty()) s.partition = gold::lambda_preset(gold::parse_lambda_level(lambda_level), s.partition);
      const auto split = gold::simulate_non_icd(data, s.partition);
      ordered_json m;
      nlohmann::json spec = s.partition;
      m["spec"] = spec;
      m["seed"] = s.partition.seed;
      if (!lambda_level.empty()) m["lambda_level"] = lambda_level;
      auto clients = ordered_json::array();
      for (std::size_t l = 0; l < split.clients.size(); ++l) {
        const std::string file = "client_" + std::to_string(l) + ".csv";
        gold::save_csv((out / file).string(), split.clients[l]);
        clients.push_back({{"file", file}, {"n", split.clients[l].n()}});
      }
      m["clients"] = std::move(clients);
      gold::save_csv((out / "global.csv").string(), *split.global);
      m["global"] = "global.csv";
      m["lambda"] = split.clients.size() >= 2 ? ordered_json(gold::non_icd_degree(split.clients).lambda)
                                              : ordered_json(nullptr);
      m["provenance"] = provenance_json(split);
      write_json(out / "manifest.json", m);
      std::cout << "wrote " << split.clients.size() << " clients to " << out.string() << "\n";
    } else if (*lam) {
      const auto split = load_split(lam_split);
      const auto r = gold::non_icd_degree(split.clients);
      write_json(out / "lambda.json", gold::non_icd_to_json(r));
      std::cout << "lambda " << r.lambda << "\n";
    } else if (*run) {
      const auto split = load_split(run_split);
      gold::RunOptions o;
      o.measure_lambda = !run_no_lambda;
      const auto r = gold::run_gold(split, run_k, s.run, o);
      write_json(out / "report.json", gold::report_to_json(r));
      write_json(out / "timings.json", gold::times_to_json(r.times));
      if (r.federated) std::cout << "federated purity " << r.federated->purity << "\n";
    } else if (*ev) {
      const auto data = gold::load_csv(ev_data, true, gold::Scaling::none);
      const auto pred = read_labels(ev_pred);
      if (pred.size() != data.n()) throw gold::dimension_mismatch("evaluate: prediction count differs from rows");
      const auto idx = gold::compute_indices(data.values, pred, *data.labels);
      const auto j = gold::indices_to_json(idx);
      write_json(out / "indices.json", j);
      std::cout << j.dump() << "\n";
    } else if (*abl) {
      const auto split = load_split(abl_split);
      gold::RunOptions o;
      o.ablation = gold::parse_ablation(abl_mode, abl_level);
      o.measure_lambda = false;
      const auto r = gold::run_gold(split, abl_k, s.run, o);
      std::string stem = "ablate_" + o.ablation.name();
      std::replace(stem.begin(), stem.end(), ' ', '_');
      write_json(out / (stem + ".json"), gold::report_to_json(r));
      if (abl_dump_stack) write_json(out / (stem + "_stack.json"), gold::stack_to_json(r.stack));
      if (r.federated) std::cout << o.ablation.name() << " federated purity " << r.federated->purity << "\n";
    } else if (*bench) {
      gold::BenchAxis axis;
      if (bench_axis == "objects") {
        axis = gold::BenchAxis::objects;
      } else if (bench_axis == "dims") {
        axis = gold::BenchAxis::dims;
      } else {
        throw gold::invalid_config("unknown axis '" + bench_axis + "'");
      }
      s.run.parallel_clients = bench_parallel;
      gold::BenchSettings bs;
      bs.repeats = bench_repeats;
      const auto b = gold::bench_scaling(axis, parse_points(bench_points), s.run, bs);
      write_json(out / ("bench_" + bench_axis + ".json"), gold::bench_to_json(b));
      std::string table = "size\tseconds\n";
      for (const auto& row : b.rows) table += std::to_string(row.size) + "\t" + gold::format_double(row.seconds) + "\n";
      write_text(out / ("bench_" + bench_axis + ".tsv"), table);
      std::cout << table << "slope " << b.slope << (b.insufficient_spread ? " (insufficient spread)" : "") << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
