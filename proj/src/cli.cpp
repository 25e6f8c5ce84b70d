#include "ugre/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>

#include "ugre/text_io.hpp"
#include "ugre/workflow.hpp"

namespace ugre {

namespace fs = std::filesystem;

namespace {

struct GraphArgs {
  std::string data;
  std::string out;
};

struct SearchArgs {
  std::string data;
  std::string out;
  std::string e1;
  std::string e2;
  std::size_t max_steps = 3;
  std::size_t num_walks = 1000;
  std::size_t max_paths = 100;
  std::uint64_t seed = 1;
};

struct TrainArgs {
  std::string data;
  std::string out;
  std::string config;
  bool pretrain = false;
  std::string mode;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
};

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::string out;
  std::size_t bucket_width = 10;
};

struct GradArgs {
  std::string mode = "both";
  std::size_t samples = 20;
  std::size_t bags = 3;
  std::uint64_t seed = 1;
};

UniversalGraph load_graph(const fs::path& dir) {
  UniversalGraph g;
  load_entities(g, dir / "entities.txt");
  load_relations(g, dir / "relations.txt");
  if (fs::exists(dir / "kg_edges.tsv")) load_kg_edges(g, dir / "kg_edges.tsv");
  if (fs::exists(dir / "text_edges.tsv")) load_text_edges(g, dir / "text_edges.tsv");
  return g;
}

int run_build_graph(const GraphArgs& a, std::ostream& out) {
  const UniversalGraph g = load_graph(a.data);
  out << "entities\t" << g.entity_count() << "\nrelations\t" << g.relation_count()
      << "\nkg_edges\t" << g.kg_edge_count() << "\ntext_edges\t" << g.text_edge_count()
      << '\n';
  if (!a.out.empty()) {
    fs::create_directories(a.out);
    std::ofstream kg(fs::path(a.out) / "kg_edges.tsv", std::ios::binary);
    write_kg_edges(g, kg);
    std::ofstream text(fs::path(a.out) / "text_edges.tsv", std::ios::binary);
    write_text_edges(g, text);
    fs::copy_file(fs::path(a.data) / "entities.txt", fs::path(a.out) / "entities.txt",
                  fs::copy_options::overwrite_existing);
    fs::copy_file(fs::path(a.data) / "relations.txt", fs::path(a.out) / "relations.txt",
                  fs::copy_options::overwrite_existing);
  }
  return 0;
}

int run_search_paths(const SearchArgs& a, std::ostream& out) {
  const fs::path dir = a.data;
  const UniversalGraph g = load_graph(dir);
  std::vector<std::pair<EntityIndex, EntityIndex>> queries;
  if (!a.e1.empty() || !a.e2.empty()) {
    if (a.e1.empty() || a.e2.empty()) throw std::runtime_error("--e1 and --e2 go together");
    queries.emplace_back(g.entity_index(a.e1), g.entity_index(a.e2));
  } else {
    const fs::path pairs = dir / "pairs.tsv";
    if (!fs::exists(pairs)) throw std::runtime_error("missing " + pairs.string());
    for_each_line(pairs, [&](std::size_t n, const std::string& line) {
      if (line.empty()) return;
      auto f = split_tabs(line);
      if (f.size() != 4) throw ParseError(pairs.string(), n, "expected 4 fields");
      auto h = g.find_entity(f[1]);
      auto t = g.find_entity(f[2]);
      if (!h || !t) throw ParseError(pairs.string(), n, "unknown entity");
      queries.emplace_back(*h, *t);
    });
  }
  std::ofstream file;
  std::ostream* sink = &out;
  if (!a.out.empty()) {
    file.open(a.out, std::ios::binary);
    if (!file) throw std::runtime_error("cannot write " + a.out);
    sink = &file;
  }
  for (std::size_t i = 0; i < queries.size(); ++i) {
    auto paths = g.random_walk_paths(queries[i].first, queries[i].second, a.max_steps,
                                     a.num_walks, mix_seed(a.seed, 2 * i));
    paths = cap_paths(std::move(paths), a.max_paths, mix_seed(a.seed, 2 * i + 1));
    for (const auto& p : paths) *sink << format_path_record(make_path_record(g, p)) << '\n';
  }
  return 0;
}

int run_gen_synthetic(const SyntheticSpec& spec, const std::string& out_dir,
                      std::ostream& out) {
  const SyntheticData data = generate_synthetic(spec);
  save_dataset(data.dataset, out_dir);
  save_rules(data.dataset, data.truth.rules, fs::path(out_dir) / "rules.tsv");
  out << "pairs\t" << data.dataset.pairs.size() << "\nsentences\t"
      << data.dataset.sentences.size() << "\ncorrupted\t"
      << data.truth.corrupted_sentences.size() << "\npaths\t" << data.dataset.paths.size()
      << '\n';
  return 0;
}

int run_train(const TrainArgs& a, std::ostream& out) {
  Dataset ds = load_dataset(a.data);
  TrainConfig cfg = resolve_train_config(
      ds, a.config.empty() ? std::nullopt : std::optional<fs::path>(a.config));
  if (a.pretrain) cfg.pretrain = true;
  if (!a.mode.empty()) cfg.set("mode", a.mode);
  if (a.seed) cfg.seed = *a.seed;
  if (a.epochs) cfg.set("epochs", std::to_string(*a.epochs));
  const PreparedData data = prepare_data(std::move(ds), cfg.maxdist);
  const TrainResult res = train_on(data, cfg);
  write_training_outputs(res, a.out);
  for (const auto& row : res.trace) {
    out << "epoch " << row.epoch << " [" << row.stage << "] loss " << format_double(row.loss)
        << '\n';
  }
  return 0;
}

int run_eval(const EvalArgs& a, std::ostream& out, bool bias_only) {
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  Vocabulary vocab;
  const Model model = model_from_checkpoint(ckpt, &vocab);
  const PreparedData data = prepare_data(load_dataset(a.data), model.config.maxdist, &vocab);
  fs::create_directories(a.out);
  if (bias_only) {
    const BiasReport r = attention_bias_report(model, data.test, a.bucket_width);
    write_bias_groups_csv(r.groups, fs::path(a.out) / "attention_bias.csv");
    write_path_weights_csv(r.raw, fs::path(a.out) / "path_weights.csv");
    for (const auto& g : r.groups) {
      out << g.grouping << '\t' << g.group << '\t' << g.count << '\t'
          << format_double(g.mean_weight) << '\n';
    }
    return 0;
  }
  EvalOutputs eval = evaluate_on(model, data);
  if (a.bucket_width != 10) eval.bias.groups = group_path_weights(eval.bias.raw, a.bucket_width);
  write_eval_outputs(eval, a.out);
  out << "auc\t" << format_double(eval.metrics.auc_trapezoid) << '\n';
  for (const auto& [n, p] : eval.metrics.precision_at) {
    out << "p@" << n << '\t' << format_double(p) << '\n';
  }
  return 0;
}

int run_gradcheck(const GradArgs& a, std::ostream& out) {
  std::vector<Mode> modes;
  if (a.mode == "both") {
    modes = {Mode::base, Mode::ranking};
  } else {
    auto m = parse_mode(a.mode);
    if (!m) throw ConfigError("mode", "expected base, ranking or both");
    modes = {*m};
  }
  bool ok = true;
  for (Mode mode : modes) {
    const ModelConfig mc = gradcheck_model_config(mode);
    Rng rng(a.seed);
    Model model(mc);
    model.initialize(rng);
    const auto batch = toy_batch(mc, a.bags, rng);
    GradCheckOptions opt;
    opt.samples_per_slot = a.samples;
    opt.seed = a.seed;
    const GradCheckReport r = check_model_gradients(model, batch, opt);
    out << to_string(mode) << ": checked " << r.checked << " coordinates over "
        << r.slots_covered.size() << " slots, max error " << format_double(r.max_error)
        << ", failures " << r.failures.size() << '\n';
    for (const auto& f : r.failures) {
      out << "  " << f.slot << '[' << f.index << "] analytic " << format_double(f.analytic)
          << " numeric " << format_double(f.numeric) << '\n';
    }
    ok = ok && r.ok();
  }
  return ok ? 0 : 1;
}

}  // namespace

int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Universal-Graph relation extraction", "ugre"};
  app.require_subcommand(1);

  GraphArgs graph_args;
  auto* build = app.add_subcommand("build-graph", "Load and check a universal graph");
  build->add_option("--data", graph_args.data, "Directory with entities, relations and edges")
      ->required();
  build->add_option("--out", graph_args.out, "Write the de-duplicated graph here");

  SearchArgs search_args;
  auto* search = app.add_subcommand("search-paths", "Random-walk path retrieval");
  search->add_option("--data", search_args.data, "Graph directory")->required();
  search->add_option("--out", search_args.out, "Path dump file (default stdout)");
  search->add_option("--e1", search_args.e1, "Head entity id");
  search->add_option("--e2", search_args.e2, "Tail entity id");
  search->add_option("--max-steps", search_args.max_steps)->capture_default_str();
  search->add_option("--num-walks", search_args.num_walks)->capture_default_str();
  search->add_option("--max-paths", search_args.max_paths)->capture_default_str();
  search->add_option("--seed", search_args.seed)->capture_default_str();

  SyntheticSpec spec;
  std::string synth_out;
  auto* gen = app.add_subcommand("gen-synthetic", "Write a synthetic dataset");
  gen->add_option("--out", synth_out, "Output directory")->required();
  gen->add_option("--seed", spec.seed)->capture_default_str();
  gen->add_option("--noise", spec.noise)->capture_default_str();
  gen->add_option("--entities", spec.n_entities)->capture_default_str();
  gen->add_option("--relations", spec.n_relations)->capture_default_str();
  gen->add_option("--bags", spec.n_bags)->capture_default_str();
  gen->add_option("--na-fraction", spec.na_fraction)->capture_default_str();
  gen->add_option("--max-paths", spec.max_paths)->capture_default_str();
  gen->add_option("--num-walks", spec.num_walks)->capture_default_str();
  gen->add_option("--kg-edges", spec.background_kg_edges, "Background KG edges")
      ->capture_default_str();
  gen->add_option("--text-edges", spec.background_text_edges, "Background textual edges")
      ->capture_default_str();
  gen->add_option("--trigger-rate", spec.background_trigger_rate,
                  "Share of background textual edges carrying a trigger word")
      ->capture_default_str();
  gen->add_option("--kg-hop-prob", spec.kg_hop_prob)->capture_default_str();

  TrainArgs train_args;
  std::uint64_t train_seed = 0;
  std::size_t train_epochs = 0;
  auto* train_cmd = app.add_subcommand("train", "Train on the train split");
  train_cmd->add_option("--data", train_args.data, "Dataset directory")->required();
  train_cmd->add_option("--out", train_args.out, "Output directory")->required();
  train_cmd->add_option("--config", train_args.config, "key = value overrides");
  train_cmd->add_flag("--pretrain", train_args.pretrain, "Path type pretraining");
  train_cmd->add_option("--mode", train_args.mode, "base or ranking");
  auto* seed_opt = train_cmd->add_option("--seed", train_seed);
  auto* epochs_opt = train_cmd->add_option("--epochs", train_epochs);

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Held-out evaluation on the test split");
  eval->add_option("--checkpoint", eval_args.checkpoint)->required();
  eval->add_option("--data", eval_args.data)->required();
  eval->add_option("--out", eval_args.out)->required();
  eval->add_option("--bucket-width", eval_args.bucket_width)->capture_default_str();

  EvalArgs bias_args;
  auto* bias = app.add_subcommand("bias-report", "Path attention by type and length");
  bias->add_option("--checkpoint", bias_args.checkpoint)->required();
  bias->add_option("--data", bias_args.data)->required();
  bias->add_option("--out", bias_args.out)->required();
  bias->add_option("--bucket-width", bias_args.bucket_width)->capture_default_str();

  GradArgs grad_args;
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of the joint loss");
  grad->add_option("--mode", grad_args.mode, "base, ranking or both")->capture_default_str();
  grad->add_option("--samples", grad_args.samples, "Coordinates per parameter")
      ->capture_default_str();
  grad->add_option("--bags", grad_args.bags)->capture_default_str();
  grad->add_option("--seed", grad_args.seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*build) return run_build_graph(graph_args, out);
    if (*search) return run_search_paths(search_args, out);
    if (*gen) return run_gen_synthetic(spec, synth_out, out);
    if (*train_cmd) {
      if (*seed_opt) train_args.seed = train_seed;
      if (*epochs_opt) train_args.epochs = train_epochs;
      return run_train(train_args, out);
    }
    if (*eval) return run_eval(eval_args, out, false);
    if (*bias) return run_eval(bias_args, out, true);
    if (*grad) return run_gradcheck(grad_args, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"ugre"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return cli_dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace ugre
