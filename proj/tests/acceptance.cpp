// Acceptance runner: one PASS/FAIL line per criterion.
//
//   acceptance [--work-dir DIR] [--ugre PATH] [--only N ...] [--expect-fail N ...]
//
// Criteria listed with --expect-fail still print their verdict but do not
// change the exit status.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include "oracles.hpp"
#include "test_util.hpp"
#include "ugre/checkpoint.hpp"
#include "ugre/cli.hpp"
#include "ugre/text_io.hpp"
#include "ugre/workflow.hpp"

namespace fs = std::filesystem;
using namespace ugre;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Context {
  fs::path work;
  std::string ugre;
};

// --- shared synthetic runs ---------------------------------------------------

enum class Variant { sentences, base_paths, ranking_pretrain };

struct SyntheticRun {
  std::unique_ptr<PreparedData> data;
  TrainConfig config;
  std::map<Variant, double> auc;
  std::optional<Model> base_model;
  std::optional<EvalOutputs> base_eval;
};

TrainConfig variant_config(TrainConfig c, Variant v) {
  c.use_paths = v != Variant::sentences;
  c.mode = v == Variant::ranking_pretrain ? Mode::ranking : Mode::base;
  c.pretrain = v == Variant::ranking_pretrain;
  return c;
}

std::unique_ptr<PreparedData> synthetic_data(std::uint64_t seed, TrainConfig* config) {
  SyntheticSpec spec;
  spec.seed = seed;
  spec.noise = 0.3;
  SyntheticData syn = generate_synthetic(spec);
  *config = resolve_train_config(syn.dataset, std::nullopt);
  return std::make_unique<PreparedData>(prepare_data(std::move(syn.dataset), config->maxdist));
}

// Seed 1 is kept around for the scheduler and diagnostics criteria.
std::map<std::uint64_t, SyntheticRun>& synthetic_cache() {
  static std::map<std::uint64_t, SyntheticRun> cache;
  return cache;
}

SyntheticRun& synthetic_run(std::uint64_t seed) {
  auto& run = synthetic_cache()[seed];
  if (!run.data) run.data = synthetic_data(seed, &run.config);
  return run;
}

const Model& base_model_seed1() {
  SyntheticRun& run = synthetic_run(1);
  if (!run.base_model) {
    run.base_model = train_on(*run.data, variant_config(run.config, Variant::base_paths)).model;
  }
  return *run.base_model;
}

// --- criterion 1 ---------------------------------------------------------------

Outcome gradient_fidelity(const Context&) {
  const auto t0 = Clock::now();
  Outcome o{true, ""};
  for (Mode mode : {Mode::base, Mode::ranking}) {
    const ModelConfig mc = gradcheck_model_config(mode);
    Rng rng(1);
    Model model(mc);
    model.initialize(rng);
    const auto batch = toy_batch(mc, 3, rng);
    GradCheckOptions opt;
    opt.epsilon = 1e-4;
    opt.tolerance = 1e-3;
    opt.samples_per_slot = 25;
    const GradCheckReport r = check_model_gradients(model, batch, opt);
    const bool every_slot = r.slots_covered.size() == model.slots().size();
    o.pass = o.pass && r.ok() && r.checked >= 200 && every_slot;
    o.detail += std::string(to_string(mode)) + ": " + std::to_string(r.checked) +
                " coords, " + std::to_string(r.slots_covered.size()) + "/" +
                std::to_string(model.slots().size()) + " slots, max rel err " +
                fmt(r.max_error, 3) + ", failures " + std::to_string(r.failures.size()) +
                "; ";
  }
  const double secs = seconds_since(t0);
  o.pass = o.pass && secs < 60.0;
  o.detail += fmt(secs, 3) + " s";
  return o;
}

// --- criterion 2 ---------------------------------------------------------------

Outcome oracle_equivalence(const Context&) {
  std::mt19937 gen(2024);
  std::size_t walk_violations = 0, enum_mismatch = 0, walked = 0;
  for (int g = 0; g < 50; ++g) {
    const std::size_t n = 5 + gen() % 26;
    const UniversalGraph graph = test::random_graph(n, 2 * n + gen() % (2 * n), gen());
    for (int q = 0; q < 4; ++q) {
      const auto e1 = static_cast<EntityIndex>(gen() % n);
      auto e2 = static_cast<EntityIndex>(gen() % n);
      if (e1 == e2) e2 = static_cast<EntityIndex>((e2 + 1) % n);
      const auto all = graph.enumerate_paths(e1, e2, 3);
      std::set<std::vector<std::uint64_t>> keys;
      for (const auto& p : all) keys.insert(p.key());
      if (keys != test::brute_force_paths(graph, e1, e2, 3)) ++enum_mismatch;
      for (const auto& p : graph.random_walk_paths(e1, e2, 3, 200, gen())) {
        ++walked;
        if (!keys.count(p.key()) || !graph.is_valid_path(p)) ++walk_violations;
      }
    }
  }

  std::size_t pr_mismatch = 0;
  for (int i = 0; i < 100; ++i) {
    const auto recs = oracle::random_records(gen);
    const PRCurve c = pr_curve(recs);
    const auto want = oracle::pr_points(recs);
    bool same = c.points.size() == want.size();
    for (std::size_t k = 0; same && k < want.size(); ++k) {
      same = c.points[k].recall == want[k].recall && c.points[k].precision == want[k].precision;
    }
    same = same && auc_trapezoid(c) == oracle::auc_trapezoid(want);
    for (std::size_t n = 1; same && n <= recs.size(); ++n) {
      same = precision_at_n(recs, n) == oracle::precision_at(recs, n);
    }
    if (!same) ++pr_mismatch;
  }

  std::size_t group_mismatch = 0;
  struct P {
    std::size_t tau1, tau2;
  };
  for (int i = 0; i < 100; ++i) {
    std::vector<P> bag(1 + gen() % 40);
    for (auto& p : bag) {
      p.tau1 = 1 + gen() % 40;
      p.tau2 = 1 + gen() % p.tau1;
    }
    const std::size_t j = 1 + gen() % 10;
    const ComplexityWeights w{0.25 * static_cast<double>(1 + gen() % 8),
                              0.25 * static_cast<double>(gen() % 8)};
    const auto got = rank_and_group(bag, j, w);
    const auto want = oracle::complexity_groups(bag, j, w);
    if (got.complex != want.complex || got.simple != want.simple) ++group_mismatch;
  }

  Outcome o;
  o.pass = walk_violations == 0 && enum_mismatch == 0 && walked > 0 && pr_mismatch == 0 &&
           group_mismatch == 0;
  o.detail = "50 graphs: " + std::to_string(walked) + " walked paths, " +
             std::to_string(walk_violations) + " outside enumeration, " +
             std::to_string(enum_mismatch) + " enumeration mismatches; 100 record lists: " +
             std::to_string(pr_mismatch) + " PR/AUC mismatches; 100 bags: " +
             std::to_string(group_mismatch) + " grouping mismatches";
  return o;
}

// --- criterion 3 ---------------------------------------------------------------

double sum_dev(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return std::abs(s - 1.0);
}

Outcome normalization(const Context&) {
  double worst = 0.0;
  std::size_t forwards = 0;
  for (std::uint64_t seed = 0; forwards < 1000; ++seed) {
    const Mode mode = seed % 2 == 0 ? Mode::base : Mode::ranking;
    ModelConfig mc = gradcheck_model_config(mode);
    mc.n_entities = 10;
    mc.n_relations = 3 + seed % 5;
    Rng rng(seed);
    Model model(mc);
    model.initialize(rng);
    for (const auto& bag : toy_batch(mc, 50, rng)) {
      const BagState st = forward_bag(model, bag);
      worst = std::max(worst, sum_dev(st.view.class_probs));
      worst = std::max(worst, sum_dev(st.kg.probs));
      if (st.sent_att) worst = std::max(worst, sum_dev(st.sent_att->weights));
      if (st.path_att) worst = std::max(worst, sum_dev(st.path_att->weights));
      if (st.guided) {
        worst = std::max(worst, sum_dev(st.guided->complex.weights));
        worst = std::max(worst, sum_dev(st.guided->simple.weights));
      }
      ++forwards;
    }
  }
  return {worst <= 1e-9, std::to_string(forwards) +
                             " forwards, max |sum - 1| over attention, class and relation "
                             "softmaxes " +
                             fmt(worst, 3)};
}

// --- criterion 4 ---------------------------------------------------------------

struct Reachability {
  double global_weight = 0.0;
  double grad_norm = 0.0;
};

// Three paths whose first filter reads +/-1 from the centre word. Attention
// W = alpha u e0^T with r_ht = 10 u drives the negative path's logit far
// below the others. The long path uses its own word, so that word's
// embedding row only receives gradient through that path.
Reachability reachability_probe(Mode mode) {
  constexpr std::uint32_t kSentenceWord = 1, kSimpleWord = 2, kComplexWord = 3;
  ModelConfig mc;
  mc.n_entities = 2;
  mc.n_relations = 3;
  mc.vocab_size = 4;
  mc.word_dim = 4;
  mc.pos_dim = 2;
  mc.kg_dim = 5;
  mc.filters = 3;
  mc.maxdist = 10;
  mc.j = 1;
  mc.mode = mode;
  Model model(mc);
  Rng rng(4);
  model.initialize(rng);

  auto& ent = model.kg.entity.value;
  for (std::size_t k = 0; k < mc.kg_dim; ++k) {
    ent.at(0, k) = 0.0;
    ent.at(1, k) = 10.0;
  }
  const double alpha = 50.0;
  model.net.attn_w.value.fill(0.0);
  for (std::size_t k = 0; k < mc.kg_dim; ++k) model.net.attn_w.value.at(k, 0) = alpha;
  model.net.attn_b.value.fill(0.0);
  model.net.conv_path_w.value.fill(0.0);
  model.net.conv_path_w.value.at(0, mc.input_dim()) = 3.0;  // centre slot, word dim 0
  model.net.conv_path_b.value.fill(0.0);
  auto& words = model.net.word_emb.value;
  words.at(kSimpleWord, 0) = 1.0;
  words.at(kComplexWord, 0) = -1.0;

  auto make_path = [&](std::uint32_t word, std::size_t len) {
    EncodedPath p;
    const std::vector<std::uint32_t> ids(len, word);
    p.features = featurize(ids, 0, len - 1, mc.maxdist);
    p.type = PathType::hybrid;
    p.tau1 = len;
    p.tau2 = 1;
    return p;
  };
  EncodedBag bag;
  bag.head = 0;
  bag.tail = 1;
  bag.label = 1;
  const std::vector<std::uint32_t> sent(5, kSentenceWord);
  bag.sentences.push_back(featurize(sent, 0, 4, mc.maxdist));
  bag.paths = {make_path(kSimpleWord, 3), make_path(kSimpleWord, 4),
               make_path(kComplexWord, 12)};

  const BagState st = forward_bag(model, bag);
  model.zero_grads();
  const std::vector<EncodedBag> batch{bag};
  joint_loss_and_grad(model, batch);
  double norm = 0.0;
  for (double g : model.net.word_emb.grad.row(kComplexWord)) norm += g * g;
  return {st.view.path_weights[2], std::sqrt(norm)};
}

Outcome complex_path_reachability(const Context&) {
  const Reachability base = reachability_probe(Mode::base);
  const Reachability ranking = reachability_probe(Mode::ranking);
  Outcome o;
  o.pass = base.global_weight < 1e-30 && ranking.global_weight < 1e-30 &&
           ranking.grad_norm > 0.0 && base.grad_norm < 1e-20;
  o.detail = "global weight of the complex path " + fmt(base.global_weight, 3) +
             "; gradient norm on its word embedding: ranking " + fmt(ranking.grad_norm, 3) +
             ", base " + fmt(base.grad_norm, 3);
  return o;
}

// --- criterion 5 ---------------------------------------------------------------

Outcome directional(const Context&) {
  const auto t0 = Clock::now();
  const std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::map<Variant, double> mean;
  std::size_t ranking_best = 0;
  for (std::uint64_t seed : seeds) {
    SyntheticRun& run = synthetic_run(seed);
    for (Variant v : {Variant::sentences, Variant::base_paths, Variant::ranking_pretrain}) {
      TrainResult res = train_on(*run.data, variant_config(run.config, v));
      EvalOutputs ev = evaluate_on(res.model, *run.data);
      run.auc[v] = ev.metrics.auc_trapezoid;
      mean[v] += ev.metrics.auc_trapezoid / static_cast<double>(seeds.size());
      if (seed == 1 && v == Variant::base_paths) {
        run.base_model = std::move(res.model);
        run.base_eval = std::move(ev);
      }
    }
    const auto& a = run.auc;
    const bool best = a.at(Variant::ranking_pretrain) >= a.at(Variant::base_paths) &&
                      a.at(Variant::ranking_pretrain) >= a.at(Variant::sentences);
    ranking_best += best ? 1 : 0;
    std::cout << "    seed " << seed << ": sentence-only " << fmt(a.at(Variant::sentences))
              << ", base+UG " << fmt(a.at(Variant::base_paths)) << ", ranking+pretrain "
              << fmt(a.at(Variant::ranking_pretrain)) << '\n';
    if (seed != 1) run.data.reset();
  }
  const double secs = seconds_since(t0);
  const double s = mean[Variant::sentences], u = mean[Variant::base_paths],
               r = mean[Variant::ranking_pretrain];
  Outcome o;
  o.pass = s < u && r >= u - 0.01 && ranking_best >= 3 && secs < 900.0;
  o.detail = "mean AUC sentence-only " + fmt(s) + " < base+UG " + fmt(u) + ": " +
             (s < u ? "yes" : "no") + "; ranking+pretrain " + fmt(r) + " >= base+UG - 0.01: " +
             (r >= u - 0.01 ? "yes" : "no") + "; ranking+pretrain best on " +
             std::to_string(ranking_best) + "/5 seeds (need 3); " + fmt(secs, 3) + " s";
  return o;
}

// --- criterion 6 ---------------------------------------------------------------

Outcome scheduler(const Context&) {
  SyntheticRun& run = synthetic_run(1);
  const PreparedData& data = *run.data;
  const ModelConfig mc_rank = model_config_for(data, variant_config(run.config, Variant::ranking_pretrain));

  TrainConfig pre = variant_config(run.config, Variant::ranking_pretrain);
  pre.pretrain_epochs = 1;
  pre.epochs = 1;
  const TrainResult staged = train(pre, mc_rank, data.train);
  const PathType types[] = {PathType::textual, PathType::hybrid, PathType::kg};
  std::uint64_t off_type = 0;
  std::string counts;
  for (std::size_t s = 0; s < 3; ++s) {
    const PathUsage& u = staged.stages[s].usage;
    off_type += u.total() - u[types[s]];
    counts += staged.stages[s].tag + "=" + std::to_string(u[types[s]]) + " ";
  }
  const bool all_mixed = staged.stages[3].usage[PathType::kg] > 0 &&
                         staged.stages[3].usage[PathType::textual] > 0 &&
                         staged.stages[3].usage[PathType::hybrid] > 0;

  TrainConfig plain = variant_config(run.config, Variant::base_paths);
  plain.epochs = 2;
  const ModelConfig mc = model_config_for(data, plain);
  const TrainResult a = train(plain, mc, data.train);
  const TrainResult b = run_pretrain_schedule(StagePlan::plain(2), plain, mc,
                                              data.train);
  const bool same_bytes = serialize_checkpoint(a.stages.back().checkpoint) ==
                          serialize_checkpoint(b.stages.back().checkpoint);
  bool same_trace = a.trace.size() == b.trace.size();
  for (std::size_t i = 0; same_trace && i < a.trace.size(); ++i) {
    same_trace = a.trace[i].loss == b.trace[i].loss;
  }
  Outcome o;
  o.pass = off_type == 0 && all_mixed && same_bytes && same_trace;
  o.detail = "pretraining stages on-type paths " + counts + "off-type " +
             std::to_string(off_type) + "; plan [(all, 2)] vs plain training: checkpoint " +
             (same_bytes ? "identical" : "differs") + ", loss trace " +
             (same_trace ? "identical" : "differs");
  return o;
}

// --- criterion 7 ---------------------------------------------------------------

int run_cli(const Context& ctx, const std::vector<std::string>& args, const fs::path& log) {
  if (ctx.ugre.empty()) {
    std::ofstream out(log);
    return cli_dispatch(args, out, out);
  }
  std::string cmd = "\"" + ctx.ugre + "\"";
  for (const auto& a : args) cmd += " \"" + a + "\"";
  cmd += " > \"" + log.string() + "\" 2>&1";
  return std::system(cmd.c_str());
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) {
      files[fs::relative(e.path(), dir).string()] = test::read_file(e.path());
    }
  }
  return files;
}

Outcome determinism(const Context& ctx) {
  std::vector<std::map<std::string, std::string>> runs;
  for (const char* name : {"run_a", "run_b"}) {
    const fs::path root = ctx.work / "determinism" / name;
    fs::remove_all(root);
    fs::create_directories(root);
    const std::string data = (root / "data").string();
    const std::string out = (root / "out").string();
    if (run_cli(ctx, {"gen-synthetic", "--seed", "7", "--out", data}, root / "gen.log") != 0 ||
        run_cli(ctx, {"train", "--data", data, "--out", out + "/train", "--epochs", "2"},
                root / "train.log") != 0 ||
        run_cli(ctx, {"eval", "--checkpoint", out + "/train/checkpoint.bin", "--data", data,
                      "--out", out + "/eval"},
                root / "eval.log") != 0) {
      return {false, std::string("command failed in ") + name + ", see " + root.string()};
    }
    runs.push_back(snapshot(root / "out"));
    auto data_files = snapshot(root / "data");
    for (auto& [k, v] : data_files) runs.back()["data/" + k] = std::move(v);
  }
  std::size_t differing = 0;
  for (const auto& [name, bytes] : runs[0]) {
    auto it = runs[1].find(name);
    if (it == runs[1].end() || it->second != bytes) ++differing;
  }
  const bool has_outputs = runs[0].count("train/checkpoint.bin") && runs[0].count("eval/metrics.txt");
  Outcome o;
  o.pass = has_outputs && differing == 0 && runs[0].size() == runs[1].size();
  o.detail = std::to_string(runs[0].size()) + " files compared (dataset, checkpoints, loss "
             "trace, metrics, curves), " + std::to_string(differing) + " differ";
  return o;
}

// --- criterion 8 ---------------------------------------------------------------

Outcome diagnostics(const Context& ctx) {
  SyntheticRun& run = synthetic_run(1);
  const Model& model = base_model_seed1();
  if (!run.base_eval) run.base_eval = evaluate_on(model, *run.data);
  const fs::path dir = ctx.work / "diagnostics";
  fs::create_directories(dir);
  write_eval_outputs(*run.base_eval, dir);

  // Recompute every group mean from the per-path CSV.
  const auto raw = read_path_weights_csv(dir / "path_weights.csv");
  std::map<std::pair<std::string, std::string>, std::pair<std::size_t, double>> recomputed;
  for (const auto& w : raw) {
    auto& t = recomputed[{"type", std::string(to_string(w.type))}];
    ++t.first;
    t.second += w.weight;
    const std::size_t lo = (w.tau1 / 10) * 10;
    auto& l = recomputed[{"length", std::to_string(lo) + "-" + std::to_string(lo + 9)}];
    ++l.first;
    l.second += w.weight;
  }

  std::size_t rows = 0, type_rows = 0, length_rows = 0, mismatched = 0;
  double worst = 0.0;
  bool header_ok = false;
  for_each_line(dir / "attention_bias.csv", [&](std::size_t n, const std::string& line) {
    if (line.empty()) return;
    if (n == 1) {
      header_ok = line == "grouping,group,count,mean_weight";
      return;
    }
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string part; std::getline(ss, part, ',');) f.push_back(part);
    double mean = 0.0;
    std::size_t count = 0;
    if (f.size() != 4 || !parse_size(f[2], count) || !parse_double(f[3], mean)) {
      ++mismatched;
      return;
    }
    ++rows;
    (f[0] == "type" ? type_rows : length_rows) += 1;
    auto it = recomputed.find({f[0], f[1]});
    if (it == recomputed.end() || it->second.first != count) {
      ++mismatched;
      return;
    }
    const double want = it->second.second / static_cast<double>(it->second.first);
    worst = std::max(worst, std::abs(want - mean));
  });
  Outcome o;
  o.pass = header_ok && type_rows > 0 && length_rows > 0 && mismatched == 0 &&
           rows == recomputed.size() && worst <= 1e-12 && !raw.empty();
  o.detail = std::to_string(raw.size()) + " path weights; " + std::to_string(type_rows) +
             " type groups, " + std::to_string(length_rows) +
             " length groups; max |mean - recomputed| " + fmt(worst, 3) + ", " +
             std::to_string(mismatched) + " rows without a matching recomputed group";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app("Acceptance criteria runner");
  std::string work = (fs::temp_directory_path() / "ugre_acceptance").string();
  Context ctx;
  std::vector<int> only, expect_fail;
  app.add_option("--work-dir", work, "Scratch directory")->capture_default_str();
  app.add_option("--ugre", ctx.ugre, "ugre executable for the determinism runs");
  app.add_option("--only", only, "Run only these criteria")->check(CLI::Range(1, 8));
  app.add_option("--expect-fail", expect_fail, "Criteria whose failure is not fatal")
      ->check(CLI::Range(1, 8));
  CLI11_PARSE(app, argc, argv);
  ctx.work = work;
  fs::create_directories(ctx.work);

  struct Criterion {
    int id;
    const char* title;
    Outcome (*fn)(const Context&);
  };
  const Criterion criteria[] = {
      {1, "gradient fidelity", gradient_fidelity},
      {2, "oracle equivalence", oracle_equivalence},
      {3, "normalization", normalization},
      {4, "complex-path gradient reachability", complex_path_reachability},
      {5, "directional result on synthetic data", directional},
      {6, "scheduler correctness", scheduler},
      {7, "determinism", determinism},
      {8, "diagnostics shape", diagnostics},
  };

  int fatal = 0;
  for (const Criterion& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    Outcome o;
    try {
      o = c.fn(ctx);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const bool tolerated =
        std::find(expect_fail.begin(), expect_fail.end(), c.id) != expect_fail.end();
    std::cout << "criterion " << c.id << ' ' << (o.pass ? "PASS" : "FAIL") << "  " << c.title
              << ": " << o.detail << (!o.pass && tolerated ? " [known failure]" : "") << '\n'
              << std::flush;
    if (!o.pass && !tolerated) ++fatal;
  }
  return fatal == 0 ? 0 : 1;
}
