#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <unordered_set>

#include "ugre/data_io.hpp"
#include "ugre/rng.hpp"

namespace ugre {

std::vector<SyntheticRule> default_rules(std::size_t n_relations) {
  std::vector<SyntheticRule> rules;
  for (std::size_t k = 0; k < n_relations; ++k) {
    rules.push_back({static_cast<RelationIndex>(k + 1),
                     static_cast<RelationIndex>((k + 1) % n_relations + 1),
                     static_cast<RelationIndex>((k + 3) % n_relations + 1)});
  }
  return rules;
}

namespace {

constexpr std::size_t kFillerWords = 60;

struct Neighbor {
  RelationIndex relation;
  EntityIndex entity;
};

class Generator {
 public:
  explicit Generator(const SyntheticSpec& spec) : spec_(spec), rng_(spec.seed) {}

  SyntheticData run();

 private:
  void validate();
  void build_vocabularies();
  void choose_pairs();
  void plant_chains();
  void add_background();
  void write_sentences();
  void retrieve_paths();

  bool pair_used(EntityIndex a, EntityIndex b) const {
    return used_.count(pair_key(std::min(a, b), std::max(a, b))) != 0;
  }
  void mark_used(EntityIndex a, EntityIndex b) {
    used_.insert(pair_key(std::min(a, b), std::max(a, b)));
  }
  // True when u -r-> v would complete a rule chain for a bag pair whose
  // label is not that rule's head.
  bool spurious(EntityIndex u, RelationIndex r, EntityIndex v) const;
  void add_edge(EntityIndex u, RelationIndex r, EntityIndex v, EdgeKind kind,
                bool planted);
  std::vector<std::string> text_edge_sentence(EntityIndex u, EntityIndex v,
                                              RelationIndex r, std::size_t& pu,
                                              std::size_t& pv);
  const std::string& trigger(RelationIndex r) {
    return triggers_[r][rng_.index(triggers_[r].size())];
  }
  const std::string& filler() { return fillers_[rng_.index(fillers_.size())]; }
  EntityIndex random_entity() {
    return static_cast<EntityIndex>(rng_.index(spec_.n_entities));
  }

  const SyntheticSpec& spec_;
  Rng rng_;
  SyntheticData out_;
  std::map<std::pair<RelationIndex, RelationIndex>, RelationIndex> rule_by_body_;
  std::vector<RelationIndex> rule_for_head_;
  std::vector<std::vector<std::string>> triggers_;
  std::vector<std::string> fillers_;
  std::unordered_set<std::uint64_t> used_;
  std::unordered_map<std::uint64_t, RelationIndex> bag_label_;
  std::vector<std::vector<Neighbor>> out_edges_;
  std::vector<std::vector<Neighbor>> in_edges_;
  std::vector<RelationIndex> labels_;
};

void Generator::validate() {
  if (spec_.n_entities < 4) throw std::invalid_argument("synthetic: need >= 4 entities");
  if (spec_.n_relations < 1) throw std::invalid_argument("synthetic: need >= 1 relation");
  if (!(spec_.noise >= 0.0 && spec_.noise < 1.0)) {
    throw std::invalid_argument("synthetic: noise must be in [0, 1)");
  }
  if (!(spec_.na_fraction >= 0.0 && spec_.na_fraction <= 1.0)) {
    throw std::invalid_argument("synthetic: na_fraction must be in [0, 1]");
  }
  if (!(spec_.test_fraction > 0.0 && spec_.test_fraction < 1.0)) {
    throw std::invalid_argument("synthetic: test_fraction must be in (0, 1)");
  }
  if (spec_.max_sentences == 0 || spec_.max_paths == 0 || spec_.num_walks == 0 ||
      spec_.max_steps == 0 || spec_.n_bags == 0) {
    throw std::invalid_argument("synthetic: counts must be >= 1");
  }
  const std::size_t max_pairs = spec_.n_entities * (spec_.n_entities - 1) / 2;
  const std::size_t edges =
      spec_.n_bags * 3 + spec_.background_kg_edges + spec_.background_text_edges;
  if (edges > max_pairs / 2) {
    throw std::invalid_argument("synthetic: too many bags and edges for " +
                                std::to_string(spec_.n_entities) + " entities");
  }
  auto& rules = out_.truth.rules;
  rules = spec_.rules.empty() ? default_rules(spec_.n_relations) : spec_.rules;
  rule_for_head_.assign(spec_.n_relations + 1, 0);
  for (const auto& r : rules) {
    for (RelationIndex rel : {r.head, r.first, r.second}) {
      if (rel == 0 || rel > spec_.n_relations) {
        throw std::invalid_argument("synthetic: rule references relation " +
                                    std::to_string(rel) + " outside 1.." +
                                    std::to_string(spec_.n_relations));
      }
    }
    if (!rule_by_body_.emplace(std::make_pair(r.first, r.second), r.head).second) {
      throw std::invalid_argument("synthetic: two rules share one body");
    }
    if (rule_for_head_[r.head] != 0) {
      throw std::invalid_argument("synthetic: two rules share one head");
    }
    rule_for_head_[r.head] = r.head;
  }
  if (rules.empty() && spec_.na_fraction < 1.0) {
    throw std::invalid_argument("synthetic: positive bags need at least one rule");
  }
}

void Generator::build_vocabularies() {
  auto& g = out_.dataset.graph;
  g.add_relation(std::string(kNaRelation));
  triggers_.resize(spec_.n_relations + 1);
  for (std::size_t k = 1; k <= spec_.n_relations; ++k) {
    const std::string n = std::to_string(k);
    g.add_relation("rel_" + n, {"rel" + n});
    triggers_[k] = {"trig" + n + "a", "trig" + n + "b"};
  }
  for (std::size_t i = 0; i < spec_.n_entities; ++i) {
    g.add_entity("E" + std::to_string(i), {"ent" + std::to_string(i)});
  }
  for (std::size_t i = 0; i < kFillerWords; ++i) fillers_.push_back("w" + std::to_string(i));
  out_edges_.resize(spec_.n_entities);
  in_edges_.resize(spec_.n_entities);
}

void Generator::choose_pairs() {
  auto& ds = out_.dataset;
  std::vector<RelationIndex> heads;
  for (const auto& r : out_.truth.rules) heads.push_back(r.head);
  const auto n_pos = static_cast<std::size_t>(
      std::llround(static_cast<double>(spec_.n_bags) * (1.0 - spec_.na_fraction)));
  labels_.assign(spec_.n_bags, 0);
  for (std::size_t i = 0; i < n_pos; ++i) labels_[i] = heads[i % heads.size()];
  rng_.shuffle(labels_);

  std::vector<std::size_t> order(spec_.n_bags);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng_.shuffle(order);
  const auto n_test = static_cast<std::size_t>(
      std::ceil(static_cast<double>(spec_.n_bags) * spec_.test_fraction));
  std::vector<Split> split(spec_.n_bags, Split::train);
  for (std::size_t i = 0; i < n_test; ++i) split[order[i]] = Split::test;

  for (std::size_t i = 0; i < spec_.n_bags; ++i) {
    EntityIndex h, t;
    do {
      h = random_entity();
      t = random_entity();
    } while (h == t || pair_used(h, t));
    mark_used(h, t);
    bag_label_[pair_key(h, t)] = labels_[i];
    ds.pairs.push_back({"P" + std::to_string(i), h, t, split[i]});
    if (labels_[i] != 0) ds.triplets.push_back({h, labels_[i], t});
  }
  ds.index_pairs();
}

bool Generator::spurious(EntityIndex u, RelationIndex r, EntityIndex v) const {
  auto violates = [&](EntityIndex a, RelationIndex first, RelationIndex second,
                      EntityIndex c) {
    auto rule = rule_by_body_.find({first, second});
    if (rule == rule_by_body_.end()) return false;
    auto bag = bag_label_.find(pair_key(a, c));
    return bag != bag_label_.end() && bag->second != rule->second;
  };
  if (r == 0) return false;
  for (const auto& n : out_edges_[v]) {
    if (violates(u, r, n.relation, n.entity)) return true;
  }
  for (const auto& n : in_edges_[u]) {
    if (violates(n.entity, n.relation, r, v)) return true;
  }
  return false;
}

std::vector<std::string> Generator::text_edge_sentence(EntityIndex u, EntityIndex v,
                                                       RelationIndex r,
                                                       std::size_t& pu,
                                                       std::size_t& pv) {
  const std::size_t len = 6 + rng_.index(9);
  std::vector<std::string> tokens(len);
  for (auto& w : tokens) w = filler();
  pu = rng_.index(len);
  do {
    pv = rng_.index(len);
  } while (pv == pu);
  const auto& g = out_.dataset.graph;
  tokens[pu] = g.entity(u).surface.front();
  tokens[pv] = g.entity(v).surface.front();
  if (r != 0) {
    std::size_t pt;
    do {
      pt = rng_.index(len);
    } while (pt == pu || pt == pv);
    tokens[pt] = trigger(r);
  }
  return tokens;
}

void Generator::add_edge(EntityIndex u, RelationIndex r, EntityIndex v, EdgeKind kind,
                         bool planted) {
  auto& g = out_.dataset.graph;
  if (kind == EdgeKind::kg) {
    g.add_kg_edge(u, r, v);
  } else {
    std::size_t pu = 0, pv = 0;
    auto tokens = text_edge_sentence(u, v, r, pu, pv);
    g.add_text_edge(std::move(tokens), u, pu, v, pv);
  }
  mark_used(u, v);
  if (r != 0) {
    out_edges_[u].push_back({r, v});
    in_edges_[v].push_back({r, u});
  }
  out_.truth.edges.push_back({u, v, r, kind, planted});
}

void Generator::plant_chains() {
  const auto& ds = out_.dataset;
  for (std::size_t i = 0; i < ds.pairs.size(); ++i) {
    const RelationIndex k = labels_[i];
    if (k == 0) continue;
    const auto& rule = *std::find_if(out_.truth.rules.begin(), out_.truth.rules.end(),
                                     [&](const SyntheticRule& r) { return r.head == k; });
    const EntityIndex a = ds.pairs[i].head;
    const EntityIndex c = ds.pairs[i].tail;
    bool planted = false;
    for (int attempt = 0; attempt < 200 && !planted; ++attempt) {
      const EntityIndex b = random_entity();
      if (b == a || b == c || pair_used(a, b) || pair_used(b, c)) continue;
      if (spurious(a, rule.first, b) || spurious(b, rule.second, c)) continue;
      const EdgeKind k1 = rng_.bernoulli(spec_.kg_hop_prob) ? EdgeKind::kg : EdgeKind::text;
      const EdgeKind k2 = rng_.bernoulli(spec_.kg_hop_prob) ? EdgeKind::kg : EdgeKind::text;
      add_edge(a, rule.first, b, k1, true);
      add_edge(b, rule.second, c, k2, true);
      planted = true;
    }
    if (!planted) {
      throw std::runtime_error("synthetic: could not plant a rule chain for pair " +
                               ds.pairs[i].id + "; the graph is too dense");
    }
  }
}

void Generator::add_background() {
  auto fill = [&](std::size_t count, EdgeKind kind) {
    std::size_t added = 0;
    const std::size_t budget = 100 * count + 100;
    for (std::size_t attempt = 0; attempt < budget && added < count; ++attempt) {
      const EntityIndex u = random_entity();
      const EntityIndex v = random_entity();
      RelationIndex r = static_cast<RelationIndex>(1 + rng_.index(spec_.n_relations));
      if (kind == EdgeKind::text && !rng_.bernoulli(spec_.background_trigger_rate)) r = 0;
      if (u == v || pair_used(u, v) || spurious(u, r, v)) continue;
      add_edge(u, r, v, kind, false);
      ++added;
    }
    if (added < count) {
      throw std::runtime_error("synthetic: could not place background edges");
    }
  };
  fill(spec_.background_kg_edges, EdgeKind::kg);
  fill(spec_.background_text_edges, EdgeKind::text);
}

void Generator::write_sentences() {
  auto& ds = out_.dataset;
  struct Slot {
    std::size_t pair;
  };
  std::vector<Slot> slots;
  for (std::size_t i = 0; i < ds.pairs.size(); ++i) {
    const std::size_t n = 1 + rng_.index(spec_.max_sentences);
    for (std::size_t s = 0; s < n; ++s) slots.push_back({i});
  }
  const auto n_corrupt = static_cast<std::size_t>(
      std::floor(spec_.noise * static_cast<double>(slots.size())));
  std::vector<std::size_t> order(slots.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng_.shuffle(order);
  std::vector<bool> corrupt(slots.size(), false);
  for (std::size_t i = 0; i < n_corrupt; ++i) corrupt[order[i]] = true;

  for (std::size_t i = 0; i < slots.size(); ++i) {
    const auto& pair = ds.pairs[slots[i].pair];
    const RelationIndex label = labels_[slots[i].pair];
    RelationIndex shown = label;
    if (corrupt[i]) {
      if (label == 0 || spec_.n_relations == 1) {
        shown = label == 0 ? static_cast<RelationIndex>(1 + rng_.index(spec_.n_relations))
                           : 0;
      } else {
        do {
          shown = static_cast<RelationIndex>(1 + rng_.index(spec_.n_relations));
        } while (shown == label);
      }
      out_.truth.corrupted_sentences.push_back(i);
    }
    const std::size_t len = 8 + rng_.index(13);
    SentenceRecord s;
    s.pair = slots[i].pair;
    s.tokens.resize(len);
    for (auto& w : s.tokens) w = filler();
    s.pos1 = rng_.index(len);
    do {
      s.pos2 = rng_.index(len);
    } while (s.pos2 == s.pos1);
    s.tokens[s.pos1] = ds.graph.entity(pair.head).surface.front();
    s.tokens[s.pos2] = ds.graph.entity(pair.tail).surface.front();
    if (shown != 0) {
      std::size_t pt;
      do {
        pt = rng_.index(len);
      } while (pt == s.pos1 || pt == s.pos2);
      s.tokens[pt] = trigger(shown);
    }
    ds.sentences.push_back(std::move(s));
  }
}

void Generator::retrieve_paths() {
  auto& ds = out_.dataset;
  for (std::size_t i = 0; i < ds.pairs.size(); ++i) {
    auto paths = ds.graph.random_walk_paths(ds.pairs[i].head, ds.pairs[i].tail,
                                            spec_.max_steps, spec_.num_walks,
                                            mix_seed(spec_.seed, 2 * i));
    paths = cap_paths(std::move(paths), spec_.max_paths, mix_seed(spec_.seed, 2 * i + 1));
    for (const auto& p : paths) ds.paths.push_back(make_path_record(ds.graph, p));
  }
}

SyntheticData Generator::run() {
  validate();
  build_vocabularies();
  choose_pairs();
  plant_chains();
  add_background();
  write_sentences();
  retrieve_paths();
  out_.dataset.config = synthetic_train_overrides();
  return std::move(out_);
}

}  // namespace

std::vector<std::pair<std::string, std::string>> synthetic_train_overrides() {
  return {{"lr_net", "0.3"}, {"batch_size", "10"}, {"epochs", "15"}, {"complexity.j", "5"}};
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  return Generator(spec).run();
}

void save_rules(const Dataset& ds, const std::vector<SyntheticRule>& rules,
                const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const auto& g = ds.graph;
  for (const auto& r : rules) {
    out << g.relation(r.head).id << '\t' << g.relation(r.first).id << '\t'
        << g.relation(r.second).id << '\n';
  }
}

}  // namespace ugre
