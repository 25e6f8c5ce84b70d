#include "ugre/data_io.hpp"

#include <fstream>
#include <stdexcept>
#include <unordered_set>

#include "ugre/text_io.hpp"

namespace ugre {

namespace fs = std::filesystem;

std::uint64_t pair_key(EntityIndex head, EntityIndex tail) {
  return (static_cast<std::uint64_t>(head) << 32) | tail;
}

std::optional<std::size_t> Dataset::find_pair(EntityIndex head,
                                              EntityIndex tail) const {
  auto it = pair_index_.find(pair_key(head, tail));
  if (it == pair_index_.end()) return std::nullopt;
  return it->second;
}

void Dataset::index_pairs() {
  pair_index_.clear();
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (!pair_index_.emplace(pair_key(pairs[i].head, pairs[i].tail), i).second) {
      throw std::invalid_argument("duplicate entity pair " + pairs[i].id);
    }
  }
}

namespace {

fs::path require(const fs::path& dir, const char* name) {
  fs::path p = dir / name;
  if (!fs::exists(p)) throw std::runtime_error("missing dataset file: " + p.string());
  return p;
}

EntityIndex entity_field(const UniversalGraph& g, const std::string& id,
                         const std::string& file, std::size_t line) {
  auto e = g.find_entity(id);
  if (!e) throw ParseError(file, line, "unknown entity '" + id + "'");
  return *e;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

void load_triplets(Dataset& ds, const fs::path& path) {
  const std::string file = path.string();
  for_each_line(path, [&](std::size_t n, const std::string& line) {
    if (line.empty()) return;
    auto f = split_tabs(line);
    if (f.size() != 3) throw ParseError(file, n, "expected head<TAB>relation<TAB>tail");
    Triplet t;
    t.head = entity_field(ds.graph, f[0], file, n);
    t.tail = entity_field(ds.graph, f[2], file, n);
    auto r = ds.graph.find_relation(f[1]);
    if (!r) throw ParseError(file, n, "relation '" + f[1] + "' outside vocabulary");
    if (*r == 0) throw ParseError(file, n, "NA cannot appear as a fact");
    t.relation = *r;
    ds.triplets.push_back(t);
  });
}

void load_pairs(Dataset& ds, const fs::path& path) {
  const std::string file = path.string();
  std::unordered_map<std::string, std::size_t> ids;
  std::unordered_set<std::uint64_t> endpoints;
  for_each_line(path, [&](std::size_t n, const std::string& line) {
    if (line.empty()) return;
    auto f = split_tabs(line);
    if (f.size() != 4) {
      throw ParseError(file, n, "expected pair-id<TAB>head<TAB>tail<TAB>split");
    }
    PairRecord p;
    p.id = f[0];
    p.head = entity_field(ds.graph, f[1], file, n);
    p.tail = entity_field(ds.graph, f[2], file, n);
    if (p.head == p.tail) throw ParseError(file, n, "pair links an entity to itself");
    if (f[3] == "train") {
      p.split = Split::train;
    } else if (f[3] == "test") {
      p.split = Split::test;
    } else {
      throw ParseError(file, n, "split must be train or test, got '" + f[3] + "'");
    }
    if (p.id.empty() || !ids.emplace(p.id, ds.pairs.size()).second) {
      throw ParseError(file, n, "duplicate or empty pair id '" + p.id + "'");
    }
    if (!endpoints.insert(pair_key(p.head, p.tail)).second) {
      throw ParseError(file, n, "entity pair listed twice");
    }
    ds.pairs.push_back(std::move(p));
  });
  ds.index_pairs();
}

void load_sentences(Dataset& ds, const fs::path& path) {
  const std::string file = path.string();
  std::unordered_map<std::string, std::size_t> ids;
  for (std::size_t i = 0; i < ds.pairs.size(); ++i) ids.emplace(ds.pairs[i].id, i);
  for_each_line(path, [&](std::size_t n, const std::string& line) {
    if (line.empty()) return;
    auto f = split_tabs(line);
    if (f.size() != 4) {
      throw ParseError(file, n, "expected pair-id<TAB>pos1<TAB>pos2<TAB>tokens");
    }
    auto it = ids.find(f[0]);
    if (it == ids.end()) throw ParseError(file, n, "unknown pair id '" + f[0] + "'");
    SentenceRecord s;
    s.pair = it->second;
    if (!parse_size(f[1], s.pos1) || !parse_size(f[2], s.pos2)) {
      throw ParseError(file, n, "mention positions must be non-negative integers");
    }
    s.tokens = split_ws(f[3]);
    if (s.pos1 >= s.tokens.size() || s.pos2 >= s.tokens.size()) {
      throw ParseError(file, n, "mention position outside the sentence");
    }
    if (s.pos1 == s.pos2) throw ParseError(file, n, "pos1 equals pos2");
    ds.sentences.push_back(std::move(s));
  });
}

void load_paths(Dataset& ds, const fs::path& path) {
  const std::string file = path.string();
  for_each_line(path, [&](std::size_t n, const std::string& line) {
    if (line.empty()) return;
    PathRecord rec = parse_path_record(line, file, n);
    const auto h = entity_field(ds.graph, rec.head, file, n);
    const auto t = entity_field(ds.graph, rec.tail, file, n);
    if (!ds.find_pair(h, t)) {
      throw ParseError(file, n, "path endpoints " + rec.head + ", " + rec.tail +
                                    " are not a listed pair");
    }
    ds.paths.push_back(std::move(rec));
  });
}

}  // namespace

std::vector<std::pair<std::string, std::string>> parse_key_values(
    const fs::path& path) {
  const std::string file = path.string();
  std::vector<std::pair<std::string, std::string>> out;
  for_each_line(path, [&](std::size_t n, const std::string& raw) {
    std::string_view line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) return;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(file, n, "expected key = value");
    auto key = trim(line.substr(0, eq));
    auto value = trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError(file, n, "empty key");
    out.emplace_back(std::string(key), std::string(value));
  });
  return out;
}

Dataset load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw std::runtime_error("dataset directory not found: " + dir.string());
  }
  Dataset ds;
  load_entities(ds.graph, require(dir, "entities.txt"));
  const auto rel_path = require(dir, "relations.txt");
  load_relations(ds.graph, rel_path);
  if (ds.graph.relation_count() == 0 || ds.graph.relation(0).id != kNaRelation) {
    throw ParseError(rel_path.string(), 1, "first relation must be NA");
  }
  load_triplets(ds, require(dir, "triplets.tsv"));
  load_pairs(ds, require(dir, "pairs.tsv"));
  load_sentences(ds, require(dir, "sentences.tsv"));
  load_paths(ds, require(dir, "paths.tsv"));
  if (fs::exists(dir / "kg_edges.tsv")) load_kg_edges(ds.graph, dir / "kg_edges.tsv");
  if (fs::exists(dir / "text_edges.tsv")) {
    load_text_edges(ds.graph, dir / "text_edges.tsv");
  }
  if (fs::exists(dir / "config.txt")) ds.config = parse_key_values(dir / "config.txt");
  return ds;
}

void save_dataset(const Dataset& ds, const fs::path& dir) {
  fs::create_directories(dir);
  const auto& g = ds.graph;
  {
    auto out = open_out(dir / "entities.txt");
    for (EntityIndex e = 0; e < g.entity_count(); ++e) {
      out << g.entity(e).id << '\t' << join(g.entity(e).surface, " ") << '\n';
    }
  }
  {
    auto out = open_out(dir / "relations.txt");
    for (RelationIndex r = 0; r < g.relation_count(); ++r) {
      out << g.relation(r).id << '\t' << join(g.relation(r).surface, " ") << '\n';
    }
  }
  {
    auto out = open_out(dir / "triplets.tsv");
    for (const auto& t : ds.triplets) {
      out << g.entity(t.head).id << '\t' << g.relation(t.relation).id << '\t'
          << g.entity(t.tail).id << '\n';
    }
  }
  {
    auto out = open_out(dir / "pairs.tsv");
    for (const auto& p : ds.pairs) {
      out << p.id << '\t' << g.entity(p.head).id << '\t' << g.entity(p.tail).id << '\t'
          << (p.split == Split::train ? "train" : "test") << '\n';
    }
  }
  {
    auto out = open_out(dir / "sentences.tsv");
    for (const auto& s : ds.sentences) {
      out << ds.pairs.at(s.pair).id << '\t' << s.pos1 << '\t' << s.pos2 << '\t'
          << join(s.tokens, " ") << '\n';
    }
  }
  {
    auto out = open_out(dir / "paths.tsv");
    for (const auto& p : ds.paths) out << format_path_record(p) << '\n';
  }
  {
    auto out = open_out(dir / "kg_edges.tsv");
    write_kg_edges(g, out);
  }
  {
    auto out = open_out(dir / "text_edges.tsv");
    write_text_edges(g, out);
  }
  if (!ds.config.empty()) {
    auto out = open_out(dir / "config.txt");
    for (const auto& [k, v] : ds.config) out << k << " = " << v << '\n';
  }
}

std::vector<Bag> assemble_bags(const Dataset& ds) {
  std::vector<Bag> bags(ds.pairs.size());
  for (std::size_t i = 0; i < ds.pairs.size(); ++i) {
    bags[i].pair = i;
    bags[i].head = ds.pairs[i].head;
    bags[i].tail = ds.pairs[i].tail;
    bags[i].split = ds.pairs[i].split;
  }
  std::vector<bool> labeled(bags.size(), false);
  for (const auto& t : ds.triplets) {
    auto p = ds.find_pair(t.head, t.tail);
    if (!p || labeled[*p]) continue;
    bags[*p].label = t.relation;
    labeled[*p] = true;
  }
  for (std::size_t i = 0; i < ds.sentences.size(); ++i) {
    bags.at(ds.sentences[i].pair).sentences.push_back(i);
  }
  for (std::size_t i = 0; i < ds.paths.size(); ++i) {
    const auto h = ds.graph.entity_index(ds.paths[i].head);
    const auto t = ds.graph.entity_index(ds.paths[i].tail);
    bags.at(*ds.find_pair(h, t)).paths.push_back(i);
  }
  return bags;
}

GoldIndex::GoldIndex(const std::vector<Triplet>& triplets) {
  for (const auto& t : triplets) keys_.insert({t.head, t.relation, t.tail});
}

bool GoldIndex::contains(EntityIndex head, RelationIndex relation,
                         EntityIndex tail) const {
  return keys_.count({head, relation, tail}) != 0;
}

Vocabulary build_vocabulary(const Dataset& ds) {
  Vocabulary v;
  for (const auto& s : ds.sentences) {
    for (const auto& w : s.tokens) v.add(w);
  }
  for (const auto& p : ds.paths) {
    for (const auto& w : p.tokens) v.add(w);
  }
  return v;
}

EncodedBag encode_bag(const Dataset& ds, const Bag& bag, const Vocabulary& vocab,
                      std::size_t maxdist) {
  EncodedBag out;
  out.head = bag.head;
  out.tail = bag.tail;
  out.label = bag.label;
  for (std::size_t i : bag.sentences) {
    const auto& s = ds.sentences[i];
    const auto ids = vocab.encode(s.tokens);
    out.sentences.push_back(featurize(ids, s.pos1, s.pos2, maxdist));
  }
  for (std::size_t i : bag.paths) {
    const auto& p = ds.paths[i];
    const auto ids = vocab.encode(p.tokens);
    out.paths.push_back(
        {featurize(ids, p.head_pos, p.tail_pos, maxdist), p.type, p.tau1, p.tau2});
  }
  return out;
}

}  // namespace ugre
