#include "ugre/ug_store.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>
#include <set>
#include <stdexcept>
#include <unordered_set>

#include "ugre/rng.hpp"
#include "ugre/text_io.hpp"

namespace ugre {

std::string_view to_string(PathType type) {
  switch (type) {
    case PathType::kg:
      return "KG";
    case PathType::textual:
      return "Textual";
    case PathType::hybrid:
      return "Hybrid";
  }
  return "?";
}

std::optional<PathType> parse_path_type(std::string_view s) {
  if (s == "KG") return PathType::kg;
  if (s == "Textual") return PathType::textual;
  if (s == "Hybrid") return PathType::hybrid;
  return std::nullopt;
}

std::vector<std::string> relation_surface_from_id(std::string_view id) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : id) {
    if (c == '_' || c == '/' || c == ' ' || c == '.') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  if (out.empty()) out.emplace_back(id);
  return out;
}

std::vector<std::uint64_t> UGPath::key() const {
  std::vector<std::uint64_t> k;
  k.reserve(hops.size());
  for (const auto& h : hops) {
    k.push_back((static_cast<std::uint64_t>(h.edge) << 1) | (h.reversed ? 1 : 0));
  }
  return k;
}

PathType classify_path_type(const UGPath& path) {
  if (path.hops.empty()) throw std::invalid_argument("path has no hops");
  bool any_kg = false;
  bool any_text = false;
  for (const auto& h : path.hops) {
    (h.kind == EdgeKind::kg ? any_kg : any_text) = true;
  }
  if (any_kg && any_text) return PathType::hybrid;
  return any_kg ? PathType::kg : PathType::textual;
}

std::size_t distinct_token_count(std::span<const std::string> tokens) {
  std::unordered_set<std::string_view> seen;
  for (const auto& t : tokens) seen.insert(t);
  return seen.size();
}

EntityIndex UniversalGraph::add_entity(std::string id,
                                       std::vector<std::string> surface) {
  if (id.empty()) throw std::invalid_argument("entity id must be non-empty");
  if (entity_ids_.count(id)) {
    throw std::invalid_argument("duplicate entity id: " + id);
  }
  if (surface.empty()) surface.push_back(id);
  const auto idx = static_cast<EntityIndex>(entities_.size());
  entity_ids_.emplace(id, idx);
  entities_.push_back({std::move(id), std::move(surface)});
  adjacency_.emplace_back();
  return idx;
}

RelationIndex UniversalGraph::add_relation(std::string id,
                                           std::vector<std::string> surface) {
  if (id.empty()) throw std::invalid_argument("relation id must be non-empty");
  if (relation_ids_.count(id)) {
    throw std::invalid_argument("duplicate relation id: " + id);
  }
  if (surface.empty()) surface = relation_surface_from_id(id);
  const auto idx = static_cast<RelationIndex>(relations_.size());
  relation_ids_.emplace(id, idx);
  relations_.push_back({std::move(id), std::move(surface)});
  return idx;
}

std::optional<EntityIndex> UniversalGraph::find_entity(std::string_view id) const {
  auto it = entity_ids_.find(std::string(id));
  if (it == entity_ids_.end()) return std::nullopt;
  return it->second;
}

std::optional<RelationIndex> UniversalGraph::find_relation(
    std::string_view id) const {
  auto it = relation_ids_.find(std::string(id));
  if (it == relation_ids_.end()) return std::nullopt;
  return it->second;
}

EntityIndex UniversalGraph::entity_index(std::string_view id) const {
  if (auto e = find_entity(id)) return *e;
  throw std::out_of_range("unknown entity: " + std::string(id));
}

RelationIndex UniversalGraph::relation_index(std::string_view id) const {
  if (auto r = find_relation(id)) return *r;
  throw std::out_of_range("unknown relation: " + std::string(id));
}

std::size_t UniversalGraph::kg_edge_count() const {
  return static_cast<std::size_t>(std::count_if(
      edges_.begin(), edges_.end(),
      [](const UGEdge& e) { return e.kind == EdgeKind::kg; }));
}

std::size_t UniversalGraph::text_edge_count() const {
  return edges_.size() - kg_edge_count();
}

void UniversalGraph::add_kg_edge(std::string_view e1, std::string_view relation,
                                 std::string_view e2) {
  add_kg_edge(entity_index(e1), relation_index(relation), entity_index(e2));
}

void UniversalGraph::add_kg_edge(EntityIndex e1, RelationIndex relation,
                                 EntityIndex e2) {
  if (e1 >= entities_.size()) {
    throw std::out_of_range("unknown entity index " + std::to_string(e1));
  }
  if (e2 >= entities_.size()) {
    throw std::out_of_range("unknown entity index " + std::to_string(e2));
  }
  if (relation >= relations_.size()) {
    throw std::out_of_range("unknown relation index " + std::to_string(relation));
  }
  const std::uint64_t key = (static_cast<std::uint64_t>(e1) << 42) ^
                            (static_cast<std::uint64_t>(relation) << 21) ^ e2;
  if (auto it = kg_edge_ids_.find(key); it != kg_edge_ids_.end()) {
    const auto& old = edges_[it->second];
    if (old.src == e1 && old.dst == e2 && old.relation == relation) return;
  }
  UGEdge edge;
  edge.kind = EdgeKind::kg;
  edge.src = e1;
  edge.dst = e2;
  edge.relation = relation;
  const auto idx = static_cast<std::uint32_t>(edges_.size());
  edges_.push_back(edge);
  kg_edge_ids_.emplace(key, idx);
  adjacency_[e1].push_back({idx, false});
  if (e2 != e1) adjacency_[e2].push_back({idx, true});
}

void UniversalGraph::add_text_edge(std::vector<std::string> sentence,
                                   std::string_view e1, std::size_t pos1,
                                   std::string_view e2, std::size_t pos2) {
  add_text_edge(std::move(sentence), entity_index(e1), pos1, entity_index(e2),
                pos2);
}

void UniversalGraph::add_text_edge(std::vector<std::string> sentence,
                                   EntityIndex e1, std::size_t pos1,
                                   EntityIndex e2, std::size_t pos2) {
  if (e1 >= entities_.size() || e2 >= entities_.size()) {
    throw std::out_of_range("unknown entity index in text edge");
  }
  if (pos1 >= sentence.size() || pos2 >= sentence.size()) {
    throw std::out_of_range("text edge mention position out of bounds (" +
                            std::to_string(pos1) + ", " + std::to_string(pos2) +
                            ") for sentence of " +
                            std::to_string(sentence.size()) + " tokens");
  }
  if (pos1 == pos2) {
    throw std::invalid_argument("text edge mentions share position " +
                                std::to_string(pos1));
  }
  UGEdge edge;
  edge.kind = EdgeKind::text;
  edge.src = e1;
  edge.dst = e2;
  edge.sentence = static_cast<std::uint32_t>(sentences_.size());
  edge.src_pos = static_cast<std::uint32_t>(pos1);
  edge.dst_pos = static_cast<std::uint32_t>(pos2);
  sentences_.push_back(std::move(sentence));
  const auto idx = static_cast<std::uint32_t>(edges_.size());
  edges_.push_back(edge);
  adjacency_[e1].push_back({idx, false});
  if (e2 != e1) adjacency_[e2].push_back({idx, true});
}

Hop UniversalGraph::make_hop(const Incidence& inc, EntityIndex from) const {
  const auto& e = edges_[inc.edge];
  Hop h;
  h.edge = inc.edge;
  h.reversed = inc.reversed;
  h.kind = e.kind;
  h.from = from;
  h.to = inc.reversed ? e.src : e.dst;
  return h;
}

std::vector<UGPath> UniversalGraph::random_walk_paths(
    EntityIndex e1, EntityIndex e2, std::size_t max_steps,
    std::size_t num_walks, std::uint64_t seed) const {
  if (max_steps < 1) throw std::invalid_argument("max_steps must be >= 1");
  if (num_walks < 1) throw std::invalid_argument("num_walks must be >= 1");
  if (e1 >= entities_.size()) {
    throw std::out_of_range("unknown entity index " + std::to_string(e1));
  }
  if (e2 >= entities_.size()) {
    throw std::out_of_range("unknown entity index " + std::to_string(e2));
  }
  std::vector<UGPath> out;
  if (e1 == e2) return out;

  Rng rng(seed);
  std::set<std::vector<std::uint64_t>> seen;
  std::vector<EntityIndex> visited;
  std::vector<const Incidence*> candidates;
  for (std::size_t w = 0; w < num_walks; ++w) {
    UGPath path;
    path.head = e1;
    path.tail = e2;
    visited.assign(1, e1);
    EntityIndex cur = e1;
    bool reached = false;
    for (std::size_t step = 0; step < max_steps; ++step) {
      candidates.clear();
      for (const auto& inc : adjacency_[cur]) {
        const auto& e = edges_[inc.edge];
        const EntityIndex next = inc.reversed ? e.src : e.dst;
        if (std::find(visited.begin(), visited.end(), next) == visited.end()) {
          candidates.push_back(&inc);
        }
      }
      if (candidates.empty()) break;
      const Incidence& pick = *candidates[rng.index(candidates.size())];
      Hop hop = make_hop(pick, cur);
      cur = hop.to;
      visited.push_back(cur);
      path.hops.push_back(hop);
      if (cur == e2) {
        reached = true;
        break;
      }
    }
    if (reached && seen.insert(path.key()).second) out.push_back(std::move(path));
  }
  return out;
}

std::vector<UGPath> UniversalGraph::random_walk_paths(
    std::string_view e1, std::string_view e2, std::size_t max_steps,
    std::size_t num_walks, std::uint64_t seed) const {
  return random_walk_paths(entity_index(e1), entity_index(e2), max_steps,
                           num_walks, seed);
}

std::vector<UGPath> UniversalGraph::enumerate_paths(EntityIndex e1,
                                                    EntityIndex e2,
                                                    std::size_t max_steps) const {
  if (entities_.size() > enumeration_cap_) {
    throw std::length_error("enumerate_paths: graph has " +
                            std::to_string(entities_.size()) +
                            " entities, cap is " +
                            std::to_string(enumeration_cap_));
  }
  if (e1 >= entities_.size() || e2 >= entities_.size()) {
    throw std::out_of_range("unknown entity index in enumerate_paths");
  }
  std::vector<UGPath> out;
  if (e1 == e2 || max_steps == 0) return out;

  std::vector<Hop> stack;
  std::vector<EntityIndex> visited{e1};
  auto dfs = [&](auto&& self, EntityIndex cur) -> void {
    if (stack.size() == max_steps) return;
    for (const auto& inc : adjacency_[cur]) {
      Hop hop = make_hop(inc, cur);
      if (std::find(visited.begin(), visited.end(), hop.to) != visited.end()) {
        continue;
      }
      stack.push_back(hop);
      if (hop.to == e2) {
        out.push_back(UGPath{e1, e2, stack});
      } else {
        visited.push_back(hop.to);
        self(self, hop.to);
        visited.pop_back();
      }
      stack.pop_back();
    }
  };
  dfs(dfs, e1);
  return out;
}

LinearizedPath UniversalGraph::linearize(const UGPath& path) const {
  if (path.hops.empty()) throw std::invalid_argument("path has no hops");
  LinearizedPath out;
  out.type = classify_path_type(path);
  for (std::size_t i = 0; i < path.hops.size(); ++i) {
    const Hop& hop = path.hops[i];
    const UGEdge& e = edges_.at(hop.edge);
    if (i > 0) out.tokens.emplace_back(kSeparator);
    const std::size_t offset = out.tokens.size();
    std::size_t from_pos = 0;
    std::size_t to_pos = 0;
    if (e.kind == EdgeKind::kg) {
      const auto& src = entities_[hop.from].surface;
      const auto& dst = entities_[hop.to].surface;
      const auto& rel = relations_[e.relation].surface;
      out.tokens.insert(out.tokens.end(), src.begin(), src.end());
      if (hop.reversed) out.tokens.emplace_back(kInverse);
      out.tokens.insert(out.tokens.end(), rel.begin(), rel.end());
      to_pos = out.tokens.size() - offset;
      out.tokens.insert(out.tokens.end(), dst.begin(), dst.end());
    } else {
      const auto& s = sentences_[e.sentence];
      out.tokens.insert(out.tokens.end(), s.begin(), s.end());
      from_pos = hop.reversed ? e.dst_pos : e.src_pos;
      to_pos = hop.reversed ? e.src_pos : e.dst_pos;
    }
    if (i == 0) out.head_pos = offset + from_pos;
    if (i + 1 == path.hops.size()) out.tail_pos = offset + to_pos;
  }
  out.tau1 = out.tokens.size();
  out.tau2 = distinct_token_count(out.tokens);
  return out;
}

bool UniversalGraph::is_valid_path(const UGPath& path) const {
  if (path.hops.empty()) return false;
  EntityIndex cur = path.head;
  std::vector<EntityIndex> visited{cur};
  for (const auto& hop : path.hops) {
    if (hop.edge >= edges_.size()) return false;
    const auto& e = edges_[hop.edge];
    const EntityIndex from = hop.reversed ? e.dst : e.src;
    const EntityIndex to = hop.reversed ? e.src : e.dst;
    if (from != cur || hop.from != from || hop.to != to || hop.kind != e.kind) {
      return false;
    }
    if (std::find(visited.begin(), visited.end(), to) != visited.end()) {
      return false;
    }
    visited.push_back(to);
    cur = to;
  }
  return cur == path.tail;
}

std::vector<UGPath> cap_paths(std::vector<UGPath> paths, std::size_t max_paths,
                              std::uint64_t seed) {
  if (paths.size() <= max_paths) return paths;
  std::vector<std::size_t> idx(paths.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(idx);
  idx.resize(max_paths);
  std::sort(idx.begin(), idx.end());
  std::vector<UGPath> out;
  out.reserve(max_paths);
  for (auto i : idx) out.push_back(std::move(paths[i]));
  return out;
}

// --- file formats ---------------------------------------------------------

void load_entities(UniversalGraph& g, const std::filesystem::path& path) {
  const std::string file = path.string();
  for_each_line(path, [&](std::size_t n, const std::string& line) {
    if (line.empty()) return;
    auto f = split_tabs(line);
    if (f.size() > 2 || f[0].empty()) {
      throw ParseError(file, n, "expected id[<TAB>surface]");
    }
    try {
      g.add_entity(f[0], f.size() == 2 ? split_ws(f[1]) : std::vector<std::string>{});
    } catch (const std::invalid_argument& e) {
      throw ParseError(file, n, e.what());
    }
  });
}

void load_relations(UniversalGraph& g, const std::filesystem::path& path) {
  const std::string file = path.string();
  for_each_line(path, [&](std::size_t n, const std::string& line) {
    if (line.empty()) return;
    auto f = split_tabs(line);
    if (f.size() > 2 || f[0].empty()) {
      throw ParseError(file, n, "expected id[<TAB>surface]");
    }
    try {
      g.add_relation(f[0],
                     f.size() == 2 ? split_ws(f[1]) : std::vector<std::string>{});
    } catch (const std::invalid_argument& e) {
      throw ParseError(file, n, e.what());
    }
  });
}

void load_kg_edges(UniversalGraph& g, const std::filesystem::path& path) {
  const std::string file = path.string();
  for_each_line(path, [&](std::size_t n, const std::string& line) {
    if (line.empty()) return;
    auto f = split_tabs(line);
    if (f.size() != 3) throw ParseError(file, n, "expected head<TAB>relation<TAB>tail");
    try {
      g.add_kg_edge(f[0], f[1], f[2]);
    } catch (const std::exception& e) {
      throw ParseError(file, n, e.what());
    }
  });
}

void load_text_edges(UniversalGraph& g, const std::filesystem::path& path) {
  const std::string file = path.string();
  for_each_line(path, [&](std::size_t n, const std::string& line) {
    if (line.empty()) return;
    auto f = split_tabs(line);
    if (f.size() != 5) {
      throw ParseError(file, n, "expected head<TAB>pos1<TAB>tail<TAB>pos2<TAB>tokens");
    }
    std::size_t p1 = 0;
    std::size_t p2 = 0;
    if (!parse_size(f[1], p1) || !parse_size(f[3], p2)) {
      throw ParseError(file, n, "bad mention position");
    }
    try {
      g.add_text_edge(split_ws(f[4]), f[0], p1, f[2], p2);
    } catch (const std::exception& e) {
      throw ParseError(file, n, e.what());
    }
  });
}

void write_kg_edges(const UniversalGraph& g, std::ostream& out) {
  for (const auto& e : g.edges()) {
    if (e.kind != EdgeKind::kg) continue;
    out << g.entity(e.src).id << '\t' << g.relation(e.relation).id << '\t'
        << g.entity(e.dst).id << '\n';
  }
}

void write_text_edges(const UniversalGraph& g, std::ostream& out) {
  for (const auto& e : g.edges()) {
    if (e.kind != EdgeKind::text) continue;
    out << g.entity(e.src).id << '\t' << e.src_pos << '\t' << g.entity(e.dst).id
        << '\t' << e.dst_pos << '\t' << join(g.sentence(e.sentence), " ") << '\n';
  }
}

PathRecord make_path_record(const UniversalGraph& g, const UGPath& path) {
  auto lin = g.linearize(path);
  PathRecord rec;
  rec.head = g.entity(path.head).id;
  rec.tail = g.entity(path.tail).id;
  rec.type = lin.type;
  rec.tau1 = lin.tau1;
  rec.tau2 = lin.tau2;
  rec.head_pos = lin.head_pos;
  rec.tail_pos = lin.tail_pos;
  rec.tokens = std::move(lin.tokens);
  return rec;
}

std::string format_path_record(const PathRecord& rec) {
  std::string out = rec.head;
  out += '\t';
  out += rec.tail;
  out += '\t';
  out += to_string(rec.type);
  for (auto v : {rec.tau1, rec.tau2, rec.head_pos, rec.tail_pos}) {
    out += '\t';
    out += std::to_string(v);
  }
  out += '\t';
  out += join(rec.tokens, " ");
  return out;
}

PathRecord parse_path_record(const std::string& line, const std::string& file,
                             std::size_t line_no) {
  auto f = split_tabs(line);
  if (f.size() != 8) {
    throw ParseError(file, line_no, "expected 8 tab-separated path fields, got " +
                                        std::to_string(f.size()));
  }
  PathRecord rec;
  rec.head = f[0];
  rec.tail = f[1];
  auto type = parse_path_type(f[2]);
  if (!type) throw ParseError(file, line_no, "unknown path type '" + f[2] + "'");
  rec.type = *type;
  if (!parse_size(f[3], rec.tau1) || !parse_size(f[4], rec.tau2) ||
      !parse_size(f[5], rec.head_pos) || !parse_size(f[6], rec.tail_pos)) {
    throw ParseError(file, line_no, "bad numeric path field");
  }
  rec.tokens = split_ws(f[7]);
  if (rec.tokens.empty()) throw ParseError(file, line_no, "empty path");
  if (rec.tau1 != rec.tokens.size() ||
      rec.tau2 != distinct_token_count(rec.tokens)) {
    throw ParseError(file, line_no, "tau fields disagree with tokens");
  }
  if (rec.head_pos >= rec.tokens.size() || rec.tail_pos >= rec.tokens.size()) {
    throw ParseError(file, line_no, "anchor position out of range");
  }
  return rec;
}

}  // namespace ugre
