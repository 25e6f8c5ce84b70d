#pragma once
// Universal Graph: KG edges and textual edges over one entity set, with
// bounded random-walk path retrieval and an exhaustive enumerator used to
// check it.
//
// The graph is built once (add_* calls) and is read-only afterwards; every
// const member is safe to call from several threads at once.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ugre {

using EntityIndex = std::uint32_t;
using RelationIndex = std::uint32_t;

enum class EdgeKind : std::uint8_t { kg, text };
enum class PathType : std::uint8_t { kg, textual, hybrid };

std::string_view to_string(PathType type);
std::optional<PathType> parse_path_type(std::string_view s);

struct Entity {
  std::string id;
  std::vector<std::string> surface;
};

struct Relation {
  std::string id;
  std::vector<std::string> surface;
};

// Splits a relation id such as "may_treat" or "/location/contains" into
// surface tokens.
std::vector<std::string> relation_surface_from_id(std::string_view id);

struct UGEdge {
  EdgeKind kind = EdgeKind::kg;
  EntityIndex src = 0;
  EntityIndex dst = 0;
  RelationIndex relation = 0;  // kg edges
  std::uint32_t sentence = 0;  // text edges: index into the sentence table
  std::uint32_t src_pos = 0;   // text edges: mention positions
  std::uint32_t dst_pos = 0;
};

// One traversal step. `reversed` is set when the edge is walked dst -> src.
struct Hop {
  std::uint32_t edge = 0;
  bool reversed = false;
  EdgeKind kind = EdgeKind::kg;
  EntityIndex from = 0;
  EntityIndex to = 0;

  friend bool operator==(const Hop&, const Hop&) = default;
};

struct UGPath {
  EntityIndex head = 0;
  EntityIndex tail = 0;
  std::vector<Hop> hops;

  // Identity used for de-duplication: the (edge, direction) sequence.
  std::vector<std::uint64_t> key() const;
};

PathType classify_path_type(const UGPath& path);

struct LinearizedPath {
  std::vector<std::string> tokens;
  std::size_t head_pos = 0;  // first token of the head entity's anchor
  std::size_t tail_pos = 0;  // first token of the tail entity's anchor
  PathType type = PathType::kg;
  std::size_t tau1 = 0;  // token count
  std::size_t tau2 = 0;  // distinct token count
};

std::size_t distinct_token_count(std::span<const std::string> tokens);

class UniversalGraph {
 public:
  static constexpr std::string_view kSeparator = "<sep>";
  static constexpr std::string_view kInverse = "<inv>";
  static constexpr std::size_t kDefaultEnumerationCap = 10000;

  EntityIndex add_entity(std::string id, std::vector<std::string> surface = {});
  RelationIndex add_relation(std::string id,
                             std::vector<std::string> surface = {});

  // Idempotent: a repeated (e1, r, e2) is stored once.
  void add_kg_edge(std::string_view e1, std::string_view relation,
                   std::string_view e2);
  void add_kg_edge(EntityIndex e1, RelationIndex relation, EntityIndex e2);

  void add_text_edge(std::vector<std::string> sentence, std::string_view e1,
                     std::size_t pos1, std::string_view e2, std::size_t pos2);
  void add_text_edge(std::vector<std::string> sentence, EntityIndex e1,
                     std::size_t pos1, EntityIndex e2, std::size_t pos2);

  std::optional<EntityIndex> find_entity(std::string_view id) const;
  std::optional<RelationIndex> find_relation(std::string_view id) const;
  // Throws std::out_of_range naming the identifier.
  EntityIndex entity_index(std::string_view id) const;
  RelationIndex relation_index(std::string_view id) const;

  std::size_t entity_count() const { return entities_.size(); }
  std::size_t relation_count() const { return relations_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  std::size_t kg_edge_count() const;
  std::size_t text_edge_count() const;

  const Entity& entity(EntityIndex e) const { return entities_.at(e); }
  const Relation& relation(RelationIndex r) const { return relations_.at(r); }
  const UGEdge& edge(std::uint32_t i) const { return edges_.at(i); }
  std::span<const UGEdge> edges() const { return edges_; }
  const std::vector<std::string>& sentence(std::uint32_t i) const {
    return sentences_.at(i);
  }

  struct Incidence {
    std::uint32_t edge;
    bool reversed;
  };
  std::span<const Incidence> incident(EntityIndex e) const {
    return adjacency_.at(e);
  }

  // Uniform self-avoiding walks from e1, stopping on reaching e2. Returned
  // paths are de-duplicated and listed in discovery order.
  std::vector<UGPath> random_walk_paths(EntityIndex e1, EntityIndex e2,
                                        std::size_t max_steps,
                                        std::size_t num_walks,
                                        std::uint64_t seed) const;
  std::vector<UGPath> random_walk_paths(std::string_view e1, std::string_view e2,
                                        std::size_t max_steps,
                                        std::size_t num_walks,
                                        std::uint64_t seed) const;

  // Every simple path of at most max_steps hops, in depth-first order.
  // Refuses graphs with more than `enumeration_cap` entities.
  std::vector<UGPath> enumerate_paths(EntityIndex e1, EntityIndex e2,
                                      std::size_t max_steps) const;

  void set_enumeration_cap(std::size_t cap) { enumeration_cap_ = cap; }

  LinearizedPath linearize(const UGPath& path) const;

  // Checks the chain invariant: hops are connected, start at head, end at tail.
  bool is_valid_path(const UGPath& path) const;

 private:
  Hop make_hop(const Incidence& inc, EntityIndex from) const;

  std::vector<Entity> entities_;
  std::vector<Relation> relations_;
  std::unordered_map<std::string, EntityIndex> entity_ids_;
  std::unordered_map<std::string, RelationIndex> relation_ids_;
  std::vector<UGEdge> edges_;
  std::vector<std::vector<std::string>> sentences_;
  std::vector<std::vector<Incidence>> adjacency_;
  std::unordered_map<std::uint64_t, std::uint32_t> kg_edge_ids_;
  std::size_t enumeration_cap_ = kDefaultEnumerationCap;
};

// Keeps at most max_paths paths, chosen by a seeded sample; relative order is
// preserved.
std::vector<UGPath> cap_paths(std::vector<UGPath> paths, std::size_t max_paths,
                              std::uint64_t seed);

// --- file formats ---------------------------------------------------------

// entities: "id<TAB>surface tokens" (surface optional, defaults to the id).
// relations: "id<TAB>surface tokens" (surface optional, derived from the id).
// kg_edges: "head<TAB>relation<TAB>tail".
// text_edges: "head<TAB>pos1<TAB>tail<TAB>pos2<TAB>sentence tokens".
void load_entities(UniversalGraph& g, const std::filesystem::path& path);
void load_relations(UniversalGraph& g, const std::filesystem::path& path);
void load_kg_edges(UniversalGraph& g, const std::filesystem::path& path);
void load_text_edges(UniversalGraph& g, const std::filesystem::path& path);

void write_kg_edges(const UniversalGraph& g, std::ostream& out);
void write_text_edges(const UniversalGraph& g, std::ostream& out);

// One dumped path: "e1 e2 type tau1 tau2 head_pos tail_pos tokens", tab
// separated, tokens space-joined.
struct PathRecord {
  std::string head;
  std::string tail;
  PathType type = PathType::kg;
  std::size_t tau1 = 0;
  std::size_t tau2 = 0;
  std::size_t head_pos = 0;
  std::size_t tail_pos = 0;
  std::vector<std::string> tokens;

  friend bool operator==(const PathRecord&, const PathRecord&) = default;
};

PathRecord make_path_record(const UniversalGraph& g, const UGPath& path);
std::string format_path_record(const PathRecord& rec);
// Throws ParseError with the given file/line on malformed input.
PathRecord parse_path_record(const std::string& line, const std::string& file,
                             std::size_t line_no);

}  // namespace ugre
