#pragma once
// Dataset directory format, bag assembly with closed-world NA labeling,
// feature encoding, and the synthetic dataset generator.
//
// Directory layout (UTF-8, LF, tab separated):
//   entities.txt    id[<TAB>surface]
//   relations.txt   id[<TAB>surface]; the first line must be NA
//   triplets.tsv    head<TAB>relation<TAB>tail
//   pairs.tsv       pair-id<TAB>head<TAB>tail<TAB>train|test
//   sentences.tsv   pair-id<TAB>pos1<TAB>pos2<TAB>tokens
//   paths.tsv       path dump (see ug_store.hpp)
//   kg_edges.tsv    optional UG edges
//   text_edges.tsv  optional UG edges
//   config.txt      optional training overrides (key = value)

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ugre/attention_model.hpp"
#include "ugre/encoders.hpp"
#include "ugre/ug_store.hpp"

namespace ugre {

inline constexpr std::string_view kNaRelation = "NA";

enum class Split : std::uint8_t { train, test };

struct Triplet {
  EntityIndex head = 0;
  RelationIndex relation = 0;
  EntityIndex tail = 0;

  friend bool operator==(const Triplet&, const Triplet&) = default;
};

struct PairRecord {
  std::string id;
  EntityIndex head = 0;
  EntityIndex tail = 0;
  Split split = Split::train;

  friend bool operator==(const PairRecord&, const PairRecord&) = default;
};

struct SentenceRecord {
  std::size_t pair = 0;  // index into Dataset::pairs
  std::size_t pos1 = 0;  // head mention
  std::size_t pos2 = 0;  // tail mention
  std::vector<std::string> tokens;

  friend bool operator==(const SentenceRecord&, const SentenceRecord&) = default;
};

struct Dataset {
  UniversalGraph graph;  // entity and relation vocabularies plus UG edges
  std::vector<Triplet> triplets;
  std::vector<PairRecord> pairs;
  std::vector<SentenceRecord> sentences;
  std::vector<PathRecord> paths;
  std::vector<std::pair<std::string, std::string>> config;

  // Index of the pair with these endpoints, if any.
  std::optional<std::size_t> find_pair(EntityIndex head, EntityIndex tail) const;
  void index_pairs();

 private:
  std::unordered_map<std::uint64_t, std::size_t> pair_index_;
};

std::uint64_t pair_key(EntityIndex head, EntityIndex tail);

// Throws ParseError (file + line) or std::runtime_error for missing files.
Dataset load_dataset(const std::filesystem::path& dir);
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);

// Flat "key = value" lines; '#' starts a comment.
std::vector<std::pair<std::string, std::string>> parse_key_values(
    const std::filesystem::path& path);

struct Bag {
  std::size_t pair = 0;
  EntityIndex head = 0;
  EntityIndex tail = 0;
  RelationIndex label = 0;
  Split split = Split::train;
  std::vector<std::size_t> sentences;  // indices into Dataset::sentences
  std::vector<std::size_t> paths;      // indices into Dataset::paths
};

// One bag per pair, in pairs.tsv order. The label is the first listed
// triplet relation for the pair, NA when there is none.
std::vector<Bag> assemble_bags(const Dataset& ds);

// Triplet membership used for held-out gold lookup.
class GoldIndex {
 public:
  explicit GoldIndex(const std::vector<Triplet>& triplets);
  bool contains(EntityIndex head, RelationIndex relation, EntityIndex tail) const;

 private:
  std::set<std::array<std::uint32_t, 3>> keys_;
};

// Words in sentence order then path order; <unk> is id 0.
Vocabulary build_vocabulary(const Dataset& ds);

EncodedBag encode_bag(const Dataset& ds, const Bag& bag, const Vocabulary& vocab,
                      std::size_t maxdist);

// --- synthetic data -------------------------------------------------------

// head <= first o second: the head relation holds for (a, c) when edges
// a -first-> b and b -second-> c exist. Indices are into the relation
// vocabulary, NA being 0.
struct SyntheticRule {
  RelationIndex head = 0;
  RelationIndex first = 0;
  RelationIndex second = 0;
};

struct SyntheticSpec {
  std::size_t n_entities = 200;
  std::size_t n_relations = 8;  // excluding NA
  std::vector<SyntheticRule> rules;  // empty: relation k <= (k+1) o (k+3)
  double noise = 0.3;
  std::size_t n_bags = 1000;
  double na_fraction = 0.5;
  std::size_t max_sentences = 2;
  std::size_t max_paths = 12;
  std::size_t background_kg_edges = 200;
  std::size_t background_text_edges = 200;
  double background_trigger_rate = 0.3;  // background text edges with a trigger
  double kg_hop_prob = 0.4;
  double test_fraction = 0.3;
  std::size_t num_walks = 2000;
  std::size_t max_steps = 3;
  std::uint64_t seed = 1;
};

// A UG edge with the relation it expresses; textual edges without a trigger
// word carry NA.
struct AnnotatedEdge {
  EntityIndex src = 0;
  EntityIndex dst = 0;
  RelationIndex relation = 0;
  EdgeKind kind = EdgeKind::kg;
  bool planted = false;
};

struct GroundTruth {
  std::vector<SyntheticRule> rules;
  std::vector<AnnotatedEdge> edges;
  std::vector<std::size_t> corrupted_sentences;  // indices into Dataset::sentences
};

struct SyntheticData {
  Dataset dataset;
  GroundTruth truth;
};

std::vector<SyntheticRule> default_rules(std::size_t n_relations);
// Training overrides written to config.txt of every generated dataset.
std::vector<std::pair<std::string, std::string>> synthetic_train_overrides();
SyntheticData generate_synthetic(const SyntheticSpec& spec);

// rules.tsv: head<TAB>first<TAB>second relation ids.
void save_rules(const Dataset& ds, const std::vector<SyntheticRule>& rules,
                const std::filesystem::path& path);

}  // namespace ugre
