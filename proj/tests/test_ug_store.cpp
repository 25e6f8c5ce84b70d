#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "test_util.hpp"
#include "ugre/text_io.hpp"
#include "ugre/ug_store.hpp"

using namespace ugre;

namespace {

// A -treats-> B, "A binds B" sentence, B -causes-> C.
UniversalGraph triangle() {
  UniversalGraph g;
  g.add_relation("NA");
  g.add_relation("may_treat");
  g.add_relation("causes");
  g.add_entity("A", {"aspirin"});
  g.add_entity("B", {"cox", "2"});
  g.add_entity("C", {"pain"});
  g.add_kg_edge("A", "may_treat", "B");
  g.add_text_edge({"aspirin", "binds", "cox", "2", "strongly"}, "A", 0, "B", 2);
  g.add_kg_edge("B", "causes", "C");
  return g;
}

std::set<std::vector<std::uint64_t>> keys(const std::vector<UGPath>& paths) {
  std::set<std::vector<std::uint64_t>> out;
  for (const auto& p : paths) out.insert(p.key());
  return out;
}

}  // namespace

TEST(UgStore, RelationSurfaceFromId) {
  EXPECT_EQ(relation_surface_from_id("may_treat"),
            (std::vector<std::string>{"may", "treat"}));
  EXPECT_EQ(relation_surface_from_id("/location/contains"),
            (std::vector<std::string>{"location", "contains"}));
}

TEST(UgStore, KgEdgesAreIdempotent) {
  UniversalGraph g = triangle();
  const auto before = g.edge_count();
  g.add_kg_edge("A", "may_treat", "B");
  EXPECT_EQ(g.edge_count(), before);
  EXPECT_EQ(g.kg_edge_count(), 2u);
  EXPECT_EQ(g.text_edge_count(), 1u);
}

TEST(UgStore, UnknownIdentifiersThrow) {
  UniversalGraph g = triangle();
  EXPECT_THROW(g.entity_index("Z"), std::out_of_range);
  EXPECT_THROW(g.add_kg_edge("A", "nope", "B"), std::out_of_range);
  EXPECT_FALSE(g.find_entity("Z").has_value());
}

TEST(UgStore, TextEdgePositionsAreChecked) {
  UniversalGraph g = triangle();
  EXPECT_THROW(g.add_text_edge({"a", "b"}, "A", 0, "B", 2), std::out_of_range);
}

TEST(UgStore, EnumeratesTrianglePaths) {
  const UniversalGraph g = triangle();
  const auto paths = g.enumerate_paths(0, 2, 3);
  // Two A-B edges, each followed by B-C.
  ASSERT_EQ(paths.size(), 2u);
  std::set<PathType> types;
  for (const auto& p : paths) {
    EXPECT_TRUE(g.is_valid_path(p));
    types.insert(classify_path_type(p));
  }
  EXPECT_EQ(types, (std::set<PathType>{PathType::kg, PathType::hybrid}));
  EXPECT_TRUE(g.enumerate_paths(0, 2, 1).empty());
}

TEST(UgStore, ReversedKgHopGetsInverseMarker) {
  const UniversalGraph g = triangle();
  const auto paths = g.enumerate_paths(2, 0, 2);
  bool found = false;
  for (const auto& p : paths) {
    if (classify_path_type(p) != PathType::kg) continue;
    found = true;
    const auto lin = g.linearize(p);
    EXPECT_EQ(join(lin.tokens, " "), "pain <inv> causes cox 2 <sep> cox 2 <inv> may treat aspirin");
    EXPECT_EQ(lin.head_pos, 0u);
    EXPECT_EQ(lin.tokens[lin.tail_pos], "aspirin");
  }
  EXPECT_TRUE(found);
}

TEST(UgStore, LinearizedLengthOfKgChain) {
  const UniversalGraph g = triangle();
  for (const auto& p : g.enumerate_paths(0, 2, 2)) {
    const auto lin = g.linearize(p);
    if (lin.type != PathType::kg) continue;
    // Each hop renders src, relation and dst surface tokens, joined by one
    // separator per hop boundary.
    std::size_t expected = p.hops.size() - 1;
    for (const auto& h : p.hops) {
      const auto& e = g.edge(h.edge);
      expected += g.entity(h.from).surface.size() + g.relation(e.relation).surface.size() +
                  g.entity(h.to).surface.size() + (h.reversed ? 1 : 0);
    }
    EXPECT_EQ(lin.tau1, expected);
    EXPECT_EQ(lin.tau1, 1 + 2 + 2 + 1 + 2 + 1 + 1);
    EXPECT_EQ(lin.tau2, distinct_token_count(lin.tokens));
    EXPECT_EQ(lin.tokens[lin.head_pos], "aspirin");
    EXPECT_EQ(lin.tokens[lin.tail_pos], "pain");
  }
}

TEST(UgStore, TextHopAnchorsFollowMentions) {
  const UniversalGraph g = triangle();
  for (const auto& p : g.enumerate_paths(0, 1, 1)) {
    const auto lin = g.linearize(p);
    if (lin.type != PathType::textual) continue;
    EXPECT_EQ(lin.head_pos, 0u);
    EXPECT_EQ(lin.tail_pos, 2u);
    EXPECT_EQ(lin.tau1, 5u);
  }
}

TEST(UgStore, WalksAreSubsetOfEnumeration) {
  for (unsigned seed = 0; seed < 20; ++seed) {
    const UniversalGraph g = test::random_graph(15, 40, seed);
    const auto all = keys(g.enumerate_paths(0, 1, 3));
    const auto walked = g.random_walk_paths(0, 1, 3, 500, seed);
    for (const auto& p : walked) {
      EXPECT_TRUE(g.is_valid_path(p));
      EXPECT_LE(p.hops.size(), 3u);
      EXPECT_TRUE(all.count(p.key())) << "seed " << seed;
    }
    EXPECT_EQ(keys(walked).size(), walked.size()) << "duplicates, seed " << seed;
  }
}

TEST(UgStore, EnumerationMatchesBruteForce) {
  for (unsigned seed = 0; seed < 20; ++seed) {
    const UniversalGraph g = test::random_graph(12, 30, 100 + seed);
    EXPECT_EQ(keys(g.enumerate_paths(2, 5, 3)), test::brute_force_paths(g, 2, 5, 3));
  }
}

TEST(UgStore, ManyWalksFindEveryShortPath) {
  const UniversalGraph g = triangle();
  EXPECT_EQ(keys(g.random_walk_paths(0, 2, 3, 2000, 4)), keys(g.enumerate_paths(0, 2, 3)));
}

TEST(UgStore, WalksAreSeedDeterministic) {
  const UniversalGraph g = test::random_graph(20, 60, 9);
  const auto a = g.random_walk_paths(0, 3, 3, 300, 77);
  const auto b = g.random_walk_paths(0, 3, 3, 300, 77);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].key(), b[i].key());
}

TEST(UgStore, EnumerationCapRefusesLargeGraphs) {
  UniversalGraph g = test::random_graph(10, 10, 1);
  g.set_enumeration_cap(5);
  EXPECT_THROW(g.enumerate_paths(0, 1, 2), std::exception);
}

TEST(UgStore, CapPathsKeepsOrderAndSize) {
  const UniversalGraph g = test::random_graph(15, 60, 3);
  auto paths = g.enumerate_paths(0, 1, 3);
  ASSERT_GT(paths.size(), 4u);
  const auto capped = cap_paths(paths, 4, 11);
  ASSERT_EQ(capped.size(), 4u);
  std::size_t last = 0;
  for (const auto& c : capped) {
    std::size_t at = 0;
    while (paths[at].key() != c.key()) ++at;
    EXPECT_GE(at, last);
    last = at;
  }
  EXPECT_EQ(cap_paths(paths, 1000, 11).size(), paths.size());
}

TEST(UgStore, PathRecordRoundTrip) {
  const UniversalGraph g = triangle();
  for (const auto& p : g.enumerate_paths(0, 2, 3)) {
    const PathRecord rec = make_path_record(g, p);
    EXPECT_EQ(parse_path_record(format_path_record(rec), "paths.tsv", 1), rec);
  }
  EXPECT_THROW(parse_path_record("A\tB\tkg\t1", "paths.tsv", 7), ParseError);
}

TEST(UgStore, EdgeFilesRoundTrip) {
  const UniversalGraph g = triangle();
  test::TempDir dir("edges");
  std::ostringstream kg, text;
  write_kg_edges(g, kg);
  write_text_edges(g, text);
  test::write_file(dir / "kg.tsv", kg.str());
  test::write_file(dir / "text.tsv", text.str());
  test::write_file(dir / "ent.txt", "A\taspirin\nB\tcox 2\nC\tpain\n");
  test::write_file(dir / "rel.txt", "NA\nmay_treat\ncauses\n");
  UniversalGraph h;
  load_entities(h, dir / "ent.txt");
  load_relations(h, dir / "rel.txt");
  load_kg_edges(h, dir / "kg.tsv");
  load_text_edges(h, dir / "text.tsv");
  EXPECT_EQ(h.kg_edge_count(), 2u);
  EXPECT_EQ(h.text_edge_count(), 1u);
  auto rendered = [](const UniversalGraph& graph) {
    std::set<std::string> out;
    for (const auto& p : graph.enumerate_paths(0, 2, 3)) {
      out.insert(join(graph.linearize(p).tokens, " "));
    }
    return out;
  };
  EXPECT_EQ(rendered(h), rendered(g));
}

TEST(UgStore, MalformedEdgeLineReportsLine) {
  test::TempDir dir("bad");
  test::write_file(dir / "ent.txt", "A\nB\n");
  test::write_file(dir / "rel.txt", "NA\nr\n");
  test::write_file(dir / "kg.tsv", "A\tr\tB\nA\tr\n");
  UniversalGraph g;
  load_entities(g, dir / "ent.txt");
  load_relations(g, dir / "rel.txt");
  try {
    load_kg_edges(g, dir / "kg.tsv");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}
