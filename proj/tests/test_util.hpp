#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <unistd.h>

#include "ugre/ug_store.hpp"

namespace ugre::test {

// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("ugre_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

// Random UG on n entities with a mix of KG and textual edges.
inline UniversalGraph random_graph(std::size_t n, std::size_t n_edges, unsigned seed) {
  std::mt19937 gen(seed);
  UniversalGraph g;
  g.add_relation("NA");
  for (int r = 1; r <= 4; ++r) g.add_relation("r" + std::to_string(r));
  for (std::size_t i = 0; i < n; ++i) g.add_entity("e" + std::to_string(i));
  std::uniform_int_distribution<std::size_t> node(0, n - 1);
  std::uniform_int_distribution<int> rel(1, 4);
  for (std::size_t k = 0; k < n_edges; ++k) {
    const auto a = static_cast<EntityIndex>(node(gen));
    auto b = static_cast<EntityIndex>(node(gen));
    if (a == b) continue;
    if (gen() % 2 == 0) {
      g.add_kg_edge(a, static_cast<RelationIndex>(rel(gen)), b);
    } else {
      g.add_text_edge({"x", "said", "y"}, a, 0, b, 2);
    }
  }
  return g;
}

// Every simple path of at most max_steps hops, found by scanning the raw edge
// list at every step.
inline std::set<std::vector<std::uint64_t>> brute_force_paths(const UniversalGraph& g,
                                                              EntityIndex e1, EntityIndex e2,
                                                              std::size_t max_steps) {
  std::set<std::vector<std::uint64_t>> out;
  std::vector<std::uint64_t> key;
  std::vector<EntityIndex> visited{e1};
  auto rec = [&](auto& self, EntityIndex cur) -> void {
    if (cur == e2) {
      out.insert(key);
      return;
    }
    if (key.size() == max_steps) return;
    const auto edges = g.edges();
    for (std::uint32_t i = 0; i < edges.size(); ++i) {
      for (bool rev : {false, true}) {
        const EntityIndex from = rev ? edges[i].dst : edges[i].src;
        const EntityIndex to = rev ? edges[i].src : edges[i].dst;
        if (from != cur) continue;
        if (std::find(visited.begin(), visited.end(), to) != visited.end()) continue;
        key.push_back((static_cast<std::uint64_t>(i) << 1) | (rev ? 1 : 0));
        visited.push_back(to);
        self(self, to);
        visited.pop_back();
        key.pop_back();
      }
    }
  };
  rec(rec, e1);
  return out;
}

}  // namespace ugre::test
