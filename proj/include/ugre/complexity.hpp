#pragma once
// Path complexity kappa = lambda1 * tau1 + lambda2 * tau2, where tau1 is the
// token count and tau2 the number of distinct tokens, and the split of a path
// bag into its j most and j least complex members.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace ugre {

struct ComplexityWeights {
  double lambda1 = 1.0;
  double lambda2 = 1.0;
};

template <typename P>
concept HasComplexityFeatures = requires(const P& p) {
  { p.tau1 } -> std::convertible_to<std::size_t>;
  { p.tau2 } -> std::convertible_to<std::size_t>;
};

template <HasComplexityFeatures P>
double complexity_score(const P& path, const ComplexityWeights& w) {
  return w.lambda1 * static_cast<double>(path.tau1) +
         w.lambda2 * static_cast<double>(path.tau2);
}

// Indices into the original bag. Both lists follow descending kappa, ties in
// original index order.
struct ComplexityGroups {
  std::vector<std::size_t> complex;
  std::vector<std::size_t> simple;
};

// Sorts by kappa (descending, stable) and takes the first and last min(j, m)
// entries. With m < 2j the two groups overlap.
template <HasComplexityFeatures P>
ComplexityGroups rank_and_group(std::span<const P> paths, std::size_t j,
                                const ComplexityWeights& w) {
  if (paths.empty()) throw std::invalid_argument("rank_and_group: empty path bag");
  if (j == 0) throw std::invalid_argument("rank_and_group: j must be >= 1");
  std::vector<double> kappa(paths.size());
  for (std::size_t i = 0; i < paths.size(); ++i) {
    kappa[i] = complexity_score(paths[i], w);
  }
  std::vector<std::size_t> order(paths.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return kappa[a] > kappa[b];
  });
  const std::size_t k = std::min(j, paths.size());
  ComplexityGroups g;
  g.complex.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  g.simple.assign(order.end() - static_cast<std::ptrdiff_t>(k), order.end());
  return g;
}

template <HasComplexityFeatures P>
ComplexityGroups rank_and_group(const std::vector<P>& paths, std::size_t j,
                                const ComplexityWeights& w) {
  return rank_and_group(std::span<const P>(paths), j, w);
}

}  // namespace ugre
