#include "ugre/encoders.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "ugre/text_io.hpp"

namespace ugre {

namespace {

void check_entity(const KgParams& kg, std::size_t e) {
  if (e >= kg.entity_count()) {
    throw std::out_of_range("unknown entity index " + std::to_string(e));
  }
}

void check_relation(const KgParams& kg, std::size_t r) {
  if (r >= kg.relation_count()) {
    throw std::out_of_range("unknown relation index " + std::to_string(r));
  }
}

double norm_of(std::span<const double> v, Norm norm) {
  double s = 0.0;
  if (norm == Norm::l1) {
    for (double x : v) s += std::abs(x);
    return s;
  }
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

std::vector<double> scores_for(const KgParams& kg, std::span<const double> r_ht) {
  const std::size_t d = kg.dim();
  std::vector<double> scores(kg.relation_count());
  std::vector<double> residual(d);
  for (std::size_t r = 0; r < scores.size(); ++r) {
    const auto rel = kg.relation.value.row(r);
    for (std::size_t i = 0; i < d; ++i) residual[i] = r_ht[i] - rel[i];
    scores[r] = kg.bias - norm_of(residual, kg.norm);
  }
  return scores;
}

}  // namespace

KgParams::KgParams(std::size_t n_entities, std::size_t n_relations,
                   std::size_t dim, double bias, Norm norm)
    : entity("entity_emb", Tensor(Shape{n_entities, dim}), LearningRateGroup::kg),
      relation("relation_emb", Tensor(Shape{n_relations, dim}),
               LearningRateGroup::kg),
      bias(bias),
      norm(norm) {}

void KgParams::initialize(Rng& rng) {
  const double bound = 6.0 / std::sqrt(static_cast<double>(dim()));
  for (auto& v : entity.value.data()) v = rng.uniform(-bound, bound);
  for (auto& v : relation.value.data()) v = rng.uniform(-bound, bound);
}

std::vector<double> latent_relation(const KgParams& kg, std::size_t head,
                                    std::size_t tail) {
  check_entity(kg, head);
  check_entity(kg, tail);
  const auto h = kg.entity.value.row(head);
  const auto t = kg.entity.value.row(tail);
  std::vector<double> out(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) out[i] = t[i] - h[i];
  return out;
}

double transe_score(const KgParams& kg, std::size_t head, std::size_t relation,
                    std::size_t tail) {
  check_relation(kg, relation);
  const auto r_ht = latent_relation(kg, head, tail);
  const auto rel = kg.relation.value.row(relation);
  std::vector<double> residual(r_ht.size());
  for (std::size_t i = 0; i < r_ht.size(); ++i) residual[i] = r_ht[i] - rel[i];
  return kg.bias - norm_of(residual, kg.norm);
}

double kg_log_prob(const KgParams& kg, std::size_t head, std::size_t relation,
                   std::size_t tail) {
  return kg_forward(kg, head, relation, tail).log_prob;
}

KgTerm kg_forward(const KgParams& kg, std::size_t head, std::size_t relation,
                  std::size_t tail) {
  check_relation(kg, relation);
  KgTerm term;
  term.head = head;
  term.tail = tail;
  term.relation = relation;
  term.r_ht = latent_relation(kg, head, tail);
  term.scores = scores_for(kg, term.r_ht);
  term.probs = ops::softmax(term.scores);
  term.log_prob = ops::log_softmax(term.scores)[relation];
  return term;
}

void kg_backward(KgParams& kg, const KgTerm& term, double scale) {
  const std::size_t d = kg.dim();
  std::vector<double> d_rht(d, 0.0);
  std::vector<double> residual(d);
  for (std::size_t r = 0; r < term.scores.size(); ++r) {
    // d(-log p)/d score_r = p_r - [r == label]
    const double g =
        scale * (term.probs[r] - (r == term.relation ? 1.0 : 0.0));
    if (g == 0.0) continue;
    const auto rel = kg.relation.value.row(r);
    for (std::size_t i = 0; i < d; ++i) residual[i] = term.r_ht[i] - rel[i];
    // score = b - ||residual||; d score / d residual = -unit(residual)
    std::vector<double> unit(d, 0.0);
    if (kg.norm == Norm::l2) {
      const double n = norm_of(residual, Norm::l2);
      if (n > 0.0) {
        for (std::size_t i = 0; i < d; ++i) unit[i] = residual[i] / n;
      }
    } else {
      for (std::size_t i = 0; i < d; ++i) {
        unit[i] = residual[i] > 0.0 ? 1.0 : (residual[i] < 0.0 ? -1.0 : 0.0);
      }
    }
    auto d_rel = kg.relation.grad.row(r);
    for (std::size_t i = 0; i < d; ++i) {
      d_rel[i] += g * unit[i];   // residual = r_ht - rel
      d_rht[i] -= g * unit[i];
    }
  }
  add_latent_relation_grad(kg, term.head, term.tail, d_rht);
}

void add_latent_relation_grad(KgParams& kg, std::size_t head, std::size_t tail,
                              std::span<const double> d_rht) {
  auto dh = kg.entity.grad.row(head);
  for (std::size_t i = 0; i < d_rht.size(); ++i) dh[i] -= d_rht[i];
  auto dt = kg.entity.grad.row(tail);
  for (std::size_t i = 0; i < d_rht.size(); ++i) dt[i] += d_rht[i];
}

Vocabulary::Vocabulary() { add(kUnknownToken); }

std::uint32_t Vocabulary::add(std::string_view token) {
  auto it = ids_.find(std::string(token));
  if (it != ids_.end()) return it->second;
  const auto id = static_cast<std::uint32_t>(tokens_.size());
  tokens_.emplace_back(token);
  ids_.emplace(tokens_.back(), id);
  return id;
}

std::uint32_t Vocabulary::id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnknown : it->second;
}

std::vector<std::uint32_t> Vocabulary::encode(
    std::span<const std::string> tokens) const {
  std::vector<std::uint32_t> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

std::uint32_t position_index(long long offset, std::size_t maxdist) {
  const auto m = static_cast<long long>(maxdist);
  offset = std::clamp(offset, -m, m);
  return static_cast<std::uint32_t>(offset + m);
}

TokenFeatures featurize(std::span<const std::uint32_t> word_ids,
                        std::size_t e1_pos, std::size_t e2_pos,
                        std::size_t maxdist) {
  if (e1_pos >= word_ids.size() || e2_pos >= word_ids.size()) {
    throw std::out_of_range("mention position out of range (" +
                            std::to_string(e1_pos) + ", " +
                            std::to_string(e2_pos) + ") for " +
                            std::to_string(word_ids.size()) + " tokens");
  }
  TokenFeatures f;
  f.words.assign(word_ids.begin(), word_ids.end());
  f.pos1.resize(word_ids.size());
  f.pos2.resize(word_ids.size());
  for (std::size_t t = 0; t < word_ids.size(); ++t) {
    const auto i = static_cast<long long>(t);
    f.pos1[t] = position_index(i - static_cast<long long>(e1_pos), maxdist);
    f.pos2[t] = position_index(i - static_cast<long long>(e2_pos), maxdist);
  }
  return f;
}

CnnCache cnn_max(const TokenFeatures& features, EmbeddingTables tables,
                 const Tensor& kernel, const Tensor& bias, std::size_t window) {
  const std::size_t word_dim = tables.word.cols();
  const std::size_t pos_dim = tables.position.cols();
  const std::size_t in_dim = word_dim + 2 * pos_dim;
  if (window % 2 == 0) throw std::invalid_argument("window must be odd");
  if (kernel.cols() != window * in_dim) {
    throw ShapeError("cnn_max kernel", kernel.shape(),
                     Shape{kernel.rows(), window * in_dim});
  }
  if (bias.size() != kernel.rows()) {
    throw ShapeError("cnn_max bias", bias.shape(), Shape{kernel.rows()});
  }

  CnnCache cache;
  const std::size_t n = features.size();
  for (std::size_t t = 0; t < n; ++t) {
    if (features.words[t] != TokenFeatures::kPad) cache.rows.push_back(t);
  }
  if (cache.rows.empty()) throw std::invalid_argument("cnn_max: empty token sequence");

  const std::size_t half = (window - 1) / 2;
  cache.windows = Tensor(Shape{cache.rows.size(), window * in_dim});
  for (std::size_t r = 0; r < cache.rows.size(); ++r) {
    auto z = cache.windows.row(r);
    const std::size_t t = cache.rows[r];
    for (std::size_t w = 0; w < window; ++w) {
      if (t + w < half || t + w - half >= n) continue;
      const std::size_t src = t + w - half;
      if (features.words[src] == TokenFeatures::kPad) continue;
      double* dst = z.data() + w * in_dim;
      const auto we = tables.word.row(features.words[src]);
      std::copy(we.begin(), we.end(), dst);
      const auto p1 = tables.position.row(features.pos1[src]);
      std::copy(p1.begin(), p1.end(), dst + word_dim);
      const auto p2 = tables.position.row(features.pos2[src]);
      std::copy(p2.begin(), p2.end(), dst + word_dim + pos_dim);
    }
  }

  Tensor h = ops::matmul_nt(cache.windows, kernel);
  for (std::size_t r = 0; r < h.rows(); ++r) {
    auto row = h.row(r);
    for (std::size_t f = 0; f < row.size(); ++f) row[f] = std::tanh(row[f] + bias[f]);
  }
  cache.pooled = ops::max_over_time(h);
  return cache;
}

void cnn_max_backward(const TokenFeatures& features, const CnnCache& cache,
                      std::span<const double> d_out, const Tensor& kernel,
                      std::size_t window, std::size_t word_dim,
                      std::size_t pos_dim, Tensor& d_kernel, Tensor& d_bias,
                      EmbeddingGrads grads) {
  const std::size_t in_dim = word_dim + 2 * pos_dim;
  const std::size_t n_filters = kernel.rows();
  if (d_out.size() != n_filters) {
    throw ShapeError("cnn_max_backward", Shape{d_out.size()}, Shape{n_filters});
  }
  // Only the pooled row of each filter receives gradient.
  Tensor d_windows(cache.windows.shape());
  std::vector<char> touched(cache.windows.rows(), 0);
  for (std::size_t f = 0; f < n_filters; ++f) {
    if (d_out[f] == 0.0) continue;
    const double y = cache.pooled.values[f];
    const double g = d_out[f] * (1.0 - y * y);
    if (g == 0.0) continue;
    const std::size_t r = cache.pooled.argmax[f];
    d_bias[f] += g;
    ops::axpy(g, cache.windows.row(r), d_kernel.row(f));
    ops::axpy(g, kernel.row(f), d_windows.row(r));
    touched[r] = 1;
  }

  const std::size_t half = (window - 1) / 2;
  const std::size_t n = features.size();
  for (std::size_t r = 0; r < cache.rows.size(); ++r) {
    if (!touched[r]) continue;
    const auto dz = d_windows.row(r);
    const std::size_t t = cache.rows[r];
    for (std::size_t w = 0; w < window; ++w) {
      if (t + w < half || t + w - half >= n) continue;
      const std::size_t src = t + w - half;
      if (features.words[src] == TokenFeatures::kPad) continue;
      const auto seg = dz.subspan(w * in_dim, in_dim);
      ops::axpy(1.0, seg.subspan(0, word_dim), grads.word.row(features.words[src]));
      ops::axpy(1.0, seg.subspan(word_dim, pos_dim),
                grads.position.row(features.pos1[src]));
      ops::axpy(1.0, seg.subspan(word_dim + pos_dim, pos_dim),
                grads.position.row(features.pos2[src]));
    }
  }
}

std::size_t load_pretrained_embeddings(const std::filesystem::path& path,
                                       const Vocabulary& vocab, Tensor& table) {
  const std::string file = path.string();
  std::size_t declared_rows = 0;
  std::size_t dim = 0;
  std::size_t seen = 0;
  std::size_t loaded = 0;
  for_each_line(path, [&](std::size_t n, const std::string& line) {
    auto f = split_ws(line);
    if (n == 1) {
      if (f.size() != 2 || !parse_size(f[0], declared_rows) ||
          !parse_size(f[1], dim)) {
        throw ParseError(file, n, "expected header 'vocab_size dim'");
      }
      if (dim != table.cols()) {
        throw ParseError(file, n, "embedding dim " + std::to_string(dim) +
                                      " does not match table dim " +
                                      std::to_string(table.cols()));
      }
      return;
    }
    if (f.empty()) return;
    if (f.size() != dim + 1) {
      throw ParseError(file, n, "expected token and " + std::to_string(dim) +
                                    " values");
    }
    ++seen;
    const auto id = vocab.id(f[0]);
    if (id == Vocabulary::kUnknown && f[0] != Vocabulary::kUnknownToken) return;
    auto row = table.row(id);
    for (std::size_t i = 0; i < dim; ++i) {
      if (!parse_double(f[i + 1], row[i])) {
        throw ParseError(file, n, "bad value '" + f[i + 1] + "'");
      }
    }
    ++loaded;
  });
  if (seen != declared_rows) {
    throw std::runtime_error(file + ": header declares " +
                             std::to_string(declared_rows) + " rows, found " +
                             std::to_string(seen));
  }
  return loaded;
}

}  // namespace ugre
