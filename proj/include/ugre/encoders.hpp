#pragma once
// TransE triplet scoring with a softmax over relations, and the CNN-Max
// encoder shared by sentence and path evidence.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ugre/numerics.hpp"
#include "ugre/rng.hpp"

namespace ugre {

enum class Norm { l1, l2 };

// Entity and relation tables (one row per id) plus the bias constant b.
struct KgParams {
  ParamSlot entity;
  ParamSlot relation;
  double bias = 7.0;
  Norm norm = Norm::l2;

  KgParams() = default;
  KgParams(std::size_t n_entities, std::size_t n_relations, std::size_t dim,
           double bias, Norm norm);

  std::size_t dim() const { return entity.value.cols(); }
  std::size_t entity_count() const { return entity.value.rows(); }
  std::size_t relation_count() const { return relation.value.rows(); }

  // TransE-style uniform(-6/sqrt(d), 6/sqrt(d)) initialisation.
  void initialize(Rng& rng);
};

// r_ht = t - h.
std::vector<double> latent_relation(const KgParams& kg, std::size_t head,
                                    std::size_t tail);
// b - ||r_ht - r||.
double transe_score(const KgParams& kg, std::size_t head, std::size_t relation,
                    std::size_t tail);
double kg_log_prob(const KgParams& kg, std::size_t head, std::size_t relation,
                   std::size_t tail);

// Forward state of -log P(r | h, t) kept for the backward pass.
struct KgTerm {
  std::size_t head = 0;
  std::size_t tail = 0;
  std::size_t relation = 0;
  std::vector<double> r_ht;
  std::vector<double> scores;
  std::vector<double> probs;
  double log_prob = 0.0;
};

KgTerm kg_forward(const KgParams& kg, std::size_t head, std::size_t relation,
                  std::size_t tail);
// Accumulates scale * d(-log_prob) into the entity/relation grads.
void kg_backward(KgParams& kg, const KgTerm& term, double scale);
// Routes a gradient on r_ht = t - h into the entity grads.
void add_latent_relation_grad(KgParams& kg, std::size_t head, std::size_t tail,
                              std::span<const double> d_rht);

class Vocabulary {
 public:
  static constexpr std::uint32_t kUnknown = 0;
  static constexpr std::string_view kUnknownToken = "<unk>";

  Vocabulary();

  std::uint32_t add(std::string_view token);
  // kUnknown for tokens never added.
  std::uint32_t id(std::string_view token) const;
  const std::string& token(std::uint32_t id) const { return tokens_.at(id); }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<std::uint32_t> encode(std::span<const std::string> tokens) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::uint32_t> ids_;
};

// Per-token word id and the two clipped relative offsets, stored as
// non-negative indices into the position table (offset + maxdist). A word id
// of kPad marks a padding slot that contributes a zero vector.
struct TokenFeatures {
  static constexpr std::uint32_t kPad = std::numeric_limits<std::uint32_t>::max();

  std::vector<std::uint32_t> words;
  std::vector<std::uint32_t> pos1;
  std::vector<std::uint32_t> pos2;

  std::size_t size() const { return words.size(); }
};

TokenFeatures featurize(std::span<const std::uint32_t> word_ids,
                        std::size_t e1_pos, std::size_t e2_pos,
                        std::size_t maxdist);
// Index into the position table for a signed offset.
std::uint32_t position_index(long long offset, std::size_t maxdist);

// Kernels are (filters x window * (word_dim + 2 * pos_dim)).
struct CnnCache {
  Tensor windows;                  // T x (window * input_dim), one row per real token
  std::vector<std::size_t> rows;   // token index of each windows row
  ops::MaxOverTime pooled;         // argmax indexes `windows` rows
};

struct EmbeddingTables {
  const Tensor& word;
  const Tensor& position;
};

// h_t = tanh(W z_t + b) over every real token, then per-filter max.
// Throws std::invalid_argument when there are no real tokens.
CnnCache cnn_max(const TokenFeatures& features, EmbeddingTables tables,
                 const Tensor& kernel, const Tensor& bias, std::size_t window);

struct EmbeddingGrads {
  Tensor& word;
  Tensor& position;
};

void cnn_max_backward(const TokenFeatures& features, const CnnCache& cache,
                      std::span<const double> d_out, const Tensor& kernel,
                      std::size_t window, std::size_t word_dim,
                      std::size_t pos_dim, Tensor& d_kernel, Tensor& d_bias,
                      EmbeddingGrads grads);

// Reads "vocab_size dim" then "token v1 .. vdim" lines; rows for tokens in
// `vocab` are overwritten. Returns the number of rows loaded.
std::size_t load_pretrained_embeddings(const std::filesystem::path& path,
                                       const Vocabulary& vocab, Tensor& table);

}  // namespace ugre
