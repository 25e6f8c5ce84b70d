#pragma once
// Bag-level model: selective attention over sentence and path encodings
// queried by the latent relation r_ht, the complexity-ranked group attention,
// the relation classifier and the joint KG + classification objective.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ugre/complexity.hpp"
#include "ugre/encoders.hpp"
#include "ugre/numerics.hpp"
#include "ugre/rng.hpp"
#include "ugre/ug_store.hpp"

namespace ugre {

enum class Mode { base, ranking };

std::string_view to_string(Mode mode);
std::optional<Mode> parse_mode(std::string_view s);

struct ModelConfig {
  std::size_t n_entities = 0;
  std::size_t n_relations = 0;  // includes NA at index 0
  std::size_t vocab_size = 0;
  std::size_t word_dim = 50;
  std::size_t pos_dim = 5;
  std::size_t kg_dim = 50;
  std::size_t filters = 100;
  std::size_t window = 3;
  std::size_t maxdist = 30;
  double kg_bias = 7.0;
  Norm norm = Norm::l2;
  Mode mode = Mode::base;
  bool use_paths = true;
  ComplexityWeights complexity;
  std::size_t j = 50;
  // When set, attention logits also send gradient into the entity table
  // through r_ht. Off by default: entities learn from the KG term only.
  bool attention_kg_grad = false;

  std::size_t input_dim() const { return word_dim + 2 * pos_dim; }
  std::size_t classifier_blocks() const { return mode == Mode::ranking ? 4 : 2; }
  std::size_t classifier_dim() const { return classifier_blocks() * filters; }
};

struct NetParams {
  ParamSlot word_emb;
  ParamSlot pos_emb;
  ParamSlot conv_sent_w;
  ParamSlot conv_sent_b;
  ParamSlot conv_path_w;
  ParamSlot conv_path_b;
  ParamSlot attn_w;
  ParamSlot attn_b;
  ParamSlot cls_m;
  ParamSlot cls_d;
};

struct Model {
  ModelConfig config;
  KgParams kg;
  NetParams net;

  // Allocates every table from the config; values are zero until initialize.
  explicit Model(const ModelConfig& config);
  Model(const Model& other) = default;
  Model& operator=(const Model& other) = default;

  void initialize(Rng& rng);

  std::vector<ParamSlot*> slots();
  std::vector<const ParamSlot*> slots() const;
  void zero_grads();
};

struct EncodedPath {
  TokenFeatures features;
  PathType type = PathType::kg;
  std::size_t tau1 = 0;
  std::size_t tau2 = 0;
};

struct EncodedBag {
  std::size_t head = 0;
  std::size_t tail = 0;
  std::size_t label = 0;
  std::vector<TokenFeatures> sentences;
  std::vector<EncodedPath> paths;
};

// Counts of path encodings entering forward passes, by type.
struct PathUsage {
  std::array<std::uint64_t, 3> by_type{};

  void count(PathType t) { ++by_type[static_cast<std::size_t>(t)]; }
  std::uint64_t operator[](PathType t) const {
    return by_type[static_cast<std::size_t>(t)];
  }
  std::uint64_t total() const { return by_type[0] + by_type[1] + by_type[2]; }
};

struct AttentionResult {
  std::vector<std::size_t> members;           // item indices attended over
  std::vector<std::vector<double>> hidden;    // x_i = tanh(W v_i + b)
  std::vector<double> logits;                 // <r_ht, x_i>
  std::vector<double> weights;                // softmax of logits
  std::vector<double> output;                 // sum_i a_i v_i
};

AttentionResult bag_attention(const std::vector<std::vector<double>>& items,
                              std::span<const double> r_ht, const Tensor& w,
                              const Tensor& b);
// Attention restricted to `members`; the softmax is normalised within them.
AttentionResult bag_attention(const std::vector<std::vector<double>>& items,
                              std::span<const std::size_t> members,
                              std::span<const double> r_ht, const Tensor& w,
                              const Tensor& b);
// Accumulates into dw, db and d_items[members[i]]; d_rht is skipped if empty.
void bag_attention_backward(const std::vector<std::vector<double>>& items,
                            const AttentionResult& fwd,
                            std::span<const double> d_out,
                            std::span<const double> r_ht, const Tensor& w,
                            Tensor& dw, Tensor& db,
                            std::vector<std::vector<double>>& d_items,
                            std::span<double> d_rht);

struct GuidedReps {
  AttentionResult complex;
  AttentionResult simple;
};

GuidedReps complexity_guided_reps(const std::vector<std::vector<double>>& path_vecs,
                                  const ComplexityGroups& groups,
                                  std::span<const double> r_ht, const Tensor& w,
                                  const Tensor& b);

struct ClassifyResult {
  std::vector<double> mask;    // empty when no dropout was applied
  std::vector<double> input;   // classifier input after dropout
  std::vector<double> logits;  // o = M input + d
  std::vector<double> probs;
};

// `mask` is empty (no dropout) or one multiplier per input element.
ClassifyResult classify(std::span<const double> features, const Tensor& m,
                        const Tensor& d, std::span<const double> mask = {});

struct BagForward {
  std::vector<double> s_all;
  std::vector<double> p_all;
  std::vector<double> p_complex;
  std::vector<double> p_simple;
  std::vector<double> sent_weights;
  std::vector<double> path_weights;
  std::vector<double> o;
  std::vector<double> class_probs;
};

// Classifier input [s_all; p_all] or [s_all; p_all; p_complex; p_simple].
std::vector<double> classifier_features(const BagForward& fwd, Mode mode);

// Everything the backward pass needs from one bag's forward pass.
struct BagState {
  KgTerm kg;
  std::vector<CnnCache> sent_cnn;
  std::vector<CnnCache> path_cnn;
  std::vector<std::vector<double>> sent_vecs;
  std::vector<std::vector<double>> path_vecs;
  std::optional<AttentionResult> sent_att;
  std::optional<AttentionResult> path_att;
  std::optional<GuidedReps> guided;
  ComplexityGroups groups;
  std::vector<double> features;
  ClassifyResult cls;
  BagForward view;

  double kg_nll() const { return -kg.log_prob; }
  double cls_nll(std::size_t label) const;
};

BagState forward_bag(const Model& model, const EncodedBag& bag,
                     std::span<const double> dropout_mask = {},
                     PathUsage* usage = nullptr);

// Accumulates scale * d(kg_nll + cls_nll) into the model's grads.
void backward_bag(Model& model, const EncodedBag& bag, const BagState& state,
                  double scale);

// J = mean over bags of (-log P_kg(r|h,t) - log P(r|S, P)).
double joint_loss(const Model& model, std::span<const EncodedBag> batch,
                  std::span<const std::vector<double>> masks = {});
// Same value; also accumulates dJ into the model's grads.
double joint_loss_and_grad(Model& model, std::span<const EncodedBag> batch,
                           std::span<const std::vector<double>> masks = {},
                           PathUsage* usage = nullptr);

// Inverted-dropout multipliers: 0 with probability rate, else 1/(1-rate).
std::vector<double> dropout_mask(std::size_t n, double rate, Rng& rng);

}  // namespace ugre
