#include "ugre/attention_model.hpp"

#include <cmath>
#include <stdexcept>

namespace ugre {

std::string_view to_string(Mode mode) {
  return mode == Mode::ranking ? "ranking" : "base";
}

std::optional<Mode> parse_mode(std::string_view s) {
  if (s == "base") return Mode::base;
  if (s == "ranking") return Mode::ranking;
  return std::nullopt;
}

namespace {

ParamSlot net_slot(std::string name, Shape shape) {
  return ParamSlot(std::move(name), Tensor(std::move(shape)), LearningRateGroup::net);
}

void xavier(Tensor& t, Rng& rng) {
  const double bound =
      std::sqrt(6.0 / static_cast<double>(t.rows() + t.cols()));
  for (auto& v : t.data()) v = rng.uniform(-bound, bound);
}

std::vector<double> zeros(std::size_t n) { return std::vector<double>(n, 0.0); }

}  // namespace

Model::Model(const ModelConfig& cfg)
    : config(cfg),
      kg(cfg.n_entities, cfg.n_relations, cfg.kg_dim, cfg.kg_bias, cfg.norm) {
  if (cfg.window % 2 == 0) throw std::invalid_argument("window must be odd");
  if (cfg.n_relations == 0) throw std::invalid_argument("relation vocabulary is empty");
  const std::size_t conv_in = cfg.window * cfg.input_dim();
  net.word_emb = net_slot("word_emb", {cfg.vocab_size, cfg.word_dim});
  net.pos_emb = net_slot("pos_emb", {2 * cfg.maxdist + 1, cfg.pos_dim});
  net.conv_sent_w = net_slot("conv_sent_w", {cfg.filters, conv_in});
  net.conv_sent_b = net_slot("conv_sent_b", {cfg.filters});
  net.conv_path_w = net_slot("conv_path_w", {cfg.filters, conv_in});
  net.conv_path_b = net_slot("conv_path_b", {cfg.filters});
  net.attn_w = net_slot("attn_w", {cfg.kg_dim, cfg.filters});
  net.attn_b = net_slot("attn_b", {cfg.kg_dim});
  net.cls_m = net_slot("cls_m", {cfg.n_relations, cfg.classifier_dim()});
  net.cls_d = net_slot("cls_d", {cfg.n_relations});
}

void Model::initialize(Rng& rng) {
  kg.initialize(rng);
  for (auto& v : net.word_emb.value.data()) v = rng.uniform(-0.25, 0.25);
  for (auto& v : net.pos_emb.value.data()) v = rng.uniform(-0.25, 0.25);
  xavier(net.conv_sent_w.value, rng);
  xavier(net.conv_path_w.value, rng);
  xavier(net.attn_w.value, rng);
  xavier(net.cls_m.value, rng);
  net.conv_sent_b.value.fill(0.0);
  net.conv_path_b.value.fill(0.0);
  net.attn_b.value.fill(0.0);
  net.cls_d.value.fill(0.0);
}

std::vector<ParamSlot*> Model::slots() {
  return {&kg.entity,        &kg.relation,      &net.word_emb,
          &net.pos_emb,      &net.conv_sent_w,  &net.conv_sent_b,
          &net.conv_path_w,  &net.conv_path_b,  &net.attn_w,
          &net.attn_b,       &net.cls_m,        &net.cls_d};
}

std::vector<const ParamSlot*> Model::slots() const {
  auto mut = const_cast<Model*>(this)->slots();
  return {mut.begin(), mut.end()};
}

void Model::zero_grads() {
  for (auto* s : slots()) s->grad.fill(0.0);
}

// --- attention ---------------------------------------------------------------

AttentionResult bag_attention(const std::vector<std::vector<double>>& items,
                              std::span<const double> r_ht, const Tensor& w,
                              const Tensor& b) {
  std::vector<std::size_t> all(items.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return bag_attention(items, all, r_ht, w, b);
}

AttentionResult bag_attention(const std::vector<std::vector<double>>& items,
                              std::span<const std::size_t> members,
                              std::span<const double> r_ht, const Tensor& w,
                              const Tensor& b) {
  if (members.empty()) throw std::invalid_argument("bag_attention: empty bag");
  if (r_ht.size() != w.rows()) {
    throw ShapeError("bag_attention r_ht", Shape{r_ht.size()}, w.shape());
  }
  AttentionResult res;
  res.members.assign(members.begin(), members.end());
  const std::size_t dim = items.at(members[0]).size();
  for (std::size_t m : members) {
    auto pre = ops::add(ops::matvec(w, items.at(m)), b.data());
    auto x = ops::tanh(pre);
    res.logits.push_back(ops::dot(r_ht, x));
    res.hidden.push_back(std::move(x));
  }
  res.weights = ops::softmax(res.logits);
  res.output.assign(dim, 0.0);
  for (std::size_t k = 0; k < members.size(); ++k) {
    ops::axpy(res.weights[k], items[members[k]], res.output);
  }
  return res;
}

void bag_attention_backward(const std::vector<std::vector<double>>& items,
                            const AttentionResult& fwd,
                            std::span<const double> d_out,
                            std::span<const double> r_ht, const Tensor& w,
                            Tensor& dw, Tensor& db,
                            std::vector<std::vector<double>>& d_items,
                            std::span<double> d_rht) {
  const std::size_t n = fwd.members.size();
  // output = sum_k a_k v_k
  std::vector<double> d_weights(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t m = fwd.members[k];
    d_weights[k] = ops::dot(d_out, items[m]);
    ops::axpy(fwd.weights[k], d_out, d_items[m]);
  }
  std::vector<double> d_logits(n, 0.0);
  ops::softmax_backward(fwd.weights, d_weights, d_logits);
  std::vector<double> d_x(r_ht.size());
  std::vector<double> d_pre(r_ht.size());
  for (std::size_t k = 0; k < n; ++k) {
    if (d_logits[k] == 0.0) continue;
    const std::size_t m = fwd.members[k];
    // logit = <r_ht, x>
    std::fill(d_x.begin(), d_x.end(), 0.0);
    ops::dot_backward(r_ht, fwd.hidden[k], d_logits[k], d_rht, d_x);
    std::fill(d_pre.begin(), d_pre.end(), 0.0);
    ops::tanh_backward(fwd.hidden[k], d_x, d_pre);
    ops::axpy(1.0, d_pre, db.data());
    ops::matvec_backward(w, items[m], d_pre, &dw, d_items[m]);
  }
}

GuidedReps complexity_guided_reps(const std::vector<std::vector<double>>& path_vecs,
                                  const ComplexityGroups& groups,
                                  std::span<const double> r_ht, const Tensor& w,
                                  const Tensor& b) {
  if (groups.complex.empty() || groups.simple.empty()) {
    throw std::invalid_argument("complexity_guided_reps: empty group");
  }
  return {bag_attention(path_vecs, groups.complex, r_ht, w, b),
          bag_attention(path_vecs, groups.simple, r_ht, w, b)};
}

// --- classification ---------------------------------------------------------

ClassifyResult classify(std::span<const double> features, const Tensor& m,
                        const Tensor& d, std::span<const double> mask) {
  if (features.size() != m.cols()) {
    throw ShapeError("classify", Shape{features.size()}, m.shape());
  }
  if (d.size() != m.rows()) throw ShapeError("classify bias", d.shape(), m.shape());
  ClassifyResult res;
  res.input.assign(features.begin(), features.end());
  if (!mask.empty()) {
    if (mask.size() != features.size()) {
      throw ShapeError("classify dropout mask", Shape{mask.size()},
                       Shape{features.size()});
    }
    res.mask.assign(mask.begin(), mask.end());
    for (std::size_t i = 0; i < mask.size(); ++i) res.input[i] *= mask[i];
  }
  res.logits = ops::add(ops::matvec(m, res.input), d.data());
  res.probs = ops::softmax(res.logits);
  return res;
}

std::vector<double> classifier_features(const BagForward& fwd, Mode mode) {
  if (mode == Mode::ranking) {
    return ops::concat({fwd.s_all, fwd.p_all, fwd.p_complex, fwd.p_simple});
  }
  return ops::concat({fwd.s_all, fwd.p_all});
}

double BagState::cls_nll(std::size_t label) const {
  return -std::log(cls.probs.at(label));
}

// --- bag forward / backward --------------------------------------------------

BagState forward_bag(const Model& model, const EncodedBag& bag,
                     std::span<const double> dropout_mask, PathUsage* usage) {
  const ModelConfig& cfg = model.config;
  const NetParams& net = model.net;
  if (bag.label >= cfg.n_relations) {
    throw std::out_of_range("bag label " + std::to_string(bag.label) +
                            " outside relation vocabulary");
  }
  BagState st;
  st.kg = kg_forward(model.kg, bag.head, bag.label, bag.tail);
  const auto& r_ht = st.kg.r_ht;
  const EmbeddingTables tables{net.word_emb.value, net.pos_emb.value};

  for (const auto& s : bag.sentences) {
    st.sent_cnn.push_back(
        cnn_max(s, tables, net.conv_sent_w.value, net.conv_sent_b.value, cfg.window));
    st.sent_vecs.push_back(st.sent_cnn.back().pooled.values);
  }
  if (cfg.use_paths) {
    for (const auto& p : bag.paths) {
      if (usage) usage->count(p.type);
      st.path_cnn.push_back(cnn_max(p.features, tables, net.conv_path_w.value,
                                    net.conv_path_b.value, cfg.window));
      st.path_vecs.push_back(st.path_cnn.back().pooled.values);
    }
  }

  BagForward& v = st.view;
  v.s_all = zeros(cfg.filters);
  v.p_all = zeros(cfg.filters);
  if (!st.sent_vecs.empty()) {
    st.sent_att = bag_attention(st.sent_vecs, r_ht, net.attn_w.value, net.attn_b.value);
    v.s_all = st.sent_att->output;
    v.sent_weights = st.sent_att->weights;
  }
  if (!st.path_vecs.empty()) {
    st.path_att = bag_attention(st.path_vecs, r_ht, net.attn_w.value, net.attn_b.value);
    v.p_all = st.path_att->output;
    v.path_weights = st.path_att->weights;
  }
  if (cfg.mode == Mode::ranking) {
    v.p_complex = zeros(cfg.filters);
    v.p_simple = zeros(cfg.filters);
    if (!st.path_vecs.empty()) {
      std::vector<EncodedPath> const& paths = bag.paths;
      st.groups = rank_and_group(paths, cfg.j, cfg.complexity);
      st.guided = complexity_guided_reps(st.path_vecs, st.groups, r_ht,
                                         net.attn_w.value, net.attn_b.value);
      v.p_complex = st.guided->complex.output;
      v.p_simple = st.guided->simple.output;
    }
  }
  st.features = classifier_features(v, cfg.mode);
  st.cls = classify(st.features, net.cls_m.value, net.cls_d.value, dropout_mask);
  v.o = st.cls.logits;
  v.class_probs = st.cls.probs;
  return st;
}

void backward_bag(Model& model, const EncodedBag& bag, const BagState& st,
                  double scale) {
  const ModelConfig& cfg = model.config;
  NetParams& net = model.net;
  const std::size_t nu = cfg.filters;

  kg_backward(model.kg, st.kg, scale);

  // d(-log softmax(o)[label]) / d o = probs - onehot
  std::vector<double> d_o(st.cls.probs.size());
  for (std::size_t c = 0; c < d_o.size(); ++c) {
    d_o[c] = scale * (st.cls.probs[c] - (c == bag.label ? 1.0 : 0.0));
  }
  std::vector<double> d_input(st.cls.input.size(), 0.0);
  ops::matvec_backward(net.cls_m.value, st.cls.input, d_o, &net.cls_m.grad, d_input);
  ops::axpy(1.0, d_o, net.cls_d.grad.data());
  if (!st.cls.mask.empty()) {
    for (std::size_t i = 0; i < d_input.size(); ++i) d_input[i] *= st.cls.mask[i];
  }
  const std::span<const double> df(d_input);
  const auto d_s_all = df.subspan(0, nu);
  const auto d_p_all = df.subspan(nu, nu);

  std::vector<double> d_rht_buf(cfg.kg_dim, 0.0);
  const std::span<double> d_rht =
      cfg.attention_kg_grad ? std::span<double>(d_rht_buf) : std::span<double>();

  std::vector<std::vector<double>> d_sent(st.sent_vecs.size(), zeros(nu));
  std::vector<std::vector<double>> d_path(st.path_vecs.size(), zeros(nu));
  if (st.sent_att) {
    bag_attention_backward(st.sent_vecs, *st.sent_att, d_s_all, st.kg.r_ht,
                           net.attn_w.value, net.attn_w.grad, net.attn_b.grad,
                           d_sent, d_rht);
  }
  if (st.path_att) {
    bag_attention_backward(st.path_vecs, *st.path_att, d_p_all, st.kg.r_ht,
                           net.attn_w.value, net.attn_w.grad, net.attn_b.grad,
                           d_path, d_rht);
  }
  if (st.guided) {
    bag_attention_backward(st.path_vecs, st.guided->complex, df.subspan(2 * nu, nu),
                           st.kg.r_ht, net.attn_w.value, net.attn_w.grad,
                           net.attn_b.grad, d_path, d_rht);
    bag_attention_backward(st.path_vecs, st.guided->simple, df.subspan(3 * nu, nu),
                           st.kg.r_ht, net.attn_w.value, net.attn_w.grad,
                           net.attn_b.grad, d_path, d_rht);
  }
  if (cfg.attention_kg_grad) {
    add_latent_relation_grad(model.kg, bag.head, bag.tail, d_rht_buf);
  }

  EmbeddingGrads emb{net.word_emb.grad, net.pos_emb.grad};
  for (std::size_t i = 0; i < st.sent_cnn.size(); ++i) {
    cnn_max_backward(bag.sentences[i], st.sent_cnn[i], d_sent[i],
                     net.conv_sent_w.value, cfg.window, cfg.word_dim, cfg.pos_dim,
                     net.conv_sent_w.grad, net.conv_sent_b.grad, emb);
  }
  for (std::size_t i = 0; i < st.path_cnn.size(); ++i) {
    cnn_max_backward(bag.paths[i].features, st.path_cnn[i], d_path[i],
                     net.conv_path_w.value, cfg.window, cfg.word_dim, cfg.pos_dim,
                     net.conv_path_w.grad, net.conv_path_b.grad, emb);
  }
}

double joint_loss(const Model& model, std::span<const EncodedBag> batch,
                  std::span<const std::vector<double>> masks) {
  if (batch.empty()) throw std::invalid_argument("joint_loss: empty batch");
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto mask = masks.empty() ? std::span<const double>() : masks[i];
    const BagState st = forward_bag(model, batch[i], mask);
    total += st.kg_nll() + st.cls_nll(batch[i].label);
  }
  return total / static_cast<double>(batch.size());
}

double joint_loss_and_grad(Model& model, std::span<const EncodedBag> batch,
                           std::span<const std::vector<double>> masks,
                           PathUsage* usage) {
  if (batch.empty()) throw std::invalid_argument("joint_loss: empty batch");
  const double scale = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto mask = masks.empty() ? std::span<const double>() : masks[i];
    const BagState st = forward_bag(model, batch[i], mask, usage);
    total += st.kg_nll() + st.cls_nll(batch[i].label);
    backward_bag(model, batch[i], st, scale);
  }
  return total * scale;
}

std::vector<double> dropout_mask(std::size_t n, double rate, Rng& rng) {
  std::vector<double> mask(n, 1.0);
  if (rate <= 0.0) return mask;
  const double keep = 1.0 / (1.0 - rate);
  for (auto& m : mask) m = rng.uniform() < rate ? 0.0 : keep;
  return mask;
}

}  // namespace ugre
