#include "ugre/evaluation.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <stdexcept>

#include "ugre/text_io.hpp"

namespace ugre {

namespace {

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

}  // namespace

std::vector<EvalRecord> predict_all(const Model& model, std::span<const EncodedBag> bags,
                                    const GoldIndex& gold,
                                    std::span<const std::size_t> pair_ids) {
  if (!pair_ids.empty() && pair_ids.size() != bags.size()) {
    throw std::invalid_argument("predict_all: one pair id per bag expected");
  }
  std::vector<EvalRecord> out;
  const std::size_t n_rel = model.config.n_relations;
  out.reserve(bags.size() * (n_rel > 0 ? n_rel - 1 : 0));
  for (std::size_t i = 0; i < bags.size(); ++i) {
    const BagState st = forward_bag(model, bags[i]);
    const std::size_t pair = pair_ids.empty() ? i : pair_ids[i];
    for (std::size_t r = 1; r < n_rel; ++r) {
      out.push_back({pair, static_cast<RelationIndex>(r), st.cls.probs[r],
                     gold.contains(static_cast<EntityIndex>(bags[i].head),
                                   static_cast<RelationIndex>(r),
                                   static_cast<EntityIndex>(bags[i].tail))});
    }
  }
  return out;
}

void sort_records(std::vector<EvalRecord>& records) {
  std::sort(records.begin(), records.end(), [](const EvalRecord& a, const EvalRecord& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.pair != b.pair) return a.pair < b.pair;
    return a.relation < b.relation;
  });
}

PRCurve pr_curve(std::vector<EvalRecord> records, std::size_t total_gold) {
  sort_records(records);
  if (total_gold == 0) {
    total_gold = static_cast<std::size_t>(
        std::count_if(records.begin(), records.end(), [](const auto& r) { return r.gold; }));
  }
  if (total_gold == 0) throw std::invalid_argument("pr_curve: no gold records");
  PRCurve curve;
  curve.total_gold = total_gold;
  curve.points.reserve(records.size());
  std::size_t tp = 0;
  for (std::size_t n = 1; n <= records.size(); ++n) {
    if (records[n - 1].gold) ++tp;
    curve.points.push_back({static_cast<double>(tp) / static_cast<double>(total_gold),
                            static_cast<double>(tp) / static_cast<double>(n)});
  }
  return curve;
}

double auc_trapezoid(const PRCurve& curve) {
  if (curve.points.empty()) return 0.0;
  double area = 0.0;
  PRPoint prev{0.0, curve.points.front().precision};
  for (const auto& p : curve.points) {
    area += (p.recall - prev.recall) * (p.precision + prev.precision) / 2.0;
    prev = p;
  }
  return area;
}

double auc_step(const PRCurve& curve) {
  double area = 0.0;
  double prev_recall = 0.0;
  for (const auto& p : curve.points) {
    area += (p.recall - prev_recall) * p.precision;
    prev_recall = p.recall;
  }
  return area;
}

double precision_at_n(std::vector<EvalRecord> records, std::size_t n) {
  if (n == 0) throw std::invalid_argument("precision_at_n: n must be >= 1");
  if (n > records.size()) {
    throw std::invalid_argument("precision_at_n: n = " + std::to_string(n) +
                                " exceeds " + std::to_string(records.size()) + " records");
  }
  sort_records(records);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) hits += records[i].gold ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(n);
}

std::vector<PathWeight> path_attention_weights(const Model& model,
                                               std::span<const EncodedBag> bags) {
  std::vector<PathWeight> raw;
  for (std::size_t b = 0; b < bags.size(); ++b) {
    if (bags[b].paths.empty() || !model.config.use_paths) continue;
    const BagState st = forward_bag(model, bags[b]);
    for (std::size_t p = 0; p < bags[b].paths.size(); ++p) {
      const auto& path = bags[b].paths[p];
      raw.push_back({b, p, path.type, path.tau1, path.tau2, st.view.path_weights[p]});
    }
  }
  return raw;
}

std::vector<BiasGroup> group_path_weights(const std::vector<PathWeight>& raw,
                                          std::size_t bucket_width) {
  if (bucket_width == 0) throw std::invalid_argument("bucket width must be >= 1");
  std::vector<BiasGroup> out;
  for (PathType t : {PathType::kg, PathType::textual, PathType::hybrid}) {
    std::size_t n = 0;
    double sum = 0.0;
    for (const auto& w : raw) {
      if (w.type != t) continue;
      ++n;
      sum += w.weight;
    }
    if (n > 0) out.push_back({"type", std::string(to_string(t)), n, sum / static_cast<double>(n)});
  }
  std::map<std::size_t, std::pair<std::size_t, double>> buckets;
  for (const auto& w : raw) {
    auto& [n, sum] = buckets[w.tau1 / bucket_width];
    ++n;
    sum += w.weight;
  }
  for (const auto& [b, acc] : buckets) {
    const std::size_t lo = b * bucket_width;
    out.push_back({"length", std::to_string(lo) + "-" + std::to_string(lo + bucket_width - 1),
                   acc.first, acc.second / static_cast<double>(acc.first)});
  }
  return out;
}

BiasReport attention_bias_report(const Model& model, std::span<const EncodedBag> bags,
                                 std::size_t bucket_width) {
  BiasReport r;
  r.raw = path_attention_weights(model, bags);
  r.groups = group_path_weights(r.raw, bucket_width);
  return r;
}

Metrics compute_metrics(const std::vector<EvalRecord>& records) {
  Metrics m;
  const PRCurve curve = pr_curve(records);
  m.auc_trapezoid = auc_trapezoid(curve);
  m.auc_step = auc_step(curve);
  m.records = records.size();
  m.total_gold = curve.total_gold;
  for (std::size_t n : kPrecisionGrid) {
    if (n <= records.size()) m.precision_at.emplace_back(n, precision_at_n(records, n));
  }
  return m;
}

void write_pr_curve_csv(const PRCurve& curve, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "recall,precision\n";
  for (const auto& p : curve.points) {
    out << format_double(p.recall) << ',' << format_double(p.precision) << '\n';
  }
}

void write_metrics(const Metrics& m, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "auc\t" << format_double(m.auc_trapezoid) << '\n';
  out << "auc_step\t" << format_double(m.auc_step) << '\n';
  out << "records\t" << m.records << '\n';
  out << "gold\t" << m.total_gold << '\n';
  for (std::size_t n : kPrecisionGrid) {
    out << "p@" << n << '\t';
    auto it = std::find_if(m.precision_at.begin(), m.precision_at.end(),
                           [&](const auto& e) { return e.first == n; });
    if (it == m.precision_at.end()) {
      out << "n/a\n";
    } else {
      out << format_double(it->second) << '\n';
    }
  }
}

void write_bias_groups_csv(const std::vector<BiasGroup>& groups,
                           const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "grouping,group,count,mean_weight\n";
  for (const auto& g : groups) {
    out << g.grouping << ',' << g.group << ',' << g.count << ','
        << format_double(g.mean_weight) << '\n';
  }
}

void write_path_weights_csv(const std::vector<PathWeight>& raw,
                            const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "bag,path,type,tau1,tau2,weight\n";
  for (const auto& w : raw) {
    out << w.bag << ',' << w.path << ',' << to_string(w.type) << ',' << w.tau1 << ','
        << w.tau2 << ',' << format_double(w.weight) << '\n';
  }
}

std::vector<PathWeight> read_path_weights_csv(const std::filesystem::path& path) {
  const std::string file = path.string();
  std::vector<PathWeight> out;
  for_each_line(path, [&](std::size_t n, const std::string& line) {
    if (n == 1 || line.empty()) return;
    std::vector<std::string> f;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == ',') {
        f.push_back(line.substr(start, i - start));
        start = i + 1;
      }
    }
    PathWeight w;
    auto type = f.size() == 6 ? parse_path_type(f[2]) : std::nullopt;
    if (!type || !parse_size(f[0], w.bag) || !parse_size(f[1], w.path) ||
        !parse_size(f[3], w.tau1) || !parse_size(f[4], w.tau2) ||
        !parse_double(f[5], w.weight)) {
      throw ParseError(file, n, "expected bag,path,type,tau1,tau2,weight");
    }
    w.type = *type;
    out.push_back(w);
  });
  return out;
}

void write_pr_curve_svg(const PRCurve& curve, const std::filesystem::path& path) {
  constexpr double kW = 480, kH = 360, kM = 50;
  auto x = [&](double r) { return kM + r * (kW - 2 * kM); };
  auto y = [&](double p) { return kH - kM - p * (kH - 2 * kM); };
  auto out = open_out(path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<line x1=\"" << x(0) << "\" y1=\"" << y(0) << "\" x2=\"" << x(1) << "\" y2=\""
      << y(0) << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << x(0) << "\" y1=\"" << y(0) << "\" x2=\"" << x(0) << "\" y2=\""
      << y(1) << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = i / 4.0;
    out << "<text x=\"" << x(v) << "\" y=\"" << y(0) + 16 << "\" text-anchor=\"middle\">"
        << format_double(v) << "</text>\n";
    out << "<text x=\"" << x(0) - 6 << "\" y=\"" << y(v) + 4 << "\" text-anchor=\"end\">"
        << format_double(v) << "</text>\n";
  }
  out << "<text x=\"" << kW / 2 << "\" y=\"" << kH - 10
      << "\" text-anchor=\"middle\">Recall</text>\n";
  out << "<text x=\"14\" y=\"" << kH / 2 << "\" transform=\"rotate(-90 14 " << kH / 2
      << ")\" text-anchor=\"middle\">Precision</text>\n";
  out << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"";
  for (const auto& p : curve.points) out << x(p.recall) << ',' << y(p.precision) << ' ';
  out << "\"/>\n</svg>\n";
}

}  // namespace ugre
