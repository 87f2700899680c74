#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <vector>

#include <json.hpp>

#include "tiersim/types.hpp"

namespace tiersim {

struct GbtConfig {
  int max_depth = 20;
  int rounds_per_fit = 10;
  double learning_rate = 0.3;
  int min_samples_leaf = 2;
  double lambda_l2 = 1.0;
  double base_score = 0.5;
  double missing_value = -1.0;  // feature values equal to this route by the learned direction
  double max_leaf_step = 4.0;   // Newton step clamp, before the learning rate

  void validate() const {
    if (max_depth < 1 || rounds_per_fit < 1 || learning_rate <= 0.0 || learning_rate > 1.0 ||
        min_samples_leaf < 1 || lambda_l2 < 0.0 || base_score <= 0.0 || base_score >= 1.0)
      throw SimError(ErrorCode::ConfigError, "invalid gbt config");
  }
};

// Margins are clamped so predicted probabilities stay strictly inside (0,1).
inline double sigmoid(double margin) {
  margin = std::clamp(margin, -30.0, 30.0);
  return 1.0 / (1.0 + std::exp(-margin));
}

inline double logistic_loss(double margin, int y) {
  double p = std::clamp(sigmoid(margin), 1e-15, 1.0 - 1e-15);
  return -(y * std::log(p) + (1 - y) * std::log(1.0 - p));
}

inline double logistic_grad(double margin, int y) { return sigmoid(margin) - y; }

inline double logistic_hess(double margin) {
  double p = sigmoid(margin);
  return p * (1.0 - p);
}

struct Dataset {
  int width = 0;
  std::vector<double> values;  // row-major
  std::vector<int> labels;

  Dataset() = default;
  explicit Dataset(int w) : width(w) {}

  std::size_t size() const { return labels.size(); }
  const double* row(std::size_t i) const { return values.data() + i * width; }

  void add(const std::vector<double>& x, int y) {
    if (width == 0) width = static_cast<int>(x.size());
    if (static_cast<int>(x.size()) != width)
      throw SimError(ErrorCode::WidthMismatch, "row width " + std::to_string(x.size()));
    values.insert(values.end(), x.begin(), x.end());
    labels.push_back(y);
  }
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  bool missing_left = true;
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf log-odds delta, already scaled by the learning rate
};

struct RegressionTree {
  std::vector<TreeNode> nodes;

  double value_for(const double* row, double missing) const {
    int i = 0;
    while (nodes[i].feature >= 0) {
      double v = row[nodes[i].feature];
      bool go_left = (v == missing) ? nodes[i].missing_left : v < nodes[i].threshold;
      i = go_left ? nodes[i].left : nodes[i].right;
    }
    return nodes[i].value;
  }
};

// Cumulative ensemble: trees are only ever appended, never rewritten.
class GbtModel {
 public:
  GbtModel() = default;
  GbtModel(int width, const GbtConfig& cfg)
      : width_(width),
        cfg_(cfg),
        base_logodds_(std::log(cfg.base_score / (1.0 - cfg.base_score))) {
    cfg.validate();
  }

  int width() const { return width_; }
  const GbtConfig& config() const { return cfg_; }
  double base_logodds() const { return base_logodds_; }
  const std::vector<RegressionTree>& trees() const { return trees_; }
  std::size_t tree_count() const { return trees_.size(); }

  double predict_margin(const double* row) const {
    double m = base_logodds_;
    for (const RegressionTree& t : trees_) m += t.value_for(row, cfg_.missing_value);
    return m;
  }

  double predict_proba(const double* row) const { return sigmoid(predict_margin(row)); }

  double predict_proba(const std::vector<double>& x) const {
    if (static_cast<int>(x.size()) != width_)
      throw SimError(ErrorCode::WidthMismatch, "feature width " + std::to_string(x.size()));
    return predict_proba(x.data());
  }

  void append_tree(RegressionTree t) { trees_.push_back(std::move(t)); }

 private:
  int width_ = 0;
  GbtConfig cfg_;
  double base_logodds_ = 0.0;
  std::vector<RegressionTree> trees_;
};

namespace gbt_detail {

struct FeatureOrder {
  std::vector<std::vector<int>> sorted;   // per feature: present rows ascending by value
  std::vector<std::vector<int>> missing;  // per feature: rows with the missing sentinel
};

inline FeatureOrder presort(const Dataset& data, double missing) {
  FeatureOrder ord;
  int w = data.width;
  std::size_t n = data.size();
  ord.sorted.resize(w);
  ord.missing.resize(w);
  for (int f = 0; f < w; ++f) {
    auto& s = ord.sorted[f];
    s.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      double v = data.row(i)[f];
      if (v == missing)
        ord.missing[f].push_back(static_cast<int>(i));
      else
        s.push_back(static_cast<int>(i));
    }
    std::stable_sort(s.begin(), s.end(),
                     [&](int a, int b) { return data.row(a)[f] < data.row(b)[f]; });
  }
  return ord;
}

struct Agg {
  double g = 0.0;
  double h = 0.0;
  int count = 0;
};

constexpr double kMinGain = 1e-12;

// Level-wise exact greedy builder with second-order (Newton) statistics and a
// learned default direction for missing values on every split.
inline RegressionTree build_tree(const Dataset& data, const std::vector<double>& grad,
                                 const std::vector<double>& hess, const GbtConfig& cfg,
                                 const FeatureOrder& ord) {
  std::size_t n = data.size();
  double lambda = cfg.lambda_l2;

  RegressionTree tree;
  tree.nodes.emplace_back();
  std::vector<Agg> node_stats(1);
  for (std::size_t i = 0; i < n; ++i) {
    node_stats[0].g += grad[i];
    node_stats[0].h += hess[i];
    node_stats[0].count++;
  }

  std::vector<int> node_of(n, 0);
  std::vector<int> level{0};

  auto leaf_value = [&](const Agg& a) {
    double step = std::clamp(-a.g / (a.h + lambda), -cfg.max_leaf_step, cfg.max_leaf_step);
    return cfg.learning_rate * step;
  };

  struct Best {
    double gain = kMinGain;
    int feature = -1;
    double threshold = 0.0;
    bool missing_left = true;
  };

  for (int depth = 0; !level.empty(); ++depth) {
    bool allow_split = depth < cfg.max_depth;
    std::size_t S = level.size();
    std::vector<int> slot_of(tree.nodes.size(), -1);
    for (std::size_t s = 0; s < S; ++s) slot_of[level[s]] = static_cast<int>(s);

    std::vector<Best> best(S);
    if (allow_split) {
      struct Scan {
        double gl = 0.0, hl = 0.0;
        int cl = 0;
        double last = 0.0;
        bool has_prev = false;
      };
      std::vector<Agg> miss(S);
      std::vector<Scan> scan(S);

      for (int f = 0; f < data.width; ++f) {
        for (std::size_t s = 0; s < S; ++s) {
          miss[s] = Agg{};
          scan[s] = Scan{};
        }
        for (int r : ord.missing[f]) {
          int nid = node_of[r];
          if (nid < 0) continue;
          int s = slot_of[nid];
          if (s < 0) continue;
          miss[s].g += grad[r];
          miss[s].h += hess[r];
          miss[s].count++;
        }
        for (int r : ord.sorted[f]) {
          int nid = node_of[r];
          if (nid < 0) continue;
          int s = slot_of[nid];
          if (s < 0) continue;
          double v = data.row(r)[f];
          Scan& st = scan[s];
          if (st.has_prev && v > st.last) {
            double thr = 0.5 * (st.last + v);
            if (!(thr > st.last)) thr = v;  // guard midpoint rounding
            const Agg& total = node_stats[nid];
            const Agg& m = miss[s];
            double score_parent = total.g * total.g / (total.h + lambda);
            for (int dir = 0; dir < 2; ++dir) {
              bool miss_left = dir == 0;
              double gl_all = st.gl + (miss_left ? m.g : 0.0);
              double hl_all = st.hl + (miss_left ? m.h : 0.0);
              int cl_all = st.cl + (miss_left ? m.count : 0);
              int cr_all = total.count - cl_all;
              if (cl_all < cfg.min_samples_leaf || cr_all < cfg.min_samples_leaf) continue;
              double gr_all = total.g - gl_all;
              double hr_all = total.h - hl_all;
              double gain = 0.5 * (gl_all * gl_all / (hl_all + lambda) +
                                   gr_all * gr_all / (hr_all + lambda) - score_parent);
              Best& b = best[s];
              if (gain > b.gain) {
                b.gain = gain;
                b.feature = f;
                b.threshold = thr;
                b.missing_left = miss_left;
              }
            }
          }
          st.gl += grad[r];
          st.hl += hess[r];
          st.cl++;
          st.last = v;
          st.has_prev = true;
        }
      }
    }

    std::vector<int> next_level;
    for (std::size_t s = 0; s < S; ++s) {
      int nid = level[s];
      TreeNode& node = tree.nodes[nid];
      if (best[s].feature < 0) {
        node.feature = -1;
        node.value = leaf_value(node_stats[nid]);
      } else {
        node.feature = best[s].feature;
        node.threshold = best[s].threshold;
        node.missing_left = best[s].missing_left;
        node.left = static_cast<int>(tree.nodes.size());
        node.right = node.left + 1;
        tree.nodes.emplace_back();
        tree.nodes.emplace_back();
        node_stats.emplace_back();
        node_stats.emplace_back();
        next_level.push_back(node.left);
        next_level.push_back(node.right);
      }
    }

    if (next_level.empty()) break;

    for (std::size_t i = 0; i < n; ++i) {
      int nid = node_of[i];
      if (nid < 0) continue;
      int s = nid < static_cast<int>(slot_of.size()) ? slot_of[nid] : -1;
      if (s < 0) continue;
      const TreeNode& node = tree.nodes[nid];
      if (node.feature < 0) {
        node_of[i] = -1;  // settled in a leaf
        continue;
      }
      double v = data.row(i)[node.feature];
      bool go_left = (v == cfg.missing_value) ? node.missing_left : v < node.threshold;
      int child = go_left ? node.left : node.right;
      node_of[i] = child;
      node_stats[child].g += grad[i];
      node_stats[child].h += hess[i];
      node_stats[child].count++;
    }
    level = std::move(next_level);
  }
  return tree;
}

}  // namespace gbt_detail

// Appends `rounds` boosted trees trained against `data`, starting from the
// model's current predictions. When the caller keeps per-row margins cached
// (incremental learning), pass them in to skip the full re-prediction.
inline void boost_rounds(GbtModel& model, const Dataset& data, int rounds,
                         std::vector<double>* margins_io = nullptr) {
  if (data.size() == 0) throw SimError(ErrorCode::EmptyDataset, "boost");
  if (data.width != model.width())
    throw SimError(ErrorCode::WidthMismatch, "dataset width " + std::to_string(data.width));

  std::size_t n = data.size();
  std::vector<double> local;
  std::vector<double>* margins = margins_io;
  if (!margins) {
    local.resize(n);
    for (std::size_t i = 0; i < n; ++i) local[i] = model.predict_margin(data.row(i));
    margins = &local;
  } else if (margins->size() != n) {
    throw SimError(ErrorCode::WidthMismatch, "margin cache size mismatch");
  }

  gbt_detail::FeatureOrder ord = gbt_detail::presort(data, model.config().missing_value);
  std::vector<double> grad(n), hess(n);
  for (int r = 0; r < rounds; ++r) {
    for (std::size_t i = 0; i < n; ++i) {
      grad[i] = logistic_grad((*margins)[i], data.labels[i]);
      hess[i] = logistic_hess((*margins)[i]);
    }
    RegressionTree tree = gbt_detail::build_tree(data, grad, hess, model.config(), ord);
    for (std::size_t i = 0; i < n; ++i)
      (*margins)[i] += tree.value_for(data.row(i), model.config().missing_value);
    model.append_tree(std::move(tree));
  }
}

inline GbtModel fit(const Dataset& data, const GbtConfig& cfg) {
  if (data.size() == 0) throw SimError(ErrorCode::EmptyDataset, "fit");
  GbtModel model(data.width, cfg);
  boost_rounds(model, data, cfg.rounds_per_fit);
  return model;
}

inline double log_loss(const GbtModel& model, const Dataset& data) {
  if (data.size() == 0) throw SimError(ErrorCode::EmptyDataset, "log_loss");
  double sum = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i)
    sum += logistic_loss(model.predict_margin(data.row(i)), data.labels[i]);
  return sum / static_cast<double>(data.size());
}

struct Evaluation {
  double accuracy = 0.0;
  std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
};

// Classification at `threshold`: positive iff probability strictly exceeds it.
inline Evaluation evaluate(const GbtModel& model, const Dataset& data, double threshold = 0.5) {
  if (data.size() == 0) throw SimError(ErrorCode::EmptyDataset, "evaluate");
  Evaluation e;
  for (std::size_t i = 0; i < data.size(); ++i) {
    bool pred = model.predict_proba(data.row(i)) > threshold;
    bool truth = data.labels[i] == 1;
    if (pred && truth) e.tp++;
    else if (pred && !truth) e.fp++;
    else if (!pred && !truth) e.tn++;
    else e.fn++;
  }
  e.accuracy = static_cast<double>(e.tp + e.tn) / static_cast<double>(data.size());
  return e;
}

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;
  double auc = 0.0;
};

// Threshold sweep over the distinct scores. Equal scores move the curve
// diagonally, so the trapezoid area equals the pairwise-ranking probability
// with ties counted one half.
inline RocCurve roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw SimError(ErrorCode::WidthMismatch, "scores/labels size mismatch");
  std::int64_t npos = 0, nneg = 0;
  for (int y : labels) (y == 1 ? npos : nneg)++;
  if (npos == 0 || nneg == 0)
    throw SimError(ErrorCode::SingleClass, "both classes required for a ROC curve");

  std::vector<int> idx(scores.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });

  RocCurve curve;
  curve.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  std::int64_t tp = 0, fp = 0;
  double auc = 0.0;
  std::size_t i = 0;
  while (i < idx.size()) {
    double s = scores[idx[i]];
    std::int64_t dtp = 0, dfp = 0;
    while (i < idx.size() && scores[idx[i]] == s) {
      (labels[idx[i]] == 1 ? dtp : dfp)++;
      ++i;
    }
    double fpr0 = static_cast<double>(fp) / nneg;
    double tpr0 = static_cast<double>(tp) / npos;
    tp += dtp;
    fp += dfp;
    double fpr1 = static_cast<double>(fp) / nneg;
    double tpr1 = static_cast<double>(tp) / npos;
    auc += (fpr1 - fpr0) * 0.5 * (tpr0 + tpr1);
    curve.points.push_back({fpr1, tpr1, s});
  }
  curve.auc = auc;
  return curve;
}

// Bounded FIFO of training points for cumulative incremental boosting.
class CumulativeStore {
 public:
  explicit CumulativeStore(int width, std::size_t capacity = 100000)
      : width_(width), capacity_(capacity) {}

  int width() const { return width_; }
  std::size_t size() const { return labels_.size(); }
  std::size_t capacity() const { return capacity_; }

  // Returns the number of points evicted to make room.
  std::size_t append(const std::vector<double>& x, int y) {
    if (static_cast<int>(x.size()) != width_)
      throw SimError(ErrorCode::WidthMismatch, "store row width");
    rows_.push_back(x);
    labels_.push_back(y);
    std::size_t evicted = 0;
    while (labels_.size() > capacity_) {
      rows_.pop_front();
      labels_.pop_front();
      ++evicted;
    }
    return evicted;
  }

  Dataset snapshot() const {
    Dataset d(width_);
    d.values.reserve(rows_.size() * width_);
    for (std::size_t i = 0; i < rows_.size(); ++i) d.add(rows_[i], labels_[i]);
    return d;
  }

 private:
  int width_;
  std::size_t capacity_;
  std::deque<std::vector<double>> rows_;
  std::deque<int> labels_;
};

// Appends the new points to the store (FIFO-bounded) and boosts additional
// trees against the full store. With no new points the model is unchanged.
inline void boost_incremental(GbtModel& model,
                              const std::vector<std::pair<std::vector<double>, int>>& new_points,
                              CumulativeStore& store, const GbtConfig& cfg) {
  if (new_points.empty()) return;
  for (const auto& [x, y] : new_points) store.append(x, y);
  Dataset d = store.snapshot();
  boost_rounds(model, d, cfg.rounds_per_fit);
}

// Streaming wrapper: accumulates points and boosts rounds_per_fit trees every
// `boost_trigger` new points, keeping cached margins aligned with the store.
class IncrementalLearner {
 public:
  IncrementalLearner(const GbtConfig& cfg, int width, std::size_t store_capacity = 100000,
                     int boost_trigger = 500)
      : cfg_(cfg),
        model_(width, cfg),
        width_(width),
        capacity_(store_capacity),
        trigger_(boost_trigger) {}

  int width() const { return width_; }
  const GbtModel& model() const { return model_; }
  std::size_t store_size() const { return labels_.size(); }
  std::uint64_t boost_count() const { return boosts_; }

  double predict(const std::vector<double>& x) const { return model_.predict_proba(x); }

  void add(const std::vector<double>& x, int y) {
    if (static_cast<int>(x.size()) != width_)
      throw SimError(ErrorCode::WidthMismatch, "learner row width");
    margins_.push_back(model_.predict_margin(x.data()));
    rows_.push_back(x);
    labels_.push_back(y);
    while (labels_.size() > capacity_) {
      rows_.pop_front();
      labels_.pop_front();
      margins_.pop_front();
    }
    if (++pending_ >= trigger_) {
      boost_now();
    }
  }

  void boost_now() {
    pending_ = 0;
    if (labels_.empty()) return;
    Dataset d(width_);
    d.values.reserve(rows_.size() * width_);
    std::vector<double> margins(margins_.begin(), margins_.end());
    for (std::size_t i = 0; i < rows_.size(); ++i) d.add(rows_[i], labels_[i]);
    boost_rounds(model_, d, cfg_.rounds_per_fit, &margins);
    std::copy(margins.begin(), margins.end(), margins_.begin());
    ++boosts_;
  }

 private:
  GbtConfig cfg_;
  GbtModel model_;
  int width_;
  std::size_t capacity_;
  int trigger_;
  int pending_ = 0;
  std::uint64_t boosts_ = 0;
  std::deque<std::vector<double>> rows_;
  std::deque<int> labels_;
  std::deque<double> margins_;
};

inline nlohmann::ordered_json model_to_json(const GbtModel& model) {
  nlohmann::ordered_json j;
  j["version"] = 1;
  j["width"] = model.width();
  j["base_logodds"] = model.base_logodds();
  const GbtConfig& c = model.config();
  j["config"] = {{"max_depth", c.max_depth},
                 {"rounds_per_fit", c.rounds_per_fit},
                 {"learning_rate", c.learning_rate},
                 {"min_samples_leaf", c.min_samples_leaf},
                 {"lambda_l2", c.lambda_l2},
                 {"base_score", c.base_score},
                 {"missing_value", c.missing_value},
                 {"max_leaf_step", c.max_leaf_step}};
  nlohmann::ordered_json trees = nlohmann::ordered_json::array();
  for (const RegressionTree& t : model.trees()) {
    nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
    for (const TreeNode& n : t.nodes)
      nodes.push_back({n.feature, n.threshold, n.missing_left, n.left, n.right, n.value});
    trees.push_back(std::move(nodes));
  }
  j["trees"] = std::move(trees);
  return j;
}

inline GbtModel model_from_json(const nlohmann::json& j) {
  if (j.at("version").get<int>() != 1)
    throw SimError(ErrorCode::ParseError, "unsupported model version");
  GbtConfig c;
  const auto& jc = j.at("config");
  c.max_depth = jc.at("max_depth").get<int>();
  c.rounds_per_fit = jc.at("rounds_per_fit").get<int>();
  c.learning_rate = jc.at("learning_rate").get<double>();
  c.min_samples_leaf = jc.at("min_samples_leaf").get<int>();
  c.lambda_l2 = jc.at("lambda_l2").get<double>();
  c.base_score = jc.at("base_score").get<double>();
  c.missing_value = jc.at("missing_value").get<double>();
  c.max_leaf_step = jc.at("max_leaf_step").get<double>();
  GbtModel model(j.at("width").get<int>(), c);
  for (const auto& jt : j.at("trees")) {
    RegressionTree t;
    for (const auto& jn : jt) {
      TreeNode n;
      n.feature = jn.at(0).get<int>();
      n.threshold = jn.at(1).get<double>();
      n.missing_left = jn.at(2).get<bool>();
      n.left = jn.at(3).get<int>();
      n.right = jn.at(4).get<int>();
      n.value = jn.at(5).get<double>();
      t.nodes.push_back(n);
    }
    model.append_tree(std::move(t));
  }
  return model;
}

}  // namespace tiersim
