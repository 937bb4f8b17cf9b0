#pragma once

#include <algorithm>
#include <iterator>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "pore/common.hpp"
#include "pore/ratings.hpp"
#include "pore/rng.hpp"

namespace pore {

enum class Algo { ItemKnn, Bpr };

inline std::string_view algo_tag(Algo a) { return a == Algo::ItemKnn ? "ir" : "bpr"; }

inline Algo parse_algo(std::string_view tag) {
  if (tag == "ir") return Algo::ItemKnn;
  if (tag == "bpr") return Algo::Bpr;
  throw Error("unknown algorithm '" + std::string(tag) + "' (expected ir or bpr)");
}

struct ItemKnnParams {
  std::size_t k = 50;  // neighbours kept per item
};

struct BprParams {
  std::size_t dim = 16;
  std::size_t epochs = 30;
  double learn_rate = 0.05;
  double reg = 0.01;
  std::size_t neg_samples = 1;
  double init_scale = 0.1;  // factors start uniform in [-init_scale, init_scale]
};

struct AlgoConfig {
  Algo algo = Algo::ItemKnn;
  ItemKnnParams ir;
  BprParams bpr;
};

/// Rows `users` (sorted, distinct) of `matrix`. The matrix must outlive
/// every model trained on the view.
struct SubmatrixView {
  const RatingMatrix* matrix = nullptr;
  std::span<const UserId> users;
};

/// Entries ordered by descending score, ties by ascending item id.
inline bool ranks_before(double score_a, ItemId a, double score_b, ItemId b) {
  return score_a != score_b ? score_a > score_b : a < b;
}

/// The `n` best candidates under ranks_before. `score` is indexed by item.
inline ItemList select_top(std::span<const ItemId> candidates, std::span<const double> score,
                           std::size_t n) {
  ItemList out(candidates.begin(), candidates.end());
  auto cmp = [&](ItemId a, ItemId b) { return ranks_before(score[a], a, score[b], b); };
  if (out.size() > n) {
    std::nth_element(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(n), out.end(), cmp);
    out.resize(n);
  }
  std::sort(out.begin(), out.end(), cmp);
  return out;
}

// ---------------------------------------------------------------------------
// Item-based cosine kNN

struct Neighbor {
  ItemId item;
  double sim;
};

/// Cosine similarities between the rating columns of a submatrix, keeping
/// the top-k positive neighbours of every item.
class ItemKnnState {
public:
  ItemKnnState() = default;

  ItemKnnState(const SubmatrixView& view, const ItemKnnParams& params) {
    const RatingMatrix& mat = *view.matrix;
    const std::size_t m = mat.n_items();
    // Column-major copy of the submatrix.
    std::vector<std::size_t> col_start(m + 1, 0);
    for (UserId u : view.users)
      for (ItemId i : mat.items_of(u)) ++col_start[i + 1];
    for (std::size_t i = 0; i < m; ++i) col_start[i + 1] += col_start[i];
    std::vector<std::pair<UserId, double>> col(col_start[m]);
    {
      std::vector<std::size_t> fill(col_start.begin(), col_start.end() - 1);
      for (UserId u : view.users) {
        const auto items = mat.items_of(u);
        const auto scores = mat.scores_of(u);
        for (std::size_t k = 0; k < items.size(); ++k) col[fill[items[k]]++] = {u, scores[k]};
      }
    }
    std::vector<double> norm(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      double sq = 0;
      for (std::size_t p = col_start[i]; p < col_start[i + 1]; ++p) sq += col[p].second * col[p].second;
      norm[i] = std::sqrt(sq);
    }

    forward_.assign(m, {});
    reverse_.assign(m, {});
    std::vector<double> dot(m, 0.0);
    std::vector<char> mark(m, 0);
    std::vector<ItemId> touched;
    for (ItemId i = 0; i < m; ++i) {
      if (norm[i] == 0.0) continue;
      touched.clear();
      for (std::size_t p = col_start[i]; p < col_start[i + 1]; ++p) {
        const auto [u, r_ui] = col[p];
        const auto items = mat.items_of(u);
        const auto scores = mat.scores_of(u);
        for (std::size_t k = 0; k < items.size(); ++k) {
          const ItemId j = items[k];
          if (j == i) continue;
          if (!mark[j]) {
            mark[j] = 1;
            touched.push_back(j);
          }
          dot[j] += r_ui * scores[k];
        }
      }
      std::vector<Neighbor> cand;
      cand.reserve(touched.size());
      for (ItemId j : touched) {
        const double s = dot[j] / (norm[i] * norm[j]);
        if (s > 0.0) cand.push_back({j, s});
        dot[j] = 0.0;
        mark[j] = 0;
      }
      auto cmp = [](const Neighbor& a, const Neighbor& b) {
        return ranks_before(a.sim, a.item, b.sim, b.item);
      };
      if (cand.size() > params.k) {
        std::nth_element(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(params.k),
                         cand.end(), cmp);
        cand.resize(params.k);
      }
      std::sort(cand.begin(), cand.end(), cmp);
      for (const auto& nb : cand) reverse_[nb.item].push_back({i, nb.sim});
      forward_[i] = std::move(cand);
    }
  }

  /// Retained neighbours of item i, best first.
  const std::vector<Neighbor>& neighbors(ItemId i) const { return forward_[i]; }

  /// Similarity of j as a retained neighbour of i (0 when not retained).
  double similarity(ItemId i, ItemId j) const {
    for (const auto& nb : forward_[i])
      if (nb.item == j) return nb.sim;
    return 0.0;
  }

  /// score(i) = sum over rated j with j in topk(i) of sim(i, j) * r_uj.
  void predict(std::span<const ItemId> rated, std::span<const double> scores,
               std::span<double> out) const {
    for (std::size_t k = 0; k < rated.size(); ++k)
      for (const auto& nb : reverse_[rated[k]]) out[nb.item] += nb.sim * scores[k];
  }

private:
  std::vector<std::vector<Neighbor>> forward_;
  std::vector<std::vector<Neighbor>> reverse_;  // reverse_[j] = {(i, sim) : j in topk(i)}
};

// ---------------------------------------------------------------------------
// Bayesian personalised ranking

/// Per-triple objective  -ln sigmoid(w.(h_pos - h_neg)) + reg (|w|^2 + |h_pos|^2 + |h_neg|^2).
/// Minimising it maximises the BPR criterion.
inline double bpr_triple_loss(std::span<const double> w, std::span<const double> h_pos,
                              std::span<const double> h_neg, double reg) {
  double x = 0, sq = 0;
  for (std::size_t f = 0; f < w.size(); ++f) {
    x += w[f] * (h_pos[f] - h_neg[f]);
    sq += w[f] * w[f] + h_pos[f] * h_pos[f] + h_neg[f] * h_neg[f];
  }
  // -ln sigmoid(x) = softplus(-x)
  const double nll = x > 0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x));
  return nll + reg * sq;
}

/// Analytic gradient of bpr_triple_loss.
inline void bpr_triple_gradient(std::span<const double> w, std::span<const double> h_pos,
                                std::span<const double> h_neg, double reg, std::span<double> g_w,
                                std::span<double> g_pos, std::span<double> g_neg) {
  double x = 0;
  for (std::size_t f = 0; f < w.size(); ++f) x += w[f] * (h_pos[f] - h_neg[f]);
  const double coeff = 1.0 / (1.0 + std::exp(x));  // sigmoid(-x)
  for (std::size_t f = 0; f < w.size(); ++f) {
    g_w[f] = -coeff * (h_pos[f] - h_neg[f]) + 2.0 * reg * w[f];
    g_pos[f] = -coeff * w[f] + 2.0 * reg * h_pos[f];
    g_neg[f] = coeff * w[f] + 2.0 * reg * h_neg[f];
  }
}

class BprState {
public:
  BprState() = default;

  BprState(const SubmatrixView& view, std::span<const ItemId> candidates, const BprParams& p,
           std::uint64_t seed)
      : dim_(p.dim) {
    const RatingMatrix& mat = *view.matrix;
    Rng rng(seed);
    user_factors_.resize(view.users.size() * dim_);
    item_factors_.resize(mat.n_items() * dim_);
    for (auto& v : user_factors_) v = rng.uniform(-p.init_scale, p.init_scale);
    for (auto& v : item_factors_) v = rng.uniform(-p.init_scale, p.init_scale);

    std::vector<std::pair<std::uint32_t, ItemId>> positives;  // (row in view, item)
    for (std::uint32_t r = 0; r < view.users.size(); ++r)
      for (ItemId i : mat.items_of(view.users[r])) positives.push_back({r, i});
    if (positives.empty() || candidates.empty()) return;

    std::vector<double> g_w(dim_), g_pos(dim_), g_neg(dim_);
    for (std::size_t epoch = 0; epoch < p.epochs; ++epoch) {
      for (std::size_t step = 0; step < positives.size(); ++step) {
        const auto [row, pos] = positives[rng.below(positives.size())];
        const UserId u = view.users[row];
        if (mat.count(u) >= candidates.size()) continue;  // nothing unrated to contrast with
        for (std::size_t s = 0; s < p.neg_samples; ++s) {
          ItemId neg;
          do {
            neg = candidates[rng.below(candidates.size())];
          } while (mat.has_rating(u, neg));
          auto w = user(row);
          auto hp = item(pos);
          auto hn = item(neg);
          bpr_triple_gradient(w, hp, hn, p.reg, g_w, g_pos, g_neg);
          for (std::size_t f = 0; f < dim_; ++f) {
            w[f] -= p.learn_rate * g_w[f];
            hp[f] -= p.learn_rate * g_pos[f];
            hn[f] -= p.learn_rate * g_neg[f];
          }
        }
      }
    }
  }

  std::size_t dim() const noexcept { return dim_; }
  std::span<double> user(std::size_t row) { return {user_factors_.data() + row * dim_, dim_}; }
  std::span<double> item(ItemId i) { return {item_factors_.data() + i * dim_, dim_}; }
  std::span<const double> user(std::size_t row) const {
    return {user_factors_.data() + row * dim_, dim_};
  }
  std::span<const double> item(ItemId i) const {
    return {item_factors_.data() + i * dim_, dim_};
  }

  double score(std::size_t row, ItemId i) const {
    const auto w = user(row);
    const auto h = item(i);
    double x = 0;
    for (std::size_t f = 0; f < dim_; ++f) x += w[f] * h[f];
    return x;
  }

private:
  std::size_t dim_ = 0;
  std::vector<double> user_factors_;  // indexed by row within the view
  std::vector<double> item_factors_;
};

// ---------------------------------------------------------------------------

/// A base recommender trained on an s-user submatrix. Holds a pointer to the
/// full matrix for the users' rated items; the matrix must outlive the model.
class BaseModel {
public:
  BaseModel(const SubmatrixView& view, const AlgoConfig& config, std::uint64_t seed)
      : algo_(config.algo), matrix_(view.matrix), users_(view.users.begin(), view.users.end()) {
    if (users_.empty()) throw Error("cannot train a base model on an empty submatrix");
    const RatingMatrix& mat = *matrix_;
    std::vector<char> seen(mat.n_items(), 0);
    for (UserId u : users_)
      for (ItemId i : mat.items_of(u)) seen[i] = 1;
    for (ItemId i = 0; i < mat.n_items(); ++i)
      if (seen[i]) candidates_.push_back(i);
    const SubmatrixView own{matrix_, users_};
    if (algo_ == Algo::ItemKnn)
      state_ = ItemKnnState(own, config.ir);
    else
      state_ = BprState(own, candidates_, config.bpr, seed);
  }

  Algo algo() const noexcept { return algo_; }
  const std::vector<UserId>& users() const noexcept { return users_; }
  /// Items rated by at least one user of the submatrix, ascending.
  const ItemList& candidates() const noexcept { return candidates_; }

  bool contains(UserId u) const { return std::binary_search(users_.begin(), users_.end(), u); }

  const ItemKnnState* item_knn() const { return std::get_if<ItemKnnState>(&state_); }
  const BprState* bpr() const { return std::get_if<BprState>(&state_); }

  /// Top-n_prime unrated candidate items for u by predicted score (ties by
  /// ascending id); empty when u is not in the submatrix.
  ItemList recommend(UserId u, std::size_t n_prime) const {
    std::vector<double> scratch(matrix_->n_items(), 0.0);
    return recommend(u, n_prime, scratch);
  }

  /// As above with caller-provided scratch of size n_items (left zeroed).
  ItemList recommend(UserId u, std::size_t n_prime, std::vector<double>& scratch) const {
    if (n_prime == 0) throw Error("n_prime must be at least 1");
    const auto it = std::lower_bound(users_.begin(), users_.end(), u);
    if (it == users_.end() || *it != u) return {};
    const auto rated = matrix_->items_of(u);
    ItemList unrated;
    unrated.reserve(candidates_.size());
    std::set_difference(candidates_.begin(), candidates_.end(), rated.begin(), rated.end(),
                        std::back_inserter(unrated));
    if (unrated.empty()) return {};
    if (const auto* knn = item_knn()) {
      knn->predict(rated, matrix_->scores_of(u), scratch);
    } else {
      const auto row = static_cast<std::size_t>(it - users_.begin());
      const auto& model = std::get<BprState>(state_);
      for (ItemId i : unrated) scratch[i] = model.score(row, i);
    }
    ItemList top = select_top(unrated, scratch, n_prime);
    if (item_knn()) {
      std::fill(scratch.begin(), scratch.end(), 0.0);
    } else {
      for (ItemId i : unrated) scratch[i] = 0.0;
    }
    return top;
  }

private:
  Algo algo_;
  const RatingMatrix* matrix_;
  std::vector<UserId> users_;
  ItemList candidates_;
  std::variant<ItemKnnState, BprState> state_;
};

inline BaseModel train_ir(const SubmatrixView& view, const ItemKnnParams& params = {}) {
  AlgoConfig cfg;
  cfg.algo = Algo::ItemKnn;
  cfg.ir = params;
  return BaseModel(view, cfg, 0);
}

inline BaseModel train_bpr(const SubmatrixView& view, const BprParams& params, std::uint64_t seed) {
  AlgoConfig cfg;
  cfg.algo = Algo::Bpr;
  cfg.bpr = params;
  return BaseModel(view, cfg, seed);
}

}  // namespace pore
