#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>

#include "stationfill/error.hpp"
#include "stationfill/parallel.hpp"
#include "stationfill/random.hpp"
#include "stationfill/regressors.hpp"

namespace stationfill {

double RegressionTree::predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  int i = 0;
  while (!nodes[static_cast<std::size_t>(i)].leaf()) {
    const auto& n = nodes[static_cast<std::size_t>(i)];
    i = x(n.feature) <= n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(i)].value;
}

Eigen::VectorXd RegressionTree::predict(const Eigen::MatrixXd& X) const {
  Eigen::VectorXd out(X.rows());
  for (Eigen::Index r = 0; r < X.rows(); ++r) out(r) = predict_row(X.row(r));
  return out;
}

std::size_t RegressionTree::depth() const {
  std::vector<std::size_t> d(nodes.size(), 0);
  std::size_t best = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    best = std::max(best, d[i]);
    if (!nodes[i].leaf()) {
      d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
      d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
    }
  }
  return best;
}

std::size_t RegressionTree::leaves() const {
  return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.leaf(); }));
}

namespace {

using Order = std::vector<std::uint32_t>;

/// Rows sorted by each feature, ties by row index.
std::vector<Order> presort(const Eigen::MatrixXd& X) {
  std::vector<Order> order(static_cast<std::size_t>(X.cols()));
  for (Eigen::Index f = 0; f < X.cols(); ++f) {
    auto& o = order[static_cast<std::size_t>(f)];
    o.resize(static_cast<std::size_t>(X.rows()));
    std::iota(o.begin(), o.end(), 0u);
    const double* col = X.col(f).data();
    std::stable_sort(o.begin(), o.end(), [col](std::uint32_t a, std::uint32_t b) { return col[a] < col[b]; });
  }
  return order;
}

// Builds one tree over a multiset of rows (multiplicity = counts[row]). Every
// feature keeps its own sorted list of sample positions; a node owns the same
// [begin, end) range in all of them, so splitting is a stable partition.
class TreeBuilder {
 public:
  TreeBuilder(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const std::vector<Order>& row_order,
              const std::vector<std::uint32_t>& counts, int min_leaf)
      : X_(X), min_leaf_(static_cast<std::size_t>(std::max(1, min_leaf))) {
    const auto n = static_cast<std::size_t>(X.rows());
    std::vector<std::uint32_t> first(n, 0);
    for (std::size_t r = 0; r < n; ++r) {
      first[r] = static_cast<std::uint32_t>(rows_.size());
      for (std::uint32_t k = 0; k < counts[r]; ++k) {
        rows_.push_back(static_cast<std::uint32_t>(r));
        yp_.push_back(y(static_cast<Eigen::Index>(r)));
      }
    }
    order_.resize(row_order.size());
    for (std::size_t f = 0; f < row_order.size(); ++f) {
      auto& o = order_[f];
      o.reserve(rows_.size());
      for (auto r : row_order[f])
        for (std::uint32_t k = 0; k < counts[r]; ++k) o.push_back(first[r] + k);
    }
    goes_left_.assign(rows_.size(), 0);
    scratch_.resize(rows_.size());
  }

  RegressionTree build() {
    RegressionTree tree;
    if (rows_.empty()) throw Error(ErrorCode::EmptyDataset, "tree: no samples");
    struct Pending {
      std::size_t begin, end;
      int parent;
      bool right;
    };
    std::vector<Pending> stack{{0, rows_.size(), -1, false}};
    while (!stack.empty()) {
      const Pending p = stack.back();
      stack.pop_back();
      const int index = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      if (p.parent >= 0) {
        auto& parent = tree.nodes[static_cast<std::size_t>(p.parent)];
        (p.right ? parent.right : parent.left) = index;
      }
      TreeNode node = split(p.begin, p.end);
      const std::size_t mid = node.leaf() ? 0 : partition(p.begin, p.end, node);
      tree.nodes[static_cast<std::size_t>(index)] = node;
      if (!node.leaf()) {
        stack.push_back({mid, p.end, index, true});
        stack.push_back({p.begin, mid, index, false});
      }
    }
    return tree;
  }

 private:
  double x(std::size_t pos, std::size_t f) const {
    return X_(static_cast<Eigen::Index>(rows_[pos]), static_cast<Eigen::Index>(f));
  }

  TreeNode split(std::size_t begin, std::size_t end) const {
    TreeNode node;
    const std::size_t m = end - begin;
    node.samples = m;
    double sum = 0.0;
    double lo = INFINITY;
    double hi = -INFINITY;
    for (std::size_t i = begin; i < end; ++i) {
      const double v = yp_[order_[0][i]];
      sum += v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    node.value = sum / static_cast<double>(m);
    if (m < 2 * min_leaf_ || lo == hi) return node;

    double sq = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      const double d = yp_[order_[0][i]] - node.value;
      sq += d * d;
    }
    const double tol = kSplitTieTolerance * sq;
    const double base = sum * sum / static_cast<double>(m);
    double best_gain = tol;
    for (std::size_t f = 0; f < order_.size(); ++f) {
      const auto& o = order_[f];
      double left = 0.0;
      for (std::size_t i = begin; i + 1 < end; ++i) {
        left += yp_[o[i]];
        const std::size_t nl = i - begin + 1;
        const std::size_t nr = m - nl;
        if (nl < min_leaf_) continue;
        if (nr < min_leaf_) break;
        const double a = x(o[i], f);
        const double b = x(o[i + 1], f);
        if (!(a < b)) continue;
        const double right = sum - left;
        const double gain = left * left / static_cast<double>(nl) + right * right / static_cast<double>(nr) - base;
        if (gain > best_gain + (node.leaf() ? 0.0 : tol)) {
          best_gain = gain;
          node.feature = static_cast<int>(f);
          double t = a + (b - a) / 2.0;
          if (!(t < b)) t = a;
          node.threshold = t;
        }
      }
    }
    return node;
  }

  std::size_t partition(std::size_t begin, std::size_t end, const TreeNode& node) {
    const auto f = static_cast<std::size_t>(node.feature);
    std::size_t n_left = 0;
    for (std::size_t i = begin; i < end; ++i) {
      const auto pos = order_[f][i];
      goes_left_[pos] = x(pos, f) <= node.threshold ? 1 : 0;
      n_left += goes_left_[pos];
    }
    for (auto& o : order_) {
      std::size_t l = begin;
      std::size_t r = begin + n_left;
      for (std::size_t i = begin; i < end; ++i) {
        const auto pos = o[i];
        scratch_[goes_left_[pos] ? l++ : r++] = pos;
      }
      std::copy(scratch_.begin() + static_cast<std::ptrdiff_t>(begin), scratch_.begin() + static_cast<std::ptrdiff_t>(end),
                o.begin() + static_cast<std::ptrdiff_t>(begin));
    }
    return begin + n_left;
  }

  const Eigen::MatrixXd& X_;
  std::size_t min_leaf_;
  std::vector<std::uint32_t> rows_;
  std::vector<double> yp_;
  std::vector<Order> order_;
  std::vector<std::uint8_t> goes_left_;
  std::vector<std::uint32_t> scratch_;
};

void check_inputs(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const char* who) {
  if (X.rows() != y.size()) throw Error(ErrorCode::LengthMismatch, std::string(who) + ": X and y row counts differ");
  if (X.rows() == 0) throw Error(ErrorCode::EmptyDataset, std::string(who) + ": no rows");
}

}  // namespace

RegressionTree fit_rt(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const TreeConfig& cfg) {
  check_inputs(X, y, "fit_rt");
  const auto order = presort(X);
  const std::vector<std::uint32_t> counts(static_cast<std::size_t>(X.rows()), 1u);
  return TreeBuilder(X, y, order, counts, cfg.min_leaf).build();
}

Eigen::VectorXd Forest::predict(const Eigen::MatrixXd& X) const {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(X.rows());
  for (const auto& t : trees) sum += t.predict(X);
  return sum / static_cast<double>(trees.size());
}

Forest fit_et(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const ForestConfig& cfg) {
  check_inputs(X, y, "fit_et");
  if (cfg.n_trees < 1) throw Error(ErrorCode::InvalidArgument, "fit_et: n_trees must be >= 1");
  if (!(cfg.bootstrap_fraction > 0.0)) throw Error(ErrorCode::InvalidArgument, "fit_et: bootstrap_fraction must be > 0");
  const auto n = static_cast<std::size_t>(X.rows());
  const auto order = presort(X);

  Rng master(cfg.seed);
  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(cfg.n_trees));
  for (auto& s : seeds) s = master();
  const auto draws = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(cfg.bootstrap_fraction * static_cast<double>(n))));

  Forest forest;
  forest.trees.resize(seeds.size());
  parallel_for(seeds.size(), [&](std::size_t t) {
    std::vector<std::uint32_t> counts(n, 1u);
    if (cfg.bootstrap) {
      std::fill(counts.begin(), counts.end(), 0u);
      Rng rng(seeds[t]);
      for (std::size_t k = 0; k < draws; ++k) ++counts[uniform_index(rng, n)];
    }
    forest.trees[t] = TreeBuilder(X, y, order, counts, cfg.min_leaf).build();
  });
  return forest;
}

}  // namespace stationfill
