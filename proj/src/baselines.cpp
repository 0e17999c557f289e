#include "stmtl/baselines.hpp"

#include "stmtl/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace stmtl {

LinearModel fit_linear(const FeatureMatrix& features, std::span<const double> targets,
                       double ridge) {
  const Eigen::Index n = features.rows();
  const Eigen::Index p = features.cols();
  if (n < 1) throw std::invalid_argument("linear fit needs at least one row");
  if (static_cast<std::size_t>(n) != targets.size())
    throw std::invalid_argument("feature rows and targets differ in count");
  if (ridge < 0.0) throw std::invalid_argument("ridge must be non-negative");

  const Eigen::Map<const Eigen::VectorXd> y(targets.data(), n);
  const Eigen::RowVectorXd x_mean = features.colwise().mean();
  const double y_mean = y.mean();
  const Eigen::MatrixXd xc = features.rowwise() - x_mean;
  const Eigen::VectorXd yc = y.array() - y_mean;

  LinearModel m;
  m.coefficients.assign(static_cast<std::size_t>(p), 0.0);
  if (p > 0) {
    Eigen::MatrixXd gram = xc.transpose() * xc;
    gram.diagonal().array() += ridge;
    const Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success)
      throw NumericalError("linear regression system is singular; increase the ridge");
    const Eigen::VectorXd beta = llt.solve(xc.transpose() * yc);
    if (!beta.allFinite()) throw NumericalError("linear regression produced non-finite coefficients");
    for (Eigen::Index i = 0; i < p; ++i) m.coefficients[static_cast<std::size_t>(i)] = beta(i);
    m.intercept = y_mean - x_mean.dot(beta);
  } else {
    m.intercept = y_mean;
  }
  return m;
}

std::vector<double> predict_linear(const LinearModel& model, const FeatureMatrix& features) {
  if (static_cast<std::size_t>(features.cols()) != model.coefficients.size())
    throw std::invalid_argument("feature count does not match the linear model");
  std::vector<double> out(static_cast<std::size_t>(features.rows()), model.intercept);
  for (Eigen::Index r = 0; r < features.rows(); ++r)
    for (Eigen::Index c = 0; c < features.cols(); ++c)
      out[static_cast<std::size_t>(r)] += model.coefficients[static_cast<std::size_t>(c)] * features(r, c);
  return out;
}

namespace {

struct Builder {
  const FeatureMatrix& x;
  std::span<const double> y;
  std::size_t max_depth;
  std::size_t min_leaf;
  double scale;
  RegressionTree tree;

  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double sse = 0.0;
    std::size_t left_count = 0;
  };

  // Returns the index of the created node.
  std::size_t grow(std::vector<std::size_t> rows, std::size_t depth) {
    const double n = static_cast<double>(rows.size());
    double mean = 0.0;
    for (std::size_t r : rows) mean += y[r];
    mean /= n;
    double sse = 0.0;
    for (std::size_t r : rows) sse += (y[r] - mean) * (y[r] - mean);

    const std::size_t id = tree.nodes.size();
    tree.nodes.push_back({});
    tree.nodes[id].value = mean;
    tree.nodes[id].samples = rows.size();
    tree.nodes[id].sse = sse;

    if (depth >= max_depth || sse <= 1e-24 * scale || rows.size() < 2 * min_leaf) return id;
    const Split best = find_split(rows, mean, sse);
    if (best.feature < 0) return id;

    std::vector<std::size_t> left;
    std::vector<std::size_t> right;
    for (std::size_t r : rows)
      (x(static_cast<Eigen::Index>(r), best.feature) <= best.threshold ? left : right).push_back(r);
    const std::size_t l = grow(std::move(left), depth + 1);
    const std::size_t rgt = grow(std::move(right), depth + 1);
    tree.nodes[id].feature = best.feature;
    tree.nodes[id].threshold = best.threshold;
    tree.nodes[id].left = l;
    tree.nodes[id].right = rgt;
    return id;
  }

  Split find_split(const std::vector<std::size_t>& rows, double mean, double parent_sse) const {
    const std::size_t n = rows.size();
    Split best;
    best.sse = parent_sse;
    bool found = false;
    std::vector<std::size_t> order(rows);
    std::vector<double> prefix(n + 1);
    std::vector<double> prefix_sq(n + 1);
    for (Eigen::Index f = 0; f < x.cols(); ++f) {
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return x(static_cast<Eigen::Index>(a), f) < x(static_cast<Eigen::Index>(b), f);
      });
      prefix[0] = prefix_sq[0] = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double v = y[order[i]] - mean;
        prefix[i + 1] = prefix[i] + v;
        prefix_sq[i + 1] = prefix_sq[i] + v * v;
      }
      for (std::size_t i = min_leaf; i + min_leaf <= n; ++i) {
        const double lo = x(static_cast<Eigen::Index>(order[i - 1]), f);
        const double hi = x(static_cast<Eigen::Index>(order[i]), f);
        if (!(lo < hi)) continue;
        const double nl = static_cast<double>(i);
        const double nr = static_cast<double>(n - i);
        const double sl = prefix[i];
        const double sr = prefix[n] - prefix[i];
        const double child = (prefix_sq[i] - sl * sl / nl) + (prefix_sq[n] - prefix_sq[i] - sr * sr / nr);
        double threshold = lo + (hi - lo) / 2.0;
        if (!(threshold < hi)) threshold = lo;
        // Features are scanned in ascending order and thresholds ascend within
        // a feature, so a strict comparison realizes the tie-break rule.
        if (child < best.sse) {
          best = {static_cast<int>(f), threshold, child, i};
          found = true;
        }
      }
    }
    const double tolerance = 1e-12 * std::max(1.0, parent_sse);
    if (!found || !(best.sse < parent_sse - tolerance)) return {};
    return best;
  }
};

} // namespace

RegressionTree fit_tree(const FeatureMatrix& features, std::span<const double> targets,
                        std::size_t max_depth, std::size_t min_samples_leaf) {
  if (features.rows() == 0 || targets.empty()) throw std::invalid_argument("tree fit needs data");
  if (static_cast<std::size_t>(features.rows()) != targets.size())
    throw std::invalid_argument("feature rows and targets differ in count");
  if (min_samples_leaf == 0) throw std::invalid_argument("min_samples_leaf must be positive");
  if (targets.size() < min_samples_leaf)
    throw std::invalid_argument("fewer rows than min_samples_leaf");
  double scale = 1.0;
  for (double v : targets) scale += v * v;
  Builder b{features, targets, max_depth, min_samples_leaf, scale, {}};
  b.tree.feature_count = static_cast<std::size_t>(features.cols());
  b.tree.max_depth = max_depth;
  b.tree.min_samples_leaf = min_samples_leaf;
  std::vector<std::size_t> rows(targets.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  b.grow(std::move(rows), 0);
  return std::move(b.tree);
}

std::vector<double> predict_tree(const RegressionTree& tree, const FeatureMatrix& features) {
  if (static_cast<std::size_t>(features.cols()) != tree.feature_count)
    throw std::invalid_argument("feature count does not match the tree");
  if (tree.nodes.empty()) throw std::invalid_argument("tree has no nodes");
  std::vector<double> out(static_cast<std::size_t>(features.rows()));
  for (Eigen::Index r = 0; r < features.rows(); ++r) {
    std::size_t id = 0;
    while (!tree.nodes[id].is_leaf()) {
      const TreeNode& nd = tree.nodes[id];
      id = features(r, nd.feature) <= nd.threshold ? nd.left : nd.right;
    }
    out[static_cast<std::size_t>(r)] = tree.nodes[id].value;
  }
  return out;
}

std::size_t RegressionTree::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

std::size_t RegressionTree::depth() const {
  if (nodes.empty()) return 0;
  std::size_t deepest = 0;
  std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
  while (!stack.empty()) {
    auto [id, d] = stack.back();
    stack.pop_back();
    deepest = std::max(deepest, d);
    if (!nodes[id].is_leaf()) {
      stack.push_back({nodes[id].left, d + 1});
      stack.push_back({nodes[id].right, d + 1});
    }
  }
  return deepest;
}

} // namespace stmtl
