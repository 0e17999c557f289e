#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

namespace stmtl {

/// Rows are samples, columns are features.
using FeatureMatrix = Eigen::MatrixXd;

struct LinearModel {
  std::vector<double> coefficients;
  double intercept = 0.0;
};

/// Least squares with an unpenalized intercept: solves the centered normal
/// equations (Xc'Xc + ridge I) beta = Xc'yc. Throws NumericalError when the
/// system is not positive definite even after adding the ridge.
LinearModel fit_linear(const FeatureMatrix& features, std::span<const double> targets,
                       double ridge = 1e-8);
std::vector<double> predict_linear(const LinearModel& model, const FeatureMatrix& features);

struct TreeNode {
  /// -1 marks a leaf.
  int feature = -1;
  double threshold = 0.0;
  std::size_t left = 0;
  std::size_t right = 0;
  /// Mean training target of the node.
  double value = 0.0;
  std::size_t samples = 0;
  double sse = 0.0;

  bool is_leaf() const { return feature < 0; }
};

/// CART regressor; rows with x[feature] <= threshold go left.
struct RegressionTree {
  std::vector<TreeNode> nodes;
  std::size_t feature_count = 0;
  std::size_t max_depth = 8;
  std::size_t min_samples_leaf = 5;

  std::size_t leaf_count() const;
  std::size_t depth() const;
};

/// Greedy SSE-minimizing splits at midpoints between sorted distinct values.
/// Ties go to the lowest feature index, then the lowest threshold. A node
/// becomes a leaf at max_depth, at zero SSE, or when no split strictly lowers
/// the SSE while leaving min_samples_leaf rows on each side.
RegressionTree fit_tree(const FeatureMatrix& features, std::span<const double> targets,
                        std::size_t max_depth = 8, std::size_t min_samples_leaf = 5);
std::vector<double> predict_tree(const RegressionTree& tree, const FeatureMatrix& features);

} // namespace stmtl
