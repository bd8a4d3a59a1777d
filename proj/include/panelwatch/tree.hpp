#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

namespace panelwatch {

/// Dense row-major feature table shared by the regression and
/// classification forests.
class FeatureTable {
public:
    explicit FeatureTable(std::size_t cols) : cols_(cols) {}

    void add_row(std::span<const double> row);
    std::size_t rows() const { return cols_ == 0 ? 0 : data_.size() / cols_; }
    std::size_t cols() const { return cols_; }
    double operator()(std::size_t row, std::size_t col) const { return data_[row * cols_ + col]; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

private:
    std::size_t cols_;
    std::vector<double> data_;
};

struct TreeParams {
    int max_depth = 12;
    std::size_t min_leaf = 5;
    std::size_t features_per_split = 1;
};

/// Flattened binary tree; `feature < 0` marks a leaf holding `value`
/// (a mean for regression, a class index for classification).
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;

    friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

class DecisionTree {
public:
    DecisionTree() = default;
    explicit DecisionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

    /// CART with variance reduction. `sample` lists training rows (duplicates allowed).
    static DecisionTree fit_regression(const FeatureTable& x, std::span<const double> y,
                                       std::span<const std::size_t> sample, const TreeParams& params,
                                       std::mt19937_64& rng);

    /// CART with Gini impurity over labels in [0, n_classes).
    static DecisionTree fit_classification(const FeatureTable& x, std::span<const int> labels, int n_classes,
                                           std::span<const std::size_t> sample, const TreeParams& params,
                                           std::mt19937_64& rng);

    double predict(std::span<const double> features) const;
    const std::vector<TreeNode>& nodes() const { return nodes_; }
    std::size_t depth() const;

    friend bool operator==(const DecisionTree&, const DecisionTree&) = default;

private:
    std::vector<TreeNode> nodes_;
};

}  // namespace panelwatch
