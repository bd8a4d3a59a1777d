#include "panelwatch/tree.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

#include "panelwatch/error.hpp"

namespace panelwatch {

void FeatureTable::add_row(std::span<const double> row) {
    if (row.size() != cols_) throw Error(ErrorCode::LengthMismatch, "feature row has the wrong width");
    data_.insert(data_.end(), row.begin(), row.end());
}

namespace {

struct Split {
    int feature = -1;
    double threshold = 0.0;
    double score = 0.0;
};

class Grower {
public:
    Grower(const FeatureTable& x, const TreeParams& params, std::mt19937_64& rng) : x_(x), params_(params), rng_(rng) {}

    template <typename Scorer, typename LeafValue>
    int grow(std::vector<std::size_t>& idx, int depth, Scorer&& best_split_for, LeafValue&& leaf_value,
             std::vector<TreeNode>& nodes) {
        const int id = static_cast<int>(nodes.size());
        nodes.push_back(TreeNode{});
        Split best;
        if (depth < params_.max_depth && idx.size() >= 2 * params_.min_leaf) {
            best = choose(idx, best_split_for);
        }
        if (best.feature < 0) {
            nodes[id].value = leaf_value(idx);
            return id;
        }
        std::vector<std::size_t> left;
        std::vector<std::size_t> right;
        for (std::size_t r : idx) {
            (x_(r, static_cast<std::size_t>(best.feature)) <= best.threshold ? left : right).push_back(r);
        }
        idx.clear();
        idx.shrink_to_fit();
        nodes[id].feature = best.feature;
        nodes[id].threshold = best.threshold;
        const int l = grow(left, depth + 1, best_split_for, leaf_value, nodes);
        const int r = grow(right, depth + 1, best_split_for, leaf_value, nodes);
        nodes[id].left = l;
        nodes[id].right = r;
        return id;
    }

private:
    /// Visits features in random order until `features_per_split` non-constant
    /// ones have been scored.
    template <typename Scorer>
    Split choose(const std::vector<std::size_t>& idx, Scorer& best_split_for) {
        std::vector<std::size_t> order(x_.cols());
        std::iota(order.begin(), order.end(), std::size_t{0});
        Split best;
        std::size_t evaluated = 0;
        std::vector<std::size_t> sorted(idx);
        for (std::size_t k = 0; k < order.size() && evaluated < params_.features_per_split; ++k) {
            std::uniform_int_distribution<std::size_t> pick(k, order.size() - 1);
            std::swap(order[k], order[pick(rng_)]);
            const std::size_t f = order[k];
            std::sort(sorted.begin(), sorted.end(), [&](std::size_t a, std::size_t b) {
                const double xa = x_(a, f);
                const double xb = x_(b, f);
                return xa < xb || (xa == xb && a < b);
            });
            if (x_(sorted.front(), f) == x_(sorted.back(), f)) continue;
            ++evaluated;
            Split s = best_split_for(sorted, f);
            if (s.feature >= 0 && s.score > best.score) best = s;
        }
        return best;
    }

    const FeatureTable& x_;
    const TreeParams& params_;
    std::mt19937_64& rng_;
};

}  // namespace

DecisionTree DecisionTree::fit_regression(const FeatureTable& x, std::span<const double> y,
                                          std::span<const std::size_t> sample, const TreeParams& params,
                                          std::mt19937_64& rng) {
    if (sample.empty()) throw Error(ErrorCode::InsufficientData, "empty training sample");
    const std::size_t min_leaf = std::max<std::size_t>(1, params.min_leaf);

    auto scorer = [&](const std::vector<std::size_t>& sorted, std::size_t f) {
        const std::size_t n = sorted.size();
        double total = 0.0;
        for (std::size_t r : sorted) total += y[r];
        const double parent = total * total / static_cast<double>(n);
        Split best;
        double left_sum = 0.0;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            left_sum += y[sorted[i]];
            const std::size_t nl = i + 1;
            const std::size_t nr = n - nl;
            if (nl < min_leaf || nr < min_leaf) continue;
            const double a = x(sorted[i], f);
            const double b = x(sorted[i + 1], f);
            if (a == b) continue;
            const double right_sum = total - left_sum;
            const double gain = left_sum * left_sum / static_cast<double>(nl) +
                                right_sum * right_sum / static_cast<double>(nr) - parent;
            if (gain > best.score + 1e-12 * std::abs(parent)) {
                best = Split{static_cast<int>(f), a + 0.5 * (b - a), gain};
            }
        }
        return best;
    };
    auto leaf = [&](const std::vector<std::size_t>& idx) {
        double s = 0.0;
        for (std::size_t r : idx) s += y[r];
        return s / static_cast<double>(idx.size());
    };

    TreeParams p = params;
    p.min_leaf = min_leaf;
    Grower grower(x, p, rng);
    std::vector<std::size_t> idx(sample.begin(), sample.end());
    std::vector<TreeNode> nodes;
    grower.grow(idx, 0, scorer, leaf, nodes);
    return DecisionTree(std::move(nodes));
}

DecisionTree DecisionTree::fit_classification(const FeatureTable& x, std::span<const int> labels, int n_classes,
                                              std::span<const std::size_t> sample, const TreeParams& params,
                                              std::mt19937_64& rng) {
    if (sample.empty()) throw Error(ErrorCode::InsufficientData, "empty training sample");
    const std::size_t min_leaf = std::max<std::size_t>(1, params.min_leaf);
    const auto k = static_cast<std::size_t>(n_classes);

    auto scorer = [&](const std::vector<std::size_t>& sorted, std::size_t f) {
        const std::size_t n = sorted.size();
        std::vector<double> total(k, 0.0);
        for (std::size_t r : sorted) total[static_cast<std::size_t>(labels[r])] += 1.0;
        double parent = 0.0;
        for (double c : total) parent += c * c;
        parent /= static_cast<double>(n);
        std::vector<double> left(k, 0.0);
        Split best;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            left[static_cast<std::size_t>(labels[sorted[i]])] += 1.0;
            const std::size_t nl = i + 1;
            const std::size_t nr = n - nl;
            if (nl < min_leaf || nr < min_leaf) continue;
            const double a = x(sorted[i], f);
            const double b = x(sorted[i + 1], f);
            if (a == b) continue;
            double sl = 0.0;
            double sr = 0.0;
            for (std::size_t c = 0; c < k; ++c) {
                sl += left[c] * left[c];
                const double rc = total[c] - left[c];
                sr += rc * rc;
            }
            // weighted Gini decrease, up to the constant factor 1/n
            const double gain = sl / static_cast<double>(nl) + sr / static_cast<double>(nr) - parent;
            if (gain > best.score + 1e-12) best = Split{static_cast<int>(f), a + 0.5 * (b - a), gain};
        }
        return best;
    };
    auto leaf = [&](const std::vector<std::size_t>& idx) {
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t r : idx) ++counts[static_cast<std::size_t>(labels[r])];
        return static_cast<double>(std::max_element(counts.begin(), counts.end()) - counts.begin());
    };

    TreeParams p = params;
    p.min_leaf = min_leaf;
    Grower grower(x, p, rng);
    std::vector<std::size_t> idx(sample.begin(), sample.end());
    std::vector<TreeNode> nodes;
    grower.grow(idx, 0, scorer, leaf, nodes);
    return DecisionTree(std::move(nodes));
}

double DecisionTree::predict(std::span<const double> features) const {
    if (nodes_.empty()) throw Error(ErrorCode::InvalidArgument, "tree is empty");
    int id = 0;
    while (nodes_[static_cast<std::size_t>(id)].feature >= 0) {
        const auto& node = nodes_[static_cast<std::size_t>(id)];
        id = features[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right;
    }
    return nodes_[static_cast<std::size_t>(id)].value;
}

std::size_t DecisionTree::depth() const {
    std::function<std::size_t(int)> walk = [&](int id) -> std::size_t {
        const auto& node = nodes_[static_cast<std::size_t>(id)];
        if (node.feature < 0) return 0;
        return 1 + std::max(walk(node.left), walk(node.right));
    };
    return nodes_.empty() ? 0 : walk(0);
}

}  // namespace panelwatch
