#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ueba/core.hpp"
#include "ueba/rng.hpp"

namespace ueba {

// Expected path length of an unsuccessful BST search over m points:
// c(m) = 2*H(m-1) - 2*(m-1)/m. Exact harmonic sums.
inline double average_path_length(std::size_t m) {
    if (m < 2) return 0.0;
    double h = 0.0;
    for (std::size_t k = 1; k + 1 <= m; ++k) h += 1.0 / static_cast<double>(k);
    return 2.0 * h - 2.0 * static_cast<double>(m - 1) / static_cast<double>(m);
}

struct TreeNode {
    int split_dim = -1;  // < 0 marks a leaf
    double split_value = 0.0;
    int left = -1;
    int right = -1;
    int size = 0;  // leaf: number of training points that reached it
};

struct IsolationTree {
    std::vector<TreeNode> nodes;

    bool leaf_only() const { return nodes.size() == 1 && nodes[0].split_dim < 0; }

    // depth of the reached leaf plus the size adjustment c(leaf size)
    double path_length(std::span<const double> x, std::span<const double> c_cache) const {
        int idx = 0;
        double depth = 0.0;
        while (nodes[static_cast<std::size_t>(idx)].split_dim >= 0) {
            const TreeNode& n = nodes[static_cast<std::size_t>(idx)];
            idx = x[static_cast<std::size_t>(n.split_dim)] < n.split_value ? n.left : n.right;
            depth += 1.0;
        }
        const int s = nodes[static_cast<std::size_t>(idx)].size;
        return depth + (s > 1 ? c_cache[static_cast<std::size_t>(s)] : 0.0);
    }
};

class IsolationForest {
public:
    std::vector<IsolationTree> trees;
    std::size_t subsample = 256;
    std::size_t dim = 0;
    bool degenerate = false;  // training data had no variance on any dimension

    void rebuild_cache() {
        c_cache_.assign(subsample + 1, 0.0);
        double h = 0.0;
        for (std::size_t m = 2; m <= subsample; ++m) {
            h += 1.0 / static_cast<double>(m - 1);
            c_cache_[m] = 2.0 * h - 2.0 * static_cast<double>(m - 1) / static_cast<double>(m);
        }
        c_ref_ = subsample >= 2 ? c_cache_[subsample] : 1.0;
    }

    // Raw incongruity: c(n) / E[h(x)]. Around 1 for average points, larger
    // for points isolated early. Never normalized to a bounded range.
    double score(std::span<const double> x) const {
        if (trees.empty()) throw Error("IsolationForest: not fitted");
        if (x.size() != dim) throw Error("IsolationForest: feature dimension mismatch");
        double total = 0.0;
        for (const auto& t : trees) total += t.path_length(x, c_cache_);
        const double mean_path = total / static_cast<double>(trees.size());
        return c_ref_ / std::max(mean_path, 1e-6);
    }

private:
    std::vector<double> c_cache_;
    double c_ref_ = 1.0;
};

namespace detail {

struct TreeBuilder {
    const std::vector<std::vector<double>>& data;
    std::size_t dim;
    int max_depth;
    Rng& rng;
    std::vector<TreeNode> nodes;

    int build(std::vector<std::size_t>& items, std::size_t begin, std::size_t end, int depth) {
        const std::size_t count = end - begin;
        if (count == 1 || depth >= max_depth) return make_leaf(count);

        // dimensions that still have spread among these items
        std::vector<std::size_t> eligible;
        std::vector<double> lo(dim), hi(dim);
        for (std::size_t d = 0; d < dim; ++d) {
            double mn = data[items[begin]][d], mx = mn;
            for (std::size_t i = begin + 1; i < end; ++i) {
                const double v = data[items[i]][d];
                if (v < mn) mn = v;
                if (v > mx) mx = v;
            }
            lo[d] = mn;
            hi[d] = mx;
            if (mx > mn) eligible.push_back(d);
        }
        if (eligible.empty()) return make_leaf(count);

        const std::size_t d =
            eligible[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(eligible.size()) - 1))];
        const double threshold = rng.uniform(lo[d], hi[d]);

        auto mid_it = std::partition(items.begin() + static_cast<std::ptrdiff_t>(begin),
                                     items.begin() + static_cast<std::ptrdiff_t>(end),
                                     [&](std::size_t idx) { return data[idx][d] < threshold; });
        const std::size_t mid = static_cast<std::size_t>(mid_it - items.begin());
        if (mid == begin || mid == end) return make_leaf(count);  // degenerate float edge

        const int me = static_cast<int>(nodes.size());
        nodes.push_back(TreeNode{static_cast<int>(d), threshold, -1, -1, 0});
        const int l = build(items, begin, mid, depth + 1);
        const int r = build(items, mid, end, depth + 1);
        nodes[static_cast<std::size_t>(me)].left = l;
        nodes[static_cast<std::size_t>(me)].right = r;
        return me;
    }

    int make_leaf(std::size_t count) {
        nodes.push_back(TreeNode{-1, 0.0, -1, -1, static_cast<int>(count)});
        return static_cast<int>(nodes.size() - 1);
    }
};

// Collapse subtrees whose every leaf already holds >= min_leaf points into a
// single sized leaf; the kept size feeds the same c(size) path adjustment.
inline void prune_tree(IsolationTree& tree, int min_leaf) {
    struct Info {
        int min_leaf_size;
        int total;
    };
    std::vector<Info> info(tree.nodes.size());
    // nodes were appended parent-first, so children always follow parents
    for (std::size_t i = tree.nodes.size(); i-- > 0;) {
        const TreeNode& n = tree.nodes[i];
        if (n.split_dim < 0) {
            info[i] = {n.size, n.size};
        } else {
            const auto& l = info[static_cast<std::size_t>(n.left)];
            const auto& r = info[static_cast<std::size_t>(n.right)];
            info[i] = {std::min(l.min_leaf_size, r.min_leaf_size), l.total + r.total};
        }
    }
    std::vector<TreeNode> out;
    out.reserve(tree.nodes.size());
    auto copy_rec = [&](auto&& self, int idx) -> int {
        const TreeNode& n = tree.nodes[static_cast<std::size_t>(idx)];
        if (n.split_dim >= 0 && info[static_cast<std::size_t>(idx)].min_leaf_size >= min_leaf) {
            out.push_back(TreeNode{-1, 0.0, -1, -1, info[static_cast<std::size_t>(idx)].total});
            return static_cast<int>(out.size() - 1);
        }
        if (n.split_dim < 0) {
            out.push_back(n);
            return static_cast<int>(out.size() - 1);
        }
        const int me = static_cast<int>(out.size());
        out.push_back(n);
        const int l = self(self, n.left);
        const int r = self(self, n.right);
        out[static_cast<std::size_t>(me)].left = l;
        out[static_cast<std::size_t>(me)].right = r;
        return me;
    };
    copy_rec(copy_rec, 0);
    tree.nodes = std::move(out);
}

}  // namespace detail

// Each tree gets an independent uniform subsample and a seed derived from the
// master seed, so trees can be built in any order (or in parallel) with
// identical results.
inline IsolationForest fit_forest(const std::vector<std::vector<double>>& vectors,
                                  std::size_t n_trees, std::size_t subsample_size,
                                  std::uint64_t rng_seed) {
    if (vectors.empty()) throw Error("fit_forest: no training vectors");
    if (n_trees < 1) throw Error("fit_forest: n_trees must be >= 1");
    if (subsample_size < 1 || subsample_size > vectors.size())
        throw Error("fit_forest: subsample_size must be in [1, |vectors|]");

    IsolationForest f;
    f.subsample = subsample_size;
    f.dim = vectors.front().size();
    for (const auto& v : vectors)
        if (v.size() != f.dim) throw Error("fit_forest: inconsistent vector dimensions");

    const int max_depth =
        static_cast<int>(std::ceil(std::log2(static_cast<double>(std::max<std::size_t>(subsample_size, 2)))));

    f.trees.reserve(n_trees);
    bool any_split = false;
    for (std::size_t t = 0; t < n_trees; ++t) {
        Rng rng = Rng::derive(rng_seed, "tree:" + std::to_string(t));
        // uniform subsample without replacement
        std::vector<std::size_t> idx(vectors.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        for (std::size_t i = 0; i < subsample_size; ++i) {
            const std::size_t j = static_cast<std::size_t>(
                rng.uniform_int(static_cast<std::int64_t>(i), static_cast<std::int64_t>(idx.size()) - 1));
            std::swap(idx[i], idx[j]);
        }
        idx.resize(subsample_size);

        detail::TreeBuilder b{vectors, f.dim, max_depth, rng, {}};
        b.build(idx, 0, idx.size(), 0);
        IsolationTree tree{std::move(b.nodes)};
        detail::prune_tree(tree, static_cast<int>((subsample_size + 3) / 4));
        if (!tree.leaf_only()) any_split = true;
        f.trees.push_back(std::move(tree));
    }
    f.degenerate = !any_split;
    f.rebuild_cache();
    return f;
}

// --- persistence -------------------------------------------------------------

inline nlohmann::ordered_json forest_to_json(const IsolationForest& f) {
    nlohmann::ordered_json j;
    j["format"] = "ueba.iforest.v1";
    j["subsample"] = f.subsample;
    j["dim"] = f.dim;
    j["degenerate"] = f.degenerate;
    nlohmann::ordered_json trees = nlohmann::ordered_json::array();
    for (const auto& t : f.trees) {
        nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
        for (const auto& n : t.nodes)
            nodes.push_back({n.split_dim, n.split_value, n.left, n.right, n.size});
        trees.push_back(std::move(nodes));
    }
    j["trees"] = std::move(trees);
    return j;
}

inline IsolationForest forest_from_json(const nlohmann::ordered_json& j) {
    if (j.at("format") != "ueba.iforest.v1") throw Error("forest file: unsupported format");
    IsolationForest f;
    f.subsample = j.at("subsample").get<std::size_t>();
    f.dim = j.at("dim").get<std::size_t>();
    f.degenerate = j.at("degenerate").get<bool>();
    for (const auto& jt : j.at("trees")) {
        IsolationTree t;
        for (const auto& jn : jt) {
            TreeNode n;
            n.split_dim = jn.at(0).get<int>();
            n.split_value = jn.at(1).get<double>();
            n.left = jn.at(2).get<int>();
            n.right = jn.at(3).get<int>();
            n.size = jn.at(4).get<int>();
            t.nodes.push_back(n);
        }
        f.trees.push_back(std::move(t));
    }
    f.rebuild_cache();
    return f;
}

}  // namespace ueba
