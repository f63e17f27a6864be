#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qnetsim/topology.hpp"
#include "qnetsim/types.hpp"

namespace qnetsim {

enum class TreeKind { Leaf, Swap, Purify };

// One node of a swapping tree. `left`/`right` are the endpoints of the EP the
// node produces, oriented along the route.
struct TreeNode {
  TreeKind kind = TreeKind::Leaf;
  NodeId left = kNoNode;
  NodeId right = kNoNode;
  NodeId at = kNoNode;    // Swap only
  LinkId link = kNoLink;  // Leaf only
  int rounds = 0;         // Purify only
  int child_l = -1;       // Purify keeps its single child here
  int child_r = -1;
  int parent = -1;
  int depth = 0;          // swap levels above this node, root = 0
};

// Arena-backed binary tree. Children always precede parents in `nodes()`, so a
// forward scan is a valid bottom-up order.
class SwapTree {
 public:
  static SwapTree leaf(LinkId link, NodeId left, NodeId right) {
    SwapTree t;
    TreeNode n;
    n.kind = TreeKind::Leaf;
    n.link = link;
    n.left = left;
    n.right = right;
    t.nodes_.push_back(n);
    t.root_ = 0;
    return t;
  }

  static SwapTree swap(const SwapTree& l, const SwapTree& r) {
    if (l.empty() || r.empty()) throw std::invalid_argument("swap of empty tree");
    if (l.root().right != r.root().left) {
      throw std::invalid_argument("swap children do not share the middle node");
    }
    if (l.root().left == r.root().right) throw std::invalid_argument("swap would close a loop");
    SwapTree t;
    const int lo = t.append(l);
    const int ro = t.append(r);
    TreeNode n;
    n.kind = TreeKind::Swap;
    n.left = l.root().left;
    n.right = r.root().right;
    n.at = l.root().right;
    n.child_l = lo;
    n.child_r = ro;
    t.nodes_.push_back(n);
    t.root_ = static_cast<int>(t.nodes_.size()) - 1;
    t.nodes_[lo].parent = t.root_;
    t.nodes_[ro].parent = t.root_;
    t.fix_depths();
    return t;
  }

  static SwapTree purify(const SwapTree& child, int rounds) {
    if (rounds < 1) throw std::invalid_argument("purify rounds must be >= 1");
    SwapTree t;
    const int c = t.append(child);
    TreeNode n;
    n.kind = TreeKind::Purify;
    n.left = child.root().left;
    n.right = child.root().right;
    n.rounds = rounds;
    n.child_l = c;
    t.nodes_.push_back(n);
    t.root_ = static_cast<int>(t.nodes_.size()) - 1;
    t.nodes_[c].parent = t.root_;
    t.fix_depths();
    return t;
  }

  bool empty() const { return nodes_.empty(); }
  std::size_t size() const { return nodes_.size(); }
  int root_index() const { return root_; }
  const TreeNode& root() const { return nodes_.at(static_cast<std::size_t>(root_)); }
  const TreeNode& node(int i) const { return nodes_.at(static_cast<std::size_t>(i)); }
  const std::vector<TreeNode>& nodes() const { return nodes_; }

  // Leaves in left-to-right order.
  std::vector<int> leaves() const {
    std::vector<int> out;
    if (!empty()) collect_leaves(root_, out);
    return out;
  }

  std::vector<NodeId> route() const {
    std::vector<NodeId> r;
    for (int i : leaves()) {
      if (r.empty()) r.push_back(nodes_[i].left);
      r.push_back(nodes_[i].right);
    }
    return r;
  }

  std::vector<LinkId> links() const {
    std::vector<LinkId> out;
    for (int i : leaves()) out.push_back(nodes_[i].link);
    return out;
  }

  int swap_count() const {
    return static_cast<int>(std::count_if(nodes_.begin(), nodes_.end(),
                                          [](const TreeNode& n) { return n.kind == TreeKind::Swap; }));
  }

  int height() const {
    int h = 0;
    for (const auto& n : nodes_) h = std::max(h, n.depth);
    return h;
  }

  // Tree node index producing the EP (a, b) in either orientation; the
  // outermost such node when purification wrappers are stacked. -1 if none.
  int find_span(NodeId a, NodeId b) const {
    for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
      const auto& n = nodes_[i];
      if ((n.left == a && n.right == b) || (n.left == b && n.right == a)) return i;
    }
    return -1;
  }

  // Mirror image: same EPs, route reversed.
  SwapTree reversed() const {
    SwapTree t = *this;
    for (auto& n : t.nodes_) {
      std::swap(n.left, n.right);
      if (n.kind == TreeKind::Swap) std::swap(n.child_l, n.child_r);
    }
    return t;
  }

  // Structural invariants against a graph; returns an empty string when valid.
  std::string check(const NetworkGraph& g) const {
    if (empty()) return "empty tree";
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const auto& n = nodes_[i];
      switch (n.kind) {
        case TreeKind::Leaf: {
          auto l = g.find_link(n.left, n.right);
          if (!l || *l != n.link) return "leaf " + std::to_string(i) + " is not a graph link";
          break;
        }
        case TreeKind::Swap: {
          const auto& a = nodes_[n.child_l];
          const auto& b = nodes_[n.child_r];
          if (a.right != n.at || b.left != n.at || a.left != n.left || b.right != n.right) {
            return "swap " + std::to_string(i) + " endpoints inconsistent";
          }
          break;
        }
        case TreeKind::Purify: {
          const auto& c = nodes_[n.child_l];
          if (n.rounds < 1 || c.left != n.left || c.right != n.right) {
            return "purify " + std::to_string(i) + " malformed";
          }
          break;
        }
      }
    }
    auto r = route();
    auto sorted = r;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) return "route is not a simple path";
    return {};
  }

 private:
  int append(const SwapTree& other) {
    const int offset = static_cast<int>(nodes_.size());
    for (TreeNode n : other.nodes_) {
      if (n.child_l >= 0) n.child_l += offset;
      if (n.child_r >= 0) n.child_r += offset;
      if (n.parent >= 0) n.parent += offset;
      nodes_.push_back(n);
    }
    return offset + other.root_;
  }

  void fix_depths() {
    // Parents come last, so walk backwards.
    for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
      auto& n = nodes_[i];
      if (n.parent < 0) {
        n.depth = 0;
      } else {
        const auto& p = nodes_[n.parent];
        n.depth = p.depth + (p.kind == TreeKind::Swap ? 1 : 0);
      }
    }
  }

  void collect_leaves(int i, std::vector<int>& out) const {
    const auto& n = nodes_[i];
    if (n.kind == TreeKind::Leaf) {
      out.push_back(i);
    } else if (n.kind == TreeKind::Purify) {
      collect_leaves(n.child_l, out);
    } else {
      collect_leaves(n.child_l, out);
      collect_leaves(n.child_r, out);
    }
  }

  std::vector<TreeNode> nodes_;
  int root_ = -1;
};

inline nlohmann::json tree_node_to_json(const SwapTree& t, int i) {
  const auto& n = t.node(i);
  switch (n.kind) {
    case TreeKind::Leaf:
      return {{"type", "link"}, {"link", n.link}, {"left", n.left}, {"right", n.right}};
    case TreeKind::Swap:
      return {{"type", "swap"},
              {"at", n.at},
              {"left", n.left},
              {"right", n.right},
              {"children", {tree_node_to_json(t, n.child_l), tree_node_to_json(t, n.child_r)}}};
    case TreeKind::Purify:
      return {{"type", "purify"}, {"rounds", n.rounds}, {"left", n.left}, {"right", n.right},
              {"child", tree_node_to_json(t, n.child_l)}};
  }
  return {};
}

inline nlohmann::json tree_to_json(const SwapTree& t) {
  if (t.empty()) return nullptr;
  return tree_node_to_json(t, t.root_index());
}

inline SwapTree tree_from_json(const nlohmann::json& j) {
  const auto type = j.at("type").get<std::string>();
  if (type == "link") {
    return SwapTree::leaf(j.at("link").get<LinkId>(), j.at("left").get<NodeId>(), j.at("right").get<NodeId>());
  }
  if (type == "swap") {
    const auto& ch = j.at("children");
    return SwapTree::swap(tree_from_json(ch.at(0)), tree_from_json(ch.at(1)));
  }
  if (type == "purify") return SwapTree::purify(tree_from_json(j.at("child")), j.at("rounds").get<int>());
  throw std::invalid_argument("unknown tree node type: " + type);
}

}  // namespace qnetsim
