#pragma once

#include <vector>

#include "predsens/table.hpp"

namespace predsens {

// Flat binary regression tree. nodes[0] is the root; var == -1 marks a leaf.
// The split rule sends x[var] <= threshold to the left child.
struct TreeNode {
  int var = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
};

struct Tree {
  std::vector<TreeNode> nodes;

  double predict_row(const Table& t, std::size_t row) const {
    int idx = 0;
    while (nodes[static_cast<std::size_t>(idx)].var >= 0) {
      const TreeNode& n = nodes[static_cast<std::size_t>(idx)];
      idx = t.at(row, static_cast<std::size_t>(n.var)) <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(idx)].value;
  }
};

}  // namespace predsens
