#pragma once

#include <string>
#include <utility>
#include <vector>

#include "alfa/matrix.hpp"

namespace alfa {

// Reverse-mode autodiff over a fixed primitive set: matmul, add, transpose,
// row-softmax, scalar-scale, L1-mean and row-stack. Values are computed
// eagerly at node creation; backward walks the node list in reverse.
// A tape instance is single-threaded.
class Tape {
public:
    using NodeId = int;

    NodeId constant(Matrix value);
    NodeId parameter(Matrix value, std::string name);

    NodeId matmul(NodeId a, NodeId b);
    NodeId add(NodeId a, NodeId b);
    NodeId transpose(NodeId a);
    NodeId softmax_rows(NodeId a);
    NodeId scale(NodeId a, double c);
    // 1x1 node: mean of |x_ij| over all entries. Subgradient at 0 is 0.
    NodeId l1_mean(NodeId a);
    // Vertical concatenation; all inputs must have equal column counts.
    NodeId stack_rows(const std::vector<NodeId>& parts);

    const Matrix& value(NodeId id) const;
    int node_count() const { return static_cast<int>(nodes_.size()); }

    // Gradients of a scalar loss node for every registered parameter, in
    // registration order. Parameters the loss does not reach get zeros.
    std::vector<std::pair<std::string, Matrix>> backward(NodeId loss);

    // Same walk, but seeded with an externally supplied adjoint at `node`.
    // Used when the downstream part of a loss is differentiated elsewhere.
    std::vector<std::pair<std::string, Matrix>> backward_from(NodeId node, const Matrix& seed);

private:
    enum class Op { constant, parameter, matmul, add, transpose, softmax, scale, l1_mean, stack };

    struct Node {
        Op op;
        int a = -1;
        int b = -1;
        std::vector<int> inputs; // stack only
        double factor = 0.0;     // scale only
        Matrix value;
        int param_index = -1;
    };

    NodeId push(Node n);
    std::vector<std::pair<std::string, Matrix>> run_backward(NodeId start, const Matrix& seed);

    std::vector<Node> nodes_;
    std::vector<std::pair<std::string, NodeId>> params_;
};

} // namespace alfa
