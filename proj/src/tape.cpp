#include "alfa/tape.hpp"

#include <cmath>

#include "alfa/errors.hpp"

namespace alfa {

Tape::NodeId Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
}

Tape::NodeId Tape::constant(Matrix value) {
    Node n;
    n.op = Op::constant;
    n.value = std::move(value);
    return push(std::move(n));
}

Tape::NodeId Tape::parameter(Matrix value, std::string name) {
    Node n;
    n.op = Op::parameter;
    n.value = std::move(value);
    n.param_index = static_cast<int>(params_.size());
    NodeId id = push(std::move(n));
    params_.emplace_back(std::move(name), id);
    return id;
}

Tape::NodeId Tape::matmul(NodeId a, NodeId b) {
    Node n;
    n.op = Op::matmul;
    n.a = a;
    n.b = b;
    n.value = alfa::matmul(nodes_[a].value, nodes_[b].value);
    return push(std::move(n));
}

Tape::NodeId Tape::add(NodeId a, NodeId b) {
    Node n;
    n.op = Op::add;
    n.a = a;
    n.b = b;
    n.value = alfa::add(nodes_[a].value, nodes_[b].value);
    return push(std::move(n));
}

Tape::NodeId Tape::transpose(NodeId a) {
    Node n;
    n.op = Op::transpose;
    n.a = a;
    n.value = alfa::transpose(nodes_[a].value);
    return push(std::move(n));
}

Tape::NodeId Tape::softmax_rows(NodeId a) {
    Node n;
    n.op = Op::softmax;
    n.a = a;
    n.value = alfa::softmax_rows(nodes_[a].value);
    return push(std::move(n));
}

Tape::NodeId Tape::scale(NodeId a, double c) {
    Node n;
    n.op = Op::scale;
    n.a = a;
    n.factor = c;
    n.value = alfa::scale(nodes_[a].value, c);
    return push(std::move(n));
}

Tape::NodeId Tape::l1_mean(NodeId a) {
    Node n;
    n.op = Op::l1_mean;
    n.a = a;
    const Matrix& x = nodes_[a].value;
    double s = 0.0;
    for (double v : x.data) s += std::abs(v);
    Matrix out(1, 1);
    out(0, 0) = s / static_cast<double>(x.data.size());
    n.value = std::move(out);
    return push(std::move(n));
}

Tape::NodeId Tape::stack_rows(const std::vector<NodeId>& parts) {
    if (parts.empty()) throw ContractError("stack_rows needs at least one input");
    const int cols = nodes_[parts[0]].value.cols;
    int rows = 0;
    for (NodeId id : parts) {
        if (nodes_[id].value.cols != cols) {
            throw ShapeError("stack_rows column mismatch: " + nodes_[id].value.shape_str());
        }
        rows += nodes_[id].value.rows;
    }
    Matrix out(rows, cols);
    int at = 0;
    for (NodeId id : parts) {
        const Matrix& v = nodes_[id].value;
        for (int i = 0; i < v.rows; ++i)
            for (int j = 0; j < cols; ++j) out(at + i, j) = v(i, j);
        at += v.rows;
    }
    Node n;
    n.op = Op::stack;
    n.inputs = parts;
    n.value = std::move(out);
    return push(std::move(n));
}

const Matrix& Tape::value(NodeId id) const { return nodes_[static_cast<size_t>(id)].value; }

std::vector<std::pair<std::string, Matrix>> Tape::backward(NodeId loss) {
    const Matrix& v = nodes_[static_cast<size_t>(loss)].value;
    if (v.rows != 1 || v.cols != 1) {
        throw ContractError("backward requires a scalar loss node, got " + v.shape_str());
    }
    Matrix seed(1, 1);
    seed(0, 0) = 1.0;
    return run_backward(loss, seed);
}

std::vector<std::pair<std::string, Matrix>> Tape::backward_from(NodeId node, const Matrix& seed) {
    const Matrix& v = nodes_[static_cast<size_t>(node)].value;
    if (!same_shape(v, seed)) {
        throw ShapeError("backward seed " + seed.shape_str() + " vs node " + v.shape_str());
    }
    return run_backward(node, seed);
}

std::vector<std::pair<std::string, Matrix>> Tape::run_backward(NodeId start, const Matrix& seed) {
    std::vector<Matrix> adj(nodes_.size());
    for (size_t i = 0; i < nodes_.size(); ++i) {
        adj[i] = Matrix(nodes_[i].value.rows, nodes_[i].value.cols);
    }
    adj[static_cast<size_t>(start)] = seed;

    for (int id = start; id >= 0; --id) {
        const Node& n = nodes_[static_cast<size_t>(id)];
        const Matrix& g = adj[static_cast<size_t>(id)];
        switch (n.op) {
        case Op::constant:
        case Op::parameter:
            break;
        case Op::matmul: {
            const Matrix& a = nodes_[n.a].value;
            const Matrix& b = nodes_[n.b].value;
            adj[n.a] = alfa::add(adj[n.a], alfa::matmul(g, alfa::transpose(b)));
            adj[n.b] = alfa::add(adj[n.b], alfa::matmul(alfa::transpose(a), g));
            break;
        }
        case Op::add:
            adj[n.a] = alfa::add(adj[n.a], g);
            adj[n.b] = alfa::add(adj[n.b], g);
            break;
        case Op::transpose:
            adj[n.a] = alfa::add(adj[n.a], alfa::transpose(g));
            break;
        case Op::softmax: {
            const Matrix& y = n.value;
            Matrix dx(y.rows, y.cols);
            for (int i = 0; i < y.rows; ++i) {
                double dot = 0.0;
                for (int j = 0; j < y.cols; ++j) dot += g(i, j) * y(i, j);
                for (int j = 0; j < y.cols; ++j) dx(i, j) = y(i, j) * (g(i, j) - dot);
            }
            adj[n.a] = alfa::add(adj[n.a], dx);
            break;
        }
        case Op::scale:
            adj[n.a] = alfa::add(adj[n.a], alfa::scale(g, n.factor));
            break;
        case Op::l1_mean: {
            const Matrix& x = nodes_[n.a].value;
            const double w = g(0, 0) / static_cast<double>(x.data.size());
            Matrix dx(x.rows, x.cols);
            for (size_t i = 0; i < x.data.size(); ++i) {
                const double v = x.data[i];
                dx.data[i] = v > 0.0 ? w : (v < 0.0 ? -w : 0.0);
            }
            adj[n.a] = alfa::add(adj[n.a], dx);
            break;
        }
        case Op::stack: {
            int at = 0;
            for (int src : n.inputs) {
                Matrix& target = adj[static_cast<size_t>(src)];
                const Matrix& v = nodes_[static_cast<size_t>(src)].value;
                for (int i = 0; i < v.rows; ++i)
                    for (int j = 0; j < v.cols; ++j) target(i, j) += g(at + i, j);
                at += v.rows;
            }
            break;
        }
        }
    }

    std::vector<std::pair<std::string, Matrix>> grads;
    grads.reserve(params_.size());
    for (const auto& [name, id] : params_) {
        grads.emplace_back(name, adj[static_cast<size_t>(id)]);
    }
    return grads;
}

} // namespace alfa
