// Copyright (c) 2026, The fairlora authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "fairlora/rng.hpp"
#include "fairlora/tensor.hpp"

namespace fairlora::ad {

enum class Op : std::uint8_t {
    Constant,
    Parameter,
    MatMul,
    Transpose,
    Add,
    Sub,
    AddBias,
    Scale,
    Relu,
    SoftmaxRows,
    Sum,
    Mean,
    Dropout,
    CrossEntropy,
    GradReversal,
    FrobeniusPenalty,
    LayerNorm,
    Reshape,
    AttentionScores,
    AttentionMix,
    TokenMean,
};

const char* op_name(Op op) noexcept;

/// Handle to a node of a Graph. Only meaningful together with the graph that made it.
struct Var {
    static constexpr std::uint32_t kInvalid = 0xffffffffu;
    std::uint32_t id = kInvalid;

    bool valid() const noexcept { return id != kInvalid; }
    bool operator==(const Var&) const = default;
};

class Graph;
using BackwardFn = std::function<void(Graph&, Var self)>;

/// Tape of nodes for one forward/backward pass.
///
/// Nodes are appended in creation order, which is a topological order, so
/// backward() walks the tape once from the root down to index 0 and every node
/// is visited at most once. Nodes that do not depend on any parameter carry no
/// gradient and are skipped.
class Graph {
public:
    Var constant(Tensor value);
    Var parameter(Tensor value);

    const Tensor& value(Var v) const;
    /// Gradient of the last backward() root with respect to v (zeros if none flowed).
    const Tensor& grad(Var v) const;
    bool requires_grad(Var v) const;
    Op op(Var v) const;
    std::span<const Var> parents(Var v) const;
    std::size_t size() const noexcept { return nodes_.size(); }

    /// Reverse sweep from a scalar root. Gradients accumulate across parents that
    /// feed several consumers.
    void backward(Var root);
    /// Number of nodes whose backward rule ran during the last backward().
    std::size_t last_backward_visits() const noexcept { return visits_; }

    // Used by op implementations.
    Var emplace(Op op, Tensor value, std::vector<Var> parents, BackwardFn fn);
    /// Mutable gradient buffer, allocated on first use.
    Tensor& grad_buffer(Var v);
    /// Incoming gradient of `v` during backward.
    const Tensor& out_grad(Var v) const { return nodes_[v.id].grad; }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool has_grad = false;
        bool requires_grad = false;
        Op op = Op::Constant;
        std::vector<Var> parents;
        BackwardFn backward;
    };

    const Node& node(Var v) const;

    std::vector<Node> nodes_;
    std::size_t visits_ = 0;
};

Var matmul(Graph& g, Var a, Var b);
Var transpose(Graph& g, Var a);
Var add(Graph& g, Var a, Var b);
Var sub(Graph& g, Var a, Var b);
/// x[n x k] + b[1 x k] broadcast over rows.
Var add_bias(Graph& g, Var x, Var b);
Var scale(Graph& g, Var x, double factor);
Var relu(Graph& g, Var x);
Var softmax_rows(Graph& g, Var x);
Var sum(Graph& g, Var x);
Var mean(Graph& g, Var x);

/// Inverted dropout: in train mode each entry is zeroed with probability p and
/// survivors are divided by (1 - p). In eval mode returns `x` itself.
Var dropout(Graph& g, Var x, double p, bool train, RngStream& rng);

/// Mean over rows of -log softmax(logits)[i, labels[i]], computed with max subtraction.
Var cross_entropy_logits(Graph& g, Var logits, std::span<const int> labels);

/// Identity forward; backward multiplies the incoming gradient by -scale.
Var gradient_reversal(Graph& g, Var x, double scale);

/// ||M - I||_F^2 when target_identity, else ||M||_F^2.
Var frobenius_penalty(Graph& g, Var m, bool target_identity);

/// Row-wise layer normalization with affine gamma/beta of shape [1 x k].
Var layer_norm_rows(Graph& g, Var x, Var gamma, Var beta, double eps = 1e-5);

Var reshape(Graph& g, Var x, Shape shape);

/// q, k: [(n*T) x h] holding n samples of T tokens each. Returns [(n*T) x T] with
/// out[(i,t), s] = factor * <q[i,t], k[i,s]>.
Var attention_scores(Graph& g, Var q, Var k, std::size_t tokens, double factor);
/// p: [(n*T) x T], v: [(n*T) x h]. out[(i,t)] = sum_s p[(i,t), s] * v[i,s].
Var attention_mix(Graph& g, Var p, Var v, std::size_t tokens);
/// x: [(n*T) x h] -> [n x h], mean over each sample's tokens.
Var token_mean(Graph& g, Var x, std::size_t tokens);

} // namespace fairlora::ad
