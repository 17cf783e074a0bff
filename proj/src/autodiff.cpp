// Copyright (c) 2026, The fairlora authors
// SPDX-License-Identifier: Apache-2.0
//

#include "fairlora/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "fairlora/errors.hpp"

namespace fairlora::ad {

const char* op_name(Op op) noexcept {
    switch (op) {
    case Op::Constant: return "constant";
    case Op::Parameter: return "parameter";
    case Op::MatMul: return "matmul";
    case Op::Transpose: return "transpose";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::AddBias: return "add_bias";
    case Op::Scale: return "scale";
    case Op::Relu: return "relu";
    case Op::SoftmaxRows: return "softmax_rows";
    case Op::Sum: return "sum";
    case Op::Mean: return "mean";
    case Op::Dropout: return "dropout";
    case Op::CrossEntropy: return "cross_entropy";
    case Op::GradReversal: return "gradient_reversal";
    case Op::FrobeniusPenalty: return "frobenius_penalty";
    case Op::LayerNorm: return "layer_norm";
    case Op::Reshape: return "reshape";
    case Op::AttentionScores: return "attention_scores";
    case Op::AttentionMix: return "attention_mix";
    case Op::TokenMean: return "token_mean";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Graph

Var Graph::constant(Tensor value) { return emplace(Op::Constant, std::move(value), {}, nullptr); }

Var Graph::parameter(Tensor value) {
    Var v = emplace(Op::Parameter, std::move(value), {}, nullptr);
    nodes_[v.id].requires_grad = true;
    return v;
}

const Graph::Node& Graph::node(Var v) const {
    if (v.id >= nodes_.size()) {
        throw Error("invalid graph variable");
    }
    return nodes_[v.id];
}

const Tensor& Graph::value(Var v) const { return node(v).value; }

const Tensor& Graph::grad(Var v) const {
    Graph& self = const_cast<Graph&>(*this);
    return self.grad_buffer(v);
}

bool Graph::requires_grad(Var v) const { return node(v).requires_grad; }

Op Graph::op(Var v) const { return node(v).op; }

std::span<const Var> Graph::parents(Var v) const { return node(v).parents; }

Var Graph::emplace(Op op, Tensor value, std::vector<Var> parents, BackwardFn fn) {
    Node n;
    n.value = std::move(value);
    n.op = op;
    for (Var p : parents) {
        n.requires_grad = n.requires_grad || node(p).requires_grad;
    }
    n.parents = std::move(parents);
    if (n.requires_grad) {
        n.backward = std::move(fn);
    }
    nodes_.push_back(std::move(n));
    return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Tensor& Graph::grad_buffer(Var v) {
    if (v.id >= nodes_.size()) {
        throw Error("invalid graph variable");
    }
    Node& n = nodes_[v.id];
    if (!n.has_grad) {
        n.grad = Tensor(n.value.shape());
        n.has_grad = true;
    }
    return n.grad;
}

void Graph::backward(Var root) {
    const Node& r = node(root);
    if (r.value.size() != 1) {
        throw ShapeError("backward root must be scalar, got " + to_string(r.value.shape()));
    }
    for (Node& n : nodes_) {
        if (n.has_grad) {
            n.grad.fill(0.0);
        }
    }
    grad_buffer(root)[0] = 1.0;
    visits_ = 0;
    for (std::size_t i = root.id + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.requires_grad || !n.has_grad || !n.backward) {
            continue;
        }
        n.backward(*this, Var{static_cast<std::uint32_t>(i)});
        ++visits_;
    }
}

// ---------------------------------------------------------------------------
// Ops

namespace {

void accumulate(Graph& g, Var target, const Tensor& delta, double alpha = 1.0) {
    if (g.requires_grad(target)) {
        dense::axpy(alpha, delta, g.grad_buffer(target));
    }
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": " + to_string(a.shape()) + " vs " + to_string(b.shape()));
    }
}

void require_tokens(const char* op, const Tensor& x, std::size_t tokens) {
    if (tokens == 0 || x.rows() % tokens != 0) {
        throw ShapeError(std::string(op) + ": " + std::to_string(x.rows()) + " rows not divisible by " +
                         std::to_string(tokens) + " tokens");
    }
}

} // namespace

Var matmul(Graph& g, Var a, Var b) {
    Tensor out = dense::matmul(g.value(a), g.value(b));
    return g.emplace(Op::MatMul, std::move(out), {a, b}, [a, b](Graph& gr, Var self) {
        const Tensor& dc = gr.out_grad(self);
        if (gr.requires_grad(a)) {
            accumulate(gr, a, dense::matmul_nt(dc, gr.value(b)));
        }
        if (gr.requires_grad(b)) {
            accumulate(gr, b, dense::matmul_tn(gr.value(a), dc));
        }
    });
}

Var transpose(Graph& g, Var a) {
    return g.emplace(Op::Transpose, dense::transpose(g.value(a)), {a}, [a](Graph& gr, Var self) {
        accumulate(gr, a, dense::transpose(gr.out_grad(self)));
    });
}

Var add(Graph& g, Var a, Var b) {
    const Tensor& va = g.value(a);
    const Tensor& vb = g.value(b);
    require_same_shape("add", va, vb);
    Tensor out = va;
    dense::axpy(1.0, vb, out);
    return g.emplace(Op::Add, std::move(out), {a, b}, [a, b](Graph& gr, Var self) {
        accumulate(gr, a, gr.out_grad(self));
        accumulate(gr, b, gr.out_grad(self));
    });
}

Var sub(Graph& g, Var a, Var b) {
    const Tensor& va = g.value(a);
    const Tensor& vb = g.value(b);
    require_same_shape("sub", va, vb);
    Tensor out = va;
    dense::axpy(-1.0, vb, out);
    return g.emplace(Op::Sub, std::move(out), {a, b}, [a, b](Graph& gr, Var self) {
        accumulate(gr, a, gr.out_grad(self));
        accumulate(gr, b, gr.out_grad(self), -1.0);
    });
}

Var add_bias(Graph& g, Var x, Var b) {
    const Tensor& vx = g.value(x);
    const Tensor& vb = g.value(b);
    if (vb.rows() != 1 || vb.cols() != vx.cols()) {
        throw ShapeError("add_bias: " + to_string(vx.shape()) + " + " + to_string(vb.shape()));
    }
    Tensor out = vx;
    for (std::size_t i = 0; i < out.rows(); ++i) {
        for (std::size_t j = 0; j < out.cols(); ++j) {
            out(i, j) += vb[j];
        }
    }
    return g.emplace(Op::AddBias, std::move(out), {x, b}, [x, b](Graph& gr, Var self) {
        const Tensor& dc = gr.out_grad(self);
        accumulate(gr, x, dc);
        if (gr.requires_grad(b)) {
            Tensor& db = gr.grad_buffer(b);
            for (std::size_t i = 0; i < dc.rows(); ++i) {
                for (std::size_t j = 0; j < dc.cols(); ++j) {
                    db[j] += dc(i, j);
                }
            }
        }
    });
}

Var scale(Graph& g, Var x, double factor) {
    Tensor out = g.value(x);
    for (double& v : out.data()) {
        v *= factor;
    }
    return g.emplace(Op::Scale, std::move(out), {x}, [x, factor](Graph& gr, Var self) {
        accumulate(gr, x, gr.out_grad(self), factor);
    });
}

Var relu(Graph& g, Var x) {
    Tensor out = g.value(x);
    for (double& v : out.data()) {
        v = v > 0.0 ? v : 0.0;
    }
    return g.emplace(Op::Relu, std::move(out), {x}, [x](Graph& gr, Var self) {
        if (!gr.requires_grad(x)) {
            return;
        }
        const Tensor& y = gr.value(self);
        const Tensor& dc = gr.out_grad(self);
        Tensor& dx = gr.grad_buffer(x);
        for (std::size_t i = 0; i < y.size(); ++i) {
            if (y[i] > 0.0) {
                dx[i] += dc[i];
            }
        }
    });
}

Var softmax_rows(Graph& g, Var x) {
    Tensor out = g.value(x);
    const std::size_t n = out.rows(), c = out.cols();
    for (std::size_t i = 0; i < n; ++i) {
        double* row = out.data().data() + i * c;
        const double mx = *std::max_element(row, row + c);
        double z = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            row[j] = std::exp(row[j] - mx);
            z += row[j];
        }
        for (std::size_t j = 0; j < c; ++j) {
            row[j] /= z;
        }
    }
    return g.emplace(Op::SoftmaxRows, std::move(out), {x}, [x](Graph& gr, Var self) {
        if (!gr.requires_grad(x)) {
            return;
        }
        const Tensor& y = gr.value(self);
        const Tensor& dc = gr.out_grad(self);
        Tensor& dx = gr.grad_buffer(x);
        const std::size_t rows = y.rows(), cols = y.cols();
        for (std::size_t i = 0; i < rows; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < cols; ++j) {
                dot += dc(i, j) * y(i, j);
            }
            for (std::size_t j = 0; j < cols; ++j) {
                dx(i, j) += y(i, j) * (dc(i, j) - dot);
            }
        }
    });
}

Var sum(Graph& g, Var x) {
    double s = 0.0;
    for (double v : g.value(x).data()) {
        s += v;
    }
    return g.emplace(Op::Sum, Tensor::scalar(s), {x}, [x](Graph& gr, Var self) {
        if (!gr.requires_grad(x)) {
            return;
        }
        const double d = gr.out_grad(self)[0];
        for (double& v : gr.grad_buffer(x).data()) {
            v += d;
        }
    });
}

Var mean(Graph& g, Var x) {
    const Tensor& vx = g.value(x);
    if (vx.size() == 0) {
        throw ShapeError("mean of empty tensor");
    }
    double s = 0.0;
    for (double v : vx.data()) {
        s += v;
    }
    const double inv_n = 1.0 / static_cast<double>(vx.size());
    return g.emplace(Op::Mean, Tensor::scalar(s * inv_n), {x}, [x, inv_n](Graph& gr, Var self) {
        if (!gr.requires_grad(x)) {
            return;
        }
        const double d = gr.out_grad(self)[0] * inv_n;
        for (double& v : gr.grad_buffer(x).data()) {
            v += d;
        }
    });
}

Var dropout(Graph& g, Var x, double p, bool train, RngStream& rng) {
    if (!(p >= 0.0 && p < 1.0)) {
        throw DomainError("dropout probability must lie in [0, 1), got " + std::to_string(p));
    }
    if (!train || p == 0.0) {
        return x;
    }
    const Tensor& vx = g.value(x);
    const double keep_scale = 1.0 / (1.0 - p);
    std::vector<double> mask(vx.size());
    Tensor out = vx;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        mask[i] = rng.uniform() < p ? 0.0 : keep_scale;
        out[i] *= mask[i];
    }
    return g.emplace(Op::Dropout, std::move(out), {x}, [x, mask = std::move(mask)](Graph& gr, Var self) {
        if (!gr.requires_grad(x)) {
            return;
        }
        const Tensor& dc = gr.out_grad(self);
        Tensor& dx = gr.grad_buffer(x);
        for (std::size_t i = 0; i < mask.size(); ++i) {
            dx[i] += dc[i] * mask[i];
        }
    });
}

Var cross_entropy_logits(Graph& g, Var logits, std::span<const int> labels) {
    const Tensor& z = g.value(logits);
    const std::size_t n = z.rows(), c = z.cols();
    if (n == 0) {
        throw DomainError("cross_entropy_logits: empty batch");
    }
    if (labels.size() != n) {
        throw ShapeError("cross_entropy_logits: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(n) + " rows");
    }
    if (c < 2) {
        throw ShapeError("cross_entropy_logits: need at least 2 classes, got " + std::to_string(c));
    }
    Tensor probs(n, c);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const int y = labels[i];
        if (y < 0 || static_cast<std::size_t>(y) >= c) {
            throw DomainError("cross_entropy_logits: label " + std::to_string(y) + " outside [0, " +
                              std::to_string(c) + ")");
        }
        double mx = z(i, 0);
        for (std::size_t j = 1; j < c; ++j) {
            mx = std::max(mx, z(i, j));
        }
        double s = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            s += std::exp(z(i, j) - mx);
        }
        const double log_z = mx + std::log(s);
        total += log_z - z(i, static_cast<std::size_t>(y));
        for (std::size_t j = 0; j < c; ++j) {
            probs(i, j) = std::exp(z(i, j) - log_z);
        }
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    std::vector<int> ys(labels.begin(), labels.end());
    return g.emplace(Op::CrossEntropy, Tensor::scalar(total * inv_n), {logits},
                     [logits, inv_n, probs = std::move(probs), ys = std::move(ys)](Graph& gr, Var self) {
                         if (!gr.requires_grad(logits)) {
                             return;
                         }
                         const double d = gr.out_grad(self)[0] * inv_n;
                         Tensor& dz = gr.grad_buffer(logits);
                         for (std::size_t i = 0; i < probs.rows(); ++i) {
                             for (std::size_t j = 0; j < probs.cols(); ++j) {
                                 const double target = static_cast<int>(j) == ys[i] ? 1.0 : 0.0;
                                 dz(i, j) += d * (probs(i, j) - target);
                             }
                         }
                     });
}

Var gradient_reversal(Graph& g, Var x, double scale_factor) {
    if (!(scale_factor >= 0.0) || !std::isfinite(scale_factor)) {
        throw DomainError("gradient_reversal: scale must be finite and non-negative");
    }
    return g.emplace(Op::GradReversal, g.value(x), {x}, [x, scale_factor](Graph& gr, Var self) {
        accumulate(gr, x, gr.out_grad(self), -scale_factor);
    });
}

Var frobenius_penalty(Graph& g, Var m, bool target_identity) {
    const Tensor& vm = g.value(m);
    if (target_identity && vm.rows() != vm.cols()) {
        throw ShapeError("frobenius_penalty: identity target needs a square matrix, got " + to_string(vm.shape()));
    }
    Tensor residual = vm;
    if (target_identity) {
        for (std::size_t i = 0; i < vm.rows(); ++i) {
            residual(i, i) -= 1.0;
        }
    }
    const double value = dense::frobenius_sq(residual);
    return g.emplace(Op::FrobeniusPenalty, Tensor::scalar(value), {m},
                     [m, residual = std::move(residual)](Graph& gr, Var self) {
                         accumulate(gr, m, residual, 2.0 * gr.out_grad(self)[0]);
                     });
}

Var layer_norm_rows(Graph& g, Var x, Var gamma, Var beta, double eps) {
    const Tensor& vx = g.value(x);
    const Tensor& vg = g.value(gamma);
    const Tensor& vb = g.value(beta);
    const std::size_t n = vx.rows(), k = vx.cols();
    if (vg.shape() != Shape{1, k} || vb.shape() != Shape{1, k}) {
        throw ShapeError("layer_norm_rows: gamma/beta must be [1x" + std::to_string(k) + "]");
    }
    Tensor xhat(n, k);
    std::vector<double> inv_std(n);
    Tensor out(n, k);
    for (std::size_t i = 0; i < n; ++i) {
        double mu = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            mu += vx(i, j);
        }
        mu /= static_cast<double>(k);
        double var = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            const double d = vx(i, j) - mu;
            var += d * d;
        }
        var /= static_cast<double>(k);
        inv_std[i] = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < k; ++j) {
            xhat(i, j) = (vx(i, j) - mu) * inv_std[i];
            out(i, j) = vg[j] * xhat(i, j) + vb[j];
        }
    }
    return g.emplace(Op::LayerNorm, std::move(out), {x, gamma, beta},
                     [x, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std)](Graph& gr, Var self) {
                         const Tensor& dy = gr.out_grad(self);
                         const Tensor& vgam = gr.value(gamma);
                         const std::size_t rows = xhat.rows(), cols = xhat.cols();
                         if (gr.requires_grad(gamma) || gr.requires_grad(beta)) {
                             Tensor dg(1, cols), db(1, cols);
                             for (std::size_t i = 0; i < rows; ++i) {
                                 for (std::size_t j = 0; j < cols; ++j) {
                                     dg[j] += dy(i, j) * xhat(i, j);
                                     db[j] += dy(i, j);
                                 }
                             }
                             accumulate(gr, gamma, dg);
                             accumulate(gr, beta, db);
                         }
                         if (!gr.requires_grad(x)) {
                             return;
                         }
                         Tensor& dx = gr.grad_buffer(x);
                         const double inv_k = 1.0 / static_cast<double>(cols);
                         for (std::size_t i = 0; i < rows; ++i) {
                             double mean_d = 0.0, mean_dx = 0.0;
                             for (std::size_t j = 0; j < cols; ++j) {
                                 const double d = dy(i, j) * vgam[j];
                                 mean_d += d;
                                 mean_dx += d * xhat(i, j);
                             }
                             mean_d *= inv_k;
                             mean_dx *= inv_k;
                             for (std::size_t j = 0; j < cols; ++j) {
                                 const double d = dy(i, j) * vgam[j];
                                 dx(i, j) += inv_std[i] * (d - mean_d - xhat(i, j) * mean_dx);
                             }
                         }
                     });
}

Var reshape(Graph& g, Var x, Shape shape) {
    const Shape from = g.value(x).shape();
    return g.emplace(Op::Reshape, g.value(x).reshaped(shape), {x}, [x, from](Graph& gr, Var self) {
        accumulate(gr, x, gr.out_grad(self).reshaped(from));
    });
}

Var attention_scores(Graph& g, Var q, Var k, std::size_t tokens, double factor) {
    const Tensor& vq = g.value(q);
    const Tensor& vk = g.value(k);
    require_same_shape("attention_scores", vq, vk);
    require_tokens("attention_scores", vq, tokens);
    const std::size_t samples = vq.rows() / tokens, h = vq.cols();
    Tensor out(vq.rows(), tokens);
    for (std::size_t i = 0; i < samples; ++i) {
        for (std::size_t t = 0; t < tokens; ++t) {
            const double* qr = vq.data().data() + (i * tokens + t) * h;
            for (std::size_t s = 0; s < tokens; ++s) {
                const double* kr = vk.data().data() + (i * tokens + s) * h;
                double dot = 0.0;
                for (std::size_t j = 0; j < h; ++j) {
                    dot += qr[j] * kr[j];
                }
                out(i * tokens + t, s) = factor * dot;
            }
        }
    }
    return g.emplace(Op::AttentionScores, std::move(out), {q, k}, [q, k, tokens, factor](Graph& gr, Var self) {
        const Tensor& dc = gr.out_grad(self);
        const Tensor& vq2 = gr.value(q);
        const Tensor& vk2 = gr.value(k);
        const std::size_t n = vq2.rows() / tokens, width = vq2.cols();
        const bool need_q = gr.requires_grad(q), need_k = gr.requires_grad(k);
        Tensor* dq = need_q ? &gr.grad_buffer(q) : nullptr;
        Tensor* dk = need_k ? &gr.grad_buffer(k) : nullptr;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t t = 0; t < tokens; ++t) {
                const std::size_t rt = i * tokens + t;
                for (std::size_t s = 0; s < tokens; ++s) {
                    const std::size_t rs = i * tokens + s;
                    const double d = factor * dc(rt, s);
                    if (d == 0.0) {
                        continue;
                    }
                    for (std::size_t j = 0; j < width; ++j) {
                        if (need_q) {
                            (*dq)(rt, j) += d * vk2(rs, j);
                        }
                        if (need_k) {
                            (*dk)(rs, j) += d * vq2(rt, j);
                        }
                    }
                }
            }
        }
    });
}

Var attention_mix(Graph& g, Var p, Var v, std::size_t tokens) {
    const Tensor& vp = g.value(p);
    const Tensor& vv = g.value(v);
    require_tokens("attention_mix", vv, tokens);
    if (vp.rows() != vv.rows() || vp.cols() != tokens) {
        throw ShapeError("attention_mix: weights " + to_string(vp.shape()) + " vs values " + to_string(vv.shape()));
    }
    const std::size_t samples = vv.rows() / tokens, h = vv.cols();
    Tensor out(vv.rows(), h);
    for (std::size_t i = 0; i < samples; ++i) {
        for (std::size_t t = 0; t < tokens; ++t) {
            double* orow = out.data().data() + (i * tokens + t) * h;
            for (std::size_t s = 0; s < tokens; ++s) {
                const double w = vp(i * tokens + t, s);
                const double* vr = vv.data().data() + (i * tokens + s) * h;
                for (std::size_t j = 0; j < h; ++j) {
                    orow[j] += w * vr[j];
                }
            }
        }
    }
    return g.emplace(Op::AttentionMix, std::move(out), {p, v}, [p, v, tokens](Graph& gr, Var self) {
        const Tensor& dc = gr.out_grad(self);
        const Tensor& vp2 = gr.value(p);
        const Tensor& vv2 = gr.value(v);
        const std::size_t n = vv2.rows() / tokens, width = vv2.cols();
        const bool need_p = gr.requires_grad(p), need_v = gr.requires_grad(v);
        Tensor* dp = need_p ? &gr.grad_buffer(p) : nullptr;
        Tensor* dv = need_v ? &gr.grad_buffer(v) : nullptr;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t t = 0; t < tokens; ++t) {
                const std::size_t rt = i * tokens + t;
                for (std::size_t s = 0; s < tokens; ++s) {
                    const std::size_t rs = i * tokens + s;
                    const double w = vp2(rt, s);
                    double dot = 0.0;
                    for (std::size_t j = 0; j < width; ++j) {
                        dot += dc(rt, j) * vv2(rs, j);
                        if (need_v) {
                            (*dv)(rs, j) += w * dc(rt, j);
                        }
                    }
                    if (need_p) {
                        (*dp)(rt, s) += dot;
                    }
                }
            }
        }
    });
}

Var token_mean(Graph& g, Var x, std::size_t tokens) {
    const Tensor& vx = g.value(x);
    require_tokens("token_mean", vx, tokens);
    const std::size_t samples = vx.rows() / tokens, h = vx.cols();
    const double inv_t = 1.0 / static_cast<double>(tokens);
    Tensor out(samples, h);
    for (std::size_t i = 0; i < samples; ++i) {
        for (std::size_t t = 0; t < tokens; ++t) {
            for (std::size_t j = 0; j < h; ++j) {
                out(i, j) += vx(i * tokens + t, j) * inv_t;
            }
        }
    }
    return g.emplace(Op::TokenMean, std::move(out), {x}, [x, tokens, inv_t](Graph& gr, Var self) {
        if (!gr.requires_grad(x)) {
            return;
        }
        const Tensor& dc = gr.out_grad(self);
        Tensor& dx = gr.grad_buffer(x);
        for (std::size_t i = 0; i < dc.rows(); ++i) {
            for (std::size_t t = 0; t < tokens; ++t) {
                for (std::size_t j = 0; j < dc.cols(); ++j) {
                    dx(i * tokens + t, j) += dc(i, j) * inv_t;
                }
            }
        }
    });
}

} // namespace fairlora::ad
