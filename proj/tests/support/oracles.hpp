// Copyright (c) 2026, The fairlora authors
// SPDX-License-Identifier: Apache-2.0
//
// Independent reference implementations used by the unit tests and the
// acceptance runner. Nothing here calls into the engines it checks.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "fairlora/autodiff.hpp"
#include "fairlora/rng.hpp"
#include "fairlora/tensor.hpp"

namespace fairlora::oracle {

inline Tensor random_tensor(std::size_t r, std::size_t c, RngStream& rng, double sd = 1.0) {
    Tensor t(r, c);
    for (double& v : t.data()) {
        v = sd * rng.normal();
    }
    return t;
}

// ---------------------------------------------------------------------------
// Central finite differences

/// Builds a scalar from the given parameter vars. Called once for the analytic
/// pass and twice per perturbed coordinate.
using ScalarFn = std::function<ad::Var(ad::Graph&, const std::vector<ad::Var>&)>;

struct GradCheck {
    double rel_err = 0.0; ///< worst over inputs of ||analytic - numeric|| / max(||analytic||, ||numeric||, floor)
    std::string worst_input;
};

/// `grad_multiplier` scales the numeric gradient before comparison; the GRL check
/// uses -scale because its backward is deliberately not the derivative of its forward.
inline GradCheck check_gradients(const ScalarFn& fn, const std::vector<Tensor>& inputs, double h = 1e-6,
                                 double grad_multiplier = 1.0) {
    auto eval = [&](const std::vector<Tensor>& xs) {
        ad::Graph g;
        std::vector<ad::Var> vars;
        for (const auto& x : xs) {
            vars.push_back(g.parameter(x));
        }
        return g.value(fn(g, vars)).item();
    };

    ad::Graph g;
    std::vector<ad::Var> vars;
    for (const auto& x : inputs) {
        vars.push_back(g.parameter(x));
    }
    g.backward(fn(g, vars));

    GradCheck out;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const Tensor analytic = g.grad(vars[i]);
        std::vector<Tensor> xs = inputs;
        double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
        for (std::size_t k = 0; k < inputs[i].size(); ++k) {
            const double x0 = inputs[i][k];
            xs[i][k] = x0 + h;
            const double fp = eval(xs);
            xs[i][k] = x0 - h;
            const double fm = eval(xs);
            xs[i][k] = x0;
            const double num = grad_multiplier * (fp - fm) / (2.0 * h);
            const double a = analytic.size() == inputs[i].size() ? analytic[k] : 0.0;
            diff2 += (a - num) * (a - num);
            a2 += a * a;
            n2 += num * num;
        }
        const double denom = std::max({std::sqrt(a2), std::sqrt(n2), 1e-7});
        const double rel = std::sqrt(diff2) / denom;
        if (rel >= out.rel_err) {
            out.rel_err = rel;
            out.worst_input = "input " + std::to_string(i);
        }
    }
    return out;
}

/// Reduces any output to a scalar with element-specific weights: ||out - c||_F^2.
inline ad::Var probe(ad::Graph& g, ad::Var out, const Tensor& c) {
    return ad::frobenius_penalty(g, ad::sub(g, out, g.constant(c)), false);
}

// ---------------------------------------------------------------------------
// Metric oracles: one pass per element, no shared code with the engine.

struct Frame {
    std::vector<double> scores;
    std::vector<int> labels;
    std::vector<int> groups;
};

/// Rates for the rows whose group matches `group` (-1 = all rows).
struct Rates {
    std::optional<double> acc, ba, ppv, tpr, fpr, f1, pr;
};

inline Rates brute_rates(const Frame& f, double thr, int group) {
    double tp = 0, fp = 0, tn = 0, fn = 0;
    for (std::size_t i = 0; i < f.scores.size(); ++i) {
        if (group >= 0 && f.groups[i] != group) {
            continue;
        }
        const bool pred = f.scores[i] >= thr;
        const bool pos = f.labels[i] == 1;
        if (pred && pos) tp += 1;
        if (pred && !pos) fp += 1;
        if (!pred && !pos) tn += 1;
        if (!pred && pos) fn += 1;
    }
    Rates r;
    const double n = tp + fp + tn + fn;
    if (n > 0) {
        r.acc = (tp + tn) / n;
        r.pr = (tp + fp) / n;
    }
    if (tp + fn > 0) r.tpr = tp / (tp + fn);
    if (fp + tn > 0) r.fpr = fp / (fp + tn);
    if (r.tpr && r.fpr) r.ba = 0.5 * (*r.tpr + (1.0 - *r.fpr));
    r.ppv = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    r.f1 = 2 * tp + fp + fn > 0 ? 2 * tp / (2 * tp + fp + fn) : 0.0;
    return r;
}

/// Probability that a random positive outranks a random negative, ties counted half.
inline double roc_auc_pairs(const std::vector<double>& s, const std::vector<int>& y) {
    double wins = 0, pairs = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (y[i] != 1) continue;
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (y[j] != 0) continue;
            pairs += 1;
            wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
        }
    }
    return pairs > 0 ? wins / pairs : std::numeric_limits<double>::quiet_NaN();
}

/// Step integration of the precision-recall curve: for every distinct threshold t,
/// sum (recall(t) - recall(prev)) * precision(t), thresholds taken from high to low.
inline double pr_auc_steps(const std::vector<double>& s, const std::vector<int>& y) {
    std::vector<double> thr = s;
    std::sort(thr.begin(), thr.end(), std::greater<>());
    thr.erase(std::unique(thr.begin(), thr.end()), thr.end());
    double npos = 0;
    for (int v : y) npos += v == 1;
    if (npos == 0) return std::numeric_limits<double>::quiet_NaN();
    double area = 0.0, prev_recall = 0.0;
    for (double t : thr) {
        double tp = 0, fp = 0;
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (s[i] >= t) {
                (y[i] == 1 ? tp : fp) += 1;
            }
        }
        const double recall = tp / npos;
        area += (recall - prev_recall) * (tp / (tp + fp));
        prev_recall = recall;
    }
    return area;
}

/// Random frame with ties, tiny groups and the occasional empty class.
inline Frame random_frame(RngStream& rng) {
    Frame f;
    const std::size_t n = 1 + rng.below(60);
    const bool coarse = rng.bernoulli(0.5);
    const double p_label = rng.uniform();
    const double p_group = rng.uniform();
    for (std::size_t i = 0; i < n; ++i) {
        double s = rng.uniform();
        if (coarse) {
            s = std::round(s * 4.0) / 4.0;
        }
        f.scores.push_back(s);
        f.labels.push_back(rng.bernoulli(p_label) ? 1 : 0);
        f.groups.push_back(rng.bernoulli(p_group) ? 1 : 0);
    }
    return f;
}

} // namespace fairlora::oracle
