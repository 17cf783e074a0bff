// Copyright (c) 2026, The fairlora authors
// SPDX-License-Identifier: Apache-2.0
//

#include "fairlora/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "fairlora/errors.hpp"

namespace fairlora {

void EvalFrame::validate() const {
    if (labels.size() != scores.size() || groups.size() != scores.size()) {
        throw DomainError("eval frame columns differ in length");
    }
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!(scores[i] >= 0.0 && scores[i] <= 1.0)) {
            throw DomainError("score at row " + std::to_string(i) + " outside [0, 1]");
        }
        if ((labels[i] != 0 && labels[i] != 1) || (groups[i] != 0 && groups[i] != 1)) {
            throw DomainError("label or group at row " + std::to_string(i) + " is not 0 or 1");
        }
    }
}

Confusion confusion(const EvalFrame& frame, double threshold) {
    if (frame.size() == 0) {
        throw DomainError("confusion of an empty frame");
    }
    if (!(threshold >= 0.0 && threshold <= 1.0)) {
        throw DomainError("threshold must lie in [0, 1]");
    }
    frame.validate();
    Confusion c;
    for (std::size_t i = 0; i < frame.size(); ++i) {
        const bool pred = frame.scores[i] >= threshold;
        const bool pos = frame.labels[i] == 1;
        Counts& grp = c.group[static_cast<std::size_t>(frame.groups[i])];
        for (Counts* k : {&c.overall, &grp}) {
            if (pred && pos) {
                ++k->tp;
            } else if (pred) {
                ++k->fp;
            } else if (pos) {
                ++k->fn;
            } else {
                ++k->tn;
            }
        }
    }
    return c;
}

const char* metric_name(Metric m) noexcept {
    switch (m) {
    case Metric::Acc: return "ACC";
    case Metric::Ba: return "BA";
    case Metric::Ppv: return "PPV";
    case Metric::Tpr: return "TPR";
    case Metric::Fpr: return "FPR";
    case Metric::F1: return "F1";
    case Metric::Dp: return "DP";
    case Metric::RocAuc: return "ROC_AUC";
    case Metric::PrAuc: return "PR_AUC";
    }
    return "?";
}

UtilityMetrics utility_metrics(const Counts& c) {
    const auto d = [](std::uint64_t x) { return static_cast<double>(x); };
    UtilityMetrics u;
    const std::uint64_t n = c.total();
    const std::uint64_t pos = c.tp + c.fn;
    const std::uint64_t neg = c.fp + c.tn;
    const std::uint64_t pred_pos = c.tp + c.fp;
    if (n > 0) {
        u.acc.v = d(c.tp + c.tn) / d(n);
        u.positive_rate.v = d(pred_pos) / d(n);
    }
    if (pos > 0) {
        u.tpr.v = d(c.tp) / d(pos);
    }
    if (neg > 0) {
        u.fpr.v = d(c.fp) / d(neg);
    }
    if (u.tpr.defined() && u.fpr.defined()) {
        u.ba.v = (*u.tpr.v + (1.0 - *u.fpr.v)) / 2.0;
    }
    if (pred_pos > 0) {
        u.ppv.v = d(c.tp) / d(pred_pos);
    } else {
        u.ppv = {0.0, true};
    }
    const std::uint64_t f1_den = 2 * c.tp + c.fp + c.fn;
    if (f1_den > 0) {
        u.f1.v = 2.0 * d(c.tp) / d(f1_den);
    } else {
        u.f1 = {0.0, true};
    }
    return u;
}

Value pick(const UtilityMetrics& u, Metric m) {
    switch (m) {
    case Metric::Acc: return u.acc;
    case Metric::Ba: return u.ba;
    case Metric::Ppv: return u.ppv;
    case Metric::Tpr: return u.tpr;
    case Metric::Fpr: return u.fpr;
    case Metric::F1: return u.f1;
    case Metric::Dp: return u.positive_rate;
    default: throw DomainError(std::string(metric_name(m)) + " is not a thresholded metric");
    }
}

std::optional<double> difference(const Value& a, const Value& b) {
    if (!a.defined() || !b.defined()) {
        return std::nullopt;
    }
    return std::abs(*a.v - *b.v);
}

std::optional<double> ratio(const Value& a, const Value& b) {
    if (!a.defined() || !b.defined()) {
        return std::nullopt;
    }
    const double x = *a.v, y = *b.v;
    if (x == 0.0 && y == 0.0) {
        return 1.0;
    }
    if (x == 0.0 || y == 0.0) {
        return 0.0;
    }
    return std::min(x / y, y / x);
}

namespace {

std::array<UtilityMetrics, 2> group_utilities(const EvalFrame& frame, double threshold) {
    const Confusion c = confusion(frame, threshold);
    if (c.group[0].total() == 0 || c.group[1].total() == 0) {
        throw DomainError("group metrics need both groups present");
    }
    return {utility_metrics(c.group[0]), utility_metrics(c.group[1])};
}

struct GroupFrames {
    std::array<std::vector<double>, 2> scores;
    std::array<std::vector<int>, 2> labels;
};

GroupFrames split_groups(const EvalFrame& frame) {
    GroupFrames gf;
    for (std::size_t i = 0; i < frame.size(); ++i) {
        const auto g = static_cast<std::size_t>(frame.groups[i]);
        gf.scores[g].push_back(frame.scores[i]);
        gf.labels[g].push_back(frame.labels[i]);
    }
    return gf;
}

bool both_classes(std::span<const int> labels) {
    bool has0 = false, has1 = false;
    for (int y : labels) {
        has0 |= y == 0;
        has1 |= y == 1;
    }
    return has0 && has1;
}

Value auc_value(Metric m, std::span<const double> s, std::span<const int> y) {
    if (!both_classes(y)) {
        return {};
    }
    return {m == Metric::RocAuc ? roc_auc(s, y) : pr_auc(s, y), false};
}

} // namespace

std::optional<double> fairness_difference(const EvalFrame& frame, double threshold, Metric m) {
    const auto u = group_utilities(frame, threshold);
    return difference(pick(u[0], m), pick(u[1], m));
}

std::optional<double> fairness_ratio(const EvalFrame& frame, double threshold, Metric m) {
    const auto u = group_utilities(frame, threshold);
    return ratio(pick(u[0], m), pick(u[1], m));
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) {
        throw DomainError("roc_auc: scores and labels differ in length");
    }
    if (!both_classes(labels)) {
        throw DomainError("roc_auc needs both label values");
    }
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double rank_sum = 0.0;
    std::size_t npos = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) {
            ++j;
        }
        const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]] == 1) {
                rank_sum += midrank;
                ++npos;
            }
        }
        i = j;
    }
    const double p = static_cast<double>(npos);
    const double q = static_cast<double>(n - npos);
    return (rank_sum - p * (p + 1.0) / 2.0) / (p * q);
}

double pr_auc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) {
        throw DomainError("pr_auc: scores and labels differ in length");
    }
    if (!both_classes(labels)) {
        throw DomainError("pr_auc needs both label values");
    }
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    const double total_pos = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
    double tp = 0.0, fp = 0.0, prev_recall = 0.0, ap = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) {
            (labels[order[j]] == 1 ? tp : fp) += 1.0;
            ++j;
        }
        const double recall = tp / total_pos;
        ap += (recall - prev_recall) * (tp / (tp + fp));
        prev_recall = recall;
        i = j;
    }
    return ap;
}

const MetricRow& FairnessReport::at(Metric m) const {
    for (const auto& r : rows) {
        if (r.metric == m) {
            return r;
        }
    }
    throw DomainError(std::string("report has no row for ") + metric_name(m));
}

FairnessReport evaluate(const EvalFrame& frame, double threshold) {
    FairnessReport rep;
    rep.threshold = threshold;
    rep.counts = confusion(frame, threshold);
    if (rep.counts.group[0].total() == 0 || rep.counts.group[1].total() == 0) {
        throw DomainError("group metrics need both groups present");
    }
    const UtilityMetrics all = utility_metrics(rep.counts.overall);
    const std::array<UtilityMetrics, 2> per{utility_metrics(rep.counts.group[0]),
                                            utility_metrics(rep.counts.group[1])};
    const GroupFrames gf = split_groups(frame);

    for (Metric m : kAllMetrics) {
        MetricRow row{m, {}, {}, std::nullopt, std::nullopt};
        if (m == Metric::RocAuc || m == Metric::PrAuc) {
            row.overall = auc_value(m, frame.scores, frame.labels);
            for (std::size_t g = 0; g < 2; ++g) {
                row.group[g] = auc_value(m, gf.scores[g], gf.labels[g]);
            }
        } else {
            row.overall = pick(all, m);
            row.group = {pick(per[0], m), pick(per[1], m)};
        }
        row.difference = difference(row.group[0], row.group[1]);
        row.ratio = ratio(row.group[0], row.group[1]);
        for (std::size_t g = 0; g < 2; ++g) {
            const std::string where = std::string(metric_name(m)) + " group " + std::to_string(g);
            if (!row.group[g].defined()) {
                rep.flags.push_back(where + ": undefined (empty denominator), excluded from gaps");
            } else if (row.group[g].degenerate) {
                rep.flags.push_back(where + ": no predicted positives, set to 0");
            }
        }
        rep.rows.push_back(row);
    }
    return rep;
}

int difference_band(double d) {
    constexpr double edges[] = {0.1, 0.2, 0.3, 0.4, 0.5};
    int band = 1;
    for (double e : edges) {
        if (d < e) {
            return band;
        }
        ++band;
    }
    return band;
}

int ratio_band(double r) {
    constexpr double edges[] = {0.9, 0.8, 0.7, 0.6, 0.5};
    int band = 1;
    for (double e : edges) {
        if (r > e) {
            return band;
        }
        ++band;
    }
    return band;
}

const char* band_name(int band) {
    static const char* names[] = {"Green", "YellowGreen", "Yellow", "YellowOrange", "Orange", "OrangeRed"};
    if (band < 1 || band > 6) {
        throw DomainError("band out of range");
    }
    return names[band - 1];
}

ReportFormat parse_format(const std::string& s) {
    if (s == "csv") {
        return ReportFormat::Csv;
    }
    if (s == "md" || s == "markdown") {
        return ReportFormat::Markdown;
    }
    throw ConfigError("unknown format '" + s + "' (expected csv or md)");
}

MeanStd mean_std(std::span<const double> xs) {
    MeanStd r;
    r.n = xs.size();
    if (xs.empty()) {
        return r;
    }
    r.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) {
            ss += (x - r.mean) * (x - r.mean);
        }
        r.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    }
    return r;
}

namespace {

std::string fmt(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string csv_value(const std::optional<double>& v) { return v ? fmt(*v, 17) : "NA"; }

std::vector<std::string> strategy_order(std::span<const RunRecord> runs) {
    std::vector<std::string> order;
    for (const auto& r : runs) {
        if (std::find(order.begin(), order.end(), r.strategy) == order.end()) {
            order.push_back(r.strategy);
        }
    }
    return order;
}

enum class Field { Overall, Difference, Ratio };

std::optional<double> field_of(const MetricRow& row, Field f) {
    switch (f) {
    case Field::Overall: return row.overall.v;
    case Field::Difference: return row.difference;
    case Field::Ratio: return row.ratio;
    }
    return std::nullopt;
}

struct Column {
    const char* title;
    Metric metric;
    Field field;
};

std::string cell(std::span<const RunRecord> runs, const std::string& strategy, const Column& col) {
    std::vector<double> xs;
    for (const auto& r : runs) {
        if (r.strategy == strategy) {
            if (auto v = field_of(r.report.at(col.metric), col.field)) {
                xs.push_back(*v);
            }
        }
    }
    if (xs.empty()) {
        return "n/a";
    }
    const MeanStd ms = mean_std(xs);
    std::string s = fmt(ms.mean, 3) + " ± " + fmt(ms.std, 3);
    if (col.field == Field::Difference) {
        s += " [" + std::string(band_name(difference_band(ms.mean))) + "]";
    } else if (col.field == Field::Ratio) {
        s += " [" + std::string(band_name(ratio_band(ms.mean))) + "]";
    }
    return s;
}

void table(std::ostringstream& os, std::span<const RunRecord> runs, const std::vector<std::string>& strategies,
           const char* caption, std::span<const Column> cols) {
    os << "### " << caption << "\n\n| Strategy |";
    for (const auto& c : cols) {
        os << ' ' << c.title << " |";
    }
    os << "\n|---|";
    for (std::size_t i = 0; i < cols.size(); ++i) {
        os << "---|";
    }
    os << '\n';
    for (const auto& s : strategies) {
        os << "| " << s << " |";
        for (const auto& c : cols) {
            os << ' ' << cell(runs, s, c) << " |";
        }
        os << '\n';
    }
    os << '\n';
}

} // namespace

std::string render_csv(std::span<const RunRecord> runs) {
    std::ostringstream os;
    os << "strategy,seed,metric,value\n";
    for (const auto& r : runs) {
        auto line = [&](const std::string& name, const std::optional<double>& v) {
            os << r.strategy << ',' << r.seed << ',' << name << ',' << csv_value(v) << '\n';
        };
        for (const auto& row : r.report.rows) {
            const std::string name = metric_name(row.metric);
            line(name, row.overall.v);
            line(name + "_g0", row.group[0].v);
            line(name + "_g1", row.group[1].v);
            line("diff_" + name, row.difference);
            line("ratio_" + name, row.ratio);
        }
    }
    return os.str();
}

std::string render_markdown(std::span<const RunRecord> runs) {
    const auto strategies = strategy_order(runs);
    std::size_t seeds = 0;
    for (const auto& r : runs) {
        seeds = std::max<std::size_t>(seeds, static_cast<std::size_t>(
                                                 std::count_if(runs.begin(), runs.end(), [&](const RunRecord& o) {
                                                     return o.strategy == r.strategy;
                                                 })));
    }
    const double threshold = runs.empty() ? 0.5 : runs.front().report.threshold;
    std::ostringstream os;
    os << "Mean ± std over " << seeds << " seed(s), threshold " << fmt(threshold, 2) << ".\n\n";

    using M = Metric;
    const Column utility[] = {{"ACC", M::Acc, Field::Overall}, {"BA", M::Ba, Field::Overall},
                              {"PPV", M::Ppv, Field::Overall}, {"TPR", M::Tpr, Field::Overall},
                              {"FPR", M::Fpr, Field::Overall}, {"F1", M::F1, Field::Overall}};
    const Column diffs[] = {{"ΔACC", M::Acc, Field::Difference}, {"ΔBA", M::Ba, Field::Difference},
                            {"ΔPPV", M::Ppv, Field::Difference}, {"ΔTPR", M::Tpr, Field::Difference},
                            {"ΔFPR", M::Fpr, Field::Difference}, {"ΔF1", M::F1, Field::Difference},
                            {"DP", M::Dp, Field::Difference}};
    const Column ratios[] = {{"ACC", M::Acc, Field::Ratio}, {"BA", M::Ba, Field::Ratio},
                             {"PPV", M::Ppv, Field::Ratio}, {"TPR", M::Tpr, Field::Ratio},
                             {"FPR", M::Fpr, Field::Ratio}, {"F1", M::F1, Field::Ratio},
                             {"DP", M::Dp, Field::Ratio}};
    const Column aucs[] = {{"ROC", M::RocAuc, Field::Overall},    {"PR", M::PrAuc, Field::Overall},
                           {"ΔROC", M::RocAuc, Field::Difference}, {"ΔPR", M::PrAuc, Field::Difference},
                           {"ROC ratio", M::RocAuc, Field::Ratio}, {"PR ratio", M::PrAuc, Field::Ratio}};
    table(os, runs, strategies, "Utility", utility);
    table(os, runs, strategies, "Fairness differences (lower is better)", diffs);
    table(os, runs, strategies, "Fairness ratios (higher is better)", ratios);
    table(os, runs, strategies, "Threshold-independent AUC", aucs);
    os << "Bands: differences Green < 0.1 <= YellowGreen < 0.2 <= Yellow < 0.3 <= YellowOrange < 0.4 <= Orange"
          " < 0.5 <= OrangeRed; ratios Green > 0.9 >= YellowGreen > 0.8 >= Yellow > 0.7 >= YellowOrange > 0.6"
          " >= Orange > 0.5 >= OrangeRed. Undefined gaps (empty denominators) are excluded from the means.\n";
    return os.str();
}

std::string render_report(std::span<const RunRecord> runs, ReportFormat format) {
    return format == ReportFormat::Csv ? render_csv(runs) : render_markdown(runs);
}

} // namespace fairlora
