// Copyright (c) 2026, The fairlora authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fairlora {

/// Scores in [0, 1], binary labels and binary groups of equal length.
struct EvalFrame {
    std::vector<double> scores;
    std::vector<int> labels;
    std::vector<int> groups;

    /// Throws DomainError on length mismatch, non-binary entries or scores outside [0, 1].
    void validate() const;
    std::size_t size() const noexcept { return scores.size(); }
};

struct Counts {
    std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
    std::uint64_t total() const noexcept { return tp + fp + tn + fn; }
    bool operator==(const Counts&) const = default;
};

struct Confusion {
    Counts overall;
    std::array<Counts, 2> group;
};

/// Prediction is positive iff score >= threshold. Throws DomainError on an empty frame
/// or a threshold outside [0, 1].
Confusion confusion(const EvalFrame& frame, double threshold);

enum class Metric : std::uint8_t { Acc, Ba, Ppv, Tpr, Fpr, F1, Dp, RocAuc, PrAuc };
inline constexpr std::array<Metric, 9> kAllMetrics{Metric::Acc, Metric::Ba, Metric::Ppv, Metric::Tpr,  Metric::Fpr,
                                                   Metric::F1,  Metric::Dp, Metric::RocAuc, Metric::PrAuc};
const char* metric_name(Metric m) noexcept; // "ACC", "BA", ..., "DP", "ROC_AUC", "PR_AUC"

/// A metric value that may be undefined (empty denominator). PPV and F1 with an empty
/// denominator are defined as 0 and carry `degenerate`.
struct Value {
    std::optional<double> v;
    bool degenerate = false;

    bool defined() const noexcept { return v.has_value(); }
};

struct UtilityMetrics {
    Value acc, ba, ppv, tpr, fpr, f1;
    /// P(prediction = 1).
    Value positive_rate;
};

UtilityMetrics utility_metrics(const Counts& c);
Value pick(const UtilityMetrics& u, Metric m);

/// |m_0 - m_1|; nullopt when either group value is undefined.
std::optional<double> difference(const Value& a, const Value& b);
/// min(a/b, b/a); both zero gives 1, exactly one zero gives 0; nullopt when undefined.
std::optional<double> ratio(const Value& a, const Value& b);

/// Throws DomainError when a group is empty. Metric::Dp uses the positive-prediction rate.
std::optional<double> fairness_difference(const EvalFrame& frame, double threshold, Metric m);
std::optional<double> fairness_ratio(const EvalFrame& frame, double threshold, Metric m);

/// Mann-Whitney statistic with midranks for ties. Throws DomainError for single-class labels.
double roc_auc(std::span<const double> scores, std::span<const int> labels);
/// Average precision: sum over distinct thresholds of (R_k - R_{k-1}) * P_k.
double pr_auc(std::span<const double> scores, std::span<const int> labels);

struct MetricRow {
    Metric metric;
    Value overall;
    std::array<Value, 2> group;
    std::optional<double> difference;
    std::optional<double> ratio;
};

struct FairnessReport {
    double threshold = 0.5;
    Confusion counts;
    std::vector<MetricRow> rows; ///< in kAllMetrics order
    std::vector<std::string> flags;

    const MetricRow& at(Metric m) const;
};

/// Full battery. Throws DomainError when a group is empty.
FairnessReport evaluate(const EvalFrame& frame, double threshold = 0.5);

/// 1 (no bias) .. 6 (strong bias). Differences split at 0.1, 0.2, 0.3, 0.4, 0.5;
/// ratios at 0.9, 0.8, 0.7, 0.6, 0.5.
int difference_band(double d);
int ratio_band(double r);
const char* band_name(int band); // Green .. OrangeRed

enum class ReportFormat { Csv, Markdown };
ReportFormat parse_format(const std::string& s);

struct RunRecord {
    std::string strategy;
    std::uint64_t seed = 0;
    FairnessReport report;
};

/// One row per (strategy, seed, metric, value); undefined values print as NA.
std::string render_csv(std::span<const RunRecord> runs);
/// Mean +- std (sample std, 3 decimals) per strategy in four tables: utility, differences
/// with DP, ratios with DP, and AUC. Fairness cells carry their band.
std::string render_markdown(std::span<const RunRecord> runs);
std::string render_report(std::span<const RunRecord> runs, ReportFormat format);

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;
    std::size_t n = 0;
};
MeanStd mean_std(std::span<const double> xs);

} // namespace fairlora
