// Copyright (c) 2026, The fairlora authors
// SPDX-License-Identifier: Apache-2.0
//

#include "fairlora/data.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "fairlora/binary_io.hpp"
#include "fairlora/errors.hpp"
#include "fairlora/rng.hpp"

namespace fairlora {

const char* to_string(LabelKind k) noexcept { return k == LabelKind::Task ? "task" : "sensitive"; }

template <LabelKind K>
LabeledDataset<K> LabeledDataset<K>::subset(std::span<const std::size_t> idx) const {
    LabeledDataset out;
    out.x = Tensor(idx.size(), x.cols());
    out.labels.reserve(idx.size());
    out.row_ids.reserve(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] >= size()) {
            throw DomainError("subset index " + std::to_string(idx[i]) + " out of range");
        }
        std::copy_n(x.data().data() + idx[i] * x.cols(), x.cols(), &out.x(i, 0));
        out.labels.push_back(labels[idx[i]]);
        if (!row_ids.empty()) {
            out.row_ids.push_back(row_ids[idx[i]]);
        }
    }
    return out;
}

template struct LabeledDataset<LabelKind::Task>;
template struct LabeledDataset<LabelKind::Sensitive>;

void GenSpec::validate() const {
    auto prob = [](double p, const char* name) {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw ConfigError(std::string(name) + " must lie in [0, 1]");
        }
    };
    prob(beta, "beta");
    prob(eta, "eta");
    prob(p_group, "p_group");
    for (double r : pos_rate) {
        if (!(r > 0.0 && r < 1.0)) {
            throw ConfigError("pos_rate entries must lie in (0, 1)");
        }
    }
    if (features < 4) {
        throw ConfigError("need at least 4 features");
    }
    if (n < 20) {
        throw ConfigError("need at least 20 rows per party");
    }
    if (!(task_noise > 0.0) || !(group_amp >= 0.0)) {
        throw ConfigError("task_noise must be positive and group_amp non-negative");
    }
}

ChannelLayout channel_layout(std::size_t features) {
    const std::size_t c = features / 4;
    return {c, c, c, features - 3 * c};
}

namespace {

double probit(double p) { return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p); }
double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Label offset per group. Zero at beta = 0, so y is independent of g there.
double offset(const GenSpec& spec, int g) { return spec.beta * probit(spec.pos_rate[static_cast<std::size_t>(g)]); }

struct SplitSizes {
    std::size_t train, val, test;
};

SplitSizes split_sizes(const GenSpec& spec) {
    const std::size_t val = spec.n * 15 / 100;
    const std::size_t test = spec.test_n > 0 ? spec.test_n : spec.n * 15 / 100;
    return {spec.n - 2 * (spec.n * 15 / 100), val, test};
}

template <LabelKind K>
void append(LabeledDataset<K>& ds, const Sample& s, int label, std::uint64_t id, std::size_t row) {
    std::copy(s.x.begin(), s.x.end(), &ds.x(row, 0));
    ds.labels.push_back(label);
    ds.row_ids.push_back(id);
}

} // namespace

Sample draw_sample(const GenSpec& spec, std::uint64_t row_id) {
    RngStream rng = RngStream(spec.seed, "data").child("row" + std::to_string(row_id));
    const ChannelLayout ch = channel_layout(spec.features);
    Sample s;
    s.g = rng.bernoulli(spec.p_group) ? 1 : 0;
    const double sign = s.g == 1 ? 1.0 : -1.0;
    s.x.reserve(spec.features);

    double proj = 0.0;
    const double w = 1.0 / std::sqrt(static_cast<double>(ch.task));
    for (std::size_t j = 0; j < ch.task; ++j) {
        const double z = rng.normal();
        proj += w * z;
        s.x.push_back(z + spec.task_noise * rng.normal());
    }
    for (std::size_t j = 0; j < ch.group; ++j) {
        s.x.push_back(sign * spec.group_amp + rng.normal());
    }
    for (std::size_t j = 0; j < ch.mixed; ++j) {
        s.x.push_back(spec.beta * sign + (1.0 - spec.beta) * rng.normal());
    }
    for (std::size_t j = 0; j < ch.noise; ++j) {
        s.x.push_back(rng.normal());
    }
    s.y = proj + offset(spec, s.g) > 0.0 ? 1 : 0;
    if (rng.bernoulli(spec.eta)) {
        s.y = 1 - s.y;
    }
    return s;
}

DatasetSplits generate(const GenSpec& spec) {
    spec.validate();
    const SplitSizes sz = split_sizes(spec);
    const std::size_t f = spec.features;
    DatasetSplits out;
    out.sd_train.x = Tensor(sz.train, f);
    out.sd_val.x = Tensor(sz.val, f);
    out.sd_test.x = Tensor(sz.test, f);
    out.co_train.x = Tensor(spec.n, f);

    std::uint64_t id = 0;
    for (std::size_t i = 0; i < sz.train; ++i, ++id) {
        const Sample s = draw_sample(spec, id);
        append(out.sd_train, s, s.y, id, i);
    }
    for (std::size_t i = 0; i < sz.val; ++i, ++id) {
        const Sample s = draw_sample(spec, id);
        append(out.sd_val, s, s.y, id, i);
        out.sidecar.val_groups.push_back(s.g);
    }
    for (std::size_t i = 0; i < sz.test; ++i, ++id) {
        const Sample s = draw_sample(spec, id);
        append(out.sd_test, s, s.y, id, i);
        out.sidecar.test_groups.push_back(s.g);
    }
    for (std::size_t i = 0; i < spec.n; ++i, ++id) {
        const Sample s = draw_sample(spec, id);
        append(out.co_train, s, s.g, id, i);
    }
    return out;
}

double bayes_posterior(const GenSpec& spec, std::span<const double> x) {
    const ChannelLayout ch = channel_layout(spec.features);
    if (x.size() != spec.features) {
        throw ShapeError("bayes_posterior: expected " + std::to_string(spec.features) + " features");
    }
    // z | x_task ~ N(x / (1 + s2), s2 / (1 + s2) I); the projection w'z is then Gaussian.
    const double s2 = spec.task_noise * spec.task_noise;
    const double w = 1.0 / std::sqrt(static_cast<double>(ch.task));
    double mu = 0.0;
    for (std::size_t j = 0; j < ch.task; ++j) {
        mu += w * x[j] / (1.0 + s2);
    }
    const double sd = std::sqrt(s2 / (1.0 + s2));

    // log P(x_group, x_mixed | g = 1) - log P(.. | g = 0)
    double llr = 0.0;
    for (std::size_t j = 0; j < ch.group; ++j) {
        llr += 2.0 * spec.group_amp * x[ch.task + j];
    }
    const double mvar = std::max((1.0 - spec.beta) * (1.0 - spec.beta), 1e-12);
    for (std::size_t j = 0; j < ch.mixed; ++j) {
        llr += 2.0 * spec.beta * x[ch.task + ch.group + j] / mvar;
    }
    double p1 = 0.0;
    if (spec.p_group <= 0.0) {
        p1 = 0.0;
    } else if (spec.p_group >= 1.0) {
        p1 = 1.0;
    } else {
        const double logit = llr + std::log(spec.p_group / (1.0 - spec.p_group));
        p1 = 1.0 / (1.0 + std::exp(-std::clamp(logit, -700.0, 700.0)));
    }

    double post = 0.0;
    for (int g = 0; g < 2; ++g) {
        const double clean = normal_cdf((mu + offset(spec, g)) / sd);
        const double noisy = (1.0 - spec.eta) * clean + spec.eta * (1.0 - clean);
        post += (g == 1 ? p1 : 1.0 - p1) * noisy;
    }
    return post;
}

BayesReference bayes_reference(const GenSpec& spec, std::size_t n) {
    spec.validate();
    GenSpec ref = spec;
    ref.seed = spec.seed ^ 0x9e3779b97f4a7c15ull;
    std::size_t correct = 0;
    std::array<std::size_t, 2> pos{0, 0}, count{0, 0};
    for (std::size_t i = 0; i < n; ++i) {
        const Sample s = draw_sample(ref, i);
        const int pred = bayes_posterior(ref, s.x) >= 0.5 ? 1 : 0;
        correct += pred == s.y;
        ++count[s.g];
        pos[s.g] += pred;
    }
    BayesReference r;
    r.n = n;
    r.accuracy = static_cast<double>(correct) / static_cast<double>(n);
    r.accuracy_ci = 1.96 * std::sqrt(r.accuracy * (1.0 - r.accuracy) / static_cast<double>(n));
    if (count[0] > 0 && count[1] > 0) {
        const double a = static_cast<double>(pos[0]) / static_cast<double>(count[0]);
        const double b = static_cast<double>(pos[1]) / static_cast<double>(count[1]);
        r.dp_diff = std::abs(a - b);
        r.dp_ci = 1.96 * std::sqrt(a * (1 - a) / static_cast<double>(count[0]) +
                                   b * (1 - b) / static_cast<double>(count[1]));
    }
    return r;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

bool names_sensitive(const std::string& col) {
    return col == "g" || col == "group" || col == "sensitive" || col == "sensitive_label";
}
bool names_task(const std::string& col) {
    return col == "y" || col == "task" || col == "target" || col == "task_label";
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        if (!cell.empty() && cell.back() == '\r') {
            cell.pop_back();
        }
        cells.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') {
        cells.emplace_back();
    }
    return cells;
}

template <LabelKind K>
LabeledDataset<K> load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open " + path.string());
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw FormatError("empty CSV " + path.string(), 0);
    }
    const auto header = split_csv(line);
    std::size_t f = 0;
    bool has_label = false;
    for (std::size_t i = 0; i < header.size(); ++i) {
        const std::string& col = header[i];
        if (col == "feature_" + std::to_string(f) && !has_label) {
            ++f;
        } else if (col == "label" && !has_label) {
            has_label = true;
        } else if (K == LabelKind::Task && names_sensitive(col)) {
            throw ConfigError("task CSV carries a sensitive column '" + col + "'");
        } else if (K == LabelKind::Sensitive && names_task(col)) {
            throw ConfigError("sensitive CSV carries a task column '" + col + "'");
        } else {
            throw FormatError("unexpected CSV column '" + col + "'", 0);
        }
    }
    if (f == 0 || !has_label || header.back() != "label") {
        throw FormatError("CSV header must be feature_0..feature_{f-1},label", 0);
    }

    std::vector<double> values;
    LabeledDataset<K> ds;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") {
            continue;
        }
        const auto cells = split_csv(line);
        if (cells.size() != f + 1) {
            throw FormatError("line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                                  " cells, expected " + std::to_string(f + 1),
                              0);
        }
        for (std::size_t j = 0; j < f; ++j) {
            try {
                std::size_t used = 0;
                values.push_back(std::stod(cells[j], &used));
                if (used != cells[j].size()) {
                    throw std::invalid_argument(cells[j]);
                }
            } catch (const std::exception&) {
                throw FormatError("line " + std::to_string(line_no) + ": bad number '" + cells[j] + "'", 0);
            }
        }
        if (cells[f] != "0" && cells[f] != "1") {
            throw DomainError("line " + std::to_string(line_no) + ": label must be 0 or 1");
        }
        ds.labels.push_back(cells[f] == "1" ? 1 : 0);
        ds.row_ids.push_back(ds.labels.size() - 1);
    }
    ds.x = Tensor(ds.labels.size(), f, std::move(values));
    return ds;
}

} // namespace

TaskDataset load_task_csv(const std::filesystem::path& path) { return load_csv<LabelKind::Task>(path); }
SensitiveDataset load_sensitive_csv(const std::filesystem::path& path) {
    return load_csv<LabelKind::Sensitive>(path);
}

template <LabelKind K>
void save_csv(const LabeledDataset<K>& ds, const std::filesystem::path& path) {
    std::ostringstream os;
    os.precision(17);
    for (std::size_t j = 0; j < ds.features(); ++j) {
        os << "feature_" << j << ',';
    }
    os << "label\n";
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (std::size_t j = 0; j < ds.features(); ++j) {
            os << ds.x(i, j) << ',';
        }
        os << ds.labels[i] << '\n';
    }
    io::write_text_atomic(path, os.str());
}

template void save_csv(const TaskDataset&, const std::filesystem::path&);
template void save_csv(const SensitiveDataset&, const std::filesystem::path&);

} // namespace fairlora
