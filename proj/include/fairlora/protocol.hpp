// Copyright (c) 2026, The fairlora authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairlora/backbone.hpp"
#include "fairlora/binary_io.hpp"
#include "fairlora/data.hpp"
#include "fairlora/train.hpp"

namespace fairlora {

enum class MessageKind : std::uint8_t { AdapterBundle, RoundSignal };
const char* to_string(MessageKind k) noexcept; // "ADAPTER_BUNDLE" / "ROUND_SIGNAL"

struct TranscriptEntry {
    Party sender = Party::SolutionDeveloper;
    Party receiver = Party::ComplianceOfficer;
    MessageKind kind = MessageKind::AdapterBundle;
    std::string sha256;
    std::size_t bytes = 0;
    std::size_t round = 0;
    /// Exact payload as it crossed the boundary.
    io::Bytes payload;

    bool operator==(const TranscriptEntry&) const = default;
};

struct Transcript {
    Strategy strategy = Strategy::Erm;
    std::size_t adv_rounds = 0;
    std::string backbone_sha256;
    std::vector<TranscriptEntry> entries;
    bool complete = false;
    std::string error;

    std::size_t count(MessageKind k) const;
    /// JSON log; payloads are written next to it as .flra files and referenced by name.
    void save(const std::filesystem::path& path) const;
    static Transcript load(const std::filesystem::path& path);
};

/// Solution Developer: task-labelled data and the task head. There is no member that
/// could hold group labels or a sensitive head.
class SdContext {
public:
    SdContext(std::shared_ptr<const Backbone> base, TaskDataset data);

    const Backbone& base() const noexcept { return *base_; }
    const std::string& backbone_hash() const noexcept { return hash_; }
    const TaskDataset& data() const noexcept { return data_; }
    const std::optional<ClassifierHead>& task_head() const noexcept { return task_head_; }
    void set_task_head(ClassifierHead head);

private:
    std::shared_ptr<const Backbone> base_;
    std::string hash_;
    TaskDataset data_;
    std::optional<ClassifierHead> task_head_;
};

/// Compliance Officer: group-labelled data and the sensitive head, never task labels.
class CoContext {
public:
    CoContext(std::shared_ptr<const Backbone> base, SensitiveDataset data);

    const Backbone& base() const noexcept { return *base_; }
    const std::string& backbone_hash() const noexcept { return hash_; }
    const SensitiveDataset& data() const noexcept { return data_; }
    const std::optional<ClassifierHead>& sensitive_head() const noexcept { return sensitive_head_; }
    void set_sensitive_head(ClassifierHead head);

    /// CO's own sensitive ERM result, reused when the same config runs UNL and ORTH.
    const LoraAdapterStack* cached_sensitive(const TrainConfig& cfg) const;
    void cache_sensitive(const TrainConfig& cfg, LoraAdapterStack stack);

private:
    std::shared_ptr<const Backbone> base_;
    std::string hash_;
    SensitiveDataset data_;
    std::optional<ClassifierHead> sensitive_head_;
    std::optional<std::pair<TrainConfig, LoraAdapterStack>> cache_;
};

/// Point-to-point transport between the two parties.
class Channel {
public:
    virtual ~Channel() = default;
    virtual void send(Party from, std::size_t round, const io::Bytes& bundle) = 0;
    /// Blocks until the next message addressed to `me` arrives. Throws ProtocolError on
    /// timeout or when the counterpart aborted.
    virtual io::Bytes receive(Party me, std::size_t round) = 0;
    /// Unblocks the counterpart after a local failure.
    virtual void abort(Party from, const std::string& why) = 0;
};

struct ProtocolOptions {
    std::chrono::milliseconds timeout{std::chrono::minutes(10)};
    std::chrono::milliseconds poll{50};
    /// Fault injection for tests: CO exits after sending this many bundles.
    std::optional<std::size_t> co_exit_after;
};

struct ProtocolResult {
    TrainedArtifacts sd;                        ///< evaluation artifacts, all at SD
    std::optional<ClassifierHead> co_head;      ///< kept by CO, reported for the audit only
    Transcript transcript;
};

/// The SD and CO halves of a strategy's exchange script.
TrainedArtifacts run_sd_role(Strategy s, SdContext& sd, Channel& ch, const TrainConfig& cfg, Transcript& log);
void run_co_role(Strategy s, CoContext& co, Channel& ch, const TrainConfig& cfg,
                 std::optional<std::size_t> exit_after = std::nullopt);

/// Both parties in one process, one thread each, over an in-memory channel that carries
/// encoded bundles. Throws ProtocolError on a backbone hash mismatch or a malformed bundle.
ProtocolResult run_protocol(Strategy s, SdContext& sd, CoContext& co, const TrainConfig& cfg);

/// CO runs in a forked child process; the parties exchange .flra files and one-line JSON
/// round signals in `dir`. The transcript is persisted to dir/transcript.json even when
/// the run aborts.
ProtocolResult run_distributed(Strategy s, std::shared_ptr<const Backbone> base, const DatasetSplits& data,
                               const TrainConfig& cfg, const std::filesystem::path& dir,
                               const ProtocolOptions& opts = {});

/// File transport used by run_distributed and the `party` CLI command.
std::unique_ptr<Channel> make_file_channel(const std::filesystem::path& dir, std::string backbone_hash,
                                           const ProtocolOptions& opts);

struct AuditCheck {
    std::string name;
    bool pass = true;
    std::string detail;
};

struct AuditReport {
    std::vector<AuditCheck> checks;
    bool pass() const;
    std::string to_text() const;
};

/// Expected ADAPTER_BUNDLE count: ERM 0, UNL 1, ORTH 1, ADV 2K.
std::size_t expected_messages(Strategy s, std::size_t adv_rounds);

/// (a) payloads decode as .flra bundles, (b) no head tensor bytes in any payload,
/// (c) no dataset row (f32 or f64 serialization) in any payload, (d) message script.
AuditReport audit_transcript(const Transcript& t, std::span<const Tensor* const> datasets,
                             std::span<const ClassifierHead* const> heads);

void save_head(const ClassifierHead& head, const std::filesystem::path& path);
ClassifierHead load_head(const std::filesystem::path& path);

} // namespace fairlora
