// Copyright (c) 2026, The fairlora authors
// SPDX-License-Identifier: Apache-2.0
//

#include "fairlora/protocol.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <mutex>
#include <thread>
#include <unordered_set>

#include "fairlora/errors.hpp"
#include "fairlora/hash.hpp"

namespace fairlora {

namespace fs = std::filesystem;
using nlohmann::json;

const char* to_string(MessageKind k) noexcept {
    return k == MessageKind::AdapterBundle ? "ADAPTER_BUNDLE" : "ROUND_SIGNAL";
}

namespace {

Party other(Party p) {
    return p == Party::SolutionDeveloper ? Party::ComplianceOfficer : Party::SolutionDeveloper;
}

Party parse_party(const std::string& s) {
    if (s == "SD") return Party::SolutionDeveloper;
    if (s == "CO") return Party::ComplianceOfficer;
    throw FormatError("unknown party tag '" + s + "'", 0);
}

MessageKind parse_kind(const std::string& s) {
    if (s == "ADAPTER_BUNDLE") return MessageKind::AdapterBundle;
    if (s == "ROUND_SIGNAL") return MessageKind::RoundSignal;
    throw FormatError("unknown message kind '" + s + "'", 0);
}

// Thrown by the CO role when fault injection asks it to stop.
struct InjectedExit {};

} // namespace

std::size_t Transcript::count(MessageKind k) const {
    return static_cast<std::size_t>(
        std::count_if(entries.begin(), entries.end(), [k](const TranscriptEntry& e) { return e.kind == k; }));
}

void Transcript::save(const fs::path& path) const {
    const fs::path payload_dir = path.parent_path() / (path.stem().string() + "_payloads");
    fs::create_directories(payload_dir);
    json j;
    j["strategy"] = to_string(strategy);
    j["adv_rounds"] = adv_rounds;
    j["backbone_sha256"] = backbone_sha256;
    j["status"] = complete ? "complete" : "aborted";
    j["error"] = error;
    j["entries"] = json::array();
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& e = entries[i];
        const std::string name = "msg" + std::to_string(i) + ".flra";
        io::write_file_atomic(payload_dir / name, e.payload);
        j["entries"].push_back({{"sender", party_tag(e.sender)},
                                {"receiver", party_tag(e.receiver)},
                                {"kind", to_string(e.kind)},
                                {"sha256", e.sha256},
                                {"bytes", e.bytes},
                                {"round", e.round},
                                {"payload", (fs::path(payload_dir.filename()) / name).string()}});
    }
    io::write_text_atomic(path, j.dump(2) + "\n");
}

Transcript Transcript::load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open transcript " + path.string());
    }
    Transcript t;
    try {
        const json j = json::parse(in);
        t.strategy = parse_strategy(j.at("strategy").get<std::string>());
        t.adv_rounds = j.at("adv_rounds").get<std::size_t>();
        t.backbone_sha256 = j.at("backbone_sha256").get<std::string>();
        t.complete = j.at("status").get<std::string>() == "complete";
        t.error = j.value("error", "");
        for (const auto& e : j.at("entries")) {
            TranscriptEntry te;
            te.sender = parse_party(e.at("sender").get<std::string>());
            te.receiver = parse_party(e.at("receiver").get<std::string>());
            te.kind = parse_kind(e.at("kind").get<std::string>());
            te.sha256 = e.at("sha256").get<std::string>();
            te.bytes = e.at("bytes").get<std::size_t>();
            te.round = e.at("round").get<std::size_t>();
            te.payload = io::read_file(path.parent_path() / e.at("payload").get<std::string>());
            t.entries.push_back(std::move(te));
        }
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad transcript JSON: ") + e.what(), 0);
    }
    return t;
}

// ---------------------------------------------------------------------------
// Party contexts

SdContext::SdContext(std::shared_ptr<const Backbone> base, TaskDataset data)
    : base_(std::move(base)), hash_(base_->hash()), data_(std::move(data)) {}

void SdContext::set_task_head(ClassifierHead head) {
    if (head.owner() != Party::SolutionDeveloper) {
        throw ProtocolError("SD may only hold an SD-owned head");
    }
    task_head_ = std::move(head);
}

CoContext::CoContext(std::shared_ptr<const Backbone> base, SensitiveDataset data)
    : base_(std::move(base)), hash_(base_->hash()), data_(std::move(data)) {}

void CoContext::set_sensitive_head(ClassifierHead head) {
    if (head.owner() != Party::ComplianceOfficer) {
        throw ProtocolError("CO may only hold a CO-owned head");
    }
    sensitive_head_ = std::move(head);
}

const LoraAdapterStack* CoContext::cached_sensitive(const TrainConfig& cfg) const {
    return cache_ && cache_->first == cfg ? &cache_->second : nullptr;
}

void CoContext::cache_sensitive(const TrainConfig& cfg, LoraAdapterStack stack) {
    cache_.emplace(cfg, std::move(stack));
}

// ---------------------------------------------------------------------------
// Role scripts

namespace {

LoraAdapterStack decode_or_abort(const io::Bytes& bytes, const char* what) {
    try {
        return decode_bundle(bytes);
    } catch (const FormatError& e) {
        throw ProtocolError(std::string("malformed ") + what + " bundle: " + e.what());
    }
}

io::Bytes receive_logged(Channel& ch, Party me, std::size_t round, Transcript& log) {
    io::Bytes bytes = ch.receive(me, round);
    TranscriptEntry e;
    e.sender = other(me);
    e.receiver = me;
    e.kind = MessageKind::AdapterBundle;
    e.sha256 = sha256_hex(bytes);
    e.bytes = bytes.size();
    e.round = round;
    e.payload = bytes;
    log.entries.push_back(std::move(e));
    return bytes;
}

void send_logged(Channel& ch, Party me, std::size_t round, const io::Bytes& bytes, Transcript& log) {
    ch.send(me, round, bytes);
    TranscriptEntry e;
    e.sender = me;
    e.receiver = other(me);
    e.kind = MessageKind::AdapterBundle;
    e.sha256 = sha256_hex(bytes);
    e.bytes = bytes.size();
    e.round = round;
    e.payload = bytes;
    log.entries.push_back(std::move(e));
}

} // namespace

TrainedArtifacts run_sd_role(Strategy s, SdContext& sd, Channel& ch, const TrainConfig& cfg, Transcript& log) {
    constexpr Party me = Party::SolutionDeveloper;
    TrainedArtifacts art;
    switch (s) {
    case Strategy::Erm: art = train_erm(sd.base(), sd.data(), cfg); break;
    case Strategy::Unl: {
        const LoraAdapterStack sen = decode_or_abort(receive_logged(ch, me, 0, log), "sensitive");
        art = train_unl(sd.base(), sen, sd.data(), cfg);
        break;
    }
    case Strategy::Orth: {
        const LoraAdapterStack sen = decode_or_abort(receive_logged(ch, me, 0, log), "sensitive");
        art = train_orth(sd.base(), sen, sd.data(), cfg);
        break;
    }
    case Strategy::Adv: {
        PartyState state = init_party_state(sd.base(), cfg, "sd.task", me);
        std::optional<LoraAdapterStack> sen;
        for (std::size_t k = 0; k < cfg.adv_rounds; ++k) {
            send_logged(ch, me, k, encode_bundle(state.stack), log);
            sen = decode_or_abort(receive_logged(ch, me, k, log), "sensitive");
            adv_task_phase(sd.base(), *sen, state, sd.data(), cfg, k);
        }
        art.strategy = Strategy::Adv;
        state.stack.set_strategy("adv");
        art.task_stack = std::move(state.stack);
        art.task_head = std::move(state.head);
        art.loss_trace = std::move(state.loss_trace);
        art.initial_loss = state.initial_loss;
        if (sen) {
            sen->set_strategy("adv.sen");
            art.sensitive_stack = std::move(sen);
            art.sensitive_coeff = 1.0;
        }
        break;
    }
    }
    sd.set_task_head(art.task_head);
    return art;
}

void run_co_role(Strategy s, CoContext& co, Channel& ch, const TrainConfig& cfg,
                 std::optional<std::size_t> exit_after) {
    constexpr Party me = Party::ComplianceOfficer;
    std::size_t sent = 0;
    auto send = [&](std::size_t round, const io::Bytes& bytes) {
        ch.send(me, round, bytes);
        if (exit_after && ++sent >= *exit_after) {
            throw InjectedExit{};
        }
    };
    if (exit_after && *exit_after == 0) {
        throw InjectedExit{};
    }
    switch (s) {
    case Strategy::Erm: return;
    case Strategy::Unl:
    case Strategy::Orth: {
        if (const LoraAdapterStack* cached = co.cached_sensitive(cfg)) {
            send(0, encode_bundle(*cached));
            return;
        }
        TrainedArtifacts art = train_sensitive_erm(co.base(), co.data(), cfg);
        co.set_sensitive_head(*art.sensitive_head);
        co.cache_sensitive(cfg, *art.sensitive_stack);
        send(0, encode_bundle(*art.sensitive_stack));
        return;
    }
    case Strategy::Adv: {
        PartyState state = init_party_state(co.base(), cfg, "co.adv", me);
        for (std::size_t k = 0; k < cfg.adv_rounds; ++k) {
            const LoraAdapterStack task = decode_or_abort(ch.receive(me, k), "task");
            adv_sensitive_phase(co.base(), task, state, co.data(), cfg, k);
            send(k, encode_bundle(state.stack));
        }
        co.set_sensitive_head(state.head);
        return;
    }
    }
}

// ---------------------------------------------------------------------------
// In-process transport

namespace {

class MemoryChannel final : public Channel {
public:
    explicit MemoryChannel(std::chrono::milliseconds timeout) : timeout_(timeout) {}

    void send(Party from, std::size_t, const io::Bytes& bundle) override {
        std::lock_guard lock(mu_);
        inbox_[static_cast<int>(other(from))].push_back(bundle);
        cv_.notify_all();
    }

    io::Bytes receive(Party me, std::size_t round) override {
        std::unique_lock lock(mu_);
        auto& q = inbox_[static_cast<int>(me)];
        const bool ready = cv_.wait_for(lock, timeout_, [&] { return !q.empty() || aborted_; });
        if (!q.empty()) {
            io::Bytes b = std::move(q.front());
            q.pop_front();
            return b;
        }
        if (aborted_) {
            throw ProtocolError("counterpart aborted in round " + std::to_string(round) + ": " + reason_);
        }
        (void)ready;
        throw ProtocolError(std::string(party_tag(me)) + " timed out waiting for round " + std::to_string(round));
    }

    void abort(Party from, const std::string& why) override {
        std::lock_guard lock(mu_);
        aborted_ = true;
        reason_ = std::string(party_tag(from)) + ": " + why;
        cv_.notify_all();
    }

private:
    std::chrono::milliseconds timeout_;
    std::mutex mu_;
    std::condition_variable cv_;
    std::deque<io::Bytes> inbox_[2];
    bool aborted_ = false;
    std::string reason_;
};

// ---------------------------------------------------------------------------
// File transport

class FileChannel final : public Channel {
public:
    FileChannel(fs::path dir, std::string backbone_hash, ProtocolOptions opts)
        : dir_(std::move(dir)), backbone_(std::move(backbone_hash)), opts_(opts) {
        fs::create_directories(dir_);
    }

    void send(Party from, std::size_t round, const io::Bytes& bundle) override {
        const std::size_t seq = sent_++;
        const std::string name =
            "round" + std::to_string(round) + "_" + party_tag(from) + "_msg" + std::to_string(seq) + ".flra";
        io::write_file_atomic(dir_ / name, bundle);
        const json signal{{"round", round},
                          {"kind", to_string(MessageKind::AdapterBundle)},
                          {"sha256", sha256_hex(bundle)},
                          {"backbone", backbone_},
                          {"sender", party_tag(from)},
                          {"file", name}};
        io::write_text_atomic(signal_path(other(from), seq), signal.dump() + "\n");
    }

    io::Bytes receive(Party me, std::size_t round) override {
        const fs::path signal = signal_path(me, received_);
        const fs::path abort_file = dir_ / (std::string("abort_") + party_tag(other(me)) + ".json");
        const auto deadline = std::chrono::steady_clock::now() + opts_.timeout;
        while (!fs::exists(signal)) {
            if (fs::exists(abort_file)) {
                throw ProtocolError("counterpart aborted in round " + std::to_string(round));
            }
            if (std::chrono::steady_clock::now() >= deadline) {
                throw ProtocolError(std::string(party_tag(me)) + " timed out waiting for round " +
                                    std::to_string(round));
            }
            std::this_thread::sleep_for(opts_.poll);
        }
        ++received_;
        json j;
        try {
            j = json::parse(std::ifstream(signal));
        } catch (const json::exception& e) {
            throw ProtocolError(std::string("malformed round signal: ") + e.what());
        }
        if (j.value("backbone", "") != backbone_) {
            throw ProtocolError("backbone hash mismatch between parties");
        }
        if (j.value("round", std::size_t{0}) != round) {
            throw ProtocolError("round signal out of order");
        }
        io::Bytes bytes = io::read_file(dir_ / j.at("file").get<std::string>());
        if (sha256_hex(bytes) != j.value("sha256", "")) {
            throw ProtocolError("bundle does not match its round signal hash");
        }
        return bytes;
    }

    void abort(Party from, const std::string& why) override {
        io::write_text_atomic(dir_ / (std::string("abort_") + party_tag(from) + ".json"),
                              json{{"reason", why}}.dump() + "\n");
    }

private:
    fs::path signal_path(Party to, std::size_t seq) const {
        return dir_ / (std::string("signal_to_") + party_tag(to) + "_" + std::to_string(seq) + ".json");
    }

    fs::path dir_;
    std::string backbone_;
    ProtocolOptions opts_;
    std::size_t sent_ = 0;
    std::size_t received_ = 0;
};

Transcript fresh_transcript(Strategy s, const TrainConfig& cfg, const std::string& hash) {
    Transcript t;
    t.strategy = s;
    t.adv_rounds = s == Strategy::Adv ? cfg.adv_rounds : 0;
    t.backbone_sha256 = hash;
    return t;
}

} // namespace

std::unique_ptr<Channel> make_file_channel(const fs::path& dir, std::string backbone_hash,
                                           const ProtocolOptions& opts) {
    return std::make_unique<FileChannel>(dir, std::move(backbone_hash), opts);
}

ProtocolResult run_protocol(Strategy s, SdContext& sd, CoContext& co, const TrainConfig& cfg) {
    if (sd.backbone_hash() != co.backbone_hash()) {
        throw ProtocolError("backbone hash mismatch: SD " + sd.backbone_hash() + ", CO " + co.backbone_hash());
    }
    cfg.validate();
    MemoryChannel ch(std::chrono::minutes(30));
    ProtocolResult result;
    result.transcript = fresh_transcript(s, cfg, sd.backbone_hash());

    std::exception_ptr co_error;
    std::thread co_thread([&] {
        try {
            run_co_role(s, co, ch, cfg);
        } catch (...) {
            co_error = std::current_exception();
            ch.abort(Party::ComplianceOfficer, "CO failed");
        }
    });
    std::exception_ptr sd_error;
    try {
        result.sd = run_sd_role(s, sd, ch, cfg, result.transcript);
    } catch (...) {
        sd_error = std::current_exception();
        ch.abort(Party::SolutionDeveloper, "SD failed");
    }
    co_thread.join();
    if (co_error) {
        std::rethrow_exception(co_error);
    }
    if (sd_error) {
        std::rethrow_exception(sd_error);
    }
    result.transcript.complete = true;
    result.co_head = co.sensitive_head();
    return result;
}

ProtocolResult run_distributed(Strategy s, std::shared_ptr<const Backbone> base, const DatasetSplits& data,
                               const TrainConfig& cfg, const fs::path& dir, const ProtocolOptions& opts) {
    cfg.validate();
    fs::create_directories(dir);
    const std::string hash = base->hash();
    const fs::path co_head_path = dir / "co" / "sensitive_head.json";

    const pid_t pid = fork();
    if (pid < 0) {
        throw ProtocolError("fork failed");
    }
    if (pid == 0) {
        // CO process: only its own data and the shared backbone are used from here on.
        int code = 0;
        try {
            CoContext co(base, data.co_train);
            auto ch = make_file_channel(dir, hash, opts);
            try {
                run_co_role(s, co, *ch, cfg, opts.co_exit_after);
            } catch (const InjectedExit&) {
                std::_Exit(9);
            } catch (const std::exception& e) {
                ch->abort(Party::ComplianceOfficer, e.what());
                throw;
            }
            if (co.sensitive_head()) {
                fs::create_directories(co_head_path.parent_path());
                save_head(*co.sensitive_head(), co_head_path);
            }
        } catch (...) {
            code = 1;
        }
        std::_Exit(code);
    }

    SdContext sd(base, data.sd_train);
    auto ch = make_file_channel(dir, hash, opts);
    ProtocolResult result;
    result.transcript = fresh_transcript(s, cfg, hash);
    try {
        result.sd = run_sd_role(s, sd, *ch, cfg, result.transcript);
    } catch (const std::exception& e) {
        result.transcript.error = e.what();
        result.transcript.save(dir / "transcript.json");
        ch->abort(Party::SolutionDeveloper, e.what());
        int status = 0;
        waitpid(pid, &status, 0);
        throw;
    }
    int status = 0;
    waitpid(pid, &status, 0);
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
        result.transcript.error = "CO process failed";
        result.transcript.save(dir / "transcript.json");
        throw ProtocolError("CO process exited abnormally");
    }
    result.transcript.complete = true;
    result.transcript.save(dir / "transcript.json");
    if (fs::exists(co_head_path)) {
        result.co_head = load_head(co_head_path);
    }
    return result;
}

// ---------------------------------------------------------------------------
// Audit

bool AuditReport::pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const AuditCheck& c) { return c.pass; });
}

std::string AuditReport::to_text() const {
    std::string s;
    for (const auto& c : checks) {
        s += (c.pass ? "PASS " : "FAIL ") + c.name;
        if (!c.detail.empty()) {
            s += ": " + c.detail;
        }
        s += '\n';
    }
    s += pass() ? "audit passed\n" : "audit FAILED\n";
    return s;
}

std::size_t expected_messages(Strategy s, std::size_t adv_rounds) {
    switch (s) {
    case Strategy::Erm: return 0;
    case Strategy::Unl:
    case Strategy::Orth: return 1;
    case Strategy::Adv: return 2 * adv_rounds;
    }
    return 0;
}

namespace {

template <typename T>
std::string bytes_of(std::span<const T> values) {
    return std::string(reinterpret_cast<const char*>(values.data()), values.size_bytes());
}

std::string as_f32(std::span<const double> v) {
    std::vector<float> f(v.begin(), v.end());
    return bytes_of<float>(f);
}

bool contains(const io::Bytes& hay, const std::string& needle) {
    if (needle.empty() || needle.size() > hay.size()) {
        return false;
    }
    const std::string_view view(reinterpret_cast<const char*>(hay.data()), hay.size());
    return view.find(needle) != std::string_view::npos;
}

bool worth_searching(const std::string& pattern) {
    return pattern.size() >= 8 && std::any_of(pattern.begin(), pattern.end(), [](char c) { return c != 0; });
}

} // namespace

AuditReport audit_transcript(const Transcript& t, std::span<const Tensor* const> datasets,
                             std::span<const ClassifierHead* const> heads) {
    AuditReport rep;

    AuditCheck wellformed{"(a) every payload is a well-formed .flra bundle", true, ""};
    for (std::size_t i = 0; i < t.entries.size(); ++i) {
        const auto& e = t.entries[i];
        std::string problem;
        if (e.kind != MessageKind::AdapterBundle) {
            problem = "unexpected kind " + std::string(to_string(e.kind));
        } else if (sha256_hex(e.payload) != e.sha256 || e.payload.size() != e.bytes) {
            problem = "payload does not match its logged hash/length";
        } else {
            try {
                const LoraAdapterStack st = decode_bundle(e.payload);
                if (bundle_size(st) != e.payload.size()) {
                    problem = "size differs from the format definition";
                }
            } catch (const FormatError& err) {
                problem = err.what();
            }
        }
        if (!problem.empty()) {
            wellformed.pass = false;
            wellformed.detail += "message " + std::to_string(i) + ": " + problem + "; ";
        }
    }
    rep.checks.push_back(wellformed);

    AuditCheck no_heads{"(b) no head weight bytes in any payload", true, ""};
    std::vector<std::string> head_patterns;
    for (const ClassifierHead* h : heads) {
        const Tensor wt = dense::transpose(h->weight());
        for (const Tensor* t2 : {&h->weight(), &wt, &h->bias()}) {
            head_patterns.push_back(as_f32(t2->data()));
            head_patterns.push_back(bytes_of<double>(t2->data()));
        }
    }
    for (std::size_t i = 0; i < t.entries.size(); ++i) {
        for (const auto& p : head_patterns) {
            if (worth_searching(p) && contains(t.entries[i].payload, p)) {
                no_heads.pass = false;
                no_heads.detail += "message " + std::to_string(i) + " carries head bytes; ";
                break;
            }
        }
    }
    rep.checks.push_back(no_heads);

    AuditCheck no_rows{"(c) no dataset row in any payload", true, ""};
    std::unordered_set<std::string> rows32, rows64;
    std::size_t w32 = 0, w64 = 0;
    for (const Tensor* x : datasets) {
        for (std::size_t r = 0; r < x->rows(); ++r) {
            std::span<const double> row(x->data().data() + r * x->cols(), x->cols());
            std::string s32 = as_f32(row), s64 = bytes_of<double>(row);
            if (worth_searching(s32)) {
                w32 = s32.size();
                rows32.insert(std::move(s32));
            }
            if (worth_searching(s64)) {
                w64 = s64.size();
                rows64.insert(std::move(s64));
            }
        }
    }
    for (std::size_t i = 0; i < t.entries.size(); ++i) {
        const auto& p = t.entries[i].payload;
        const std::string_view view(reinterpret_cast<const char*>(p.data()), p.size());
        bool hit = false;
        for (auto [set, w] : {std::pair{&rows32, w32}, std::pair{&rows64, w64}}) {
            for (std::size_t off = 0; w > 0 && off + w <= view.size() && !hit; ++off) {
                hit = set->contains(std::string(view.substr(off, w)));
            }
        }
        if (hit) {
            no_rows.pass = false;
            no_rows.detail += "message " + std::to_string(i) + " carries a dataset row; ";
        }
    }
    rep.checks.push_back(no_rows);

    AuditCheck script{"(d) message counts match the strategy script", true, ""};
    const std::size_t want = expected_messages(t.strategy, t.adv_rounds);
    const std::size_t got = t.count(MessageKind::AdapterBundle);
    if (got != want || t.entries.size() != want) {
        script.pass = false;
        script.detail = std::string(to_string(t.strategy)) + " expects " + std::to_string(want) +
                        " bundle(s), transcript has " + std::to_string(t.entries.size()) + " message(s)";
    } else {
        for (std::size_t i = 0; i < t.entries.size(); ++i) {
            const auto& e = t.entries[i];
            Party from = Party::ComplianceOfficer;
            std::size_t round = 0;
            if (t.strategy == Strategy::Adv) {
                from = i % 2 == 0 ? Party::SolutionDeveloper : Party::ComplianceOfficer;
                round = i / 2;
            }
            if (e.sender != from || e.receiver != other(from) || e.round != round) {
                script.pass = false;
                script.detail = "message " + std::to_string(i) + " breaks the exchange order";
                break;
            }
        }
    }
    rep.checks.push_back(script);
    return rep;
}

void save_head(const ClassifierHead& head, const fs::path& path) {
    const json j{{"owner", party_tag(head.owner())},
                 {"rows", head.weight().rows()},
                 {"weight", head.weight().vec()},
                 {"bias", head.bias().vec()}};
    io::write_text_atomic(path, j.dump() + "\n");
}

ClassifierHead load_head(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open head file " + path.string());
    }
    try {
        const json j = json::parse(in);
        const auto rows = j.at("rows").get<std::size_t>();
        auto w = j.at("weight").get<std::vector<double>>();
        auto b = j.at("bias").get<std::vector<double>>();
        if (w.size() != rows * 2 || b.size() != 2) {
            throw FormatError("head tensor sizes do not match", 0);
        }
        return ClassifierHead(Tensor(rows, 2, std::move(w)), Tensor(1, 2, std::move(b)),
                              parse_party(j.at("owner").get<std::string>()));
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad head JSON: ") + e.what(), 0);
    }
}

} // namespace fairlora
