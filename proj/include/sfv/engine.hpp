#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "sfv/config.hpp"
#include "sfv/core.hpp"
#include "sfv/random.hpp"
#include "sfv/signing.hpp"

namespace sfv::engine {

enum class SessionStatus { Open, Cast, Nullified };

struct Session {
    SessionId id;
    PrecinctId precinct;
    ClusterId cluster;
    MachineId machine;
    VoterId voter;
    std::uint32_t time = 0;
    SessionStatus status = SessionStatus::Open;
};

enum class Locality { ClusterWide, LocalOnly };

/// Prior (r, C) pairs of one cluster that machines may print as decoys.
class DecoyPool {
public:
    struct Entry {
        Pseudonym r;
        CandidateId candidate = 0;
        PrecinctId precinct;
        std::uint32_t time = 0;
        std::size_t record = 0;  // index into the central record list
        bool dummy = false;
    };

    DecoyPool(ClusterId cluster, std::size_t candidates);

    ClusterId cluster() const noexcept { return cluster_; }
    void add(const Entry& e);
    void remove_record(std::size_t record);

    std::span<const Entry> of(CandidateId c) const { return by_candidate_.at(c); }
    std::span<const Entry> local(PrecinctId precinct, CandidateId c) const;
    std::span<const Entry> view(Locality locality, PrecinctId precinct, CandidateId c) const {
        return locality == Locality::ClusterWide ? of(c) : local(precinct, c);
    }
    std::size_t size() const;

private:
    ClusterId cluster_;
    std::vector<std::vector<Entry>> by_candidate_;
    std::map<PrecinctId, std::vector<std::vector<Entry>>> local_;
};

/// Extra filter on which prior votes may serve as decoys.
class DecoyConstraint {
public:
    enum class Kind { None, ExcludeTimeWindow, RequireParity, Custom };
    enum class Parity { Any, Even, Odd };

    static DecoyConstraint none() { return {}; }
    static DecoyConstraint exclude_window(TimeWindow window);
    /// One entry per candidate: the decoy printed for that candidate must have this parity of r.
    static DecoyConstraint require_parity(std::vector<Parity> per_candidate);
    static DecoyConstraint custom(std::function<bool(const DecoyPool::Entry&)> predicate);

    Kind kind() const noexcept { return kind_; }
    bool admits(const DecoyPool::Entry& e) const;

private:
    Kind kind_ = Kind::None;
    TimeWindow window_;
    std::vector<Parity> parity_;
    std::function<bool(const DecoyPool::Entry&)> predicate_;
};

using DecoyMap = std::map<CandidateId, DecoyPool::Entry>;

/// For every candidate other than `choice`, a uniformly chosen admissible prior record of that
/// candidate. Returned pseudonyms are pairwise distinct and differ from `true_r`.
/// Throws DecoyStarvation when some candidate has no admissible record.
DecoyMap select_decoys(const DecoyPool& pool, Locality locality, PrecinctId requester, std::size_t candidates,
                       CandidateId choice, const Pseudonym& true_r, const DecoyConstraint& constraint,
                       random::Stream& stream);

/// Receipt/ballot misprints a compromised machine may attempt in the booth.
enum class BoothTamper { None, ShiftTrueRow, WrongBallotMark };

struct CastOptions {
    std::optional<random::RngMode> rng;  // defaults to the configured mode
    DecoyConstraint constraint;
    BoothTamper tamper = BoothTamper::None;
    /// false: the machine swallows the vote (no central record, no pool entry).
    bool publish = true;
    /// Voter's digits under voter-injected entropy; drawn from the voter's stream when absent.
    std::optional<std::uint64_t> voter_digits;
};

struct CastResult {
    SessionId session;
    Receipt receipt;
    Pseudonym displayed_r;  // what the mechanical device shows
    CandidateId choice = 0;
    CandidateId marked = 0;  // checkbox marked on the paper ballot
    std::optional<std::size_t> record;
    DecoyMap decoys;
    std::optional<random::MachineCommitment> commitment;
};

enum class BoothCheck { Ok, Challenge };

/// The voter's in-booth comparison of display, receipt and paper ballot.
BoothCheck in_booth_check(const Receipt& receipt, const Pseudonym& displayed_r, CandidateId choice,
                          CandidateId marked);

enum class LogKind { Seed, SessionOpen, Commitment, DecoyFetch, Fallback, Cast, Challenge, Injection, Absorbed };

struct LogEvent {
    LogKind kind = LogKind::Seed;
    std::uint32_t time = 0;
    SessionId session;
    PrecinctId precinct;
    CandidateId candidate = 0;
    PrecinctId source;
    Locality locality = Locality::ClusterWide;
    std::uint64_t value = 0;
};

std::string format_log(std::span<const LogEvent> events);

struct BallotBox {
    PrecinctId precinct;
    std::vector<CandidateId> marks;
    std::vector<std::uint64_t> counts(std::size_t candidates) const;
};

struct VoterRoll {
    PrecinctId precinct;
    std::uint64_t crossed_off = 0;
};

/// A receipt handed to a voter. `choice` is the voter's private knowledge of their true row.
struct IssuedReceipt {
    VoterId voter;
    SessionId session;
    PrecinctId precinct;
    ClusterId cluster;
    CandidateId choice = 0;
    Receipt receipt;
    std::optional<std::size_t> record;
};

struct RawElectionOutput {
    ElectionConfig config;
    std::vector<VoteRecord> records;  // central server list in arrival order
    std::vector<BallotBox> ballot_boxes;
    std::vector<VoterRoll> rolls;
    std::vector<LogEvent> logs;
    std::vector<IssuedReceipt> receipts;
    signing::KeyRegistry keys;
    std::shared_ptr<const signing::MachineSigner> signer;
    std::map<ClusterId, std::vector<std::uint32_t>> dummy_counts;
    /// Confirmed voter choices per precinct (no dummies).
    std::map<PrecinctId, std::vector<std::uint64_t>> ground_truth;
    std::size_t nullified_sessions = 0;

    std::vector<std::uint64_t> national_truth() const;
    std::vector<std::uint32_t> national_dummies() const;
    /// The receipt with its signature filled in (signs on demand in deferred mode).
    Receipt signed_receipt(std::size_t i) const;
    void sign_all();
};

class Election {
public:
    explicit Election(ElectionConfig config);

    const ElectionConfig& config() const noexcept { return config_; }

    /// Committee seed votes for a cluster. Must run before any session opens in that cluster.
    std::vector<VoteRecord> seed_decoy_pool(ClusterId cluster);
    void seed_all();

    Session open_session(PrecinctId precinct, VoterId voter, std::uint32_t time);
    CastResult cast_vote(SessionId session, CandidateId choice, const CastOptions& options = {});
    /// Voter challenged: record, pool entry, ballot and receipt are withdrawn; the voter may vote again.
    void challenge(SessionId session);

    /// Fraudulent central record with no voting session behind it.
    std::size_t inject_record(PrecinctId precinct, CandidateId candidate, const Pseudonym& r, std::uint32_t time);
    void set_compromised(PrecinctId precinct, bool compromised = true);
    void set_partition(ClusterId cluster, TimeWindow window) { config_.partitions[cluster] = window; }

    const DecoyPool& pool(ClusterId cluster) const { return pools_.at(cluster); }
    const Session& session(SessionId id) const;
    std::span<const VoteRecord> records() const { return records_; }
    std::uint64_t crossed_off(PrecinctId precinct) const { return rolls_.at(precinct).size(); }

    /// Throws ProtocolError if a session is still open.
    RawElectionOutput close_polls();

private:
    Session& session_mut(SessionId id);
    Pseudonym draw(const Session& s, const random::RngMode& mode, random::Stream& stream, const CastOptions& options,
                   std::optional<random::MachineCommitment>& commitment);
    DecoyMap fetch_decoys(const Session& s, CandidateId choice, const Pseudonym& r, const DecoyConstraint& constraint,
                          random::Stream& stream);
    std::size_t append_record(const VoteRecord& rec, std::uint32_t time);

    ElectionConfig config_;
    std::shared_ptr<signing::MachineSigner> signer_;
    std::map<ClusterId, DecoyPool> pools_;
    std::set<ClusterId> seeded_;
    std::set<ClusterId> opened_;
    std::vector<VoteRecord> records_;
    std::vector<bool> withdrawn_;
    std::map<PrecinctId, BallotBox> boxes_;
    std::map<PrecinctId, std::set<VoterId>> rolls_;
    std::map<VoterId, SessionId> last_session_;
    std::map<PrecinctId, SessionId> busy_;
    std::vector<Session> sessions_;
    std::vector<LogEvent> logs_;
    std::vector<IssuedReceipt> receipts_;
    std::map<SessionId, std::size_t> receipt_of_session_;
    std::set<PrecinctId> compromised_;
    std::map<ClusterId, std::vector<std::uint32_t>> dummy_counts_;
    std::map<PrecinctId, std::vector<std::uint64_t>> truth_;
    std::size_t nullified_ = 0;
    bool closed_ = false;
};

/// One voter's visit, in polling-day order.
struct ScheduledVoter {
    std::uint32_t time = 0;
    PrecinctId precinct;
    VoterId voter;
    CandidateId choice = 0;
};

/// Arrival times and choices for every configured voter, derived from the config seed.
std::vector<ScheduledVoter> make_schedule(const ElectionConfig& config);

struct SimulationHooks {
    /// Called once after seeding, before the first voter.
    std::function<void(Election&)> setup;
    /// Called before each cast; `attempt` counts re-votes after challenges (0 first).
    std::function<CastOptions(Election&, const Session&, CandidateId choice, int attempt)> plan;
    /// Called after a cast that the voter accepted.
    std::function<void(Election&, const Session&, const CastResult&)> accepted;
    /// Called once all voters are processed, before polls close.
    std::function<void(Election&)> before_close;
};

/// Seeds every cluster, runs the schedule (voters always challenge a failed in-booth check) and closes polls.
RawElectionOutput simulate_election(const ElectionConfig& config, const SimulationHooks& hooks = {});

}  // namespace sfv::engine
