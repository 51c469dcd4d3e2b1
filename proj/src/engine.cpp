#include "sfv/engine.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

namespace sfv::engine {

// ---------------------------------------------------------------------------
// DecoyPool

DecoyPool::DecoyPool(ClusterId cluster, std::size_t candidates) : cluster_(cluster), by_candidate_(candidates) {}

void DecoyPool::add(const Entry& e) {
    by_candidate_.at(e.candidate).push_back(e);
    auto& local = local_[e.precinct];
    if (local.empty()) local.resize(by_candidate_.size());
    local[e.candidate].push_back(e);
}

void DecoyPool::remove_record(std::size_t record) {
    auto drop = [record](std::vector<Entry>& v) {
        // Withdrawn records are almost always the newest entry.
        for (auto it = v.rbegin(); it != v.rend(); ++it) {
            if (it->record == record) {
                v.erase(std::next(it).base());
                return true;
            }
        }
        return false;
    };
    for (auto& v : by_candidate_)
        if (drop(v)) break;
    for (auto& [p, per] : local_)
        for (auto& v : per)
            if (drop(v)) return;
}

std::span<const DecoyPool::Entry> DecoyPool::local(PrecinctId precinct, CandidateId c) const {
    auto it = local_.find(precinct);
    if (it == local_.end()) return {};
    return it->second.at(c);
}

std::size_t DecoyPool::size() const {
    std::size_t n = 0;
    for (const auto& v : by_candidate_) n += v.size();
    return n;
}

// ---------------------------------------------------------------------------
// DecoyConstraint

DecoyConstraint DecoyConstraint::exclude_window(TimeWindow window) {
    DecoyConstraint c;
    c.kind_ = Kind::ExcludeTimeWindow;
    c.window_ = window;
    return c;
}

DecoyConstraint DecoyConstraint::require_parity(std::vector<Parity> per_candidate) {
    DecoyConstraint c;
    c.kind_ = Kind::RequireParity;
    c.parity_ = std::move(per_candidate);
    return c;
}

DecoyConstraint DecoyConstraint::custom(std::function<bool(const DecoyPool::Entry&)> predicate) {
    DecoyConstraint c;
    c.kind_ = Kind::Custom;
    c.predicate_ = std::move(predicate);
    return c;
}

bool DecoyConstraint::admits(const DecoyPool::Entry& e) const {
    switch (kind_) {
    case Kind::None:
        return true;
    case Kind::ExcludeTimeWindow:
        return !window_.contains(e.time);
    case Kind::RequireParity: {
        if (e.candidate >= parity_.size()) return true;
        const bool even = e.r.value() % 2 == 0;
        switch (parity_[e.candidate]) {
        case Parity::Any:
            return true;
        case Parity::Even:
            return even;
        case Parity::Odd:
            return !even;
        }
        return true;
    }
    case Kind::Custom:
        return !predicate_ || predicate_(e);
    }
    return true;
}

DecoyMap select_decoys(const DecoyPool& pool, Locality locality, PrecinctId requester, std::size_t candidates,
                       CandidateId choice, const Pseudonym& true_r, const DecoyConstraint& constraint,
                       random::Stream& stream) {
    DecoyMap out;
    std::unordered_set<std::uint64_t> used{true_r.value()};
    for (CandidateId c = 0; c < candidates; ++c) {
        if (c == choice) continue;
        auto entries = pool.view(locality, requester, c);
        auto ok = [&](const DecoyPool::Entry& e) { return !used.contains(e.r.value()) && constraint.admits(e); };

        std::optional<DecoyPool::Entry> pick;
        if (!entries.empty()) {
            // Rejection on the full list keeps the pick uniform over admissible entries.
            for (int attempt = 0; attempt < 32 && !pick; ++attempt) {
                const auto& e = entries[stream.below(entries.size())];
                if (ok(e)) pick = e;
            }
            if (!pick) {
                std::vector<const DecoyPool::Entry*> admissible;
                for (const auto& e : entries)
                    if (ok(e)) admissible.push_back(&e);
                if (!admissible.empty()) pick = *admissible[stream.below(admissible.size())];
            }
        }
        if (!pick)
            throw DecoyStarvation(c, "no admissible decoy for candidate " + std::to_string(c) + " in cluster " +
                                         std::to_string(pool.cluster().value));
        used.insert(pick->r.value());
        out.emplace(c, *pick);
    }
    return out;
}

BoothCheck in_booth_check(const Receipt& receipt, const Pseudonym& displayed_r, CandidateId choice,
                          CandidateId marked) {
    if (marked != choice) return BoothCheck::Challenge;
    if (choice >= receipt.rows.size()) return BoothCheck::Challenge;
    const auto& row = receipt.rows[choice];
    if (row.candidate != choice || row.r != displayed_r) return BoothCheck::Challenge;
    return BoothCheck::Ok;
}

std::string format_log(std::span<const LogEvent> events) {
    static constexpr const char* names[] = {"seed",     "open",      "commit",    "decoy",   "fallback",
                                            "cast",     "challenge", "injection", "absorbed"};
    std::ostringstream os;
    for (const auto& e : events) {
        os << e.time << ',' << names[static_cast<int>(e.kind)] << ",session=" << e.session << ",precinct=" << e.precinct;
        switch (e.kind) {
        case LogKind::DecoyFetch:
        case LogKind::Fallback:
            os << ",candidate=" << e.candidate << ",source=" << e.source
               << ",locality=" << (e.locality == Locality::ClusterWide ? "cluster" : "local");
            break;
        case LogKind::Commitment:
        case LogKind::Seed:
        case LogKind::Injection:
            os << ",candidate=" << e.candidate << ",value=" << e.value;
            break;
        default:
            break;
        }
        os << '\n';
    }
    return os.str();
}

std::vector<std::uint64_t> BallotBox::counts(std::size_t candidates) const {
    std::vector<std::uint64_t> out(candidates, 0);
    for (auto m : marks) out.at(m) += 1;
    return out;
}

std::vector<std::uint64_t> RawElectionOutput::national_truth() const {
    std::vector<std::uint64_t> out(config.num_candidates(), 0);
    for (const auto& [p, counts] : ground_truth)
        for (std::size_t c = 0; c < counts.size(); ++c) out[c] += counts[c];
    return out;
}

std::vector<std::uint32_t> RawElectionOutput::national_dummies() const {
    std::vector<std::uint32_t> out(config.num_candidates(), 0);
    for (const auto& [cluster, counts] : dummy_counts)
        for (std::size_t c = 0; c < counts.size(); ++c) out[c] += counts[c];
    return out;
}

Receipt RawElectionOutput::signed_receipt(std::size_t i) const {
    Receipt r = receipts.at(i).receipt;
    if (r.signature.empty() && signer) signer->sign(r);
    return r;
}

void RawElectionOutput::sign_all() {
    if (!signer) return;
    for (auto& ir : receipts)
        if (ir.receipt.signature.empty()) signer->sign(ir.receipt);
}

// ---------------------------------------------------------------------------
// Election

Election::Election(ElectionConfig config) : config_(std::move(config)) {
    config_.validate();
    signer_ = std::make_shared<signing::MachineSigner>(config_.seed);
    for (auto cluster : config_.clusters()) {
        pools_.emplace(cluster, DecoyPool(cluster, config_.num_candidates()));
        dummy_counts_[cluster].assign(config_.num_candidates(), 0);
    }
    for (const auto& p : config_.precincts) {
        boxes_[p.id] = BallotBox{p.id, {}};
        rolls_[p.id];
        truth_[p.id].assign(config_.num_candidates(), 0);
    }
}

Session& Election::session_mut(SessionId id) {
    if (id.value >= sessions_.size())
        throw ProtocolError(ProtocolError::Kind::UnknownSession, "unknown session " + std::to_string(id.value));
    return sessions_[id.value];
}

const Session& Election::session(SessionId id) const {
    if (id.value >= sessions_.size())
        throw ProtocolError(ProtocolError::Kind::UnknownSession, "unknown session " + std::to_string(id.value));
    return sessions_[id.value];
}

std::size_t Election::append_record(const VoteRecord& rec, std::uint32_t time) {
    records_.push_back(rec);
    withdrawn_.push_back(false);
    const std::size_t idx = records_.size() - 1;
    pools_.at(rec.cluster).add(DecoyPool::Entry{rec.r, rec.candidate, rec.precinct, time, idx, rec.is_dummy});
    return idx;
}

std::vector<VoteRecord> Election::seed_decoy_pool(ClusterId cluster) {
    if (config_.num_candidates() == 0) throw ConfigError("cannot seed a pool without candidates");
    if (!pools_.contains(cluster)) throw ConfigError("unknown cluster " + std::to_string(cluster.value));
    if (opened_.contains(cluster))
        throw ProtocolError(ProtocolError::Kind::ProtocolViolation, "polls already open in cluster " +
                                                                        std::to_string(cluster.value));
    if (!seeded_.insert(cluster).second)
        throw ProtocolError(ProtocolError::Kind::ProtocolViolation, "cluster " + std::to_string(cluster.value) +
                                                                        " already seeded");
    std::vector<PrecinctId> stations;
    if (config_.seeding == SeedingMode::PerCluster)
        stations.push_back(config_.seeding_precinct(cluster));
    else
        stations = config_.precincts_of(cluster);

    std::vector<VoteRecord> out;
    for (auto precinct : stations) {
        random::Stream stream(random::derive_seed(config_.seed, random::Purpose::Seeding, precinct.value));
        for (CandidateId c = 0; c < config_.num_candidates(); ++c) {
            for (std::uint32_t k = 0; k < config_.dummies_per_candidate; ++k) {
                VoteRecord rec{random::draw_pseudonym(stream, config_.pseudonym_width), c, cluster, precinct, true};
                append_record(rec, 0);
                boxes_.at(precinct).marks.push_back(c);
                dummy_counts_.at(cluster)[c] += 1;
                logs_.push_back(LogEvent{LogKind::Seed, 0, SessionId{}, precinct, c, precinct, Locality::ClusterWide,
                                         rec.r.value()});
                out.push_back(rec);
            }
        }
    }
    return out;
}

void Election::seed_all() {
    for (auto cluster : config_.clusters())
        if (!seeded_.contains(cluster)) seed_decoy_pool(cluster);
}

Session Election::open_session(PrecinctId precinct, VoterId voter, std::uint32_t time) {
    if (closed_) throw ProtocolError(ProtocolError::Kind::ProtocolViolation, "polls are closed");
    const auto& pc = config_.precinct(precinct);
    if (auto it = busy_.find(precinct); it != busy_.end())
        throw ProtocolError(ProtocolError::Kind::SessionConflict,
                            "machine of precinct " + std::to_string(precinct.value) + " is busy with session " +
                                std::to_string(it->second.value));
    auto& roll = rolls_.at(precinct);
    if (roll.contains(voter)) {
        // A voter whose last session was challenged may vote again without a second cross-off.
        auto last = last_session_.find(voter);
        if (last == last_session_.end() || sessions_[last->second.value].status != SessionStatus::Nullified)
            throw ProtocolError(ProtocolError::Kind::DoubleVote,
                                "voter " + std::to_string(voter.value) + " already voted in precinct " +
                                    std::to_string(precinct.value));
    } else {
        roll.insert(voter);
    }
    Session s{SessionId{static_cast<std::uint32_t>(sessions_.size())},
              precinct,
              pc.cluster,
              MachineId{precinct.value},
              voter,
              time,
              SessionStatus::Open};
    sessions_.push_back(s);
    busy_[precinct] = s.id;
    last_session_[voter] = s.id;
    opened_.insert(pc.cluster);
    logs_.push_back(LogEvent{LogKind::SessionOpen, time, s.id, precinct, 0, precinct, Locality::ClusterWide, voter.value});
    return s;
}

Pseudonym Election::draw(const Session& s, const random::RngMode& mode, random::Stream& stream,
                         const CastOptions& options, std::optional<random::MachineCommitment>& commitment) {
    if (const auto* rg = std::get_if<random::Rigged>(&mode)) return random::draw_rigged(rg->forced);
    if (const auto* ve = std::get_if<random::VoterEntropy>(&mode)) {
        auto c = random::commit_machine(stream, *ve);
        const std::uint64_t suffix_space = pow10(ve->voter_width);
        logs_.push_back(LogEvent{LogKind::Commitment, s.time, s.id, s.precinct, 0, s.precinct, Locality::ClusterWide,
                                 c.prefix * suffix_space + c.concealed_suffix});
        std::uint64_t digits;
        if (options.voter_digits) {
            digits = *options.voter_digits;
        } else {
            random::Stream voter(random::derive_seed(config_.seed, random::Purpose::Voter, s.voter.value, s.id.value + 1));
            digits = voter.below(suffix_space);
        }
        commitment = c;
        return random::combine_voter_entropy(c, digits);
    }
    return random::draw_pseudonym(stream, config_.pseudonym_width);
}

DecoyMap Election::fetch_decoys(const Session& s, CandidateId choice, const Pseudonym& r,
                                const DecoyConstraint& constraint, random::Stream& stream) {
    const auto& pool = pools_.at(s.cluster);
    Locality locality = Locality::ClusterWide;
    if (auto it = config_.partitions.find(s.cluster); it != config_.partitions.end() && it->second.contains(s.time))
        locality = Locality::LocalOnly;

    auto log_fallback = [&](CandidateId c, Locality loc) {
        logs_.push_back(LogEvent{LogKind::Fallback, s.time, s.id, s.precinct, c, s.precinct, loc, 0});
    };

    DecoyMap decoys;
    const DecoyConstraint unconstrained;
    const DecoyConstraint* active = &constraint;
    while (true) {
        try {
            decoys = select_decoys(pool, locality, s.precinct, config_.num_candidates(), choice, r, *active, stream);
            break;
        } catch (const DecoyStarvation& e) {
            if (active->kind() != DecoyConstraint::Kind::None) {
                log_fallback(e.candidate(), locality);
                active = &unconstrained;
            } else if (locality == Locality::LocalOnly) {
                log_fallback(e.candidate(), Locality::ClusterWide);
                locality = Locality::ClusterWide;
            } else {
                throw;
            }
        }
    }

    if (!compromised_.empty()) {
        std::unordered_set<std::uint64_t> used{r.value()};
        for (auto& [c, e] : decoys) used.insert(e.r.value());
        for (auto& [c, e] : decoys) {
            if (e.precinct == s.precinct || !compromised_.contains(e.precinct)) continue;
            // A compromised peer answers every request with the same record for the candidate.
            auto held = pool.local(e.precinct, c);
            if (held.empty()) continue;
            const auto& constant = held.front();
            if (constant.r == e.r || used.contains(constant.r.value())) continue;
            used.erase(e.r.value());
            used.insert(constant.r.value());
            e = constant;
        }
    }
    for (const auto& [c, e] : decoys)
        logs_.push_back(LogEvent{LogKind::DecoyFetch, s.time, s.id, s.precinct, c, e.precinct, locality, e.r.value()});
    return decoys;
}

CastResult Election::cast_vote(SessionId id, CandidateId choice, const CastOptions& options) {
    Session& s = session_mut(id);
    if (s.status != SessionStatus::Open)
        throw ProtocolError(ProtocolError::Kind::ProtocolViolation, "session " + std::to_string(id.value) + " is not open");
    if (choice >= config_.num_candidates()) throw ConfigError("unknown candidate " + std::to_string(choice));
    if (!seeded_.contains(s.cluster))
        throw ProtocolError(ProtocolError::Kind::ProtocolViolation, "decoy pool of cluster " +
                                                                        std::to_string(s.cluster.value) + " not seeded");
    const random::RngMode& mode = options.rng ? *options.rng : config_.rng;
    random::validate_mode(mode, config_.pseudonym_width);

    random::Stream stream(random::derive_seed(config_.seed, random::Purpose::Session, id.value));
    CastResult result;
    result.session = id;
    result.choice = choice;
    result.displayed_r = draw(s, mode, stream, options, result.commitment);
    const Pseudonym& r = result.displayed_r;
    result.decoys = fetch_decoys(s, choice, r, options.constraint, stream);

    const std::size_t n = config_.num_candidates();
    Receipt receipt;
    receipt.machine = s.machine;
    receipt.rows.resize(n);
    for (CandidateId c = 0; c < n; ++c) {
        receipt.rows[c].candidate = c;
        receipt.rows[c].r = c == choice ? r : result.decoys.at(c).r;
    }
    result.marked = choice;
    if (n > 1) {
        if (options.tamper == BoothTamper::ShiftTrueRow)
            std::swap(receipt.rows[choice].r, receipt.rows[(choice + 1) % n].r);
        else if (options.tamper == BoothTamper::WrongBallotMark)
            result.marked = static_cast<CandidateId>((choice + 1) % n);
    }
    if (config_.signing == SigningMode::Eager) signer_->sign(receipt);
    result.receipt = receipt;

    if (options.publish) {
        result.record = append_record(VoteRecord{r, choice, s.cluster, s.precinct, false}, s.time);
        logs_.push_back(LogEvent{LogKind::Cast, s.time, s.id, s.precinct, 0, s.precinct, Locality::ClusterWide, 0});
    } else {
        logs_.push_back(LogEvent{LogKind::Absorbed, s.time, s.id, s.precinct, 0, s.precinct, Locality::ClusterWide, 0});
    }
    boxes_.at(s.precinct).marks.push_back(result.marked);
    truth_.at(s.precinct)[choice] += 1;
    receipt_of_session_[id] = receipts_.size();
    receipts_.push_back(IssuedReceipt{s.voter, id, s.precinct, s.cluster, choice, receipt, result.record});
    s.status = SessionStatus::Cast;
    busy_.erase(s.precinct);
    return result;
}

void Election::challenge(SessionId id) {
    Session& s = session_mut(id);
    if (s.status != SessionStatus::Cast)
        throw ProtocolError(ProtocolError::Kind::ProtocolViolation, "only a cast session can be challenged");
    auto ri = receipt_of_session_.at(id);
    const IssuedReceipt issued = receipts_[ri];
    if (issued.record) {
        withdrawn_[*issued.record] = true;
        pools_.at(s.cluster).remove_record(*issued.record);
    }
    // The ballot just printed is the newest in the box.
    auto& marks = boxes_.at(s.precinct).marks;
    marks.pop_back();
    truth_.at(s.precinct)[issued.choice] -= 1;
    receipts_.erase(receipts_.begin() + static_cast<std::ptrdiff_t>(ri));
    receipt_of_session_.erase(id);
    for (auto& [sid, idx] : receipt_of_session_)
        if (idx > ri) --idx;
    s.status = SessionStatus::Nullified;
    ++nullified_;
    logs_.push_back(LogEvent{LogKind::Challenge, s.time, s.id, s.precinct, issued.choice, s.precinct,
                             Locality::ClusterWide, 0});
}

std::size_t Election::inject_record(PrecinctId precinct, CandidateId candidate, const Pseudonym& r,
                                    std::uint32_t time) {
    const auto& pc = config_.precinct(precinct);
    if (candidate >= config_.num_candidates()) throw ConfigError("unknown candidate " + std::to_string(candidate));
    logs_.push_back(LogEvent{LogKind::Injection, time, SessionId{}, precinct, candidate, precinct,
                             Locality::ClusterWide, r.value()});
    return append_record(VoteRecord{r, candidate, pc.cluster, precinct, false}, time);
}

void Election::set_compromised(PrecinctId precinct, bool compromised) {
    config_.precinct(precinct);
    if (compromised)
        compromised_.insert(precinct);
    else
        compromised_.erase(precinct);
}

RawElectionOutput Election::close_polls() {
    for (const auto& s : sessions_)
        if (s.status == SessionStatus::Open)
            throw ProtocolError(ProtocolError::Kind::ProtocolViolation,
                                "session " + std::to_string(s.id.value) + " still open at close");
    closed_ = true;
    RawElectionOutput out;
    out.config = config_;
    out.records.reserve(records_.size());
    for (std::size_t i = 0; i < records_.size(); ++i)
        if (!withdrawn_[i]) out.records.push_back(records_[i]);

    // Record indices shift once withdrawn rows are dropped.
    std::vector<std::size_t> remap(records_.size(), 0);
    for (std::size_t i = 0, j = 0; i < records_.size(); ++i)
        if (!withdrawn_[i]) remap[i] = j++;

    for (auto& [p, box] : boxes_) {
        BallotBox sealed = box;
        random::Stream stream(random::derive_seed(config_.seed, random::Purpose::Ballot, p.value));
        stream.shuffle(sealed.marks);
        out.ballot_boxes.push_back(std::move(sealed));
    }
    for (const auto& [p, roll] : rolls_) out.rolls.push_back(VoterRoll{p, roll.size()});
    out.logs = logs_;
    out.receipts = receipts_;
    for (auto& ir : out.receipts)
        if (ir.record) ir.record = remap[*ir.record];
    for (const auto& p : config_.precincts) out.keys.add(MachineId{p.id.value}, signer_->public_key(MachineId{p.id.value}));
    out.signer = signer_;
    out.dummy_counts = dummy_counts_;
    out.ground_truth = truth_;
    out.nullified_sessions = nullified_;
    return out;
}

// ---------------------------------------------------------------------------
// Schedule + driver

std::vector<ScheduledVoter> make_schedule(const ElectionConfig& config) {
    std::vector<ScheduledVoter> out;
    out.reserve(config.num_voters());
    std::uint32_t next_voter = 0;
    for (const auto& p : config.precincts) {
        random::Stream stream(random::derive_seed(config.seed, random::Purpose::Schedule, p.id.value));
        std::vector<CandidateId> choices;
        choices.reserve(p.voters);
        if (p.exact_counts) {
            for (CandidateId c = 0; c < p.exact_counts->size(); ++c)
                choices.insert(choices.end(), (*p.exact_counts)[c], c);
            stream.shuffle(choices);
        } else {
            for (std::uint32_t i = 0; i < p.voters; ++i)
                choices.push_back(static_cast<CandidateId>(stream.weighted(p.preferences)));
        }
        std::vector<std::uint32_t> times(p.voters);
        for (auto& t : times) t = 1 + static_cast<std::uint32_t>(stream.below(config.day_seconds > 1 ? config.day_seconds - 1 : 1));
        std::sort(times.begin(), times.end());
        for (std::uint32_t i = 0; i < p.voters; ++i)
            out.push_back(ScheduledVoter{times[i], p.id, VoterId{next_voter++}, choices[i]});
    }
    std::stable_sort(out.begin(), out.end(), [](const ScheduledVoter& a, const ScheduledVoter& b) {
        if (a.time != b.time) return a.time < b.time;
        return a.precinct < b.precinct;
    });
    return out;
}

RawElectionOutput simulate_election(const ElectionConfig& config, const SimulationHooks& hooks) {
    Election election(config);
    election.seed_all();
    if (hooks.setup) hooks.setup(election);
    for (const auto& v : make_schedule(config)) {
        for (int attempt = 0;; ++attempt) {
            if (attempt > 8)
                throw ProtocolError(ProtocolError::Kind::ProtocolViolation, "machine keeps failing the in-booth check");
            Session s = election.open_session(v.precinct, v.voter, v.time);
            CastOptions options = hooks.plan ? hooks.plan(election, s, v.choice, attempt) : CastOptions{};
            CastResult res = election.cast_vote(s.id, v.choice, options);
            if (in_booth_check(res.receipt, res.displayed_r, v.choice, res.marked) == BoothCheck::Challenge) {
                election.challenge(s.id);
                continue;
            }
            if (hooks.accepted) hooks.accepted(election, election.session(s.id), res);
            break;
        }
    }
    if (hooks.before_close) hooks.before_close(election);
    return election.close_polls();
}

}  // namespace sfv::engine
