#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "sfv/config.hpp"
#include "sfv/engine.hpp"
#include "sfv/ledger.hpp"
#include "sfv/signing.hpp"

namespace sfv::cli {

namespace fs = std::filesystem;

/// Missing or unreadable input; reported with exit code 2.
class InputError : public Error {
public:
    using Error::Error;
};

std::string read_file(const fs::path& path);
void write_file(const fs::path& path, std::string_view contents);

/// Layout of a run directory:
///   config.cfg, manifest.json
///   ledger/      published Format A and Format B files plus keys.csv
///   central/     records.csv (the server's list, with precinct ids)
///   physical/    ballot-boxes.csv, rolls.csv
///   private/     voters.csv and receipts/<voter>.txt
///   logs/        events.log
struct RunPaths {
    fs::path root;
    fs::path ledger() const { return root / "ledger"; }
    fs::path records() const { return root / "central" / "records.csv"; }
    fs::path boxes() const { return root / "physical" / "ballot-boxes.csv"; }
    fs::path rolls() const { return root / "physical" / "rolls.csv"; }
    fs::path voters() const { return root / "private" / "voters.csv"; }
    fs::path receipt(std::uint32_t voter) const {
        return root / "private" / "receipts" / ("voter-" + std::to_string(voter) + ".txt");
    }
    fs::path config() const { return root / "config.cfg"; }
    fs::path manifest() const { return root / "manifest.json"; }
    fs::path log() const { return root / "logs" / "events.log"; }
};

/// A directory that holds ledger files: either the ledger itself or a run directory.
fs::path resolve_ledger_dir(const fs::path& path);

std::string serialize_records(std::span<const VoteRecord> records, int width);
std::vector<VoteRecord> parse_records(std::string_view text);

std::string serialize_boxes(std::span<const engine::BallotBox> boxes, std::size_t candidates);
/// Boxes are stored as per-candidate counts; marks come back in candidate order.
std::vector<engine::BallotBox> parse_boxes(std::string_view text);

std::string serialize_rolls(std::span<const engine::VoterRoll> rolls);
std::vector<engine::VoterRoll> parse_rolls(std::string_view text);

/// Writes the published ledger for `records` into `dir` and returns the relative file names.
std::vector<std::string> write_ledger(const fs::path& dir, std::span<const VoteRecord> records,
                                      const ElectionConfig& config, const signing::KeyRegistry& keys);

struct LoadedLedger {
    ledger::FlatLedger flat;
    ledger::HierarchicalLedger tree;
};

/// Strictly parses every ledger file in `dir`. Missing cluster or aggregate files are skipped,
/// so hierarchy checks can report them as incomplete evidence.
LoadedLedger load_ledger(const fs::path& dir, ledger::Strictness strictness = ledger::Strictness::Strict);

/// Writes config, ledger, central list, physical evidence, receipts and logs, then the manifest.
void write_run(const RunPaths& paths, const ConfigFile& config, const engine::RawElectionOutput& out, bool receipts);

/// Recomputes manifest.json from the files currently in the run directory.
void write_manifest(const RunPaths& paths, const ConfigFile& config);

ConfigFile load_config(const fs::path& path);

}  // namespace sfv::cli
