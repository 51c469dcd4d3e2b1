#include "rundir.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "sfv/error.hpp"

namespace sfv::cli {

namespace {

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    for (;;) {
        auto pos = s.find(sep);
        out.push_back(s.substr(0, pos));
        if (pos == std::string_view::npos) break;
        s.remove_prefix(pos + 1);
    }
    return out;
}

std::uint64_t number(std::string_view s, std::size_t line, const char* what) {
    std::uint64_t v = 0;
    if (s.empty()) throw InputError(std::string(what) + " line " + std::to_string(line) + ": empty field");
    for (char c : s) {
        if (c < '0' || c > '9')
            throw InputError(std::string(what) + " line " + std::to_string(line) + ": bad number '" + std::string(s) +
                             "'");
        v = v * 10 + static_cast<std::uint64_t>(c - '0');
    }
    return v;
}

/// Yields data lines (header skipped) with 1-based line numbers.
template <class Fn>
void each_row(std::string_view text, std::string_view header, const char* what, Fn fn) {
    std::size_t line_no = 0;
    bool seen_header = false;
    while (!text.empty()) {
        ++line_no;
        auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
        if (line.empty()) continue;
        if (!seen_header) {
            if (line != header) throw InputError(std::string(what) + ": expected header '" + std::string(header) + "'");
            seen_header = true;
            continue;
        }
        fn(split(line, ','), line_no);
    }
    if (!seen_header) throw InputError(std::string(what) + ": empty file");
}

}  // namespace

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_file(const fs::path& path, std::string_view contents) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out << contents;
}

fs::path resolve_ledger_dir(const fs::path& path) {
    if (fs::exists(path / ledger::flat_file_name())) return path;
    if (fs::exists(path / "ledger" / ledger::flat_file_name())) return path / "ledger";
    throw InputError("no " + ledger::flat_file_name() + " under " + path.string());
}

std::string serialize_records(std::span<const VoteRecord> records, int width) {
    std::ostringstream os;
    os << "r,candidate,cluster,precinct,dummy\n";
    for (const auto& r : records)
        os << format_pseudonym(Pseudonym(r.r.value(), width)) << ',' << r.candidate << ',' << r.cluster.value << ','
           << r.precinct.value << ',' << (r.is_dummy ? 1 : 0) << '\n';
    return os.str();
}

std::vector<VoteRecord> parse_records(std::string_view text) {
    std::vector<VoteRecord> out;
    each_row(text, "r,candidate,cluster,precinct,dummy", "records.csv", [&](const auto& f, std::size_t line) {
        if (f.size() != 5) throw InputError("records.csv line " + std::to_string(line) + ": expected 5 fields");
        auto r = parse_pseudonym(f[0]);
        if (!r) throw InputError("records.csv line " + std::to_string(line) + ": bad pseudonym");
        out.push_back(VoteRecord{*r, static_cast<CandidateId>(number(f[1], line, "records.csv")),
                                 ClusterId{static_cast<std::uint32_t>(number(f[2], line, "records.csv"))},
                                 PrecinctId{static_cast<std::uint32_t>(number(f[3], line, "records.csv"))},
                                 number(f[4], line, "records.csv") != 0});
    });
    return out;
}

std::string serialize_boxes(std::span<const engine::BallotBox> boxes, std::size_t candidates) {
    std::ostringstream os;
    os << "precinct,counts\n";
    for (const auto& b : boxes) {
        os << b.precinct.value;
        for (auto c : b.counts(candidates)) os << ',' << c;
        os << '\n';
    }
    return os.str();
}

std::vector<engine::BallotBox> parse_boxes(std::string_view text) {
    std::vector<engine::BallotBox> out;
    each_row(text, "precinct,counts", "ballot-boxes.csv", [&](const auto& f, std::size_t line) {
        engine::BallotBox box{PrecinctId{static_cast<std::uint32_t>(number(f[0], line, "ballot-boxes.csv"))}, {}};
        for (std::size_t c = 1; c < f.size(); ++c)
            box.marks.insert(box.marks.end(), number(f[c], line, "ballot-boxes.csv"),
                             static_cast<CandidateId>(c - 1));
        out.push_back(std::move(box));
    });
    return out;
}

std::string serialize_rolls(std::span<const engine::VoterRoll> rolls) {
    std::ostringstream os;
    os << "precinct,crossed_off\n";
    for (const auto& r : rolls) os << r.precinct.value << ',' << r.crossed_off << '\n';
    return os.str();
}

std::vector<engine::VoterRoll> parse_rolls(std::string_view text) {
    std::vector<engine::VoterRoll> out;
    each_row(text, "precinct,crossed_off", "rolls.csv", [&](const auto& f, std::size_t line) {
        if (f.size() != 2) throw InputError("rolls.csv line " + std::to_string(line) + ": expected 2 fields");
        out.push_back({PrecinctId{static_cast<std::uint32_t>(number(f[0], line, "rolls.csv"))},
                       number(f[1], line, "rolls.csv")});
    });
    return out;
}

std::vector<std::string> write_ledger(const fs::path& dir, std::span<const VoteRecord> records,
                                      const ElectionConfig& config, const signing::KeyRegistry& keys) {
    std::vector<std::string> names;
    auto put = [&](const std::string& name, const std::string& text) {
        write_file(dir / name, text);
        names.push_back(name);
    };
    put(ledger::flat_file_name(),
        ledger::serialize(ledger::build_format_a(records, config.num_candidates(), config.pseudonym_width)));
    const auto tree = ledger::build_format_b(records, config);
    for (const auto& c : tree.clusters) put(ledger::cluster_file_name(c.cluster), ledger::serialize(c));
    for (const auto& s : tree.supers) put(ledger::super_file_name(SuperId{s.node}), ledger::serialize(s));
    for (const auto& u : tree.ultras) put(ledger::ultra_file_name(UltraId{u.node}), ledger::serialize(u));
    put(ledger::national_file_name(), ledger::serialize(tree.national));
    put("keys.csv", keys.serialize());
    return names;
}

LoadedLedger load_ledger(const fs::path& dir, ledger::Strictness strictness) {
    LoadedLedger out;
    out.flat = ledger::parse_flat(read_file(dir / ledger::flat_file_name()), strictness);
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    bool have_national = false;
    for (const auto& p : files) {
        const auto name = p.filename().string();
        if (name.starts_with("cluster-") && name.ends_with(".csv")) {
            out.tree.clusters.push_back(ledger::parse_cluster(read_file(p), strictness));
        } else if (name.ends_with(".agg.csv")) {
            auto agg = ledger::parse_aggregate(read_file(p), strictness);
            if (agg.level == ledger::Level::Super)
                out.tree.supers.push_back(std::move(agg));
            else if (agg.level == ledger::Level::Ultra)
                out.tree.ultras.push_back(std::move(agg));
            else {
                out.tree.national = std::move(agg);
                have_national = true;
            }
        }
    }
    if (!have_national) out.tree.national.candidates = 0;
    auto by_cluster = [](const auto& a, const auto& b) { return a.cluster < b.cluster; };
    auto by_node = [](const auto& a, const auto& b) { return a.node < b.node; };
    std::sort(out.tree.clusters.begin(), out.tree.clusters.end(), by_cluster);
    std::sort(out.tree.supers.begin(), out.tree.supers.end(), by_node);
    std::sort(out.tree.ultras.begin(), out.tree.ultras.end(), by_node);
    return out;
}

void write_run(const RunPaths& paths, const ConfigFile& config, const engine::RawElectionOutput& out, bool receipts) {
    const auto& cfg = out.config;
    fs::create_directories(paths.root);
    write_file(paths.config(), serialize_config(config));
    write_ledger(paths.ledger(), out.records, cfg, out.keys);
    write_file(paths.records(), serialize_records(out.records, cfg.pseudonym_width));
    write_file(paths.boxes(), serialize_boxes(out.ballot_boxes, cfg.num_candidates()));
    write_file(paths.rolls(), serialize_rolls(out.rolls));
    write_file(paths.log(), engine::format_log(out.logs));

    std::ostringstream voters;
    voters << "voter,session,precinct,cluster,choice,receipt\n";
    for (std::size_t i = 0; i < out.receipts.size(); ++i) {
        const auto& ir = out.receipts[i];
        const auto file = paths.receipt(ir.voter.value);
        voters << ir.voter.value << ',' << ir.session.value << ',' << ir.precinct.value << ',' << ir.cluster.value
               << ',' << ir.choice << ',' << fs::relative(file, paths.root).generic_string() << '\n';
        if (receipts) write_file(file, serialize_receipt(out.signed_receipt(i)));
    }
    write_file(paths.voters(), voters.str());
    write_manifest(paths, config);
}

void write_manifest(const RunPaths& paths, const ConfigFile& config) {
    nlohmann::json m;
    const auto& cfg = config.election;
    m["seed"] = cfg.seed;
    m["config_sha256"] = signing::sha256_hex(serialize_config(config));
    m["voters"] = cfg.num_voters();
    m["candidates"] = nlohmann::json::array();
    for (const auto& c : cfg.candidates) m["candidates"].push_back(c.display_name);
    m["pseudonym_width"] = cfg.pseudonym_width;
    nlohmann::json files = nlohmann::json::object();
    std::vector<fs::path> all;
    for (const auto& e : fs::recursive_directory_iterator(paths.root))
        if (e.is_regular_file() && e.path() != paths.manifest()) all.push_back(e.path());
    std::sort(all.begin(), all.end());
    for (const auto& p : all) files[fs::relative(p, paths.root).generic_string()] = signing::sha256_hex(read_file(p));
    m["files"] = std::move(files);
    write_file(paths.manifest(), m.dump(2) + "\n");
}

ConfigFile load_config(const fs::path& path) { return parse_config(read_file(path)); }

}  // namespace sfv::cli
