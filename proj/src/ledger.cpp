#include "sfv/ledger.hpp"

#include <algorithm>
#include <charconv>
#include <set>

namespace sfv::ledger {

const ClusterFile* HierarchicalLedger::cluster(ClusterId id) const {
    for (const auto& f : clusters)
        if (f.cluster == id) return &f;
    return nullptr;
}

const AggregateFile* HierarchicalLedger::super(SuperId id) const {
    for (const auto& f : supers)
        if (f.node == id.value) return &f;
    return nullptr;
}

const AggregateFile* HierarchicalLedger::ultra(UltraId id) const {
    for (const auto& f : ultras)
        if (f.node == id.value) return &f;
    return nullptr;
}

FlatLedger build_format_a(std::span<const VoteRecord> records, std::size_t candidates, int width) {
    FlatLedger out;
    out.width = width;
    out.candidates = candidates;
    out.dummies.assign(candidates, 0);
    out.rows.reserve(records.size());
    for (const auto& rec : records) {
        out.rows.push_back(FlatRow{rec.r, rec.candidate});
        if (rec.is_dummy) out.dummies.at(rec.candidate) += 1;
    }
    std::sort(out.rows.begin(), out.rows.end());
    return out;
}

std::vector<std::int64_t> net_totals(const ClusterFile& file) {
    std::vector<std::int64_t> totals(file.candidates, 0);
    for (const auto& row : file.rows)
        if (row.candidate < file.candidates) totals[row.candidate] += 1;
    for (std::size_t c = 0; c < file.candidates && c < file.dummies.size(); ++c)
        totals[c] -= static_cast<std::int64_t>(file.dummies[c]);
    return totals;
}

namespace {

void add_into(std::vector<std::int64_t>& acc, const std::vector<std::int64_t>& v) {
    for (std::size_t i = 0; i < acc.size() && i < v.size(); ++i) acc[i] += v[i];
}

}  // namespace

void recompute_aggregates(HierarchicalLedger& ledger, const ElectionConfig& hierarchy) {
    const std::size_t n = hierarchy.num_candidates();
    ledger.supers.clear();
    ledger.ultras.clear();
    for (const auto& [super, ultra] : hierarchy.super_parent) {
        AggregateFile agg{Level::Super, super.value, ultra.value, n, {}, std::vector<std::int64_t>(n, 0)};
        for (auto cluster : hierarchy.clusters_of(super)) {
            const ClusterFile* cf = ledger.cluster(cluster);
            std::vector<std::int64_t> t = cf ? net_totals(*cf) : std::vector<std::int64_t>(n, 0);
            add_into(agg.totals, t);
            agg.children.push_back(ChildTotals{cluster.value, std::move(t)});
        }
        ledger.supers.push_back(std::move(agg));
    }
    AggregateFile national{Level::National, 0, std::nullopt, n, {}, std::vector<std::int64_t>(n, 0)};
    for (auto ultra : hierarchy.ultras()) {
        AggregateFile agg{Level::Ultra, ultra.value, 0, n, {}, std::vector<std::int64_t>(n, 0)};
        for (auto super : hierarchy.supers_of(ultra)) {
            const AggregateFile* sf = ledger.super(super);
            add_into(agg.totals, sf->totals);
            agg.children.push_back(ChildTotals{super.value, sf->totals});
        }
        add_into(national.totals, agg.totals);
        national.children.push_back(ChildTotals{ultra.value, agg.totals});
        ledger.ultras.push_back(std::move(agg));
    }
    ledger.national = std::move(national);
}

HierarchicalLedger build_format_b(std::span<const VoteRecord> records, const ElectionConfig& hierarchy) {
    const std::size_t n = hierarchy.num_candidates();
    std::map<ClusterId, std::vector<const VoteRecord*>> by_cluster;
    for (auto c : hierarchy.clusters()) by_cluster[c];
    for (const auto& rec : records) {
        auto it = by_cluster.find(rec.cluster);
        if (it == by_cluster.end())
            throw ConfigError("record belongs to cluster " + std::to_string(rec.cluster.value) +
                              " which is missing from the hierarchy");
        it->second.push_back(&rec);
    }
    HierarchicalLedger out;
    for (auto& [cluster, recs] : by_cluster) {
        ClusterFile file;
        file.cluster = cluster;
        file.super = hierarchy.cluster_parent.at(cluster);
        file.width = hierarchy.pseudonym_width;
        file.candidates = n;
        file.dummies.assign(n, 0);
        std::vector<std::pair<CandidateId, std::uint64_t>> keyed;
        keyed.reserve(recs.size());
        for (const auto* rec : recs) {
            keyed.emplace_back(rec->candidate, rec->r.value());
            if (rec->is_dummy) file.dummies.at(rec->candidate) += 1;
        }
        std::sort(keyed.begin(), keyed.end());
        file.rows.reserve(keyed.size());
        std::uint64_t serial = 0;
        for (const auto& [c, r] : keyed) file.rows.push_back(ClusterRow{++serial, Pseudonym(r, file.width), c});
        out.clusters.push_back(std::move(file));
    }
    recompute_aggregates(out, hierarchy);
    return out;
}

std::string flat_file_name() { return "national.flat.csv"; }
std::string cluster_file_name(ClusterId id) { return "cluster-" + std::to_string(id.value) + ".csv"; }
std::string super_file_name(SuperId id) { return "super-" + std::to_string(id.value) + ".agg.csv"; }
std::string ultra_file_name(UltraId id) { return "ultra-" + std::to_string(id.value) + ".agg.csv"; }
std::string national_file_name() { return "national.agg.csv"; }

namespace {

template <class T>
std::string join(const std::vector<T>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(v[i]);
    }
    return out;
}

std::string_view level_name(Level level) {
    switch (level) {
    case Level::Super:
        return "super";
    case Level::Ultra:
        return "ultra";
    case Level::National:
        return "national";
    }
    return "?";
}

}  // namespace

std::string serialize(const FlatLedger& ledger) {
    std::string out;
    out.reserve(64 + ledger.rows.size() * static_cast<std::size_t>(ledger.width + 4));
    out += "# format=sfv-flat-1\n";
    out += "# width=" + std::to_string(ledger.width) + "\n";
    out += "# candidates=" + std::to_string(ledger.candidates) + "\n";
    out += "# rows=" + std::to_string(ledger.rows.size()) + "\n";
    out += "# dummies=" + join(ledger.dummies) + "\n";
    for (const auto& row : ledger.rows) {
        out += format_pseudonym(row.r);
        out += ',';
        out += std::to_string(row.candidate);
        out += '\n';
    }
    return out;
}

std::string serialize(const ClusterFile& file) {
    std::string out;
    out.reserve(128 + file.rows.size() * static_cast<std::size_t>(file.width + 12));
    out += "# format=sfv-cluster-1\n";
    out += "# cluster=" + std::to_string(file.cluster.value) + "\n";
    out += "# super=" + std::to_string(file.super.value) + "\n";
    out += "# width=" + std::to_string(file.width) + "\n";
    out += "# candidates=" + std::to_string(file.candidates) + "\n";
    out += "# rows=" + std::to_string(file.rows.size()) + "\n";
    out += "# dummies=" + join(file.dummies) + "\n";
    for (const auto& row : file.rows) {
        out += std::to_string(row.serial);
        out += ',';
        out += format_pseudonym(row.r);
        out += ',';
        out += std::to_string(row.candidate);
        out += '\n';
    }
    return out;
}

std::string serialize(const AggregateFile& file) {
    std::string out;
    out += "# format=sfv-aggregate-1\n";
    out += "# level=" + std::string(level_name(file.level)) + "\n";
    out += "# node=" + std::to_string(file.node) + "\n";
    if (file.parent) out += "# parent=" + std::to_string(*file.parent) + "\n";
    out += "# candidates=" + std::to_string(file.candidates) + "\n";
    out += "# children=" + std::to_string(file.children.size()) + "\n";
    for (const auto& child : file.children) out += std::to_string(child.child) + "," + join(child.totals) + "\n";
    out += "total," + join(file.totals) + "\n";
    return out;
}

std::string_view to_string(ParseErrorKind kind) {
    switch (kind) {
    case ParseErrorKind::MalformedLine:
        return "malformed line";
    case ParseErrorKind::MissingHeader:
        return "missing header";
    case ParseErrorKind::UnknownHeaderKey:
        return "unknown header key";
    case ParseErrorKind::DuplicateHeaderKey:
        return "duplicate header key";
    case ParseErrorKind::BadDummyMetadata:
        return "bad dummy metadata";
    case ParseErrorKind::RowCountMismatch:
        return "row count mismatch";
    case ParseErrorKind::CandidateOutOfRange:
        return "candidate out of range";
    case ParseErrorKind::WidthMismatch:
        return "pseudonym width mismatch";
    case ParseErrorKind::SerialGap:
        return "serial gap";
    case ParseErrorKind::UnsortedRows:
        return "unsorted rows";
    case ParseErrorKind::TotalsMismatch:
        return "totals mismatch";
    }
    return "?";
}

namespace {

/// Walks a file line by line; header lines (`# key=value`) must precede data lines.
class Reader {
public:
    explicit Reader(std::string_view text) : text_(text) {}

    struct Line {
        std::size_t number;
        std::string_view text;
    };

    std::vector<Line> headers;
    std::vector<Line> data;

    void split() {
        std::size_t n = 0;
        while (!text_.empty()) {
            ++n;
            auto nl = text_.find('\n');
            if (nl == std::string_view::npos) {
                // Files always end with a newline; a truncated last line is malformed.
                throw ParseError(ParseErrorKind::MalformedLine, n, "missing trailing newline");
            }
            auto line = text_.substr(0, nl);
            text_.remove_prefix(nl + 1);
            if (line.starts_with("#")) {
                if (!data.empty()) throw ParseError(ParseErrorKind::MalformedLine, n, "header after data rows");
                headers.push_back({n, line});
            } else {
                data.push_back({n, line});
            }
        }
    }

    std::map<std::string, std::pair<std::string, std::size_t>> header_map(const std::set<std::string>& allowed) const {
        std::map<std::string, std::pair<std::string, std::size_t>> out;
        for (const auto& h : headers) {
            if (!h.text.starts_with("# "))
                throw ParseError(ParseErrorKind::MalformedLine, h.number, "header must start with '# '");
            auto body = h.text.substr(2);
            auto eq = body.find('=');
            if (eq == std::string_view::npos || eq == 0)
                throw ParseError(ParseErrorKind::MalformedLine, h.number, "header must be key=value");
            std::string key(body.substr(0, eq));
            if (!allowed.contains(key)) throw ParseError(ParseErrorKind::UnknownHeaderKey, h.number, key);
            if (!out.emplace(key, std::make_pair(std::string(body.substr(eq + 1)), h.number)).second)
                throw ParseError(ParseErrorKind::DuplicateHeaderKey, h.number, key);
        }
        return out;
    }

private:
    std::string_view text_;
};

using HeaderMap = std::map<std::string, std::pair<std::string, std::size_t>>;

const std::pair<std::string, std::size_t>& require(const HeaderMap& h, const std::string& key) {
    auto it = h.find(key);
    if (it == h.end()) throw ParseError(ParseErrorKind::MissingHeader, 1, key);
    return it->second;
}

template <class T>
bool to_uint(std::string_view s, T& out) {
    if (s.empty()) return false;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && p == s.data() + s.size();
}

bool to_int(std::string_view s, std::int64_t& out) {
    if (s.empty()) return false;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && p == s.data() + s.size();
}

template <class T>
T header_uint(const HeaderMap& h, const std::string& key) {
    const auto& [value, line] = require(h, key);
    T v{};
    if (!to_uint(value, v)) throw ParseError(ParseErrorKind::MalformedLine, line, key + " must be an unsigned integer");
    return v;
}

std::vector<std::string_view> fields(std::string_view line) {
    std::vector<std::string_view> out;
    while (true) {
        auto comma = line.find(',');
        out.push_back(line.substr(0, comma));
        if (comma == std::string_view::npos) break;
        line.remove_prefix(comma + 1);
    }
    return out;
}

std::vector<std::uint32_t> dummy_list(const HeaderMap& h, std::size_t candidates) {
    const auto& [value, line] = require(h, "dummies");
    std::vector<std::uint32_t> out;
    if (!value.empty()) {
        for (auto f : fields(value)) {
            std::uint32_t d = 0;
            if (!to_uint(f, d)) throw ParseError(ParseErrorKind::BadDummyMetadata, line, "non-numeric dummy count");
            out.push_back(d);
        }
    }
    if (out.size() != candidates)
        throw ParseError(ParseErrorKind::BadDummyMetadata, line,
                         "expected " + std::to_string(candidates) + " dummy counts, got " + std::to_string(out.size()));
    return out;
}

int header_width(const HeaderMap& h) {
    const auto w = header_uint<int>(h, "width");
    if (w < 1 || w > kMaxPseudonymWidth)
        throw ParseError(ParseErrorKind::MalformedLine, require(h, "width").second, "width out of range");
    return w;
}

void check_format(const HeaderMap& h, std::string_view expected) {
    const auto& [value, line] = require(h, "format");
    if (value != expected)
        throw ParseError(ParseErrorKind::MalformedLine, line, "expected format " + std::string(expected));
}

Pseudonym pseudonym_field(std::string_view f, int width, std::size_t line) {
    auto r = parse_pseudonym(f);
    if (!r) throw ParseError(ParseErrorKind::MalformedLine, line, "bad pseudonym '" + std::string(f) + "'");
    if (r->width() != width) throw ParseError(ParseErrorKind::WidthMismatch, line, std::string(f));
    return *r;
}

CandidateId candidate_field(std::string_view f, std::size_t candidates, std::size_t line) {
    CandidateId c = 0;
    if (!to_uint(f, c)) throw ParseError(ParseErrorKind::MalformedLine, line, "bad candidate '" + std::string(f) + "'");
    if (c >= candidates) throw ParseError(ParseErrorKind::CandidateOutOfRange, line, std::to_string(c));
    return c;
}

}  // namespace

FlatLedger parse_flat(std::string_view text, Strictness strictness) {
    Reader reader(text);
    reader.split();
    auto h = reader.header_map({"format", "width", "candidates", "rows", "dummies"});
    check_format(h, "sfv-flat-1");
    FlatLedger out;
    out.width = header_width(h);
    out.candidates = header_uint<std::size_t>(h, "candidates");
    out.dummies = dummy_list(h, out.candidates);
    const auto rows = header_uint<std::size_t>(h, "rows");
    out.rows.reserve(reader.data.size());
    for (const auto& line : reader.data) {
        auto f = fields(line.text);
        if (f.size() != 2) throw ParseError(ParseErrorKind::MalformedLine, line.number, "expected r,candidate");
        FlatRow row{pseudonym_field(f[0], out.width, line.number), candidate_field(f[1], out.candidates, line.number)};
        if (strictness == Strictness::Strict && !out.rows.empty() && row < out.rows.back())
            throw ParseError(ParseErrorKind::UnsortedRows, line.number, "rows must ascend by r then candidate");
        out.rows.push_back(row);
    }
    if (strictness == Strictness::Strict && rows != out.rows.size())
        throw ParseError(ParseErrorKind::RowCountMismatch, require(h, "rows").second,
                         "header says " + std::to_string(rows) + ", file has " + std::to_string(out.rows.size()));
    return out;
}

ClusterFile parse_cluster(std::string_view text, Strictness strictness) {
    Reader reader(text);
    reader.split();
    auto h = reader.header_map({"format", "cluster", "super", "width", "candidates", "rows", "dummies"});
    check_format(h, "sfv-cluster-1");
    ClusterFile out;
    out.cluster = ClusterId{header_uint<std::uint32_t>(h, "cluster")};
    out.super = SuperId{header_uint<std::uint32_t>(h, "super")};
    out.width = header_width(h);
    out.candidates = header_uint<std::size_t>(h, "candidates");
    out.dummies = dummy_list(h, out.candidates);
    const auto rows = header_uint<std::size_t>(h, "rows");
    out.rows.reserve(reader.data.size());
    for (const auto& line : reader.data) {
        auto f = fields(line.text);
        if (f.size() != 3) throw ParseError(ParseErrorKind::MalformedLine, line.number, "expected serial,r,candidate");
        ClusterRow row;
        if (!to_uint(f[0], row.serial))
            throw ParseError(ParseErrorKind::MalformedLine, line.number, "bad serial '" + std::string(f[0]) + "'");
        row.r = pseudonym_field(f[1], out.width, line.number);
        row.candidate = candidate_field(f[2], out.candidates, line.number);
        if (strictness == Strictness::Strict) {
            const std::uint64_t expected = out.rows.size() + 1;
            if (row.serial != expected)
                throw ParseError(ParseErrorKind::SerialGap, line.number,
                                 "expected serial " + std::to_string(expected) + ", found " + std::to_string(row.serial));
            if (!out.rows.empty()) {
                const auto& prev = out.rows.back();
                if (std::make_pair(row.candidate, row.r.value()) < std::make_pair(prev.candidate, prev.r.value()))
                    throw ParseError(ParseErrorKind::UnsortedRows, line.number,
                                     "rows must be grouped by candidate and ascend by r");
            }
        }
        out.rows.push_back(row);
    }
    if (strictness == Strictness::Strict && rows != out.rows.size())
        throw ParseError(ParseErrorKind::RowCountMismatch, require(h, "rows").second,
                         "header says " + std::to_string(rows) + ", file has " + std::to_string(out.rows.size()));
    return out;
}

AggregateFile parse_aggregate(std::string_view text, Strictness strictness) {
    Reader reader(text);
    reader.split();
    auto h = reader.header_map({"format", "level", "node", "parent", "candidates", "children"});
    check_format(h, "sfv-aggregate-1");
    AggregateFile out;
    const auto& [level, level_line] = require(h, "level");
    if (level == "super")
        out.level = Level::Super;
    else if (level == "ultra")
        out.level = Level::Ultra;
    else if (level == "national")
        out.level = Level::National;
    else
        throw ParseError(ParseErrorKind::MalformedLine, level_line, "unknown level '" + level + "'");
    out.node = header_uint<std::uint32_t>(h, "node");
    if (h.contains("parent")) out.parent = header_uint<std::uint32_t>(h, "parent");
    if ((out.level == Level::National) == out.parent.has_value())
        throw ParseError(ParseErrorKind::MalformedLine, level_line, "only the national node has no parent");
    out.candidates = header_uint<std::size_t>(h, "candidates");
    const auto children = header_uint<std::size_t>(h, "children");

    bool have_total = false;
    for (const auto& line : reader.data) {
        if (have_total) throw ParseError(ParseErrorKind::MalformedLine, line.number, "data after the total line");
        auto f = fields(line.text);
        if (f.size() != out.candidates + 1)
            throw ParseError(ParseErrorKind::MalformedLine, line.number,
                             "expected id followed by " + std::to_string(out.candidates) + " totals");
        std::vector<std::int64_t> totals;
        for (std::size_t i = 1; i < f.size(); ++i) {
            std::int64_t v = 0;
            if (!to_int(f[i], v)) throw ParseError(ParseErrorKind::MalformedLine, line.number, "bad total");
            totals.push_back(v);
        }
        if (f[0] == "total") {
            out.totals = std::move(totals);
            have_total = true;
        } else {
            std::uint32_t child = 0;
            if (!to_uint(f[0], child)) throw ParseError(ParseErrorKind::MalformedLine, line.number, "bad child id");
            out.children.push_back(ChildTotals{child, std::move(totals)});
        }
    }
    const std::size_t last_line = reader.data.empty() ? reader.headers.size() : reader.data.back().number;
    if (!have_total) throw ParseError(ParseErrorKind::MissingHeader, last_line, "total line");
    if (children != out.children.size())
        throw ParseError(ParseErrorKind::RowCountMismatch, require(h, "children").second,
                         "header says " + std::to_string(children) + ", file has " +
                             std::to_string(out.children.size()));
    if (strictness == Strictness::Strict) {
        std::vector<std::int64_t> sum(out.candidates, 0);
        for (const auto& child : out.children) add_into(sum, child.totals);
        if (sum != out.totals) throw ParseError(ParseErrorKind::TotalsMismatch, last_line, "children do not sum to total");
    }
    return out;
}

}  // namespace sfv::ledger
