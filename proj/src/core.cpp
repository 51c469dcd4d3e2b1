#include "sfv/core.hpp"

#include <algorithm>
#include <charconv>
#include <unordered_set>

namespace sfv {

std::uint64_t pow10(int width) {
    if (width < 1 || width > kMaxPseudonymWidth)
        throw ConfigError("pseudonym width must be in [1, " + std::to_string(kMaxPseudonymWidth) + "], got " +
                          std::to_string(width));
    std::uint64_t p = 1;
    for (int i = 0; i < width; ++i) p *= 10;
    return p;
}

Pseudonym::Pseudonym(std::uint64_t value, int width) : value_(value), width_(width) {
    if (value >= pow10(width))
        throw ConfigError("pseudonym " + std::to_string(value) + " does not fit in " + std::to_string(width) +
                          " digits");
}

std::string format_pseudonym(const Pseudonym& p) {
    std::string out(static_cast<std::size_t>(p.width()), '0');
    std::uint64_t v = p.value();
    for (auto it = out.rbegin(); it != out.rend() && v != 0; ++it, v /= 10) *it = static_cast<char>('0' + v % 10);
    return out;
}

std::optional<Pseudonym> parse_pseudonym(std::string_view text, int width) {
    if (width < 1 || width > kMaxPseudonymWidth || text.size() != static_cast<std::size_t>(width)) return std::nullopt;
    std::uint64_t v = 0;
    for (char c : text) {
        if (c < '0' || c > '9') return std::nullopt;
        v = v * 10 + static_cast<std::uint64_t>(c - '0');
    }
    return Pseudonym(v, width);
}

std::optional<Pseudonym> parse_pseudonym(std::string_view text) {
    return parse_pseudonym(text, static_cast<int>(text.size()));
}

void Receipt::validate(std::optional<std::size_t> expected_candidates) const {
    if (rows.empty()) throw MalformedReceipt("receipt has no rows");
    if (expected_candidates && rows.size() != *expected_candidates)
        throw MalformedReceipt("receipt has " + std::to_string(rows.size()) + " rows, expected " +
                               std::to_string(*expected_candidates));
    std::unordered_set<std::uint64_t> seen;
    const int width = rows.front().r.width();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].candidate != i)
            throw MalformedReceipt("missing row for candidate " + std::to_string(i));
        if (rows[i].r.width() != width) throw MalformedReceipt("mixed pseudonym widths on receipt");
        if (!seen.insert(rows[i].r.value()).second)
            throw MalformedReceipt("pseudonym repeated on receipt: " + format_pseudonym(rows[i].r));
    }
}

std::string canonical_receipt_bytes(const Receipt& receipt) {
    receipt.validate();
    std::string out = "machine=" + std::to_string(receipt.machine.value) + "\n";
    for (const auto& row : receipt.rows) {
        out += std::to_string(row.candidate);
        out += ',';
        out += format_pseudonym(row.r);
        out += '\n';
    }
    return out;
}

namespace {

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    while (!text.empty()) {
        auto nl = text.find('\n');
        if (nl == std::string_view::npos) {
            lines.push_back(text);
            break;
        }
        lines.push_back(text.substr(0, nl));
        text.remove_prefix(nl + 1);
    }
    return lines;
}

template <class T>
bool parse_uint(std::string_view s, T& out) {
    if (s.empty()) return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

Receipt decode_lines(const std::vector<std::string_view>& lines, std::size_t count) {
    if (count == 0 || !lines[0].starts_with("machine="))
        throw MalformedReceipt("receipt must start with a machine= line");
    Receipt receipt;
    if (!parse_uint(lines[0].substr(8), receipt.machine.value)) throw MalformedReceipt("bad machine id");
    for (std::size_t i = 1; i < count; ++i) {
        auto line = lines[i];
        auto comma = line.find(',');
        if (comma == std::string_view::npos) throw MalformedReceipt("receipt row without comma: " + std::string(line));
        ReceiptRow row;
        if (!parse_uint(line.substr(0, comma), row.candidate))
            throw MalformedReceipt("bad candidate id: " + std::string(line));
        auto r = parse_pseudonym(line.substr(comma + 1));
        if (!r) throw MalformedReceipt("bad pseudonym: " + std::string(line));
        row.r = *r;
        receipt.rows.push_back(row);
    }
    receipt.validate();
    return receipt;
}

}  // namespace

Receipt decode_receipt_bytes(std::string_view bytes) {
    auto lines = split_lines(bytes);
    return decode_lines(lines, lines.size());
}

std::string serialize_receipt(const Receipt& receipt) {
    return canonical_receipt_bytes(receipt) + "signature=" + to_hex(receipt.signature) + "\n";
}

Receipt parse_receipt(std::string_view text) {
    auto lines = split_lines(text);
    if (lines.empty() || !lines.back().starts_with("signature="))
        throw MalformedReceipt("receipt file must end with a signature= line");
    Receipt receipt = decode_lines(lines, lines.size() - 1);
    auto sig = from_hex(lines.back().substr(10));
    if (!sig) throw MalformedReceipt("signature is not hex");
    receipt.signature = std::move(*sig);
    return receipt;
}

std::string to_hex(const std::vector<std::uint8_t>& bytes) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (auto b : bytes) {
        out += digits[b >> 4];
        out += digits[b & 0xf];
    }
    return out;
}

std::optional<std::vector<std::uint8_t>> from_hex(std::string_view hex) {
    if (hex.size() % 2 != 0) return std::nullopt;
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        return -1;
    };
    std::vector<std::uint8_t> out;
    out.reserve(hex.size() / 2);
    for (std::size_t i = 0; i < hex.size(); i += 2) {
        int hi = nibble(hex[i]), lo = nibble(hex[i + 1]);
        if (hi < 0 || lo < 0) return std::nullopt;
        out.push_back(static_cast<std::uint8_t>(hi << 4 | lo));
    }
    return out;
}

}  // namespace sfv
