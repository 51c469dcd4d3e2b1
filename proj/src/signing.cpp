#include "sfv/signing.hpp"

#include <sodium.h>

#include <charconv>
#include <mutex>

#include "sfv/random.hpp"

namespace sfv::signing {

namespace {

void ensure_sodium() {
    static std::once_flag once;
    std::call_once(once, [] {
        if (sodium_init() < 0) throw Error("libsodium failed to initialise");
    });
}

}  // namespace

const PublicKey& KeyRegistry::at(MachineId machine) const {
    auto it = keys_.find(machine);
    if (it == keys_.end()) throw UnknownKey("no public key for machine " + std::to_string(machine.value));
    return it->second;
}

std::string KeyRegistry::serialize() const {
    std::string out;
    for (const auto& [machine, key] : keys_) {
        out += std::to_string(machine.value);
        out += ',';
        out += to_hex(std::vector<std::uint8_t>(key.begin(), key.end()));
        out += '\n';
    }
    return out;
}

KeyRegistry KeyRegistry::parse(std::string_view text) {
    KeyRegistry reg;
    std::size_t line_no = 0;
    while (!text.empty()) {
        ++line_no;
        auto nl = text.find('\n');
        auto line = text.substr(0, nl);
        text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
        if (line.empty()) continue;
        auto comma = line.find(',');
        std::uint32_t id = 0;
        auto bad = [&] { return ConfigParseError(line_no, "malformed key registry line"); };
        if (comma == std::string_view::npos) throw bad();
        auto [p, ec] = std::from_chars(line.data(), line.data() + comma, id);
        if (ec != std::errc{} || p != line.data() + comma) throw bad();
        auto bytes = from_hex(line.substr(comma + 1));
        if (!bytes || bytes->size() != 32) throw bad();
        PublicKey key;
        std::copy(bytes->begin(), bytes->end(), key.begin());
        reg.add(MachineId{id}, key);
    }
    return reg;
}

MachineSigner::KeyPair MachineSigner::keypair(MachineId machine) const {
    if (auto it = cache_.find(machine); it != cache_.end()) return it->second;
    ensure_sodium();
    std::array<std::uint8_t, crypto_sign_SEEDBYTES> seed{};
    std::uint64_t s = random::derive_seed(seed_, random::Purpose::MachineKey, machine.value);
    for (std::size_t i = 0; i < seed.size(); ++i) {
        if (i % 8 == 0 && i != 0) s = random::mix64(s);
        seed[i] = static_cast<std::uint8_t>(s >> (8 * (i % 8)));
    }
    KeyPair kp;
    crypto_sign_seed_keypair(kp.pk.data(), kp.sk.data(), seed.data());
    cache_.emplace(machine, kp);
    return kp;
}

PublicKey MachineSigner::public_key(MachineId machine) const { return keypair(machine).pk; }

std::vector<std::uint8_t> MachineSigner::sign(MachineId machine, std::string_view message) const {
    auto kp = keypair(machine);
    std::vector<std::uint8_t> sig(crypto_sign_BYTES);
    crypto_sign_detached(sig.data(), nullptr, reinterpret_cast<const unsigned char*>(message.data()), message.size(),
                         kp.sk.data());
    return sig;
}

void MachineSigner::sign(Receipt& receipt) const {
    receipt.signature = sign(receipt.machine, canonical_receipt_bytes(receipt));
}

bool verify_receipt_signature(const Receipt& receipt, const KeyRegistry& keys) {
    const auto& pk = keys.at(receipt.machine);
    if (receipt.signature.size() != crypto_sign_BYTES) return false;
    std::string msg;
    try {
        msg = canonical_receipt_bytes(receipt);
    } catch (const MalformedReceipt&) {
        return false;
    }
    ensure_sodium();
    return crypto_sign_verify_detached(receipt.signature.data(), reinterpret_cast<const unsigned char*>(msg.data()),
                                       msg.size(), pk.data()) == 0;
}

std::string sha256_hex(std::string_view data) {
    ensure_sodium();
    std::vector<std::uint8_t> digest(crypto_hash_sha256_BYTES);
    crypto_hash_sha256(digest.data(), reinterpret_cast<const unsigned char*>(data.data()), data.size());
    return to_hex(digest);
}

}  // namespace sfv::signing
