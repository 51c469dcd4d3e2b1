#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "sfv/core.hpp"

namespace sfv::signing {

using PublicKey = std::array<std::uint8_t, 32>;

/// machine id -> Ed25519 public key, published next to the ledger.
class KeyRegistry {
public:
    void add(MachineId machine, const PublicKey& key) { keys_[machine] = key; }
    /// Throws UnknownKey.
    const PublicKey& at(MachineId machine) const;
    bool contains(MachineId machine) const { return keys_.contains(machine); }
    const std::map<MachineId, PublicKey>& entries() const { return keys_; }

    /// `machine_id,hex_public_key` per line.
    std::string serialize() const;
    static KeyRegistry parse(std::string_view text);

    friend bool operator==(const KeyRegistry&, const KeyRegistry&) = default;

private:
    std::map<MachineId, PublicKey> keys_;
};

/// Holds the voting machines' secret keys, derived deterministically from the election seed.
/// Ed25519 signatures are deterministic, so signing later yields the same bytes as signing at cast time.
class MachineSigner {
public:
    explicit MachineSigner(std::uint64_t election_seed) : seed_(election_seed) {}

    PublicKey public_key(MachineId machine) const;
    std::vector<std::uint8_t> sign(MachineId machine, std::string_view message) const;
    void sign(Receipt& receipt) const;

private:
    struct KeyPair {
        PublicKey pk;
        std::array<std::uint8_t, 64> sk;
    };
    KeyPair keypair(MachineId machine) const;

    std::uint64_t seed_;
    mutable std::map<MachineId, KeyPair> cache_;
};

/// True iff the signature verifies over canonical_receipt_bytes. Throws UnknownKey.
bool verify_receipt_signature(const Receipt& receipt, const KeyRegistry& keys);

/// SHA-256, hex encoded.
std::string sha256_hex(std::string_view data);

}  // namespace sfv::signing
