#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <string_view>

namespace fswsim
{

class RngRoot;

/// Deterministic pseudorandom stream.
///
/// Engine is std::mt19937_64 (output sequence fixed by the standard); the
/// distribution transforms are implemented here rather than taken from
/// <random> because the standard distributions are not bit-portable across
/// library implementations.
class RandomStream
{
public:
    explicit RandomStream(std::uint64_t key, RngRoot* ledger = nullptr) : engine_{key}, ledger_{ledger} {}

    std::uint64_t next_u64();
    std::uint32_t next_u32() { return static_cast<std::uint32_t>(next_u64() >> 32); }

    /// Uniform in [0, 1).
    double uniform();
    /// Standard normal (Box-Muller, two uniform draws per sample, no caching).
    double normal();
    double normal(double mean, double sigma) { return mean + sigma * normal(); }
    /// Uniform integer in [lo, hi], unbiased.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

    std::uint64_t draws() const { return draws_; }

private:
    std::mt19937_64 engine_;
    RngRoot* ledger_{nullptr};
    std::uint64_t draws_{0};
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view s);

/// Root of all randomness in one simulation instance.
///
/// Substreams are keyed by stable names ("link:sc0->sc1", "gnss:rx0:pr"), so a
/// substream's output depends only on (seed, name, draw index). Every draw from
/// any registered substream is also folded into a running digest; the end-of-run
/// fingerprint mixes that digest with one draw from the root stream, so matching
/// fingerprints evidence the same pattern of random values.
class RngRoot
{
public:
    explicit RngRoot(std::uint64_t seed);

    RngRoot(const RngRoot&) = delete;
    RngRoot& operator=(const RngRoot&) = delete;

    std::uint64_t seed() const { return seed_; }

    /// Registered, persistent substream (created on first use).
    RandomStream& stream(const std::string& name);

    /// Fresh stream for (seed, name) that is not retained. Draws still feed
    /// the digest.
    RandomStream derive(std::string_view name);

    /// One 32-bit draw from the root stream, mixed with the draw digest.
    std::uint32_t fingerprint_draw();

    /// Folds an external value into the digest. Exists only so tests can
    /// inject nondeterminism (e.g. a wall-clock read).
    void absorb(std::uint64_t value);

    std::uint64_t digest() const { return digest_; }
    std::uint64_t key_for(std::string_view name) const;

private:
    friend class RandomStream;
    void note_draw(std::uint64_t v) { digest_ = splitmix64(digest_ ^ v); }

    std::uint64_t seed_;
    std::uint64_t digest_;
    RandomStream root_;
    std::map<std::string, std::unique_ptr<RandomStream>, std::less<>> streams_;
};

/// Lowercase, zero-padded 8-character hex.
std::string hex32(std::uint32_t v);

} // namespace fswsim
