#include "fswsim/rng.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

namespace fswsim
{

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view s)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s)
    {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t RandomStream::next_u64()
{
    const std::uint64_t v = engine_();
    ++draws_;
    if (ledger_) ledger_->note_draw(v);
    return v;
}

double RandomStream::uniform()
{
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RandomStream::normal()
{
    // u1 in (0, 1] keeps log finite.
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::int64_t RandomStream::uniform_int(std::int64_t lo, std::int64_t hi)
{
    const std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1;
    if (range == 0) return static_cast<std::int64_t>(next_u64());
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % range);
    std::uint64_t v;
    do
    {
        v = next_u64();
    } while (v >= limit);
    return lo + static_cast<std::int64_t>(v % range);
}

RngRoot::RngRoot(std::uint64_t seed)
    : seed_{seed}, digest_{splitmix64(seed ^ 0x5eedULL)}, root_{splitmix64(seed)}
{
}

std::uint64_t RngRoot::key_for(std::string_view name) const
{
    return splitmix64(seed_ ^ splitmix64(fnv1a64(name)));
}

RandomStream& RngRoot::stream(const std::string& name)
{
    auto it = streams_.find(name);
    if (it == streams_.end())
        it = streams_.emplace(name, std::make_unique<RandomStream>(key_for(name), this)).first;
    return *it->second;
}

RandomStream RngRoot::derive(std::string_view name)
{
    return RandomStream{key_for(name), this};
}

std::uint32_t RngRoot::fingerprint_draw()
{
    const std::uint64_t v = root_.next_u64();
    return static_cast<std::uint32_t>(splitmix64(v ^ digest_) >> 32);
}

void RngRoot::absorb(std::uint64_t value)
{
    note_draw(value);
}

std::string hex32(std::uint32_t v)
{
    char buf[9];
    std::snprintf(buf, sizeof buf, "%08x", v);
    return buf;
}

} // namespace fswsim
