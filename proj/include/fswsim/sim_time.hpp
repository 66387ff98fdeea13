#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <string>

namespace fswsim
{

/// Simulation time as integer nanoseconds since the scenario epoch.
///
/// Integer time keeps event ordering exact and replays bit-identical; the
/// scenario epoch is aligned to an integer GPS-time second.
class SimTime
{
public:
    constexpr SimTime() = default;

    static constexpr SimTime from_ns(std::int64_t ns) { return SimTime{ns}; }
    static SimTime from_seconds(double s) { return SimTime{static_cast<std::int64_t>(std::llround(s * 1e9))}; }
    static constexpr SimTime whole_seconds(std::int64_t s) { return SimTime{s * kNsPerSecond}; }

    constexpr std::int64_t ns() const { return ns_; }
    constexpr double seconds() const { return static_cast<double>(ns_) * 1e-9; }

    /// True when this time falls exactly on a whole second.
    constexpr bool on_second() const { return ns_ % kNsPerSecond == 0; }
    constexpr std::int64_t floor_second() const
    {
        return ns_ >= 0 ? ns_ / kNsPerSecond : -((-ns_ + kNsPerSecond - 1) / kNsPerSecond);
    }

    constexpr auto operator<=>(const SimTime&) const = default;

    constexpr SimTime operator+(SimTime o) const { return SimTime{ns_ + o.ns_}; }
    constexpr SimTime operator-(SimTime o) const { return SimTime{ns_ - o.ns_}; }
    constexpr SimTime& operator+=(SimTime o)
    {
        ns_ += o.ns_;
        return *this;
    }

    std::string str() const;

    static constexpr std::int64_t kNsPerSecond = 1'000'000'000;

private:
    constexpr explicit SimTime(std::int64_t ns) : ns_{ns} {}
    std::int64_t ns_{0};
};

inline std::string SimTime::str() const
{
    // Seconds with nanosecond resolution, no float round-off.
    const std::int64_t s = ns_ / kNsPerSecond;
    std::int64_t frac = ns_ % kNsPerSecond;
    if (frac < 0) frac = -frac;
    std::string f = std::to_string(frac);
    return std::to_string(s) + "." + std::string(9 - f.size(), '0') + f + "s";
}

inline constexpr SimTime seconds(std::int64_t s) { return SimTime::whole_seconds(s); }

} // namespace fswsim
