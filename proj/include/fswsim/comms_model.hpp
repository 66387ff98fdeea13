#pragma once

#include "fswsim/event_kernel.hpp"
#include "fswsim/rng.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>

namespace fswsim
{

struct LinkParams
{
    double p_enter{0.05};                       ///< P(off -> on) per send
    double p_exit{0.5};                         ///< P(on -> off) per send
    double delay_mu{0.0};                       ///< log-space mean
    double delay_sigma{std::log(100.0) / 6.0};  ///< log-space std, > 0
    bool start_in_blackout{false};

    /// mu, sigma such that exp(mu - 3 sigma) = lower and exp(mu + 3 sigma) = upper.
    static LinkParams from_bounds(double lower_s, double upper_s, double p_enter = 0.05, double p_exit = 0.5);

    /// Throws Fault(config_error).
    void validate() const;
};

struct LinkStats
{
    std::uint64_t sent{0};
    std::uint64_t dropped{0};
    std::uint64_t delivered{0};
    std::uint64_t reordered{0};

    std::uint64_t in_flight() const { return sent - dropped - delivered; }
    bool operator==(const LinkStats&) const = default;
};

/// Directed radio link: two-state blackout Markov chain stepped once per send,
/// log-normal transmission delay. All draws come from the link's own stream.
class RadioLink
{
public:
    RadioLink(std::string src, std::string dst, LinkParams params, RandomStream stream);

    const std::string& src() const { return src_; }
    const std::string& dst() const { return dst_; }
    const LinkParams& params() const { return params_; }
    void set_params(const LinkParams& p);
    bool in_blackout() const { return blackout_; }

    /// Steps the chain; returns true when the message survives.
    bool step_chain();
    /// Seconds; exp(mu + sigma z).
    double sample_delay();

    const LinkStats& stats() const { return stats_; }

private:
    friend class CommsModel;

    std::string src_;
    std::string dst_;
    LinkParams params_;
    RandomStream stream_;
    bool blackout_{false};
    LinkStats stats_;
    std::uint64_t next_send_index_{0};
    std::optional<std::uint64_t> max_delivered_index_;
};

/// What arrives at the receiving end.
struct Delivery
{
    std::string src;
    std::string dst;
    std::uint64_t send_index{0};
    SimTime sent_at;
    nlohmann::json message;
};

class CommsModel
{
public:
    using DeliveryHandler = std::function<void(const Delivery&, SimTime)>;

    CommsModel(Kernel& kernel, RngRoot& rng) : kernel_{kernel}, rng_{rng} {}

    /// Link with its own substream "link:<src>-><dst>".
    RadioLink& add_link(const std::string& src, const std::string& dst, const LinkParams& params);
    RadioLink* find(const std::string& src, const std::string& dst);
    const std::map<std::pair<std::string, std::string>, RadioLink>& links() const { return links_; }

    void set_delivery_handler(DeliveryHandler h) { handler_ = std::move(h); }

    /// Sends at kernel time t. Returns the delivery event id, or nullopt if
    /// the message was dropped. Throws Fault(unknown_link_target) without a link.
    std::optional<EventId> send(const std::string& src, const std::string& dst, nlohmann::json message, SimTime t);
    std::optional<EventId> send(RadioLink& link, nlohmann::json message, SimTime t);

private:
    Kernel& kernel_;
    RngRoot& rng_;
    std::map<std::pair<std::string, std::string>, RadioLink> links_;
    DeliveryHandler handler_;
};

} // namespace fswsim
