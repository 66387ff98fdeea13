#include "fswsim/comms_model.hpp"

#include "fswsim/fault.hpp"

#include <cmath>

namespace fswsim
{

LinkParams LinkParams::from_bounds(double lower_s, double upper_s, double p_enter, double p_exit)
{
    LinkParams p;
    p.delay_mu = (std::log(lower_s) + std::log(upper_s)) / 2.0;
    p.delay_sigma = (std::log(upper_s) - std::log(lower_s)) / 6.0;
    p.p_enter = p_enter;
    p.p_exit = p_exit;
    return p;
}

void LinkParams::validate() const
{
    if (!(p_enter >= 0.0 && p_enter <= 1.0 && p_exit >= 0.0 && p_exit <= 1.0))
        throw Fault(FaultKind::config_error, "link transition probabilities must lie in [0, 1]");
    if (!(delay_sigma > 0.0)) throw Fault(FaultKind::config_error, "link delay_sigma must be positive");
    if (!std::isfinite(delay_mu)) throw Fault(FaultKind::config_error, "link delay_mu must be finite");
}

RadioLink::RadioLink(std::string src, std::string dst, LinkParams params, RandomStream stream)
    : src_{std::move(src)}, dst_{std::move(dst)}, params_{params}, stream_{stream}, blackout_{params.start_in_blackout}
{
    params_.validate();
}

void RadioLink::set_params(const LinkParams& p)
{
    p.validate();
    params_ = p;
}

bool RadioLink::step_chain()
{
    const double u = stream_.uniform();
    if (blackout_)
    {
        if (u < params_.p_exit) blackout_ = false;
    }
    else
    {
        if (u < params_.p_enter) blackout_ = true;
    }
    return !blackout_;
}

double RadioLink::sample_delay()
{
    return std::exp(params_.delay_mu + params_.delay_sigma * stream_.normal());
}

RadioLink& CommsModel::add_link(const std::string& src, const std::string& dst, const LinkParams& params)
{
    auto key = std::make_pair(src, dst);
    if (links_.contains(key)) throw Fault(FaultKind::duplicate_name, "link " + src + "->" + dst + " already exists");
    auto [it, _] = links_.emplace(std::piecewise_construct, std::forward_as_tuple(key),
                                  std::forward_as_tuple(src, dst, params, rng_.derive("link:" + src + "->" + dst)));
    return it->second;
}

RadioLink* CommsModel::find(const std::string& src, const std::string& dst)
{
    auto it = links_.find({src, dst});
    return it == links_.end() ? nullptr : &it->second;
}

std::optional<EventId> CommsModel::send(const std::string& src, const std::string& dst, nlohmann::json message,
                                        SimTime t)
{
    RadioLink* link = find(src, dst);
    if (!link) throw Fault(FaultKind::unknown_link_target, "no radio link " + src + "->" + dst);
    return send(*link, std::move(message), t);
}

std::optional<EventId> CommsModel::send(RadioLink& link, nlohmann::json message, SimTime t)
{
    const std::uint64_t index = link.next_send_index_++;
    ++link.stats_.sent;
    if (!link.step_chain())
    {
        ++link.stats_.dropped;
        return std::nullopt;
    }
    const SimTime arrival = t + SimTime::from_seconds(link.sample_delay());
    Delivery d{link.src_, link.dst_, index, t, std::move(message)};
    RadioLink* lp = &link;
    return kernel_.schedule(
        arrival,
        [this, lp, d = std::move(d)](Kernel& k, const EventInfo&) {
            ++lp->stats_.delivered;
            if (lp->max_delivered_index_ && d.send_index < *lp->max_delivered_index_) ++lp->stats_.reordered;
            if (!lp->max_delivered_index_ || d.send_index > *lp->max_delivered_index_)
                lp->max_delivered_index_ = d.send_index;
            if (handler_) handler_(d, k.now());
        });
}

} // namespace fswsim
