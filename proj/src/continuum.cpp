#include "fswsim/continuum.hpp"

#include "fswsim/event_kernel.hpp"
#include "fswsim/fault.hpp"

#include <cmath>
#include <cstring>

namespace fswsim
{

namespace
{

struct Derivative
{
    Vec3 dr;
    Vec3 dv;
};

Derivative derivative(const Vec3& r, const Vec3& v, const ForceModelConfig& cfg, const BodyState& ballistic)
{
    return {v, acceleration(r, v, cfg, ballistic)};
}

void rk4_step(BodyState& s, double h, const ForceModelConfig& cfg)
{
    const Vec3 r0 = s.position;
    const Vec3 v0 = s.velocity;
    const Derivative k1 = derivative(r0, v0, cfg, s);
    const Derivative k2 = derivative(r0 + 0.5 * h * k1.dr, v0 + 0.5 * h * k1.dv, cfg, s);
    const Derivative k3 = derivative(r0 + 0.5 * h * k2.dr, v0 + 0.5 * h * k2.dv, cfg, s);
    const Derivative k4 = derivative(r0 + h * k3.dr, v0 + h * k3.dv, cfg, s);
    s.position = r0 + (h / 6.0) * (k1.dr + 2.0 * k2.dr + 2.0 * k3.dr + k4.dr);
    s.velocity = v0 + (h / 6.0) * (k1.dv + 2.0 * k2.dv + 2.0 * k3.dv + k4.dv);
}

void check_radius(const BodyState& s, const ForceModelConfig& cfg)
{
    const double r = s.position.norm();
    if (!(r > cfg.earth_radius))
        throw Fault(FaultKind::reentry, "body " + std::to_string(s.body) + " radius " + std::to_string(r) +
                                            " m below Earth radius at " + s.epoch.str());
}

/// Advances s by `count` full steps of `step` and then by `partial`.
void integrate(BodyState& s, std::int64_t count, SimTime step, SimTime partial, const ForceModelConfig& cfg)
{
    if (cfg.dynamics == Dynamics::identity)
    {
        s.epoch = s.epoch + SimTime::from_ns(count * step.ns()) + partial;
        return;
    }
    const double h = step.seconds();
    for (std::int64_t k = 0; k < count; ++k)
    {
        rk4_step(s, h, cfg);
        s.epoch += step;
        check_radius(s, cfg);
    }
    if (partial.ns() > 0)
    {
        rk4_step(s, partial.seconds(), cfg);
        s.epoch += partial;
        check_radius(s, cfg);
    }
}

} // namespace

bool BodyState::bit_equal(const BodyState& o) const
{
    return body == o.body && epoch == o.epoch && std::memcmp(position.data(), o.position.data(), 3 * sizeof(double)) == 0 &&
           std::memcmp(velocity.data(), o.velocity.data(), 3 * sizeof(double)) == 0 && mass == o.mass &&
           drag_area == o.drag_area && cd == o.cd && srp_area == o.srp_area && cr == o.cr;
}

double ExponentialAtmosphere::density(double altitude) const
{
    return rho0 * std::exp(-(altitude - h0) / scale_height);
}

void ForceModelConfig::validate() const
{
    if (!(integrator_step >= 1.0 && integrator_step <= 10.0))
        throw Fault(FaultKind::config_error, "integrator_step must lie in [1, 10] s");
    if (!(mu > 0)) throw Fault(FaultKind::config_error, "mu must be positive");
    if (include_drag && !(atmosphere.scale_height > 0 && atmosphere.rho0 >= 0))
        throw Fault(FaultKind::config_error, "invalid exponential atmosphere");
}

Vec3 acceleration(const Vec3& r, const Vec3& v, const ForceModelConfig& cfg, const BodyState& ballistic)
{
    const double r2 = r.squaredNorm();
    const double rmag = std::sqrt(r2);
    Vec3 a = (-cfg.mu / (r2 * rmag)) * r;

    if (cfg.include_j2)
    {
        const double z2_r2 = r.z() * r.z() / r2;
        const double k = -1.5 * cfg.j2 * cfg.mu * cfg.earth_radius * cfg.earth_radius / (r2 * r2 * rmag);
        a += k * Vec3{r.x() * (1.0 - 5.0 * z2_r2), r.y() * (1.0 - 5.0 * z2_r2), r.z() * (3.0 - 5.0 * z2_r2)};
    }

    if (cfg.include_drag && ballistic.mass > 0)
    {
        const Vec3 omega{0.0, 0.0, cfg.earth_rotation_rate};
        const Vec3 v_rel = v - omega.cross(r);
        const double rho = cfg.atmosphere.density(rmag - cfg.earth_radius);
        a += (-0.5 * rho * ballistic.cd * ballistic.drag_area / ballistic.mass * v_rel.norm()) * v_rel;
    }
    return a;
}

BodyState propagate(const BodyState& state, SimTime dt, const ForceModelConfig& cfg)
{
    if (dt.ns() < 0) throw Fault(FaultKind::time_reversal, "negative propagation interval " + dt.str());
    BodyState out = state;
    if (dt.ns() == 0) return out;
    const SimTime step = cfg.step();
    integrate(out, dt.ns() / step.ns(), step, SimTime::from_ns(dt.ns() % step.ns()), cfg);
    return out;
}

BodyState propagate(const BodyState& state, double dt_seconds, const ForceModelConfig& cfg)
{
    return propagate(state, SimTime::from_seconds(dt_seconds), cfg);
}

RelativeElements to_relative_elements(const BodyState& chief, const BodyState& deputy, double mu)
{
    if (chief.epoch != deputy.epoch)
        throw Fault(FaultKind::epoch_mismatch, "chief at " + chief.epoch.str() + ", deputy at " + deputy.epoch.str());
    const KeplerianElements c = cartesian_to_elements(chief.position, chief.velocity, mu);
    const KeplerianElements d = cartesian_to_elements(deputy.position, deputy.velocity, mu);

    const double draan = wrap_pi(d.raan - c.raan);
    const double du = wrap_pi((d.argp + d.mean_anomaly) - (c.argp + c.mean_anomaly));
    RelativeElements out;
    out.da = (d.a - c.a) / c.a;
    out.dlambda = du + draan * std::cos(c.i);
    out.dex = d.e * std::cos(d.argp) - c.e * std::cos(c.argp);
    out.dey = d.e * std::sin(d.argp) - c.e * std::sin(c.argp);
    out.dix = d.i - c.i;
    out.diy = draan * std::sin(c.i);
    return out;
}

Continuum::Continuum(ForceModelConfig cfg, Kernel* kernel) : cfg_{cfg}, kernel_{kernel}
{
    cfg_.validate();
    step_ = cfg_.step();
}

BodyId Continuum::add_body(std::string name, const BodyState& initial)
{
    for (const auto& b : bodies_)
        if (b.name == name) throw Fault(FaultKind::duplicate_name, "body '" + name + "' already exists");
    BodyState s = initial;
    s.body = bodies_.size();
    check_radius(s, cfg_);
    bodies_.push_back({std::move(name), s, s});
    return s.body;
}

BodyId Continuum::find(const std::string& name) const
{
    for (BodyId i = 0; i < bodies_.size(); ++i)
        if (bodies_[i].name == name) return i;
    throw Fault(FaultKind::config_error, "unknown body '" + name + "'");
}

void Continuum::check_access() const
{
    if (!kernel_ || eager_) return;
    const EventInfo* ev = kernel_->current_event();
    if (ev && !ev->needs_continuum)
        throw Fault(FaultKind::continuum_access, "event " + std::to_string(ev->seq) +
                                                     " queried continuous state without needs_continuum");
}

const BodyState& Continuum::advance(Body& b, SimTime t)
{
    if (t < b.current.epoch)
        throw Fault(FaultKind::time_reversal,
                    "body '" + b.name + "' requested at " + t.str() + " before epoch " + b.current.epoch.str());
    if (t == b.current.epoch) return b.current;

    const std::int64_t since_anchor = (t - b.anchor.epoch).ns();
    integrate(b.anchor, since_anchor / step_.ns(), step_, SimTime{}, cfg_);
    b.current = b.anchor;
    integrate(b.current, 0, step_, t - b.anchor.epoch, cfg_);

    ++body_propagations_;
    if (kernel_) kernel_->note_propagation();
    return b.current;
}

const BodyState& Continuum::request_state(BodyId id, SimTime t)
{
    check_access();
    return advance(bodies_.at(id), t);
}

const BodyState& Continuum::apply_impulse(BodyId id, SimTime t, const Vec3& dv_rtn)
{
    check_access();
    Body& b = bodies_.at(id);
    advance(b, t);
    if (dv_rtn.isZero(0.0)) return b.current;
    b.current.velocity += rtn_to_inertial(b.current.position, b.current.velocity) * dv_rtn;
    b.anchor = b.current;
    return b.current;
}

void Continuum::set_eager(bool eager)
{
    eager_ = eager;
    if (!kernel_) return;
    if (eager)
        kernel_->set_pre_event_hook([this](SimTime t) {
            for (auto& b : bodies_) advance(b, t);
        });
    else
        kernel_->set_pre_event_hook({});
}

} // namespace fswsim
