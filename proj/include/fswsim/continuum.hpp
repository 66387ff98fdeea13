#pragma once

#include "fswsim/kepler.hpp"
#include "fswsim/sim_time.hpp"

#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace fswsim
{

class Kernel;

using BodyId = std::size_t;

/// Ground-truth continuous state of one spacecraft (ECI, SI units).
struct BodyState
{
    BodyId body{0};
    SimTime epoch;
    Vec3 position{Vec3::Zero()};
    Vec3 velocity{Vec3::Zero()};
    double mass{100.0};
    double drag_area{1.0};
    double cd{2.2};
    double srp_area{1.0};
    double cr{1.8};

    bool bit_equal(const BodyState& o) const;
};

struct ExponentialAtmosphere
{
    double rho0{6.967e-13};       ///< kg/m^3 at reference altitude
    double h0{500e3};             ///< reference altitude, m
    double scale_height{63822.0}; ///< m

    double density(double altitude) const;
};

enum class Dynamics
{
    rk4,
    identity, ///< f(x, dt) = x; reduces the hybrid loop to pure discrete-event
};

struct ForceModelConfig
{
    double mu{constants::earth_mu};
    bool include_j2{true};
    double j2{constants::earth_j2};
    double earth_radius{constants::earth_radius};
    bool include_drag{false};
    ExponentialAtmosphere atmosphere{};
    double earth_rotation_rate{constants::earth_rotation_rate};
    double integrator_step{10.0}; ///< fixed RK4 step, seconds, in [1, 10]
    Dynamics dynamics{Dynamics::rk4};

    /// Throws Fault(config_error) on out-of-range values.
    void validate() const;
    SimTime step() const { return SimTime::from_seconds(integrator_step); }
};

/// Total acceleration: point mass, optional J2, optional cannonball drag
/// against an atmosphere co-rotating with the Earth.
Vec3 acceleration(const Vec3& position, const Vec3& velocity, const ForceModelConfig& cfg, const BodyState& ballistic);

/// Fixed-step RK4 over dt: floor(dt/h) full steps then one partial step.
/// dt is quantized to whole nanoseconds. Throws Fault(reentry) if the radius
/// falls below the Earth radius after any step.
BodyState propagate(const BodyState& state, double dt_seconds, const ForceModelConfig& cfg);
BodyState propagate(const BodyState& state, SimTime dt, const ForceModelConfig& cfg);

/// Quasi-nonsingular relative orbital elements (deputy relative to chief).
struct RelativeElements
{
    double da{0};     ///< (a_d - a_c) / a_c
    double dlambda{0};///< (u_d - u_c) + (raan_d - raan_c) cos i_c, u = mean argument of latitude
    double dex{0};
    double dey{0};
    double dix{0};
    double diy{0};    ///< (raan_d - raan_c) sin i_c

    std::array<double, 6> as_array() const { return {da, dlambda, dex, dey, dix, diy}; }
};

/// Throws Fault(epoch_mismatch) or Fault(hyperbolic_chief).
RelativeElements to_relative_elements(const BodyState& chief, const BodyState& deputy, double mu = constants::earth_mu);

/// Holds ground truth for all bodies and propagates each one lazily.
///
/// Each body keeps an anchor state on an integration grid (anchor epoch plus
/// whole multiples of the step). A request at time t advances the anchor by
/// the whole steps that fit and takes one partial step from the anchor to t
/// without moving the anchor. The state returned at t therefore depends only on
/// the anchor, never on which other times were queried in between, so lazy and
/// eager query patterns give bit-identical results. Impulses re-anchor the grid
/// at the impulse time.
class Continuum
{
public:
    explicit Continuum(ForceModelConfig cfg, Kernel* kernel = nullptr);

    BodyId add_body(std::string name, const BodyState& initial);
    std::size_t body_count() const { return bodies_.size(); }
    const std::string& name(BodyId id) const { return bodies_.at(id).name; }
    BodyId find(const std::string& name) const;

    /// Throws Fault(time_reversal) if t precedes the last returned epoch.
    /// Inside a kernel dispatch, the current event must carry needs_continuum.
    const BodyState& request_state(BodyId id, SimTime t);

    /// Propagates to t, then adds dv given in the body's RTN frame.
    const BodyState& apply_impulse(BodyId id, SimTime t, const Vec3& dv_rtn);

    /// When set, the kernel's pre-event hook advances every body before every
    /// event (reference behaviour for lazy/eager comparisons).
    void set_eager(bool eager);

    const ForceModelConfig& config() const { return cfg_; }
    std::uint64_t body_propagations() const { return body_propagations_; }
    /// Last returned state, without propagating.
    const BodyState& peek(BodyId id) const { return bodies_.at(id).current; }

private:
    struct Body
    {
        std::string name;
        BodyState anchor;
        BodyState current;
    };

    const BodyState& advance(Body& b, SimTime t);
    void check_access() const;

    ForceModelConfig cfg_;
    SimTime step_;
    Kernel* kernel_;
    bool eager_{false};
    std::vector<Body> bodies_;
    std::uint64_t body_propagations_{0};
};

} // namespace fswsim
