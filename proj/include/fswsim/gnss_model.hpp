#pragma once

#include "fswsim/continuum.hpp"
#include "fswsim/kepler.hpp"
#include "fswsim/rng.hpp"
#include "fswsim/sim_time.hpp"

#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace fswsim
{

/// One almanac row. Angles in degrees in the file, radians here.
struct AlmanacEntry
{
    int prn{0};
    KeplerianElements elements;
};

/// Almanac text format: one satellite per line,
///   prn a_m e i_deg raan_deg argp_deg mean_anomaly_deg
/// '#' starts a comment. Throws Fault(config_error) on malformed input.
std::vector<AlmanacEntry> parse_almanac(std::istream& in);
std::vector<AlmanacEntry> load_almanac(const std::string& path);
/// 31 satellites in 6 planes.
std::vector<AlmanacEntry> builtin_almanac();

struct GnssSatellite
{
    int prn{0};
    KeplerianElements elements; ///< at the reference epoch
    double raan_rate{0};        ///< rad/s, secular J2
    double argp_rate{0};
    double mean_motion{0};      ///< secular J2-corrected mean anomaly rate
};

struct ConstellationConfig
{
    double mu{constants::earth_mu};
    double j2{constants::earth_j2};
    double earth_radius{constants::earth_radius};
    double rtn_sigma{1.0}; ///< per-axis vehicle position perturbation, m
};

struct SatPosition
{
    int prn;
    Vec3 nominal;  ///< closed-form orbit, used for visibility geometry
    Vec3 position; ///< nominal plus RTN perturbation, used for ranging
};

/// Closed-form constellation: Kepler orbits with secular J2 drift of the node,
/// perigee and mean anomaly, plus a per-(prn, second) RTN perturbation drawn
/// from a derived stream so any epoch is replayable in isolation.
class Constellation
{
public:
    Constellation(const std::vector<AlmanacEntry>& almanac, ConstellationConfig cfg, RngRoot* rng);

    const std::vector<GnssSatellite>& satellites() const { return sats_; }
    const ConstellationConfig& config() const { return cfg_; }

    /// Unperturbed elements at t (seconds since the reference epoch).
    KeplerianElements elements_at(const GnssSatellite& sat, SimTime t) const;
    /// Inertial positions at t, perturbation included. Cached for the last t.
    const std::vector<SatPosition>& positions(SimTime t) const;

private:
    std::vector<GnssSatellite> sats_;
    ConstellationConfig cfg_;
    RngRoot* rng_;
    mutable std::optional<SimTime> cached_at_;
    mutable std::vector<SatPosition> cache_;
};

struct SigmaBounds
{
    double min;
    double max;
};

/// Linear in elevation between max (0 deg) and min (90 deg).
double elevation_sigma(double elevation_deg, SigmaBounds bounds);

/// Body-to-inertial rotation as a function of time and truth state.
using AttitudeProfile = std::function<Mat3(SimTime, const BodyState&)>;

/// Body +z toward the local zenith.
AttitudeProfile zenith_pointing();
/// Body +z toward the nadir (antenna facing the Earth).
AttitudeProfile nadir_pointing();
AttitudeProfile fixed_attitude(const Mat3& body_to_inertial);
/// Rotation taking body +z onto `dir`.
Mat3 rotation_z_to(const Vec3& dir);

struct ReceiverConfig
{
    Vec3 boresight{Vec3::UnitZ()};
    AttitudeProfile attitude{zenith_pointing()};
    double mask_deg{5.0};
    SigmaBounds pseudorange{0.1437, 2.2769};
    SigmaBounds carrier_phase{0.659e-3, 10.45e-3};
    double pvt_position_sigma{1.5};
    double pvt_velocity_sigma{0.030};
    int ambiguity_min{-5};
    int ambiguity_max{5};
    double wavelength{constants::speed_of_light / constants::gps_l1_hz};
    bool noise_enabled{true};
    bool ambiguities_enabled{true};

    void validate() const;
};

struct GnssMeasurement
{
    int prn{0};
    SimTime epoch;
    double pseudorange{0};
    double carrier_phase{0};
    double elevation_deg{0};
    double sigma_pr{0};
    double sigma_cp{0};
    int ambiguity{0}; ///< truth, for analysis only; flight software must not read it
};

struct PvtSolution
{
    SimTime epoch;
    Vec3 position;
    Vec3 velocity;
};

/// One spacecraft's receiver. Noise substreams: gnss:<name>:{pr,cp,amb,pvt}.
class Receiver
{
public:
    Receiver(std::string name, ReceiverConfig cfg, const Constellation& constellation, RngRoot& rng);

    const std::string& name() const { return name_; }
    const ReceiverConfig& config() const { return cfg_; }

    /// Elevation of a line of sight above the antenna boresight plane, degrees.
    double elevation_deg(const Mat3& attitude, const Vec3& los_unit) const;

    /// PRNs not occluded by the Earth and at or above the mask angle.
    std::set<int> visible_set(const BodyState& rx, const Mat3& attitude, SimTime t) const;
    std::set<int> visible_set(const BodyState& rx, SimTime t) const;

    /// Throws Fault(epoch_misaligned) unless t is on a whole second.
    std::vector<GnssMeasurement> measure(const BodyState& rx, SimTime t);
    /// Throws Fault(no_fix) with fewer than 4 satellites visible.
    PvtSolution pvt_solution(const BodyState& rx, SimTime t);

private:
    struct Lock
    {
        std::int64_t last_second;
        int ambiguity;
    };

    std::string name_;
    ReceiverConfig cfg_;
    const Constellation& constellation_;
    RandomStream& pr_noise_;
    RandomStream& cp_noise_;
    RandomStream& amb_draw_;
    RandomStream& pvt_noise_;
    std::map<int, Lock> locks_;
};

} // namespace fswsim
