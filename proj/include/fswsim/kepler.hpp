#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace fswsim
{

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

namespace constants
{
inline constexpr double earth_mu = 3.986004418e14;       // m^3/s^2
inline constexpr double earth_radius = 6378137.0;        // m
inline constexpr double earth_j2 = 1.08262668e-3;
inline constexpr double earth_rotation_rate = 7.2921150e-5; // rad/s
inline constexpr double speed_of_light = 299792458.0;    // m/s
inline constexpr double gps_l1_hz = 1575.42e6;
} // namespace constants

/// Classical osculating elements. Angles in radians.
struct KeplerianElements
{
    double a{0};
    double e{0};
    double i{0};
    double raan{0};
    double argp{0};
    double mean_anomaly{0};
};

struct CartesianState
{
    Vec3 position;
    Vec3 velocity;
};

/// Solves M = E - e sin E for E (elliptic, e < 1).
double solve_kepler(double mean_anomaly, double e);

double wrap_two_pi(double angle);
double wrap_pi(double angle);

CartesianState elements_to_cartesian(const KeplerianElements& el, double mu);

/// Osculating elements of an elliptic orbit. Throws Fault(hyperbolic_chief)
/// for e >= 1. For circular or equatorial orbits the undefined angles are set
/// to zero and absorbed into the mean anomaly.
KeplerianElements cartesian_to_elements(const Vec3& r, const Vec3& v, double mu);

/// Radial / transverse / normal basis as matrix columns (RTN -> inertial).
Mat3 rtn_to_inertial(const Vec3& r, const Vec3& v);

} // namespace fswsim
