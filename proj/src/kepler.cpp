#include "fswsim/kepler.hpp"

#include "fswsim/fault.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <numbers>

namespace fswsim
{

double wrap_two_pi(double angle)
{
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double a = std::fmod(angle, two_pi);
    if (a < 0) a += two_pi;
    return a;
}

double wrap_pi(double angle)
{
    double a = wrap_two_pi(angle);
    if (a > std::numbers::pi) a -= 2.0 * std::numbers::pi;
    return a;
}

double solve_kepler(double mean_anomaly, double e)
{
    const double m = wrap_pi(mean_anomaly);
    double ecc_anomaly = e < 0.8 ? m : std::numbers::pi;
    for (int iter = 0; iter < 50; ++iter)
    {
        const double f = ecc_anomaly - e * std::sin(ecc_anomaly) - m;
        const double step = f / (1.0 - e * std::cos(ecc_anomaly));
        ecc_anomaly -= step;
        if (std::abs(step) < 1e-15) break;
    }
    return ecc_anomaly + (mean_anomaly - m);
}

CartesianState elements_to_cartesian(const KeplerianElements& el, double mu)
{
    const double ecc_anomaly = solve_kepler(el.mean_anomaly, el.e);
    const double cos_e = std::cos(ecc_anomaly);
    const double sin_e = std::sin(ecc_anomaly);
    const double root = std::sqrt(1.0 - el.e * el.e);

    // Perifocal position and velocity.
    const double x = el.a * (cos_e - el.e);
    const double y = el.a * root * sin_e;
    const double rmag = el.a * (1.0 - el.e * cos_e);
    const double vfac = std::sqrt(mu * el.a) / rmag;
    const double vx = -vfac * sin_e;
    const double vy = vfac * root * cos_e;

    const Mat3 rot = (Eigen::AngleAxisd(el.raan, Vec3::UnitZ()) * Eigen::AngleAxisd(el.i, Vec3::UnitX()) *
                      Eigen::AngleAxisd(el.argp, Vec3::UnitZ()))
                         .toRotationMatrix();
    return {rot * Vec3{x, y, 0.0}, rot * Vec3{vx, vy, 0.0}};
}

KeplerianElements cartesian_to_elements(const Vec3& r, const Vec3& v, double mu)
{
    const double rmag = r.norm();
    const Vec3 h = r.cross(v);
    const double hmag = h.norm();
    const Vec3 e_vec = v.cross(h) / mu - r / rmag;
    const double e = e_vec.norm();
    if (e >= 1.0) throw Fault(FaultKind::hyperbolic_chief, "orbit is not elliptic (e = " + std::to_string(e) + ")");

    const double energy = 0.5 * v.squaredNorm() - mu / rmag;
    KeplerianElements el;
    el.a = -mu / (2.0 * energy);
    el.e = e;
    el.i = std::acos(std::clamp(h.z() / hmag, -1.0, 1.0));

    // Node direction; x axis for equatorial orbits.
    Vec3 node = Vec3::UnitZ().cross(h);
    if (node.norm() < 1e-12 * hmag) node = Vec3::UnitX();
    node.normalize();
    el.raan = wrap_two_pi(std::atan2(node.y(), node.x()));

    const Vec3 h_hat = h / hmag;
    const Vec3 in_plane = h_hat.cross(node);

    // Argument of latitude (true) and eccentricity vector in the node frame.
    const double u_true = std::atan2(r.dot(in_plane), r.dot(node));
    const double ex = e_vec.dot(node);
    const double ey = e_vec.dot(in_plane);
    const double argp = (e > 0.0) ? std::atan2(ey, ex) : 0.0;
    const double nu = u_true - argp;
    const double ecc_anomaly =
        2.0 * std::atan2(std::sqrt(1.0 - e) * std::sin(nu / 2.0), std::sqrt(1.0 + e) * std::cos(nu / 2.0));
    const double mean_anom = ecc_anomaly - e * std::sin(ecc_anomaly);

    el.argp = wrap_two_pi(argp);
    el.mean_anomaly = wrap_two_pi(mean_anom);
    return el;
}

Mat3 rtn_to_inertial(const Vec3& r, const Vec3& v)
{
    const Vec3 radial = r.normalized();
    const Vec3 normal = r.cross(v).normalized();
    const Vec3 transverse = normal.cross(radial);
    Mat3 m;
    m.col(0) = radial;
    m.col(1) = transverse;
    m.col(2) = normal;
    return m;
}

} // namespace fswsim
