#include "fswsim/gnss_model.hpp"

#include "fswsim/fault.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace fswsim
{

namespace
{

constexpr double kDeg = std::numbers::pi / 180.0;

// Same content as data/gps_almanac.txt.
constexpr const char* kBuiltinAlmanac = R"(# Built-in GPS almanac: 31 satellites in 6 orbital planes (A-F).
# Columns: prn a_m e i_deg raan_deg argp_deg mean_anomaly_deg
# Elements are referenced to the scenario epoch. Nominal semi-major axis
# 26559700 m, inclination 55 deg, planes spaced 60 deg in RAAN.
 1 26558850.0 0.0035 55.40 17.00 37.00 323.00
 2 26559700.0 0.0050 54.60 17.00 74.00 346.00
 3 26560550.0 0.0065 55.80 17.00 111.00 9.00
 4 26561400.0 0.0080 55.00 17.00 148.00 32.00
 5 26558000.0 0.0095 54.20 17.00 185.00 55.00
 6 26558850.0 0.0020 55.40 17.00 222.00 78.00
 7 26559700.0 0.0035 54.60 77.00 259.00 116.00
 8 26560550.0 0.0050 55.80 77.00 296.00 151.00
 9 26561400.0 0.0065 55.00 77.00 333.00 186.00
10 26558000.0 0.0080 54.20 77.00 10.00 221.00
11 26558850.0 0.0095 55.40 77.00 47.00 256.00
12 26559700.0 0.0020 54.60 137.00 84.00 306.00
13 26560550.0 0.0035 55.80 137.00 121.00 341.00
14 26561400.0 0.0050 55.00 137.00 158.00 16.00
15 26558000.0 0.0065 54.20 137.00 195.00 51.00
16 26558850.0 0.0080 55.40 137.00 232.00 86.00
17 26559700.0 0.0095 54.60 197.00 269.00 136.00
18 26560550.0 0.0020 55.80 197.00 306.00 171.00
19 26561400.0 0.0035 55.00 197.00 343.00 206.00
20 26558000.0 0.0050 54.20 197.00 20.00 241.00
21 26558850.0 0.0065 55.40 197.00 57.00 276.00
22 26559700.0 0.0080 54.60 257.00 94.00 326.00
23 26560550.0 0.0095 55.80 257.00 131.00 1.00
24 26561400.0 0.0020 55.00 257.00 168.00 36.00
25 26558000.0 0.0035 54.20 257.00 205.00 71.00
26 26558850.0 0.0050 55.40 257.00 242.00 106.00
27 26559700.0 0.0065 54.60 317.00 279.00 156.00
28 26560550.0 0.0080 55.80 317.00 316.00 191.00
29 26561400.0 0.0095 55.00 317.00 353.00 226.00
30 26558000.0 0.0020 54.20 317.00 30.00 261.00
31 26558850.0 0.0035 55.40 317.00 67.00 296.00
)";

bool segment_hits_sphere(const Vec3& a, const Vec3& b, double radius)
{
    const Vec3 d = b - a;
    const double len2 = d.squaredNorm();
    double s = len2 > 0 ? -a.dot(d) / len2 : 0.0;
    s = std::clamp(s, 0.0, 1.0);
    return (a + s * d).norm() < radius;
}

} // namespace

std::vector<AlmanacEntry> parse_almanac(std::istream& in)
{
    std::vector<AlmanacEntry> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line))
    {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        AlmanacEntry e;
        double i_deg, raan_deg, argp_deg, m_deg;
        if (!(ls >> e.prn)) continue;
        if (!(ls >> e.elements.a >> e.elements.e >> i_deg >> raan_deg >> argp_deg >> m_deg))
            throw Fault(FaultKind::config_error, "almanac line " + std::to_string(lineno) + ": expected 7 columns");
        std::string extra;
        if (ls >> extra) throw Fault(FaultKind::config_error, "almanac line " + std::to_string(lineno) + ": trailing data");
        if (e.prn < 1 || e.prn > 32) throw Fault(FaultKind::config_error, "almanac line " + std::to_string(lineno) + ": prn out of range");
        if (!(e.elements.e >= 0.0 && e.elements.e < 0.1) || !(e.elements.a > constants::earth_radius))
            throw Fault(FaultKind::config_error, "almanac line " + std::to_string(lineno) + ": implausible orbit");
        for (const auto& prev : out)
            if (prev.prn == e.prn) throw Fault(FaultKind::config_error, "almanac: duplicate prn " + std::to_string(e.prn));
        e.elements.i = i_deg * kDeg;
        e.elements.raan = raan_deg * kDeg;
        e.elements.argp = argp_deg * kDeg;
        e.elements.mean_anomaly = m_deg * kDeg;
        out.push_back(e);
    }
    return out;
}

std::vector<AlmanacEntry> load_almanac(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw Fault(FaultKind::config_error, "cannot open almanac '" + path + "'");
    return parse_almanac(in);
}

std::vector<AlmanacEntry> builtin_almanac()
{
    std::istringstream in(kBuiltinAlmanac);
    return parse_almanac(in);
}

Constellation::Constellation(const std::vector<AlmanacEntry>& almanac, ConstellationConfig cfg, RngRoot* rng)
    : cfg_{cfg}, rng_{rng}
{
    for (const auto& entry : almanac)
    {
        const KeplerianElements& el = entry.elements;
        const double n = std::sqrt(cfg_.mu / (el.a * el.a * el.a));
        const double p = el.a * (1.0 - el.e * el.e);
        const double k = 0.75 * n * cfg_.j2 * (cfg_.earth_radius / p) * (cfg_.earth_radius / p);
        const double ci = std::cos(el.i);
        GnssSatellite s;
        s.prn = entry.prn;
        s.elements = el;
        s.raan_rate = -2.0 * k * ci;
        s.argp_rate = k * (5.0 * ci * ci - 1.0);
        s.mean_motion = n + k * std::sqrt(1.0 - el.e * el.e) * (3.0 * ci * ci - 1.0);
        sats_.push_back(s);
    }
}

KeplerianElements Constellation::elements_at(const GnssSatellite& sat, SimTime t) const
{
    const double dt = t.seconds();
    KeplerianElements el = sat.elements;
    el.raan = sat.elements.raan + sat.raan_rate * dt;
    el.argp = sat.elements.argp + sat.argp_rate * dt;
    el.mean_anomaly = sat.elements.mean_anomaly + sat.mean_motion * dt;
    return el;
}

const std::vector<SatPosition>& Constellation::positions(SimTime t) const
{
    if (cached_at_ && *cached_at_ == t) return cache_;
    cache_.clear();
    const std::int64_t second = t.floor_second();
    for (const auto& sat : sats_)
    {
        const CartesianState cs = elements_to_cartesian(elements_at(sat, t), cfg_.mu);
        Vec3 pos = cs.position;
        if (rng_ && cfg_.rtn_sigma > 0.0)
        {
            RandomStream draw = rng_->derive("gnss:rtn:prn" + std::to_string(sat.prn) + ":s" + std::to_string(second));
            const Vec3 rtn{draw.normal(), draw.normal(), draw.normal()};
            pos += rtn_to_inertial(cs.position, cs.velocity) * (cfg_.rtn_sigma * rtn);
        }
        cache_.push_back({sat.prn, cs.position, pos});
    }
    cached_at_ = t;
    return cache_;
}

double elevation_sigma(double elevation_deg, SigmaBounds bounds)
{
    const double el = std::clamp(elevation_deg, 0.0, 90.0);
    const double f = el / 90.0;
    return bounds.max * (1.0 - f) + bounds.min * f;
}

Mat3 rotation_z_to(const Vec3& dir)
{
    return Eigen::Quaterniond::FromTwoVectors(Vec3::UnitZ(), dir.normalized()).toRotationMatrix();
}

AttitudeProfile zenith_pointing()
{
    return [](SimTime, const BodyState& s) { return rotation_z_to(s.position); };
}

AttitudeProfile nadir_pointing()
{
    return [](SimTime, const BodyState& s) { return rotation_z_to(-s.position); };
}

AttitudeProfile fixed_attitude(const Mat3& body_to_inertial)
{
    return [body_to_inertial](SimTime, const BodyState&) { return body_to_inertial; };
}

void ReceiverConfig::validate() const
{
    if (!(pseudorange.min < pseudorange.max) || !(carrier_phase.min < carrier_phase.max))
        throw Fault(FaultKind::config_error, "receiver sigma bounds require min < max");
    if (ambiguity_min > ambiguity_max) throw Fault(FaultKind::config_error, "receiver ambiguity range is empty");
    if (!(wavelength > 0)) throw Fault(FaultKind::config_error, "receiver wavelength must be positive");
    if (!attitude) throw Fault(FaultKind::config_error, "receiver needs an attitude profile");
}

Receiver::Receiver(std::string name, ReceiverConfig cfg, const Constellation& constellation, RngRoot& rng)
    : name_{std::move(name)},
      cfg_{std::move(cfg)},
      constellation_{constellation},
      pr_noise_{rng.stream("gnss:" + name_ + ":pr")},
      cp_noise_{rng.stream("gnss:" + name_ + ":cp")},
      amb_draw_{rng.stream("gnss:" + name_ + ":amb")},
      pvt_noise_{rng.stream("gnss:" + name_ + ":pvt")}
{
    cfg_.validate();
    cfg_.boresight.normalize();
}

double Receiver::elevation_deg(const Mat3& attitude, const Vec3& los_unit) const
{
    const Vec3 b = attitude * cfg_.boresight;
    return std::asin(std::clamp(b.dot(los_unit), -1.0, 1.0)) / kDeg;
}

std::set<int> Receiver::visible_set(const BodyState& rx, const Mat3& attitude, SimTime t) const
{
    std::set<int> out;
    const double radius = constellation_.config().earth_radius;
    for (const auto& sp : constellation_.positions(t))
    {
        if (segment_hits_sphere(rx.position, sp.nominal, radius)) continue;
        const Vec3 los = (sp.nominal - rx.position).normalized();
        if (elevation_deg(attitude, los) >= cfg_.mask_deg) out.insert(sp.prn);
    }
    return out;
}

std::set<int> Receiver::visible_set(const BodyState& rx, SimTime t) const
{
    return visible_set(rx, cfg_.attitude(t, rx), t);
}

std::vector<GnssMeasurement> Receiver::measure(const BodyState& rx, SimTime t)
{
    if (!t.on_second())
        throw Fault(FaultKind::epoch_misaligned, "GNSS epoch " + t.str() + " is not on a GPS-time second");
    const std::int64_t second = t.floor_second();
    const Mat3 attitude = cfg_.attitude(t, rx);
    const std::set<int> visible = visible_set(rx, attitude, t);

    std::vector<GnssMeasurement> out;
    for (const auto& sp : constellation_.positions(t))
    {
        if (!visible.contains(sp.prn)) continue;
        GnssMeasurement m;
        m.prn = sp.prn;
        m.epoch = t;
        const Vec3 diff = sp.position - rx.position;
        const double range = diff.norm();
        m.elevation_deg = elevation_deg(attitude, (sp.nominal - rx.position).normalized());
        m.sigma_pr = elevation_sigma(m.elevation_deg, cfg_.pseudorange);
        m.sigma_cp = elevation_sigma(m.elevation_deg, cfg_.carrier_phase);

        // A pass continues only if the satellite was tracked in the previous second.
        auto lock = locks_.find(sp.prn);
        if (lock == locks_.end() || (lock->second.last_second != second - 1 && lock->second.last_second != second))
        {
            const int n = cfg_.ambiguities_enabled
                              ? static_cast<int>(amb_draw_.uniform_int(cfg_.ambiguity_min, cfg_.ambiguity_max))
                              : 0;
            lock = locks_.insert_or_assign(sp.prn, Lock{second, n}).first;
        }
        lock->second.last_second = second;
        m.ambiguity = lock->second.ambiguity;

        const double pr_noise = cfg_.noise_enabled ? m.sigma_pr * pr_noise_.normal() : 0.0;
        const double cp_noise = cfg_.noise_enabled ? m.sigma_cp * cp_noise_.normal() : 0.0;
        m.pseudorange = range + pr_noise;
        m.carrier_phase = range + cfg_.wavelength * m.ambiguity + cp_noise;
        out.push_back(m);
    }
    return out;
}

PvtSolution Receiver::pvt_solution(const BodyState& rx, SimTime t)
{
    const std::size_t n = visible_set(rx, t).size();
    if (n < 4) throw Fault(FaultKind::no_fix, "receiver '" + name_ + "' sees " + std::to_string(n) + " satellites");
    PvtSolution s{t, rx.position, rx.velocity};
    if (cfg_.noise_enabled)
    {
        for (int k = 0; k < 3; ++k) s.position[k] += cfg_.pvt_position_sigma * pvt_noise_.normal();
        for (int k = 0; k < 3; ++k) s.velocity[k] += cfg_.pvt_velocity_sigma * pvt_noise_.normal();
    }
    return s;
}

} // namespace fswsim
