#include "fswsim/telemetry.hpp"

#include "fswsim/fault.hpp"

#include <openssl/evp.h>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace fswsim
{

namespace
{

void dump_canonical(const nlohmann::json& j, std::string& out)
{
    switch (j.type())
    {
    case nlohmann::json::value_t::object:
    {
        out += '{';
        bool first = true;
        for (const auto& [k, v] : j.items())
        {
            if (!first) out += ',';
            first = false;
            out += nlohmann::json(k).dump();
            out += ':';
            dump_canonical(v, out);
        }
        out += '}';
        break;
    }
    case nlohmann::json::value_t::array:
    {
        out += '[';
        for (std::size_t i = 0; i < j.size(); ++i)
        {
            if (i) out += ',';
            dump_canonical(j[i], out);
        }
        out += ']';
        break;
    }
    case nlohmann::json::value_t::number_float: out += format_double(j.get<double>()); break;
    default: out += j.dump(-1, ' ', false, nlohmann::json::error_handler_t::strict);
    }
}

} // namespace

// nlohmann objects are std::map-backed, so items() walks keys in sorted order.
std::string canonical_dump(const nlohmann::json& j)
{
    std::string out;
    dump_canonical(j, out);
    return out;
}

std::string format_double(double v)
{
    if (!std::isfinite(v)) throw std::domain_error("non-finite value in telemetry");
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general);
    std::string out(buf, res.ptr);
    // Keep floats recognizable as floats after a parse round trip.
    if (out.find_first_of(".e") == std::string::npos) out += ".0";
    return out;
}

std::string sha256_hex(std::string_view data)
{
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("SHA-256 digest failed");
    std::string out;
    out.reserve(2 * len);
    char buf[3];
    for (unsigned int i = 0; i < len; ++i)
    {
        std::snprintf(buf, sizeof buf, "%02x", digest[i]);
        out += buf;
    }
    return out;
}

void TelemetryLog::record(SimTime t, std::string_view source, std::string_view kind, nlohmann::json payload)
{
    if (!enabled_) return;
    records_.push_back({{"t", t.ns()}, {"source", source}, {"kind", kind}, {"payload", std::move(payload)}});
}

void TelemetryLog::series_row(const std::string& series, const std::vector<std::string>& columns,
                              const std::vector<double>& values)
{
    if (!enabled_) return;
    auto [it, fresh] = series_.try_emplace(series);
    if (fresh) it->second.columns = columns;
    else if (it->second.columns != columns)
        throw std::logic_error("series '" + series + "' columns changed");
    std::string& body = it->second.body;
    for (std::size_t i = 0; i < values.size(); ++i)
    {
        if (i) body += ',';
        body += format_double(values[i]);
    }
    body += '\n';
}

std::string TelemetryLog::jsonl() const
{
    std::string out;
    for (const auto& r : records_)
    {
        out += canonical_dump(r);
        out += '\n';
    }
    return out;
}

std::string TelemetryLog::csv(const std::string& series) const
{
    auto it = series_.find(series);
    if (it == series_.end()) return {};
    std::string out;
    for (std::size_t i = 0; i < it->second.columns.size(); ++i)
    {
        if (i) out += ',';
        out += it->second.columns[i];
    }
    out += '\n';
    return out + it->second.body;
}

std::vector<std::string> TelemetryLog::series_names() const
{
    std::vector<std::string> names;
    for (const auto& [name, _] : series_) names.push_back(name);
    return names;
}

std::string recanonicalize_jsonl(std::string_view jsonl)
{
    std::string out;
    std::istringstream in{std::string(jsonl)};
    std::string line;
    while (std::getline(in, line))
    {
        if (line.empty()) continue;
        out += canonical_dump(nlohmann::json::parse(line));
        out += '\n';
    }
    return out;
}

} // namespace fswsim
