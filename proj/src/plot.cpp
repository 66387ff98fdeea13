#include "fswsim/plot.hpp"

#include "fswsim/fault.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <vector>

namespace fswsim
{

namespace
{

constexpr double kPanelW = 640, kPanelH = 160, kMargin = 60;

std::string num(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

std::string escape(const std::string& s)
{
    std::string out;
    for (char c : s)
    {
        switch (c)
        {
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '&': out += "&amp;"; break;
        default: out += c;
        }
    }
    return out;
}

} // namespace

std::string csv_to_svg(const std::string& csv_text, const std::string& title)
{
    std::istringstream in(csv_text);
    std::string line;
    if (!std::getline(in, line)) throw Fault(FaultKind::config_error, "empty CSV for plot '" + title + "'");
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) header.push_back(cell);
    }
    std::vector<std::vector<double>> cols(header.size());
    while (std::getline(in, line))
    {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        for (std::size_t c = 0; c < header.size() && std::getline(ss, cell, ','); ++c)
            cols[c].push_back(std::strtod(cell.c_str(), nullptr));
    }

    const std::size_t panels = header.size() > 1 ? header.size() - 1 : 0;
    const double width = kPanelW + 2 * kMargin;
    const double height = 40 + panels * (kPanelH + kMargin);
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<text x=\"" << kMargin << "\" y=\"24\" font-size=\"15\">" << escape(title) << "</text>\n";

    const auto& xs = cols.front();
    for (std::size_t p = 0; p < panels; ++p)
    {
        const auto& ys = cols[p + 1];
        const double top = 40 + p * (kPanelH + kMargin);
        double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
        for (std::size_t i = 0; i < std::min(xs.size(), ys.size()); ++i)
        {
            if (!std::isfinite(xs[i]) || !std::isfinite(ys[i])) continue;
            x0 = std::min(x0, xs[i]);
            x1 = std::max(x1, xs[i]);
            y0 = std::min(y0, ys[i]);
            y1 = std::max(y1, ys[i]);
        }
        svg << "<rect x=\"" << kMargin << "\" y=\"" << top << "\" width=\"" << kPanelW << "\" height=\"" << kPanelH
            << "\" fill=\"none\" stroke=\"#888\"/>\n";
        svg << "<text x=\"" << kMargin + 4 << "\" y=\"" << top + 14 << "\">" << escape(header[p + 1]) << "</text>\n";
        if (!(x1 >= x0)) continue;
        if (x1 == x0) x1 = x0 + 1;
        if (y1 == y0) y1 = y0 + 1;
        svg << "<text x=\"4\" y=\"" << top + 10 << "\">" << num(y1) << "</text>\n";
        svg << "<text x=\"4\" y=\"" << top + kPanelH << "\">" << num(y0) << "</text>\n";
        svg << "<text x=\"" << kMargin << "\" y=\"" << top + kPanelH + 14 << "\">" << escape(header[0]) << " "
            << num(x0) << " .. " << num(x1) << "</text>\n";
        svg << "<polyline fill=\"none\" stroke=\"#1f5fa8\" stroke-width=\"1\" points=\"";
        for (std::size_t i = 0; i < std::min(xs.size(), ys.size()); ++i)
        {
            if (!std::isfinite(xs[i]) || !std::isfinite(ys[i])) continue;
            const double px = kMargin + (xs[i] - x0) / (x1 - x0) * kPanelW;
            const double py = top + kPanelH - (ys[i] - y0) / (y1 - y0) * kPanelH;
            svg << num(px) << "," << num(py) << " ";
        }
        svg << "\"/>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

int plot_directory(const std::string& dir)
{
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw Fault(FaultKind::config_error, "not a directory: " + dir);
    std::vector<fs::path> csvs;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".csv") csvs.push_back(e.path());
    std::sort(csvs.begin(), csvs.end());
    for (const auto& p : csvs)
    {
        std::ifstream in(p);
        std::stringstream text;
        text << in.rdbuf();
        fs::path out = p;
        out.replace_extension(".svg");
        std::ofstream(out) << csv_to_svg(text.str(), p.stem().string());
    }
    return static_cast<int>(csvs.size());
}

} // namespace fswsim
