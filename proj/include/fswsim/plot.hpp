#pragma once

#include <string>

namespace fswsim
{

/// Renders a CSV (header row, numeric columns) as an SVG line chart: every
/// column after the first plotted against the first, one panel per column.
std::string csv_to_svg(const std::string& csv_text, const std::string& title);

/// Writes NAME.svg next to every NAME.csv in dir. Returns the number written.
int plot_directory(const std::string& dir);

} // namespace fswsim
