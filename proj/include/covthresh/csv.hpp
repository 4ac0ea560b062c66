#pragma once

#include <Eigen/Dense>

#include <string>
#include <string_view>
#include <vector>

namespace covthresh::csv {

/// Shortest-safe decimal rendering with 17 significant digits, so every
/// double survives a write/read cycle bit-for-bit.
std::string format_double(double x);

/// Strict decimal parse of a whole field; throws ParseError.
double parse_double(std::string_view field);

std::vector<std::string> split_line(std::string_view line);

/// Rectangular numeric CSV without header. Blank lines are skipped.
/// Throws ParseError on ragged rows or malformed fields, InputError if the
/// file cannot be opened.
Eigen::MatrixXd read_matrix(const std::string& path);

void write_matrix(const Eigen::MatrixXd& m, const std::string& path);

}  // namespace covthresh::csv
