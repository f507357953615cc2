#pragma once

#include <string>
#include <vector>

namespace crxo {

std::vector<std::string> split_csv_line(const std::string& line);
std::string csv_quote(const std::string& field);
bool parse_double(const std::string& s, double& out);
bool is_blank(const std::string& s);
void strip_cr(std::string& s);

// Shortest text that reads back to the same double; "NA" for NaN.
std::string format_double(double x);

}  // namespace crxo
