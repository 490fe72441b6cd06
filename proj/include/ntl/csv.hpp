#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace ntl::csv {

// Comma-split rows, no quoting rules; none of our fields contain commas.
std::vector<std::vector<std::string>> read_rows(const std::filesystem::path& path);

// Shortest round-trippable decimal forms.
std::string fmt(double v);
std::string fmt(float v);

double to_double(const std::string& s, const char* context);
long to_long(const std::string& s, const char* context);

}  // namespace ntl::csv
