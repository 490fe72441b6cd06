#pragma once

#include <filesystem>
#include <string>

#include "ntl/raster.hpp"

namespace ntl {

// ESRI ASCII grid reader. Header keys are case-insensitive; xllcenter /
// yllcenter are normalized to the corner convention. A NODATA_value entry
// becomes the raster's nodata sentinel; without one the default sentinel
// applies. Malformed headers, wrong token counts and non-numeric tokens
// raise DataError with the offending line and column.
Raster parse_ascii_grid(const std::string& text);
Raster read_ascii_grid(const std::filesystem::path& path);

}  // namespace ntl
