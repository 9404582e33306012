#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace rangefuse {

/// PNG files of several directories matched by file stem.
///
/// Alignment is by identical stem, so "0001.png" and "0001.PNG" pair up.
/// ids are sorted, and files[d][k] is the file for ids[k] in directory d.
struct AlignedSet {
    std::vector<std::string> ids;
    std::vector<std::vector<std::filesystem::path>> files;
};

/// Lists stems of the *.png files in dir (case-insensitive extension).
/// Throws IoError if dir is not a readable directory, ContractError if two
/// files share a stem.
std::vector<std::pair<std::string, std::filesystem::path>> list_png_files(
    const std::filesystem::path& dir);

/// Aligns the PNG files of every directory. Throws ContractError naming the
/// first file that is missing from some directory, or if nothing was found.
AlignedSet align_directories(std::span<const std::filesystem::path> dirs);

}  // namespace rangefuse
