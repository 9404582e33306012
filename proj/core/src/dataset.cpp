#include "rangefuse/dataset.hpp"

#include "rangefuse/errors.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>

namespace rangefuse {

namespace {

bool has_png_extension(const std::filesystem::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext == ".png";
}

}  // namespace

std::vector<std::pair<std::string, std::filesystem::path>> list_png_files(
    const std::filesystem::path& dir) {
    std::error_code ec;
    if (!std::filesystem::is_directory(dir, ec)) {
        throw IoError("not a directory: " + dir.string());
    }
    std::map<std::string, std::filesystem::path> by_stem;
    for (const auto& entry : std::filesystem::directory_iterator(dir, ec)) {
        if (!entry.is_regular_file() || !has_png_extension(entry.path())) continue;
        const std::string stem = entry.path().stem().string();
        if (!by_stem.emplace(stem, entry.path()).second) {
            throw ContractError("duplicate image stem '" + stem + "' in " + dir.string());
        }
    }
    if (ec) throw IoError("cannot list " + dir.string() + ": " + ec.message());
    return {by_stem.begin(), by_stem.end()};
}

AlignedSet align_directories(std::span<const std::filesystem::path> dirs) {
    if (dirs.empty()) throw ContractError("no directories given");

    std::vector<std::map<std::string, std::filesystem::path>> listings;
    std::set<std::string> all_ids;
    for (const auto& dir : dirs) {
        auto files = list_png_files(dir);
        listings.emplace_back(files.begin(), files.end());
        for (const auto& [stem, path] : files) all_ids.insert(stem);
    }
    if (all_ids.empty()) throw ContractError("no pairs found under " + dirs.front().string());

    AlignedSet set;
    set.ids.assign(all_ids.begin(), all_ids.end());
    set.files.resize(dirs.size());
    for (std::size_t d = 0; d < dirs.size(); ++d) {
        for (const auto& id : set.ids) {
            auto it = listings[d].find(id);
            if (it == listings[d].end()) {
                throw ContractError("missing file " + (dirs[d] / (id + ".png")).string());
            }
            set.files[d].push_back(it->second);
        }
    }
    return set;
}

}  // namespace rangefuse
