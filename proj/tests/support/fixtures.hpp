#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "factscope/config.hpp"

namespace fixtures {

inline constexpr const char* kStatement =
    "Global income inequality is widening, with significant disparities between nations.";

std::filesystem::path source_dir();
std::filesystem::path data_dir();
std::vector<std::filesystem::path> sample_csvs();
std::filesystem::path script_path();
std::filesystem::path transcript_path();
std::filesystem::path session_path();

// Fresh empty directory under the system temp dir.
std::filesystem::path temp_dir(const std::string& name);

// Runtime from data/config/scripted.json with every sample CSV ingested.
std::unique_ptr<factscope::Runtime> scripted_runtime(
    std::optional<factscope::TranscriptChoice> transcript = std::nullopt);

std::string read_file(const std::filesystem::path& p);

}  // namespace fixtures
