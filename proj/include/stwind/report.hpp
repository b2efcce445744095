#pragma once

#include <filesystem>
#include <functional>
#include <string>

#include "stwind/harness.hpp"

namespace stwind {

/// Runs `fill` on a fresh sibling temp directory and renames it to `out`
/// (replacing any previous directory). On failure the temp directory is
/// removed and `out` is left untouched.
void write_directory_atomic(const std::filesystem::path& out,
                            const std::function<void(const std::filesystem::path&)>& fill);

/// Same for a single file.
void write_file_atomic(const std::filesystem::path& out, const std::string& content);

/// manifest.json, config.json, scores.csv, reliability.json, fits.csv,
/// ranges.csv, summary.md
/// `extra` may add files to the directory before it is published.
void write_report(const VerificationReport& report, const std::filesystem::path& out,
                  const std::function<void(const std::filesystem::path&)>& extra = {});

std::string summary_markdown(const VerificationReport& report);

/// Re-renders the markdown summary of a report directory from its files.
std::string summarize_report_dir(const std::filesystem::path& dir);

}  // namespace stwind
