#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "nvpd/errors.hpp"

namespace nvpd {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

// Comma-delimited, UTF-8, header row required.
CsvTable read_csv(const std::filesystem::path& path);

void write_csv(const std::filesystem::path& path,
               const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

// FNV-1a over a string; used for config hashes in run manifests.
std::string fnv1a_hex(const std::string& data);

}  // namespace nvpd
