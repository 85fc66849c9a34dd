#include "nvpd/io.hpp"

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>

namespace nvpd {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open " + path.string());
    CsvTable t;
    std::string line;
    if (!std::getline(in, line))
        throw IoError("empty CSV: " + path.string());
    if (!line.empty() && line.back() == '\r') line.pop_back();
    t.header = split_line(line);
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cells = split_line(line);
        if (cells.size() != t.header.size())
            throw IoError(path.string() + ":" + std::to_string(lineno) +
                          ": expected " + std::to_string(t.header.size()) + " columns");
        std::vector<double> row;
        row.reserve(cells.size());
        for (const auto& c : cells) {
            try {
                std::size_t pos = 0;
                double v = std::stod(c, &pos);
                if (pos != c.size()) throw std::invalid_argument(c);
                row.push_back(v);
            } catch (const std::exception&) {
                throw IoError(path.string() + ":" + std::to_string(lineno) +
                              ": not a number: '" + c + "'");
            }
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

void write_csv(const std::filesystem::path& path,
               const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot write " + path.string());
    out.precision(17);
    for (std::size_t i = 0; i < header.size(); ++i)
        out << (i ? "," : "") << header[i];
    out << '\n';
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i)
            out << (i ? "," : "") << row[i];
        out << '\n';
    }
    if (!out)
        throw IoError("write failed: " + path.string());
}

std::string fnv1a_hex(const std::string& data) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace nvpd
