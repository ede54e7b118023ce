#pragma once

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace pclab::harness {

/// Shortest round-trip text for a double; non-finite values become `nan`.
std::string format_number(double x);

/// Semicolon-joined per-layer values.
std::string format_list(const std::vector<double>& xs);

/// Quotes a field when it contains a comma, quote or newline.
std::string escape_field(const std::string& field);

/// Append-only CSV file with a fixed header written on open.
class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, std::vector<std::string> header);

    void row(const std::vector<std::string>& fields);
    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
    std::size_t columns_;
    std::ofstream out_;
};

/// Long-format rows shared by the diagnostic commands. `cell` names the
/// experimental condition as `key=value` pairs joined by `|`; empty width or
/// seed fields mark aggregates over that axis.
struct LongRow {
    std::string cell;
    std::size_t layer = 0;
    std::string width;
    std::string seed;
    std::string quantity;
    double value = 0.0;
};

std::vector<std::string> long_header();
void write_long(CsvWriter& csv, const LongRow& row);

/// Writes `<csv>.meta.json` next to the CSV.
void write_metadata(const std::filesystem::path& csv_path, const nlohmann::json& resolved_config,
                    const std::string& config_hash, const std::string& command, const nlohmann::json& extra = {});

}  // namespace pclab::harness
