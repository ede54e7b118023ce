#include "pclab/harness/csv.hpp"

#include "pclab/linalg.hpp"

#include <Eigen/Core>

#include <charconv>
#include <cmath>

namespace pclab::harness {

std::string format_number(double x)
{
    if (!std::isfinite(x))
        return "nan";
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

std::string format_list(const std::vector<double>& xs)
{
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i)
            out += ';';
        out += format_number(xs[i]);
    }
    return out;
}

std::string escape_field(const std::string& field)
{
    if (field.find_first_of(",\"\n") == std::string::npos)
        return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"')
            out += '"';
        out += c;
    }
    return out + '"';
}

CsvWriter::CsvWriter(const std::filesystem::path& path, std::vector<std::string> header)
    : path_(path), columns_(header.size())
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    out_.open(path, std::ios::trunc);
    if (!out_)
        throw Error("cannot write " + path.string());
    row(header);
}

void CsvWriter::row(const std::vector<std::string>& fields)
{
    if (fields.size() != columns_)
        throw Error("csv row has " + std::to_string(fields.size()) + " fields, header has "
                    + std::to_string(columns_));
    std::string line;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i)
            line += ',';
        line += escape_field(fields[i]);
    }
    line += '\n';
    out_ << line;
    out_.flush();
}

std::vector<std::string> long_header() { return {"cell", "layer", "width", "seed", "quantity", "value"}; }

void write_long(CsvWriter& csv, const LongRow& r)
{
    csv.row({r.cell, std::to_string(r.layer), r.width, r.seed, r.quantity, format_number(r.value)});
}

void write_metadata(const std::filesystem::path& csv_path, const nlohmann::json& resolved_config,
                    const std::string& config_hash, const std::string& command, const nlohmann::json& extra)
{
    nlohmann::json meta;
    meta["command"] = command;
    meta["config_hash"] = config_hash;
    meta["config"] = resolved_config;
    meta["versions"] = {
        {"pclab", PCLAB_VERSION},
        {"compiler", __VERSION__},
        {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "."
                      + std::to_string(EIGEN_MINOR_VERSION)},
        {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "."
                              + std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "."
                              + std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
    };
    if (!extra.is_null())
        meta["run"] = extra;
    std::ofstream out(csv_path.string() + ".meta.json", std::ios::trunc);
    if (!out)
        throw Error("cannot write metadata for " + csv_path.string());
    out << meta.dump(2) << '\n';
}

}  // namespace pclab::harness
