#pragma once

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dirsmooth/local_glm.hpp"
#include "dirsmooth/sphere.hpp"

namespace dirsmooth {

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// 17 significant digits: enough to reproduce any double bit-exactly on
/// re-parse.
inline std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

/// Write a file atomically (temp file in the same directory, then rename).
inline void write_file_atomic(const std::string& path, const std::string& contents) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot open " + tmp.string() + " for writing");
        out << contents;
        if (!out.flush()) throw DataError("write failed for " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) throw DataError("rename to " + path + " failed: " + ec.message());
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline double parse_double(const std::string& s, long line_no) {
    const char* begin = s.c_str();
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(begin, &end);
    while (end && *end == ' ') ++end;
    if (end == begin || (end && *end != '\0'))
        throw DataError("line " + std::to_string(line_no) + ": cannot parse number '" +
                        s + "'");
    return v;
}

} // namespace detail

/// Read a numeric CSV with the exact expected header.
inline CsvTable read_csv(const std::string& path, const std::string& expected_header) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    CsvTable table;
    std::string line;
    long line_no = 0;
    if (!std::getline(in, line)) throw DataError(path + ": empty file");
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != expected_header)
        throw DataError(path + ": expected header '" + expected_header + "', got '" +
                        line + "'");
    table.header = detail::split_csv_line(line);
    const std::size_t width = table.header.size();
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != width)
            throw DataError(path + ": line " + std::to_string(line_no) + ": expected " +
                            std::to_string(width) + " fields, got " +
                            std::to_string(fields.size()));
        std::vector<double> row;
        row.reserve(width);
        for (const auto& f : fields) row.push_back(detail::parse_double(f, line_no));
        table.rows.push_back(std::move(row));
    }
    return table;
}

inline constexpr const char* kPlanarHeader = "x1,x2,y1,y2";
inline constexpr const char* kAxialHeader = "x1,x2,x3,v1,v2,v3";
inline constexpr const char* kSphereFitHeader = "x1,x2,x3,f1,f2,f3,kappa,gammaprime";

/// Planar directional dataset CSV (header x1,x2,y1,y2).
inline Dataset read_planar_dataset(const std::string& path) {
    const CsvTable t = read_csv(path, kPlanarHeader);
    if (t.rows.empty()) throw DataError(path + ": no data rows");
    Eigen::MatrixXd X(2, t.rows.size()), Y(2, t.rows.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        X.col(i) << t.rows[i][0], t.rows[i][1];
        Eigen::Vector2d y(t.rows[i][2], t.rows[i][3]);
        if (std::abs(y.norm() - 1.0) > 1e-6)
            throw DataError(path + ": line " + std::to_string(i + 2) +
                            ": response is not unit-norm");
        Y.col(i) = y / y.norm();
    }
    return Dataset(std::move(X), std::move(Y));
}

inline std::string planar_dataset_csv(const Dataset& data) {
    std::string out = std::string(kPlanarHeader) + "\n";
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        out += format_double(data.X(0, i)) + "," + format_double(data.X(1, i)) + "," +
               format_double(data.Y(0, i)) + "," + format_double(data.Y(1, i)) + "\n";
    }
    return out;
}

/// Axial observations CSV (header x1,x2,x3,v1,v2,v3); unit-norm and tangency
/// violations are reported with their line numbers.
inline std::vector<AxialObservation> read_axial_observations(const std::string& path) {
    const CsvTable t = read_csv(path, kAxialHeader);
    if (t.rows.empty()) throw DataError(path + ": no data rows");
    std::vector<AxialObservation> obs;
    obs.reserve(t.rows.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& r = t.rows[i];
        try {
            obs.emplace_back(Eigen::Vector3d(r[0], r[1], r[2]),
                             Eigen::Vector3d(r[3], r[4], r[5]));
        } catch (const std::domain_error& e) {
            throw DataError(path + ": line " + std::to_string(i + 2) + ": " + e.what());
        }
    }
    return obs;
}

inline std::string axial_observations_csv(const std::vector<AxialObservation>& obs) {
    std::string out = std::string(kAxialHeader) + "\n";
    for (const auto& o : obs) {
        out += format_double(o.x[0]) + "," + format_double(o.x[1]) + "," +
               format_double(o.x[2]) + "," + format_double(o.v[0]) + "," +
               format_double(o.v[1]) + "," + format_double(o.v[2]) + "\n";
    }
    return out;
}

} // namespace dirsmooth
