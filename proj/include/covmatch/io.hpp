#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "covmatch/errors.hpp"

namespace covmatch {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using json = nlohmann::json;

/// Shortest decimal form that round-trips an IEEE-754 double exactly.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void write_matrix_csv(std::ostream& os, const Matrix& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j) os << ',';
            os << format_double(m(i, j));
        }
        os << '\n';
    }
}

inline void write_matrix_csv(const std::string& path, const Matrix& m) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open for writing: " + path);
    write_matrix_csv(f, m);
    if (!f) throw IoError("write failed: " + path);
}

inline Matrix read_matrix_csv(std::istream& is) {
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw IoError("bad CSV cell: '" + cell + "'");
            }
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw IoError("ragged CSV rows");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw IoError("empty CSV matrix");
    Matrix m(static_cast<Eigen::Index>(rows.size()),
             static_cast<Eigen::Index>(rows.front().size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            m(i, j) = rows[static_cast<size_t>(i)][static_cast<size_t>(j)];
    return m;
}

inline Matrix read_matrix_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open: " + path);
    return read_matrix_csv(f);
}

inline json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Matrix matrix_from_json(const json& j) {
    if (!j.is_array() || j.empty() || !j[0].is_array())
        throw IoError("expected a non-empty array of arrays");
    Matrix m(static_cast<Eigen::Index>(j.size()),
             static_cast<Eigen::Index>(j[0].size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        const auto& row = j[static_cast<size_t>(i)];
        if (static_cast<Eigen::Index>(row.size()) != m.cols())
            throw IoError("ragged JSON matrix");
        for (Eigen::Index k = 0; k < m.cols(); ++k)
            m(i, k) = row[static_cast<size_t>(k)].get<double>();
    }
    return m;
}

inline json load_json(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open: " + path);
    try {
        return json::parse(f);
    } catch (const json::parse_error& e) {
        throw IoError("bad JSON in " + path + ": " + e.what());
    }
}

inline void save_json(const std::string& path, const json& j) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << j.dump(2) << '\n';
    if (!f) throw IoError("write failed: " + path);
}

} // namespace covmatch
