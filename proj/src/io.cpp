#include "imstab/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace imstab {

std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {
std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}
}  // namespace

void write_point_cloud_csv(const std::string& path, const EmpiricalMeasure& m) {
    std::ostringstream out;
    for (int c = 0; c < m.dim(); ++c) out << "x_" << (c + 1) << ",";
    out << "weight\n";
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        for (int c = 0; c < m.dim(); ++c) out << fmt(m.points(i, c)) << ",";
        out << fmt(m.weights[i]) << "\n";
    }
    write_text_atomic(path, out.str());
}

EmpiricalMeasure read_point_cloud_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open point cloud: " + path);
    std::string header;
    if (!std::getline(in, header)) throw std::invalid_argument("empty point cloud: " + path);
    int cols = 1;
    for (char c : header) cols += c == ',';
    bool has_weight = header.find("weight") != std::string::npos;
    int d = has_weight ? cols - 1 : cols;
    if (d < 1) throw std::invalid_argument("point cloud needs at least one coordinate column");
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        if (static_cast<int>(row.size()) != cols)
            throw std::invalid_argument("ragged row in point cloud: " + path);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::invalid_argument("point cloud has no rows: " + path);
    EmpiricalMeasure m;
    m.points.resize(rows.size(), d);
    m.weights.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (int c = 0; c < d; ++c) m.points(i, c) = rows[i][c];
        m.weights[i] = has_weight ? rows[i][d] : 1.0 / double(rows.size());
    }
    double sum = m.weights.sum();
    if (sum > 0.0 && std::abs(sum - 1.0) > 1e-9) m.weights /= sum;
    m.validate();
    return m;
}

void write_ensemble_csv(const std::string& path, const TrajectoryEnsemble& e) {
    std::ostringstream out;
    out << "traj,t";
    for (int c = 0; c < e.dimension; ++c) out << ",x_" << (c + 1);
    for (int c = 0; c < e.dimension; ++c) out << ",y_" << (c + 1);
    out << "\n";
    for (long k = 0; k < e.n_traj; ++k)
        for (std::size_t ti = 0; ti < e.times.size(); ++ti) {
            out << k << "," << fmt(e.times[ti]);
            for (int c = 0; c < e.dimension; ++c) out << "," << fmt(e.x_at(k, ti, c));
            for (int c = 0; c < e.dimension; ++c) out << "," << fmt(e.y_at(k, ti, c));
            out << "\n";
        }
    write_text_atomic(path, out.str());
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
    std::ostringstream out;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) out << ",";
        out << header[i];
    }
    out << "\n";
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out << ",";
            out << fmt(row[i]);
        }
        out << "\n";
    }
    write_text_atomic(path, out.str());
}

void write_json_atomic(const std::string& path, const ordered_json& j) {
    write_text_atomic(path, j.dump(2) + "\n");
}

void write_text_atomic(const std::string& path, const std::string& text) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + tmp);
        out << text;
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("cannot rename " + tmp + " to " + path);
}

}  // namespace imstab
