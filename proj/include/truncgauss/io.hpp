#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "truncgauss/errors.hpp"
#include "truncgauss/gaussian.hpp"

namespace truncgauss {

// Full round-trip precision for text formats.
inline std::string format_double(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

// One row per point with x0..x{d-1} headers.
inline void write_batch_csv(const Batch& samples, std::ostream& os) {
    const Eigen::Index d = samples.cols();
    for (Eigen::Index j = 0; j < d; ++j) os << (j ? "," : "") << "x" << j;
    os << "\n";
    for (Eigen::Index i = 0; i < samples.rows(); ++i) {
        for (Eigen::Index j = 0; j < d; ++j) os << (j ? "," : "") << format_double(samples(i, j));
        os << "\n";
    }
}

inline void write_batch_csv(const Batch& samples, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw validation_error("write_batch_csv: cannot open " + path);
    write_batch_csv(samples, os);
}

inline Batch read_batch_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw validation_error("read_batch_csv: empty input");
    Eigen::Index d = 1;
    for (char c : line)
        if (c == ',') ++d;
    std::vector<double> values;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream row(line);
        std::string cell;
        Eigen::Index got = 0;
        while (std::getline(row, cell, ',')) {
            values.push_back(std::stod(cell));
            ++got;
        }
        if (got != d) throw validation_error("read_batch_csv: ragged row");
    }
    const Eigen::Index n = static_cast<Eigen::Index>(values.size()) / d;
    Batch out(n, d);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < d; ++j) out(i, j) = values[static_cast<std::size_t>(i * d + j)];
    return out;
}

inline Batch read_batch_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw validation_error("read_batch_csv: cannot open " + path);
    return read_batch_csv(is);
}

// Binary column format: "TGB1" magic, u32 d, u64 n, then d columns of n
// little-endian doubles each.
static_assert(std::endian::native == std::endian::little,
              "batch binary format is written via raw little-endian stores");

inline constexpr char kBatchMagic[4] = {'T', 'G', 'B', '1'};

inline void write_batch_binary(const Batch& samples, std::ostream& os) {
    os.write(kBatchMagic, 4);
    const std::uint32_t d = static_cast<std::uint32_t>(samples.cols());
    const std::uint64_t n = static_cast<std::uint64_t>(samples.rows());
    os.write(reinterpret_cast<const char*>(&d), sizeof(d));
    os.write(reinterpret_cast<const char*>(&n), sizeof(n));
    for (std::uint32_t j = 0; j < d; ++j) {
        const Eigen::VectorXd column = samples.col(j);
        os.write(reinterpret_cast<const char*>(column.data()),
                 static_cast<std::streamsize>(sizeof(double) * n));
    }
}

inline void write_batch_binary(const Batch& samples, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw validation_error("write_batch_binary: cannot open " + path);
    write_batch_binary(samples, os);
}

inline Batch read_batch_binary(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kBatchMagic, 4) != 0)
        throw validation_error("read_batch_binary: bad magic");
    std::uint32_t d = 0;
    std::uint64_t n = 0;
    is.read(reinterpret_cast<char*>(&d), sizeof(d));
    is.read(reinterpret_cast<char*>(&n), sizeof(n));
    if (!is || d == 0) throw validation_error("read_batch_binary: bad header");
    Batch out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    std::vector<double> column(n);
    for (std::uint32_t j = 0; j < d; ++j) {
        is.read(reinterpret_cast<char*>(column.data()),
                static_cast<std::streamsize>(sizeof(double) * n));
        if (!is) throw validation_error("read_batch_binary: truncated column data");
        for (std::uint64_t i = 0; i < n; ++i)
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = column[i];
    }
    return out;
}

inline Batch read_batch_binary(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw validation_error("read_batch_binary: cannot open " + path);
    return read_batch_binary(is);
}

}  // namespace truncgauss
