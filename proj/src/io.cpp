#include "spikebench/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace spikebench {

Eigen::MatrixXd load_matrix_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open " + path.string());

    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                const double v = std::stod(cell, &used);
                while (used < cell.size() &&
                       (cell[used] == ' ' || cell[used] == '\t' || cell[used] == '\r'))
                    ++used;
                if (used != cell.size()) throw std::invalid_argument("trailing junk");
                row.push_back(v);
            } catch (const std::exception&) {
                throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                                         ": malformed value '" + cell + "'");
            }
        }
        if (row.empty())
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                                     ": empty row");
        if (!rows.empty() && row.size() != rows.front().size())
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                                     ": inconsistent column count");
        rows.push_back(std::move(row));
    }
    if (rows.empty())
        throw std::runtime_error(path.string() + ": no data rows");

    Eigen::MatrixXd m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows.front().size(); ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return m;
}

void save_matrix_csv(const Eigen::MatrixXd& m, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j) out << ',';
            out << format_double(m(i, j));
        }
        out << '\n';
    }
}

Eigen::MatrixXd load_cifar_batches(const std::vector<std::filesystem::path>& paths)
{
    constexpr std::size_t kRecordBytes = 3073; // 1 label + 32*32*3 pixels
    constexpr std::size_t kPixels = 3072;

    std::vector<std::vector<unsigned char>> records;
    for (const auto& path : paths) {
        std::ifstream in(path, std::ios::binary);
        if (!in)
            throw std::runtime_error("cannot open " + path.string());
        in.seekg(0, std::ios::end);
        const auto size = static_cast<std::size_t>(in.tellg());
        in.seekg(0);
        if (size == 0 || size % kRecordBytes != 0)
            throw std::runtime_error(path.string() + ": size " + std::to_string(size) +
                                     " is not a multiple of the 3073-byte record (offset " +
                                     std::to_string(size % kRecordBytes) + " trailing)");
        std::vector<unsigned char> buf(size);
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(size));
        if (!in) throw std::runtime_error(path.string() + ": short read");
        for (std::size_t off = 0; off < size; off += kRecordBytes)
            records.emplace_back(buf.begin() + static_cast<std::ptrdiff_t>(off + 1),
                                 buf.begin() + static_cast<std::ptrdiff_t>(off + kRecordBytes));
    }

    Eigen::MatrixXd m(records.size(), kPixels);
    for (std::size_t i = 0; i < records.size(); ++i)
        for (std::size_t j = 0; j < kPixels; ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                records[i][j] / 255.0;
    return m;
}

void save_json(const nlohmann::json& j, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

std::string format_double(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

} // namespace spikebench
