#ifndef SPIKEBENCH_SPKT_IO_HPP
#define SPIKEBENCH_SPKT_IO_HPP

#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "spikebench/spike.hpp"

namespace spikebench {

// SPKT binary container:
//   magic "SPKT" | version u16 LE | n u32 LE | d u32 LE | T u32 LE |
//   payload: cells in row-major (i,j) order, each ceil(T/8) bytes,
//   bit t of a cell stored at byte t/8, bit t%8.
inline constexpr std::uint16_t kSpktVersion = 1;

namespace detail {

template <typename T>
void write_le(std::ostream& os, T v)
{
    for (std::size_t b = 0; b < sizeof(T); ++b)
        os.put(static_cast<char>((v >> (8 * b)) & 0xFF));
}

template <typename T>
T read_le(std::istream& is)
{
    T v = 0;
    for (std::size_t b = 0; b < sizeof(T); ++b) {
        const int c = is.get();
        if (c == EOF) throw std::runtime_error("SPKT: truncated stream");
        v |= static_cast<T>(static_cast<unsigned char>(c)) << (8 * b);
    }
    return v;
}

} // namespace detail

inline void write_spkt(const SpikeTensor& tensor, std::ostream& os)
{
    os.write("SPKT", 4);
    detail::write_le<std::uint16_t>(os, kSpktVersion);
    detail::write_le<std::uint32_t>(os, tensor.rows());
    detail::write_le<std::uint32_t>(os, tensor.cols());
    detail::write_le<std::uint32_t>(os, tensor.timesteps());

    const std::uint32_t bytes_per_cell = (tensor.timesteps() + 7) / 8;
    for (std::uint32_t i = 0; i < tensor.rows(); ++i) {
        for (std::uint32_t j = 0; j < tensor.cols(); ++j) {
            for (std::uint32_t b = 0; b < bytes_per_cell; ++b) {
                unsigned char byte = 0;
                const std::uint32_t t0 = 8 * b;
                for (std::uint32_t k = 0; k < 8 && t0 + k < tensor.timesteps(); ++k)
                    if (tensor.get(i, j, t0 + k)) byte |= 1u << k;
                os.put(static_cast<char>(byte));
            }
        }
    }
    if (!os) throw std::runtime_error("SPKT: write failed");
}

inline SpikeTensor read_spkt(std::istream& is)
{
    char magic[4];
    is.read(magic, 4);
    if (!is || std::string(magic, 4) != "SPKT")
        throw std::runtime_error("SPKT: bad magic");
    const auto version = detail::read_le<std::uint16_t>(is);
    if (version != kSpktVersion)
        throw std::runtime_error("SPKT: unsupported version " + std::to_string(version));
    const auto n = detail::read_le<std::uint32_t>(is);
    const auto d = detail::read_le<std::uint32_t>(is);
    const auto timesteps = detail::read_le<std::uint32_t>(is);

    SpikeTensor tensor(n, d, timesteps);
    const std::uint32_t bytes_per_cell = (timesteps + 7) / 8;
    for (std::uint32_t i = 0; i < n; ++i) {
        for (std::uint32_t j = 0; j < d; ++j) {
            for (std::uint32_t b = 0; b < bytes_per_cell; ++b) {
                const int c = is.get();
                if (c == EOF) throw std::runtime_error("SPKT: truncated payload");
                const auto byte = static_cast<unsigned char>(c);
                const std::uint32_t t0 = 8 * b;
                for (std::uint32_t k = 0; k < 8 && t0 + k < timesteps; ++k)
                    if ((byte >> k) & 1u) tensor.set(i, j, t0 + k, true);
            }
        }
    }
    return tensor;
}

// Human-inspectable dump; cells as "0101..." strings, row-major.
inline nlohmann::json spkt_debug_json(const SpikeTensor& tensor)
{
    nlohmann::json cells = nlohmann::json::array();
    for (std::uint32_t i = 0; i < tensor.rows(); ++i) {
        for (std::uint32_t j = 0; j < tensor.cols(); ++j) {
            std::string bits(tensor.timesteps(), '0');
            for (std::uint32_t t = 0; t < tensor.timesteps(); ++t)
                if (tensor.get(i, j, t)) bits[t] = '1';
            cells.push_back(std::move(bits));
        }
    }
    return nlohmann::json{{"n", tensor.rows()},
                          {"d", tensor.cols()},
                          {"T", tensor.timesteps()},
                          {"cells", std::move(cells)}};
}

} // namespace spikebench

#endif
