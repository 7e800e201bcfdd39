#ifndef SPIKEBENCH_IO_HPP
#define SPIKEBENCH_IO_HPP

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace spikebench {

// Dense CSV, one sample/token per row. Throws std::runtime_error with a
// line diagnostic on malformed input.
Eigen::MatrixXd load_matrix_csv(const std::filesystem::path& path);
void save_matrix_csv(const Eigen::MatrixXd& m, const std::filesystem::path& path);

// Raw CIFAR-10 batch format: 3073-byte records, 1 label byte followed by
// 3072 pixel bytes; pixels are scaled to [0,1]. Accepts one or more batch
// files and concatenates them sample-major.
Eigen::MatrixXd load_cifar_batches(const std::vector<std::filesystem::path>& paths);

void save_json(const nlohmann::json& j, const std::filesystem::path& path);

// Stable numeric formatting shared by every writer, so identical configs
// produce byte-identical artifacts.
std::string format_double(double v);

} // namespace spikebench

#endif
