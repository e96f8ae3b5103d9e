#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "acmf/tensor.hpp"

namespace acmf {

// ACMF-TENSOR v1:
//   ACMF-TENSOR v1\n
//   dtype=f32|f64\n
//   shape=d0 d1 ...\n      ("shape=" alone for a scalar)
//   \n
//   raw little-endian scalars, row-major
template <typename T>
void write_tensor(std::ostream& os, const Tensor<T>& tensor);

template <typename T>
void save_tensor(const Tensor<T>& tensor, const std::filesystem::path& path);

// Reads either dtype and converts to T.
template <typename T>
Tensor<T> read_tensor(std::istream& is);

template <typename T>
Tensor<T> load_tensor(const std::filesystem::path& path);

// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);
std::string read_file(const std::filesystem::path& path);

}  // namespace acmf
