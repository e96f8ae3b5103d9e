#include "acmf/tensor_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace acmf {

namespace {

static_assert(std::endian::native == std::endian::little, "payload writer assumes a little-endian host");

constexpr const char* kTensorMagic = "ACMF-TENSOR v1";

std::string read_line(std::istream& is, const char* what) {
  std::string line;
  if (!std::getline(is, line)) throw FormatError(FormatErrorKind::kTruncated, std::string("tensor file: missing ") + what);
  return line;
}

}  // namespace

template <typename T>
void write_tensor(std::ostream& os, const Tensor<T>& tensor) {
  os << kTensorMagic << '\n';
  os << "dtype=" << (dtype_of<T>() == Dtype::kF32 ? "f32" : "f64") << '\n';
  os << "shape=";
  for (std::size_t i = 0; i < tensor.rank(); ++i) {
    if (i) os << ' ';
    os << tensor.dim(i);
  }
  os << "\n\n";
  os.write(reinterpret_cast<const char*>(tensor.data().data()), static_cast<std::streamsize>(tensor.size() * sizeof(T)));
}

template <typename T>
void save_tensor(const Tensor<T>& tensor, const std::filesystem::path& path) {
  std::ostringstream os(std::ios::binary);
  write_tensor(os, tensor);
  write_file_atomic(path, os.str());
}

template <typename T>
Tensor<T> read_tensor(std::istream& is) {
  const std::string magic = read_line(is, "magic line");
  if (magic.rfind("ACMF-TENSOR", 0) != 0) throw FormatError(FormatErrorKind::kBadMagic, "tensor file: bad magic '" + magic + "'");
  if (magic != kTensorMagic) throw FormatError(FormatErrorKind::kVersionMismatch, "tensor file: unsupported version '" + magic + "'");

  const std::string dtype_line = read_line(is, "dtype line");
  bool is_f32 = false;
  if (dtype_line == "dtype=f32") {
    is_f32 = true;
  } else if (dtype_line != "dtype=f64") {
    throw FormatError(FormatErrorKind::kMalformed, "tensor file: bad dtype line '" + dtype_line + "'");
  }

  const std::string shape_line = read_line(is, "shape line");
  if (shape_line.rfind("shape=", 0) != 0) throw FormatError(FormatErrorKind::kMalformed, "tensor file: bad shape line '" + shape_line + "'");
  Shape shape;
  std::istringstream ss(shape_line.substr(6));
  std::string tok;
  while (ss >> tok) {
    std::size_t pos = 0;
    unsigned long long d = 0;
    try {
      d = std::stoull(tok, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != tok.size()) throw FormatError(FormatErrorKind::kMalformed, "tensor file: bad extent '" + tok + "'");
    shape.push_back(static_cast<std::size_t>(d));
  }
  if (shape.size() > 4) throw FormatError(FormatErrorKind::kMalformed, "tensor file: rank above 4");
  if (!read_line(is, "blank separator").empty()) throw FormatError(FormatErrorKind::kMalformed, "tensor file: missing blank separator line");

  const std::size_t count = numel(shape);
  std::vector<T> data(count);
  if (is_f32) {
    std::vector<float> raw(count);
    is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count * sizeof(float)));
    if (static_cast<std::size_t>(is.gcount()) != count * sizeof(float)) throw FormatError(FormatErrorKind::kTruncated, "tensor file: payload truncated");
    for (std::size_t i = 0; i < count; ++i) data[i] = static_cast<T>(raw[i]);
  } else {
    std::vector<double> raw(count);
    is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count * sizeof(double)));
    if (static_cast<std::size_t>(is.gcount()) != count * sizeof(double)) throw FormatError(FormatErrorKind::kTruncated, "tensor file: payload truncated");
    for (std::size_t i = 0; i < count; ++i) data[i] = static_cast<T>(raw[i]);
  }
  return Tensor<T>(std::move(shape), std::move(data));
}

template <typename T>
Tensor<T> load_tensor(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError(FormatErrorKind::kIo, "cannot open tensor file " + path.string());
  return read_tensor<T>(is);
}

void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw FormatError(FormatErrorKind::kIo, "cannot write " + tmp.string());
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw FormatError(FormatErrorKind::kIo, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw FormatError(FormatErrorKind::kIo, "cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError(FormatErrorKind::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

template void write_tensor(std::ostream&, const Tensor<float>&);
template void write_tensor(std::ostream&, const Tensor<double>&);
template void save_tensor(const Tensor<float>&, const std::filesystem::path&);
template void save_tensor(const Tensor<double>&, const std::filesystem::path&);
template Tensor<float> read_tensor(std::istream&);
template Tensor<double> read_tensor(std::istream&);
template Tensor<float> load_tensor(const std::filesystem::path&);
template Tensor<double> load_tensor(const std::filesystem::path&);

}  // namespace acmf
