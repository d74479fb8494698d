#include "dhia/tensor_io.hpp"

#include <array>
#include <bit>
#include <istream>
#include <ostream>

#include "dhia/errors.hpp"

namespace dhia {

namespace {

template <class U>
void put_le(std::ostream& out, U value) {
  std::array<char, sizeof(U)> bytes{};
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
  out.write(bytes.data(), bytes.size());
}

template <class U>
U get_le(std::istream& in) {
  std::array<unsigned char, sizeof(U)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (!in) throw DataError("tensor container truncated");
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(bytes[i]) << (8 * i);
  return value;
}

}  // namespace

void write_tensor_container(std::ostream& out, std::span<const Matrix> tensors) {
  out.write("DHIA", 4);
  put_le<std::uint32_t>(out, kTensorContainerVersion);
  put_le<std::uint64_t>(out, tensors.size());
  for (const Matrix& m : tensors) {
    put_le<std::uint64_t>(out, m.rows());
    put_le<std::uint64_t>(out, m.cols());
    for (double x : m.data()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(x));
  }
  if (!out) throw DataError("failed writing tensor container");
}

std::vector<Matrix> read_tensor_container(std::istream& in) {
  std::array<char, 4> magic{};
  in.read(magic.data(), 4);
  if (!in || std::string(magic.data(), 4) != "DHIA") throw DataError("bad tensor container magic");
  const auto version = get_le<std::uint32_t>(in);
  if (version != kTensorContainerVersion) throw DataError("unsupported tensor container version " + std::to_string(version));
  const auto count = get_le<std::uint64_t>(in);
  std::vector<Matrix> tensors;
  for (std::uint64_t t = 0; t < count; ++t) {
    const auto rows = get_le<std::uint64_t>(in);
    const auto cols = get_le<std::uint64_t>(in);
    if (rows != 0 && cols > (std::uint64_t{1} << 40) / rows) throw DataError("tensor container shape too large");
    std::vector<double> data(rows * cols);
    for (double& x : data) x = std::bit_cast<double>(get_le<std::uint64_t>(in));
    tensors.emplace_back(rows, cols, std::move(data));
  }
  return tensors;
}

}  // namespace dhia
