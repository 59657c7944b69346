#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace topomap::npy {

/// In-memory NPY array. Element type is tracked only for writing; reading
/// converts any supported numeric dtype into `data`.
struct Array {
    std::vector<std::size_t> shape;
    std::vector<double> data;  ///< C order

    std::size_t size() const;
};

/// Reads NPY format versions 1.0 to 3.0. Supports little-endian
/// f4/f8/i1/i2/i4/i8/u1/u2/u4/u8 and bool in C order.
Array read(const std::filesystem::path& path);

/// Reads a float32/float64 array without widening to double.
std::vector<float> read_f32(const std::filesystem::path& path, std::vector<std::size_t>& shape);

enum class DType { f32, f64, i64 };

/// Writes NPY v1.0, C order, little endian.
void write(const std::filesystem::path& path, const std::vector<std::size_t>& shape,
           const std::vector<double>& data, DType dtype = DType::f64);
void write_f32(const std::filesystem::path& path, const std::vector<std::size_t>& shape,
               const std::vector<float>& data);

}  // namespace topomap::npy
