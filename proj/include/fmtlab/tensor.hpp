// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fmtlab {

/// Dense row-major tensor in working precision (double).
struct Tensor {
    std::vector<std::int64_t> shape;
    std::vector<double> data;

    std::int64_t size() const {
        std::int64_t n = 1;
        for (auto d : shape) n *= d;
        return n;
    }
    int ndim() const { return static_cast<int>(shape.size()); }

    static Tensor zeros(std::vector<std::int64_t> shape);
    // Validates product(shape) == data.size() and that all values are finite.
    static Tensor from(std::vector<std::int64_t> shape, std::vector<double> data);
};

// FTNSR1 payload element types.
enum class TensorDtype : std::uint8_t { f32 = 0, f16 = 1, bf16 = 2 };

// FTNSR1 (little-endian): magic "FTNSR1", u8 dtype, u8 ndim, ndim x u64 dims,
// raw payload.
Tensor read_tensor(const std::string& path);
void write_tensor(const Tensor& t, const std::string& path,
                  TensorDtype dtype = TensorDtype::f32);

// Bit-level scalar conversions used by the file format (round-to-nearest-even
// on encode, exact on decode).
double decode_f16(std::uint16_t bits);
double decode_bf16(std::uint16_t bits);
std::uint16_t encode_f16(double x);
std::uint16_t encode_bf16(double x);

} // namespace fmtlab
