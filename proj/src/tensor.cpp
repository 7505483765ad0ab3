// SPDX-License-Identifier: Apache-2.0
#include "fmtlab/tensor.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "fmtlab/error.hpp"
#include "fmtlab/fp_grid.hpp"

namespace fmtlab {

Tensor Tensor::zeros(std::vector<std::int64_t> shape) {
    Tensor t;
    t.shape = std::move(shape);
    std::int64_t n = 1;
    for (auto d : t.shape) {
        if (d <= 0) throw DataError("Tensor: dimensions must be positive");
        n *= d;
    }
    t.data.assign(static_cast<std::size_t>(n), 0.0);
    return t;
}

Tensor Tensor::from(std::vector<std::int64_t> shape, std::vector<double> data) {
    Tensor t;
    t.shape = std::move(shape);
    std::int64_t n = 1;
    for (auto d : t.shape) {
        if (d <= 0) throw DataError("Tensor: dimensions must be positive");
        n *= d;
    }
    if (n != static_cast<std::int64_t>(data.size())) {
        throw DataError("Tensor: shape product " + std::to_string(n) +
                        " != payload size " + std::to_string(data.size()));
    }
    for (double v : data) {
        if (!std::isfinite(v)) throw DataError("Tensor: non-finite value in payload");
    }
    t.data = std::move(data);
    return t;
}

double decode_f16(std::uint16_t bits) {
    const int sign = (bits >> 15) & 1;
    const int exp = (bits >> 10) & 0x1f;
    const int mant = bits & 0x3ff;
    double v;
    if (exp == 0) {
        v = std::ldexp(static_cast<double>(mant), -24); // subnormal
    } else if (exp == 31) {
        v = mant == 0 ? std::numeric_limits<double>::infinity()
                      : std::numeric_limits<double>::quiet_NaN();
    } else {
        v = (1.0 + std::ldexp(static_cast<double>(mant), -10)) * std::ldexp(1.0, exp - 15);
    }
    return sign ? -v : v;
}

double decode_bf16(std::uint16_t bits) {
    const std::uint32_t wide = static_cast<std::uint32_t>(bits) << 16;
    float f;
    std::memcpy(&f, &wide, sizeof(f));
    return static_cast<double>(f);
}

namespace {

std::uint16_t f16_bits_from_double(double r) {
    // r is already on the f16 grid (or +-inf).
    std::uint16_t sign = std::signbit(r) ? 0x8000 : 0;
    double a = std::fabs(r);
    if (a == 0.0) return sign;
    if (std::isinf(a)) return sign | 0x7c00;
    int e = std::ilogb(a);
    if (e < -14) { // subnormal
        const int mant = static_cast<int>(std::ldexp(a, 24));
        return sign | static_cast<std::uint16_t>(mant);
    }
    const int mant = static_cast<int>(std::ldexp(a, 10 - e)) - (1 << 10);
    return sign | static_cast<std::uint16_t>(((e + 15) << 10) | mant);
}

} // namespace

std::uint16_t encode_f16(double x) {
    if (std::isnan(x)) return 0x7e00;
    return f16_bits_from_double(round_to_fp_grid(x, 10, -14, 65504.0));
}

std::uint16_t encode_bf16(double x) {
    const double r = round_to_fp_grid(x, 7, -126, 0x1.fep127);
    const float f = static_cast<float>(r); // exact: r is on the bf16 grid
    std::uint32_t bits;
    std::memcpy(&bits, &f, sizeof(bits));
    return static_cast<std::uint16_t>(bits >> 16);
}

namespace {

constexpr char kMagic[6] = {'F', 'T', 'N', 'S', 'R', '1'};

std::size_t dtype_size(TensorDtype d) {
    return d == TensorDtype::f32 ? 4 : 2;
}

void put_u64_le(std::ofstream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64_le(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

} // namespace

Tensor read_tensor(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open tensor file: " + path);
    std::vector<unsigned char> raw((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());

    if (raw.size() < 8) {
        throw IoError(path + ": truncated header (" + std::to_string(raw.size()) +
                      " bytes, need >= 8)");
    }
    if (std::memcmp(raw.data(), kMagic, 6) != 0) {
        throw IoError(path + ": bad magic at offset 0 (expected \"FTNSR1\")");
    }
    const auto dtype_code = raw[6];
    if (dtype_code > 2) {
        throw IoError(path + ": unknown dtype code " + std::to_string(int(dtype_code)) +
                      " at offset 6");
    }
    const auto dtype = static_cast<TensorDtype>(dtype_code);
    const int ndim = raw[7];
    const std::size_t header = 8 + 8 * static_cast<std::size_t>(ndim);
    if (raw.size() < header) {
        throw IoError(path + ": truncated dims at offset 8 (have " +
                      std::to_string(raw.size()) + " bytes, need " +
                      std::to_string(header) + ")");
    }

    std::vector<std::int64_t> shape(ndim);
    std::uint64_t n = 1;
    for (int i = 0; i < ndim; ++i) {
        const std::uint64_t d = get_u64_le(raw.data() + 8 + 8 * i);
        if (d == 0) throw IoError(path + ": zero dimension at index " + std::to_string(i));
        shape[i] = static_cast<std::int64_t>(d);
        n *= d;
    }
    const std::size_t need = header + n * dtype_size(dtype);
    if (raw.size() != need) {
        throw IoError(path + ": payload size mismatch at offset " + std::to_string(header) +
                      " (have " + std::to_string(raw.size() - header) + " bytes, expected " +
                      std::to_string(n * dtype_size(dtype)) + ")");
    }

    std::vector<double> data(n);
    const unsigned char* p = raw.data() + header;
    switch (dtype) {
        case TensorDtype::f32:
            for (std::uint64_t i = 0; i < n; ++i) {
                std::uint32_t bits = 0;
                for (int b = 0; b < 4; ++b) {
                    bits |= static_cast<std::uint32_t>(p[4 * i + b]) << (8 * b);
                }
                float f;
                std::memcpy(&f, &bits, sizeof(f));
                data[i] = static_cast<double>(f);
            }
            break;
        case TensorDtype::f16:
        case TensorDtype::bf16:
            for (std::uint64_t i = 0; i < n; ++i) {
                const std::uint16_t bits =
                    static_cast<std::uint16_t>(p[2 * i] | (p[2 * i + 1] << 8));
                data[i] = dtype == TensorDtype::f16 ? decode_f16(bits) : decode_bf16(bits);
            }
            break;
    }
    for (std::uint64_t i = 0; i < n; ++i) {
        if (!std::isfinite(data[i])) {
            throw DataError(path + ": non-finite value at element " + std::to_string(i) +
                            " (offset " + std::to_string(header + i * dtype_size(dtype)) + ")");
        }
    }
    Tensor t;
    t.shape = std::move(shape);
    t.data = std::move(data);
    return t;
}

void write_tensor(const Tensor& t, const std::string& path, TensorDtype dtype) {
    if (t.ndim() > 255) throw IoError("write_tensor: ndim exceeds u8");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out.write(kMagic, 6);
    const unsigned char meta[2] = {static_cast<unsigned char>(dtype),
                                   static_cast<unsigned char>(t.ndim())};
    out.write(reinterpret_cast<const char*>(meta), 2);
    for (auto d : t.shape) put_u64_le(out, static_cast<std::uint64_t>(d));

    switch (dtype) {
        case TensorDtype::f32:
            for (double v : t.data) {
                const float f = static_cast<float>(v);
                std::uint32_t bits;
                std::memcpy(&bits, &f, sizeof(bits));
                unsigned char b[4];
                for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
                out.write(reinterpret_cast<const char*>(b), 4);
            }
            break;
        case TensorDtype::f16:
        case TensorDtype::bf16:
            for (double v : t.data) {
                const std::uint16_t bits =
                    dtype == TensorDtype::f16 ? encode_f16(v) : encode_bf16(v);
                const unsigned char b[2] = {static_cast<unsigned char>(bits & 0xff),
                                            static_cast<unsigned char>(bits >> 8)};
                out.write(reinterpret_cast<const char*>(b), 2);
            }
            break;
    }
    if (!out) throw IoError("write failed: " + path);
}

} // namespace fmtlab
