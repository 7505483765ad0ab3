// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

namespace fmtlab {

// How the per-block scale is represented.
enum class ScaleMode {
    ue8m0_round_up,   // s' = 2^clip(ceil(log2 s), -127, 127), s = absmax/q_ref
    ue8m0_round_down, // s' = 2^clip(floor(log2 absmax) - floor(log2 q_max), -127, 127)
    e4m3_two_level,   // per-block E4M3 scale + per-tensor fp scale
    exact,            // s' = absmax/q_ref kept in working precision
};

// Encodings excluded from an FP codebook.
enum class SpecialCodes {
    none,
    e4m3_nan, // all-ones exponent+mantissa is NaN (OCP E4M3 convention)
};

/// Element layout of a low-bit floating-point format E<x>M<y> with bias B.
struct FpLayout {
    int exponent_bits = 0;
    int mantissa_bits = 0;
    int bias = 0;
    SpecialCodes special_codes = SpecialCodes::none;
    double q_max = 0.0; // largest finite normal magnitude after exclusions
    double n_min = 0.0; // smallest positive normal, 2^(1-B)
    double s_min = 0.0; // subnormal spacing, 2^(1-B-M)

    // Derives q_max/n_min/s_min from the bit layout. E must be >= 1.
    static FpLayout make(int exponent_bits, int mantissa_bits, int bias,
                         SpecialCodes special = SpecialCodes::none);
};

/// Element layout of a low-bit integer format.
struct IntLayout {
    int bits = 0;
    std::int64_t q_max = 0;
    std::int64_t q_min = 0;
    bool symmetric = true; // symmetric => q_min = -q_max

    static IntLayout make(int bits, bool symmetric = true);
};

/// Sorted signed codebook of an FP layout. Values are strictly increasing,
/// symmetric about zero and include zero; mantissa_lsb holds the parity of
/// each value's mantissa code (the half-even tiebreak for Nearest()).
struct Codebook {
    std::vector<double> values;
    std::vector<std::uint8_t> mantissa_lsb;
    double normal_threshold = 0.0; // n_min

    // Index of the nearest codebook value; ties go to the even mantissa.
    std::size_t nearest_index(double x) const;
};

Codebook build_codebook(const FpLayout& layout);

/// One registry row: element format + blocking + scale handling.
struct FormatSpec {
    std::string name;
    std::variant<IntLayout, FpLayout> element;
    int block_size = 0;
    ScaleMode scale_mode = ScaleMode::ue8m0_round_up;
    double rho_model = 1.0; // scale-overhead parameter used by theory only
    std::shared_ptr<const Codebook> codebook; // FP formats only

    bool is_fp() const { return std::holds_alternative<FpLayout>(element); }
    const FpLayout& fp() const { return std::get<FpLayout>(element); }
    const IntLayout& integer() const { return std::get<IntLayout>(element); }

    // Largest magnitude the scale maps the block absmax onto.
    double q_ref() const {
        return is_fp() ? fp().q_max : static_cast<double>(integer().q_max);
    }
    int element_bits() const;
};

// Builds a FormatSpec with a codebook attached when the element is FP.
FormatSpec make_format(std::string name, std::variant<IntLayout, FpLayout> element,
                       int block_size, ScaleMode mode, double rho_model);

// Registry over the built-in table rows (MXFP8 ... NVINT4). Unknown names
// raise ConfigError listing what is available.
const FormatSpec& lookup_format(const std::string& name);
void register_format(FormatSpec spec); // custom formats for sweeps
std::vector<std::string> registered_format_names();

const char* to_string(ScaleMode mode);
ScaleMode scale_mode_from_string(const std::string& s);

} // namespace fmtlab
