// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "fmtlab/formats.hpp"
#include "fmtlab/tensor.hpp"

namespace fmtlab {

/// One block's resolved scale. For e4m3_two_level, value already includes the
/// per-tensor factor and second_level carries that factor.
struct BlockScale {
    double value = 1.0;
    ScaleMode mode = ScaleMode::exact;
    std::optional<double> second_level;
};

/// Seeded random Hadamard rotation R = H_dim * diag(signs) / sqrt(dim).
struct RotationSpec {
    int dim = 32;
    std::uint64_t seed = 0;
};

// Precision the scale arithmetic runs in. bf16 reproduces the low-precision
// normalize/divide failure mode behind symmetric clipping.
enum class ScaleArith { exact, bf16 };

struct QuantOptions {
    ScaleArith scale_arith = ScaleArith::exact;
    bool keep_codes = true;
    std::optional<RotationSpec> rotation;
};

struct QuantResult {
    Tensor dequantized;
    // One per block: axis runs in row-major order of the surrounding dims,
    // blocks in axis order within each run.
    std::vector<BlockScale> scales;
    std::vector<std::int32_t> codes; // per element; empty when !keep_codes
    double qsnr_db = 0.0;            // vs the tensor that was quantized (post-rotation)
};

// AbsMax(block)/q_ref; all-zero blocks get the designated minimal positive
// scale 2^-127. NaN/Inf in the block is a data error.
double absmax_scale(std::span<const double> block, double q_ref);

BlockScale ue8m0_round_up(double s);
BlockScale ue8m0_round_down(double absmax, double q_max);

struct TwoLevelScales {
    double tensor_scale = 0.0;
    std::vector<double> block_scales; // E4M3 values, block-major along the axis
};
TwoLevelScales e4m3_two_level_scales(const Tensor& t, const FormatSpec& spec, int axis = -1);

// Round-to-nearest E4M3 (the NV block-scale format), saturating at 448.
double quantize_scale_e4m3(double x);

struct BlockQuant {
    std::vector<double> dequantized;
    std::vector<std::int32_t> codes; // INT: integer code, FP: codebook index
};
// Quantize one block with a fixed scale. INT: clip(round_half_even(x/s)),
// FP: nearest codebook value with half-even ties.
BlockQuant quantize_block(std::span<const double> block, const FormatSpec& spec,
                          const BlockScale& scale,
                          ScaleArith scale_arith = ScaleArith::exact);

// Blocks shape[axis] into runs of spec.block_size (error if not divisible),
// optionally rotates rotation.dim-length runs first, scales and quantizes
// each block, and reports the tensor QSNR.
QuantResult quantize_tensor(const Tensor& t, const FormatSpec& spec, int axis,
                            const QuantOptions& opts = {});

// Explicit dim x dim rotation matrix, row-major. dim must be a power of two.
std::vector<double> hadamard_matrix(const RotationSpec& rot);

// Replaces every rot.dim-length run along `axis` with R*run (done via a fast
// Walsh-Hadamard transform; identical to the explicit matrix product).
void rotate_axis_runs(Tensor& t, int axis, const RotationSpec& rot);

// Sites in compute-flow order: X, W, dY, W^T, X^T, dY^T.
struct LinearSimReport {
    std::array<double, 6> site_qsnr_db{};
    double y_qsnr_db = 0.0;
    double dx_qsnr_db = 0.0;
    double dw_qsnr_db = 0.0;
};
struct LinearSimOptions {
    std::optional<RotationSpec> rotation;
    std::array<bool, 6> rotate_site{true, true, true, true, true, true};
    ScaleArith scale_arith = ScaleArith::exact;
};
// x: MxK, w: KxN, dy: MxN. Quantizes the six operand sites along their own
// reduction axes and evaluates Y/dX/dW from the dequantized operands.
LinearSimReport linear_layer_sim(const Tensor& x, const Tensor& w, const Tensor& dy,
                                 const FormatSpec& spec, const LinearSimOptions& opts = {});

} // namespace fmtlab
