// SPDX-License-Identifier: Apache-2.0
#include "fmtlab/quant.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>

#include "fmtlab/empirics.hpp"
#include "fmtlab/error.hpp"
#include "fmtlab/fp_grid.hpp"

namespace fmtlab {

namespace {

constexpr double kMinScale = 0x1p-127; // designated scale for all-zero blocks

double bf16(double x) { return emulate_precision(x, PrecisionKind::bf16); }

// Exact ceil(log2 s) / floor(log2 s) for positive finite doubles.
int ceil_log2(double s) {
    int e;
    const double m = std::frexp(s, &e); // s = m * 2^e, m in [0.5, 1)
    return m == 0.5 ? e - 1 : e;
}

int floor_log2(double s) { return std::ilogb(s); }

int normalize_axis(const Tensor& t, int axis) {
    const int nd = t.ndim();
    if (axis < 0) axis += nd;
    if (axis < 0 || axis >= nd) {
        throw ConfigError("axis " + std::to_string(axis) + " out of range for ndim " +
                          std::to_string(nd));
    }
    return axis;
}

struct AxisView {
    std::int64_t outer, len, inner; // element index = (o*len + j)*inner + i
};

AxisView axis_view(const Tensor& t, int axis) {
    AxisView v{1, t.shape[axis], 1};
    for (int d = 0; d < axis; ++d) v.outer *= t.shape[d];
    for (int d = axis + 1; d < t.ndim(); ++d) v.inner *= t.shape[d];
    return v;
}

double block_absmax(std::span<const double> block) {
    double amax = 0.0;
    for (double x : block) {
        if (!std::isfinite(x)) throw DataError("quantize: non-finite value in block");
        amax = std::max(amax, std::fabs(x));
    }
    return amax;
}

// Scale for one block under the format's scale mode. Two-level scales are resolved
// at tensor level and passed in through `two_level`.
BlockScale block_scale_for(std::span<const double> block, const FormatSpec& spec,
                           ScaleArith arith, const double* two_level_value,
                           const double* two_level_tensor_scale) {
    if (spec.scale_mode == ScaleMode::e4m3_two_level) {
        BlockScale s;
        s.mode = ScaleMode::e4m3_two_level;
        s.value = *two_level_value * *two_level_tensor_scale;
        if (arith == ScaleArith::bf16) s.value = bf16(s.value);
        s.second_level = *two_level_tensor_scale;
        return s;
    }
    double amax = block_absmax(block);
    if (arith == ScaleArith::bf16) amax = bf16(amax);
    switch (spec.scale_mode) {
        case ScaleMode::exact: {
            BlockScale s;
            s.mode = ScaleMode::exact;
            if (amax == 0.0) {
                s.value = kMinScale;
            } else {
                s.value = amax / spec.q_ref();
                if (arith == ScaleArith::bf16) s.value = bf16(s.value);
            }
            return s;
        }
        case ScaleMode::ue8m0_round_up:
            return ue8m0_round_up(amax == 0.0 ? kMinScale : amax / spec.q_ref());
        case ScaleMode::ue8m0_round_down:
            return ue8m0_round_down(amax == 0.0 ? kMinScale : amax, spec.q_ref());
        case ScaleMode::e4m3_two_level:
            break;
    }
    throw ConfigError("unhandled scale mode");
}

void quantize_block_into(std::span<const double> block, const FormatSpec& spec,
                         double scale, ScaleArith arith, double* deq,
                         std::int32_t* codes) {
    const double inv = 1.0 / scale;
    if (spec.is_fp()) {
        const Codebook& cb = *spec.codebook;
        for (std::size_t i = 0; i < block.size(); ++i) {
            double q = block[i] * inv;
            if (arith == ScaleArith::bf16) q = bf16(bf16(block[i]) / scale);
            const std::size_t idx = cb.nearest_index(q);
            deq[i] = cb.values[idx] * scale;
            if (codes) codes[i] = static_cast<std::int32_t>(idx);
        }
    } else {
        const IntLayout& il = spec.integer();
        const double lo = static_cast<double>(il.q_min);
        const double hi = static_cast<double>(il.q_max);
        for (std::size_t i = 0; i < block.size(); ++i) {
            double q = block[i] * inv;
            if (arith == ScaleArith::bf16) q = bf16(bf16(block[i]) / scale);
            const double c = std::clamp(std::nearbyint(q), lo, hi);
            deq[i] = c * scale;
            if (codes) codes[i] = static_cast<std::int32_t>(c);
        }
    }
}

} // namespace

double absmax_scale(std::span<const double> block, double q_ref) {
    if (block.empty()) throw DataError("absmax_scale: empty block");
    if (q_ref <= 0.0) throw ConfigError("absmax_scale: q_ref must be positive");
    const double amax = block_absmax(block);
    if (amax == 0.0) return kMinScale;
    return amax / q_ref;
}

BlockScale ue8m0_round_up(double s) {
    if (!(s > 0.0)) throw DataError("ue8m0_round_up: scale must be positive");
    const int e = std::clamp(ceil_log2(s), -127, 127);
    return BlockScale{std::ldexp(1.0, e), ScaleMode::ue8m0_round_up, std::nullopt};
}

BlockScale ue8m0_round_down(double absmax, double q_max) {
    if (!(absmax > 0.0) || !(q_max > 0.0)) {
        throw DataError("ue8m0_round_down: absmax and q_max must be positive");
    }
    const int e = std::clamp(floor_log2(absmax) - floor_log2(q_max), -127, 127);
    return BlockScale{std::ldexp(1.0, e), ScaleMode::ue8m0_round_down, std::nullopt};
}

double quantize_scale_e4m3(double x) {
    return round_to_fp_grid(x, 3, -6, 448.0, GridOverflow::saturate);
}

TwoLevelScales e4m3_two_level_scales(const Tensor& t, const FormatSpec& spec, int axis) {
    if (spec.scale_mode != ScaleMode::e4m3_two_level) {
        throw ConfigError("e4m3_two_level_scales requires an e4m3_two_level format");
    }
    const int ax = normalize_axis(t, axis);
    const auto view = axis_view(t, ax);
    const int g = spec.block_size;
    if (view.len % g != 0) {
        throw DataError("axis length " + std::to_string(view.len) +
                        " not divisible by block size " + std::to_string(g));
    }
    const double amax_tensor = block_absmax(t.data);
    TwoLevelScales out;
    constexpr double kE4m3MinSub = 0x1p-9;
    out.tensor_scale = amax_tensor == 0.0 ? kMinScale : amax_tensor / (spec.q_ref() * 448.0);

    const std::int64_t blocks_per_run = view.len / g;
    out.block_scales.resize(static_cast<std::size_t>(view.outer * view.inner * blocks_per_run));
    std::vector<double> run(static_cast<std::size_t>(view.len));
    std::size_t b = 0;
    for (std::int64_t o = 0; o < view.outer; ++o) {
        for (std::int64_t i = 0; i < view.inner; ++i) {
            for (std::int64_t j = 0; j < view.len; ++j) {
                run[static_cast<std::size_t>(j)] =
                    t.data[static_cast<std::size_t>((o * view.len + j) * view.inner + i)];
            }
            for (std::int64_t k = 0; k < blocks_per_run; ++k) {
                const double amax =
                    block_absmax(std::span<const double>(run).subspan(
                        static_cast<std::size_t>(k * g), static_cast<std::size_t>(g)));
                double bs = amax == 0.0
                                ? kE4m3MinSub
                                : quantize_scale_e4m3(amax / (spec.q_ref() * out.tensor_scale));
                if (bs == 0.0) bs = kE4m3MinSub;
                out.block_scales[b++] = bs;
            }
        }
    }
    return out;
}

BlockQuant quantize_block(std::span<const double> block, const FormatSpec& spec,
                          const BlockScale& scale, ScaleArith arith) {
    if (!(scale.value > 0.0)) throw ConfigError("quantize_block: scale must be positive");
    BlockQuant out;
    out.dequantized.resize(block.size());
    out.codes.resize(block.size());
    quantize_block_into(block, spec, scale.value, arith, out.dequantized.data(),
                        out.codes.data());
    return out;
}

QuantResult quantize_tensor(const Tensor& t, const FormatSpec& spec, int axis,
                            const QuantOptions& opts) {
    const int ax = normalize_axis(t, axis);
    const auto view = axis_view(t, ax);
    const int g = spec.block_size;
    if (view.len % g != 0) {
        throw DataError("axis length " + std::to_string(view.len) +
                        " not divisible by block size " + std::to_string(g));
    }

    Tensor work = t;
    if (opts.rotation) rotate_axis_runs(work, ax, *opts.rotation);

    std::optional<TwoLevelScales> two_level;
    if (spec.scale_mode == ScaleMode::e4m3_two_level) {
        two_level = e4m3_two_level_scales(work, spec, ax);
    }

    QuantResult res;
    res.dequantized = Tensor::zeros(t.shape);
    const std::int64_t blocks_per_run = view.len / g;
    res.scales.resize(static_cast<std::size_t>(view.outer * view.inner * blocks_per_run));
    if (opts.keep_codes) res.codes.resize(work.data.size());

    std::vector<double> run(static_cast<std::size_t>(view.len));
    std::vector<double> run_out(static_cast<std::size_t>(view.len));
    std::vector<std::int32_t> run_codes(static_cast<std::size_t>(view.len));
    std::size_t block_index = 0;
    for (std::int64_t o = 0; o < view.outer; ++o) {
        for (std::int64_t i = 0; i < view.inner; ++i) {
            const bool contiguous = view.inner == 1;
            const double* src;
            if (contiguous) {
                src = work.data.data() + static_cast<std::size_t>(o * view.len);
            } else {
                for (std::int64_t j = 0; j < view.len; ++j) {
                    run[static_cast<std::size_t>(j)] =
                        work.data[static_cast<std::size_t>((o * view.len + j) * view.inner + i)];
                }
                src = run.data();
            }
            for (std::int64_t k = 0; k < blocks_per_run; ++k) {
                const std::span<const double> block(src + k * g, static_cast<std::size_t>(g));
                const double* tl_value =
                    two_level ? &two_level->block_scales[block_index] : nullptr;
                const double* tl_tensor = two_level ? &two_level->tensor_scale : nullptr;
                const BlockScale bs =
                    block_scale_for(block, spec, opts.scale_arith, tl_value, tl_tensor);
                res.scales[block_index] = bs;
                quantize_block_into(block, spec, bs.value, opts.scale_arith,
                                    run_out.data() + k * g,
                                    opts.keep_codes ? run_codes.data() + k * g : nullptr);
                ++block_index;
            }
            if (contiguous) {
                std::copy(run_out.begin(), run_out.end(),
                          res.dequantized.data.begin() + static_cast<std::size_t>(o * view.len));
                if (opts.keep_codes) {
                    std::copy(run_codes.begin(), run_codes.end(),
                              res.codes.begin() + static_cast<std::size_t>(o * view.len));
                }
            } else {
                for (std::int64_t j = 0; j < view.len; ++j) {
                    const auto idx = static_cast<std::size_t>((o * view.len + j) * view.inner + i);
                    res.dequantized.data[idx] = run_out[static_cast<std::size_t>(j)];
                    if (opts.keep_codes) res.codes[idx] = run_codes[static_cast<std::size_t>(j)];
                }
            }
        }
    }
    res.qsnr_db = measure_qsnr(work.data, res.dequantized.data);
    return res;
}

std::vector<double> hadamard_matrix(const RotationSpec& rot) {
    const int h = rot.dim;
    if (h < 1 || (h & (h - 1)) != 0) {
        throw ConfigError("hadamard_matrix: dim must be a power of two (got " +
                          std::to_string(h) + ")");
    }
    std::mt19937_64 eng(rot.seed);
    std::vector<double> signs(static_cast<std::size_t>(h));
    for (auto& s : signs) s = (eng() >> 63) ? -1.0 : 1.0;

    const double norm = 1.0 / std::sqrt(static_cast<double>(h));
    std::vector<double> m(static_cast<std::size_t>(h) * h);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < h; ++c) {
            const int parity = std::popcount(static_cast<unsigned>(r & c)) & 1;
            m[static_cast<std::size_t>(r) * h + c] =
                (parity ? -1.0 : 1.0) * signs[static_cast<std::size_t>(c)] * norm;
        }
    }
    return m;
}

namespace {

void fwht(double* v, int n) {
    for (int half = 1; half < n; half <<= 1) {
        for (int i = 0; i < n; i += half << 1) {
            for (int j = i; j < i + half; ++j) {
                const double a = v[j];
                const double b = v[j + half];
                v[j] = a + b;
                v[j + half] = a - b;
            }
        }
    }
}

} // namespace

void rotate_axis_runs(Tensor& t, int axis, const RotationSpec& rot) {
    const int ax = normalize_axis(t, axis);
    const auto view = axis_view(t, ax);
    const int h = rot.dim;
    if (h < 1 || (h & (h - 1)) != 0) {
        throw ConfigError("rotation dim must be a power of two (got " + std::to_string(h) + ")");
    }
    if (view.len % h != 0) {
        throw DataError("rotation dim " + std::to_string(h) + " does not divide axis length " +
                        std::to_string(view.len));
    }
    std::mt19937_64 eng(rot.seed);
    std::vector<double> signs(static_cast<std::size_t>(h));
    for (auto& s : signs) s = (eng() >> 63) ? -1.0 : 1.0;
    const double norm = 1.0 / std::sqrt(static_cast<double>(h));

    std::vector<double> seg(static_cast<std::size_t>(h));
    for (std::int64_t o = 0; o < view.outer; ++o) {
        for (std::int64_t i = 0; i < view.inner; ++i) {
            for (std::int64_t j0 = 0; j0 < view.len; j0 += h) {
                for (int j = 0; j < h; ++j) {
                    seg[static_cast<std::size_t>(j)] =
                        signs[static_cast<std::size_t>(j)] *
                        t.data[static_cast<std::size_t>((o * view.len + j0 + j) * view.inner + i)];
                }
                fwht(seg.data(), h);
                for (int j = 0; j < h; ++j) {
                    t.data[static_cast<std::size_t>((o * view.len + j0 + j) * view.inner + i)] =
                        seg[static_cast<std::size_t>(j)] * norm;
                }
            }
        }
    }
}

namespace {

// C[MxN] = A[MxK] * B[KxN]
std::vector<double> matmul(const std::vector<double>& a, const std::vector<double>& b,
                           std::int64_t m, std::int64_t k, std::int64_t n) {
    std::vector<double> c(static_cast<std::size_t>(m * n), 0.0);
    for (std::int64_t i = 0; i < m; ++i) {
        for (std::int64_t p = 0; p < k; ++p) {
            const double av = a[static_cast<std::size_t>(i * k + p)];
            if (av == 0.0) continue;
            const double* brow = b.data() + p * n;
            double* crow = c.data() + i * n;
            for (std::int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

// C[MxK] = A[MxN] * B[KxN]^T
std::vector<double> matmul_abt(const std::vector<double>& a, const std::vector<double>& b,
                               std::int64_t m, std::int64_t n, std::int64_t k) {
    std::vector<double> c(static_cast<std::size_t>(m * k), 0.0);
    for (std::int64_t i = 0; i < m; ++i) {
        for (std::int64_t j = 0; j < k; ++j) {
            double acc = 0.0;
            const double* arow = a.data() + i * n;
            const double* brow = b.data() + j * n;
            for (std::int64_t p = 0; p < n; ++p) acc += arow[p] * brow[p];
            c[static_cast<std::size_t>(i * k + j)] = acc;
        }
    }
    return c;
}

// C[KxN] = A[MxK]^T * B[MxN]
std::vector<double> matmul_atb(const std::vector<double>& a, const std::vector<double>& b,
                               std::int64_t m, std::int64_t k, std::int64_t n) {
    std::vector<double> c(static_cast<std::size_t>(k * n), 0.0);
    for (std::int64_t p = 0; p < m; ++p) {
        for (std::int64_t i = 0; i < k; ++i) {
            const double av = a[static_cast<std::size_t>(p * k + i)];
            if (av == 0.0) continue;
            const double* brow = b.data() + p * n;
            double* crow = c.data() + i * n;
            for (std::int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

} // namespace

LinearSimReport linear_layer_sim(const Tensor& x, const Tensor& w, const Tensor& dy,
                                 const FormatSpec& spec, const LinearSimOptions& opts) {
    if (x.ndim() != 2 || w.ndim() != 2 || dy.ndim() != 2) {
        throw DataError("linear_layer_sim: x, w, dy must be 2-D");
    }
    const std::int64_t m = x.shape[0], k = x.shape[1];
    const std::int64_t n = w.shape[1];
    if (w.shape[0] != k) throw DataError("linear_layer_sim: w rows must match x cols");
    if (dy.shape[0] != m || dy.shape[1] != n) {
        throw DataError("linear_layer_sim: dy shape must be MxN");
    }

    // Sites in compute-flow order with their reduction axes:
    // (1) X along K, (2) W along K, (3) dY along N, (4) W^T along N,
    // (5) X^T along M, (6) dY^T along M.
    const Tensor* site_tensor[6] = {&x, &w, &dy, &w, &x, &dy};
    const int site_axis[6] = {1, 0, 1, 1, 0, 0};

    LinearSimReport rep;
    std::vector<Tensor> deq;
    deq.reserve(6);
    for (int s = 0; s < 6; ++s) {
        QuantOptions qo;
        qo.keep_codes = false;
        qo.scale_arith = opts.scale_arith;
        if (opts.rotation && opts.rotate_site[static_cast<std::size_t>(s)]) {
            qo.rotation = opts.rotation;
        }
        QuantResult qr = quantize_tensor(*site_tensor[s], spec, site_axis[s], qo);
        rep.site_qsnr_db[static_cast<std::size_t>(s)] = qr.qsnr_db;
        deq.push_back(std::move(qr.dequantized));
    }

    // Rotation is product-preserving only when both operands of a GEMM use
    // the same rotation along the shared reduction axis; references are
    // computed from the original operands either way.
    const auto y_ref = matmul(x.data, w.data, m, k, n);
    const auto y_q = matmul(deq[0].data, deq[1].data, m, k, n);
    const auto dx_ref = matmul_abt(dy.data, w.data, m, n, k);
    const auto dx_q = matmul_abt(deq[2].data, deq[3].data, m, n, k);
    const auto dw_ref = matmul_atb(x.data, dy.data, m, k, n);
    const auto dw_q = matmul_atb(deq[4].data, deq[5].data, m, k, n);
    rep.y_qsnr_db = measure_qsnr(std::span<const double>(y_ref), std::span<const double>(y_q));
    rep.dx_qsnr_db = measure_qsnr(std::span<const double>(dx_ref), std::span<const double>(dx_q));
    rep.dw_qsnr_db = measure_qsnr(std::span<const double>(dw_ref), std::span<const double>(dw_q));
    return rep;
}

} // namespace fmtlab
