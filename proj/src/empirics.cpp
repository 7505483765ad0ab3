// SPDX-License-Identifier: Apache-2.0
#include "fmtlab/empirics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <thread>

#include "fmtlab/error.hpp"
#include "fmtlab/fp_grid.hpp"

namespace fmtlab {

double measure_qsnr(std::span<const double> original, std::span<const double> quantized) {
    if (original.size() != quantized.size()) {
        throw DataError("measure_qsnr: shape mismatch");
    }
    double err = 0.0, sig = 0.0;
    for (std::size_t i = 0; i < original.size(); ++i) {
        const double d = original[i] - quantized[i];
        err += d * d;
        sig += original[i] * original[i];
    }
    if (err == 0.0) return std::numeric_limits<double>::infinity();
    if (sig == 0.0) throw DataError("measure_qsnr: all-zero original signal");
    return -10.0 * std::log10(err / sig);
}

double measure_qsnr(const Tensor& original, const Tensor& quantized) {
    if (original.shape != quantized.shape) throw DataError("measure_qsnr: shape mismatch");
    return measure_qsnr(std::span<const double>(original.data),
                        std::span<const double>(quantized.data));
}

PrecisionKind precision_from_string(const std::string& s) {
    if (s == "bf16") return PrecisionKind::bf16;
    if (s == "fp16") return PrecisionKind::fp16;
    if (s == "fp32") return PrecisionKind::fp32;
    throw ConfigError("unknown precision \"" + s + "\" (expected bf16|fp16|fp32)");
}

const char* to_string(PrecisionKind k) {
    switch (k) {
        case PrecisionKind::bf16: return "bf16";
        case PrecisionKind::fp16: return "fp16";
        case PrecisionKind::fp32: return "fp32";
    }
    return "?";
}

double emulate_precision(double x, PrecisionKind kind) {
    switch (kind) {
        case PrecisionKind::bf16:
            return round_to_fp_grid(x, 7, -126, 0x1.fep127);
        case PrecisionKind::fp16:
            return round_to_fp_grid(x, 10, -14, 65504.0);
        case PrecisionKind::fp32:
            return round_to_fp_grid(x, 23, -126, 0x1.fffffep127);
    }
    return x;
}

namespace {

int normalize_axis(const Tensor& t, int axis) {
    const int nd = t.ndim();
    if (axis < 0) axis += nd;
    if (axis < 0 || axis >= nd) throw ConfigError("crest: axis out of range");
    return axis;
}

} // namespace

std::vector<double> block_crest_factors(const Tensor& t, int axis, int block_size,
                                        const std::optional<RotationSpec>& rotation) {
    const int ax = normalize_axis(t, axis);
    std::int64_t len = t.shape[ax];
    const int g = block_size == -1 ? static_cast<int>(len) : block_size;
    if (g <= 0) throw ConfigError("crest: block size must be positive or -1");
    if (len % g != 0) {
        throw DataError("crest: axis length " + std::to_string(len) +
                        " not divisible by block size " + std::to_string(g));
    }
    const Tensor* src = &t;
    Tensor rotated;
    if (rotation) {
        rotated = t;
        rotate_axis_runs(rotated, ax, *rotation);
        src = &rotated;
    }

    std::int64_t outer = 1, inner = 1;
    for (int d = 0; d < ax; ++d) outer *= t.shape[d];
    for (int d = ax + 1; d < t.ndim(); ++d) inner *= t.shape[d];

    std::vector<double> kappas;
    kappas.reserve(static_cast<std::size_t>(outer * inner * (len / g)));
    for (std::int64_t o = 0; o < outer; ++o) {
        for (std::int64_t i = 0; i < inner; ++i) {
            for (std::int64_t j0 = 0; j0 < len; j0 += g) {
                double amax = 0.0, sumsq = 0.0;
                for (int j = 0; j < g; ++j) {
                    const double v =
                        src->data[static_cast<std::size_t>((o * len + j0 + j) * inner + i)];
                    amax = std::max(amax, std::fabs(v));
                    sumsq += v * v;
                }
                const double rms = std::sqrt(sumsq / g);
                kappas.push_back(rms == 0.0 ? 1.0 : amax / rms);
            }
        }
    }
    return kappas;
}

double mean_block_crest(const Tensor& t, int axis, int block_size,
                        const std::optional<RotationSpec>& rotation) {
    const auto ks = block_crest_factors(t, axis, block_size, rotation);
    double s = 0.0;
    for (double k : ks) s += k;
    return s / static_cast<double>(ks.size());
}

namespace {

double quantile(const std::vector<double>& sorted, double p) {
    const std::size_t n = sorted.size();
    if (n == 1) return sorted[0];
    const double h = p * static_cast<double>(n - 1);
    const auto lo = static_cast<std::size_t>(h);
    if (lo + 1 >= n) return sorted[n - 1];
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

} // namespace

CrestStats crest_stats(std::vector<double> per_tensor_means, int block_size) {
    if (per_tensor_means.empty()) throw DataError("crest_stats: empty sample");
    std::sort(per_tensor_means.begin(), per_tensor_means.end());
    CrestStats s;
    s.block_size = block_size;
    s.min = per_tensor_means.front();
    s.q1 = quantile(per_tensor_means, 0.25);
    s.median = quantile(per_tensor_means, 0.5);
    s.q3 = quantile(per_tensor_means, 0.75);
    s.max = per_tensor_means.back();
    return s;
}

double NormalSampler::next() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u, v, s;
    do {
        u = 2.0 * (static_cast<double>(eng_() >> 11) * 0x1p-53) - 1.0;
        v = 2.0 * (static_cast<double>(eng_() >> 11) * 0x1p-53) - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
    std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

Tensor gaussian_tensor(std::int64_t rows, std::int64_t cols, std::uint64_t seed) {
    Tensor t = Tensor::zeros({rows, cols});
    NormalSampler sampler(seed);
    for (auto& v : t.data) v = sampler.next();
    return t;
}

namespace {

void parallel_for(std::int64_t count, int threads, const std::function<void(std::int64_t)>& fn) {
    threads = std::max(1, threads);
    if (threads == 1 || count < 2) {
        for (std::int64_t i = 0; i < count; ++i) fn(i);
        return;
    }
    threads = static_cast<int>(std::min<std::int64_t>(threads, count));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    std::atomic<std::int64_t> next{0};
    for (int w = 0; w < threads; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::int64_t i = next.fetch_add(1);
                if (i >= count) return;
                fn(i);
            }
        });
    }
    for (auto& th : pool) th.join();
}

} // namespace

McReport mc_qsnr_scatter(const FormatSpec& fmt_a, const FormatSpec& fmt_b,
                         const CorpusSpec& corpus,
                         const std::optional<RotationSpec>& rotation, int threads) {
    if (corpus.tensor_count < 1) throw ConfigError("mc_qsnr_scatter: tensor_count must be >= 1");
    McReport rep;
    rep.samples.resize(static_cast<std::size_t>(corpus.tensor_count));

    const int block = std::min(fmt_a.block_size, fmt_b.block_size);
    parallel_for(corpus.tensor_count, threads, [&](std::int64_t i) {
        Tensor t = gaussian_tensor(corpus.rows, corpus.cols,
                                   derive_seed(corpus.seed, static_cast<std::uint64_t>(i)));
        if (rotation) rotate_axis_runs(t, -1, *rotation);
        QuantOptions qo;
        qo.keep_codes = false;
        McSample& s = rep.samples[static_cast<std::size_t>(i)];
        s.kappa = mean_block_crest(t, -1, block);
        s.qsnr_a = quantize_tensor(t, fmt_a, -1, qo).qsnr_db;
        s.qsnr_b = quantize_tensor(t, fmt_b, -1, qo).qsnr_db;
    });

    std::int64_t wins_a = 0, wins_b = 0, ties = 0;
    double sum_a = 0.0, sum_b = 0.0;
    for (const auto& s : rep.samples) {
        sum_a += s.qsnr_a;
        sum_b += s.qsnr_b;
        if (s.qsnr_a > s.qsnr_b) ++wins_a;
        else if (s.qsnr_b > s.qsnr_a) ++wins_b;
        else ++ties;
    }
    const double n = static_cast<double>(corpus.tensor_count);
    rep.mean_qsnr_a = sum_a / n;
    rep.mean_qsnr_b = sum_b / n;
    rep.win_rate_a = static_cast<double>(wins_a) / n;
    rep.win_rate_b = static_cast<double>(wins_b) / n;
    // complement instead of ties/n so the three rates sum to exactly 1.0
    // even when n is not a power of two
    rep.tie_rate = 1.0 - (rep.win_rate_a + rep.win_rate_b);
    (void)ties;
    return rep;
}

StabilityResult stability_experiment(std::int64_t n, PrecisionKind kind, std::uint64_t seed) {
    if (n < 1) throw ConfigError("stability_experiment: n must be >= 1");
    StabilityResult res;
    res.total = n * n;
    NormalSampler sampler(seed);
    for (std::int64_t i = 0; i < res.total; ++i) {
        const double d = emulate_precision(sampler.next(), kind);
        const double s = emulate_precision(d / 127.0, kind);
        const double q = emulate_precision(d / s, kind);
        const double r = std::nearbyint(q);
        if (r == 128.0) ++res.count_pos;
        else if (r == -128.0) ++res.count_neg;
    }
    res.ratio = static_cast<double>(res.count_pos + res.count_neg) /
                static_cast<double>(res.total);
    return res;
}

} // namespace fmtlab
