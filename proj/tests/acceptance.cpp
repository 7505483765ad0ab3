// SPDX-License-Identifier: Apache-2.0
// Acceptance suite: one pass/fail line per criterion, exit 0 iff all pass.
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <string>
#include <vector>

#include "fmtlab/empirics.hpp"
#include "fmtlab/hwcost.hpp"
#include "fmtlab/quant.hpp"
#include "fmtlab/theory.hpp"

using namespace fmtlab;

namespace {

int failures = 0;

void report(int id, const char* name, bool ok, const std::string& detail, double seconds) {
    std::printf("%s  criterion %d: %s  [%s] (%.2fs)\n", ok ? "PASS" : "FAIL", id, name,
                detail.c_str(), seconds);
    std::fflush(stdout);
    if (!ok) ++failures;
}

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list args;
    va_start(args, f);
    std::vsnprintf(buf, sizeof(buf), f, args);
    va_end(args);
    return buf;
}

// ---- criterion 1: crossover reproduction ---------------------------------

void criterion_crossover() {
    Timer timer;
    const double rho = 1.5;
    struct Case {
        const char* fint;
        const char* ffp;
        double target, tol;
    };
    const Case cases[] = {
        {"MXINT8", "MXFP8", 7.55, 0.30},
        {"MXINT6", "MXFP6", 1.96, 0.15},
        {"MXINT4", "MXFP4", 2.04, 0.15},
        {"NVINT4", "NVFP4", 2.39, 0.20},
    };
    bool ok = true;
    std::string detail;
    for (const auto& c : cases) {
        const auto res = crossover_kappa(theory_qsnr_curve(lookup_format(c.fint), rho),
                                         theory_qsnr_curve(lookup_format(c.ffp), rho),
                                         {1.05, 16.0});
        const bool hit = res.found && std::fabs(res.kappa_star - c.target) <= c.tol;
        ok = ok && hit;
        detail += fmt("%s:%s k*=%.4f ", c.fint, c.ffp, res.found ? res.kappa_star : -1.0);
    }
    const double secs = timer.seconds();
    report(1, "crossover reproduction", ok && secs < 1.0, detail + fmt("runtime %.3fs", secs),
           secs);
}

// ---- criteria 2+3: FP ceiling and theory-vs-empirics on one corpus --------

void criterion_fp_ceiling_and_theory_oracle() {
    Timer timer;
    // closed-form ceiling at kappa=1, rho=1 for the M=3 element formats
    const double fp8 = qsnr_fp_ue8m0(lookup_format("MXFP8").fp(), 1.0, 1.0);
    const double fp6 = qsnr_fp_ue8m0(lookup_format("MXFP6").fp(), 1.0, 1.0);
    bool ceiling_ok = std::fabs(fp8 - 31.86) <= 0.2 && std::fabs(fp6 - 31.86) <= 0.2;

    // Monte-Carlo corpus: 512 tensors of 64x4096, fixed seed
    const CorpusSpec corpus{512, 64, 4096, 0};
    const auto& mxfp8 = lookup_format("MXFP8");
    const auto& mxint8 = lookup_format("MXINT8");

    double fp8_sum = 0.0;
    std::int64_t within = 0;
    QuantOptions qopts;
    qopts.keep_codes = false;
    for (std::int64_t i = 0; i < corpus.tensor_count; ++i) {
        const Tensor t = gaussian_tensor(corpus.rows, corpus.cols,
                                         derive_seed(corpus.seed, static_cast<std::uint64_t>(i)));
        fp8_sum += quantize_tensor(t, mxfp8, -1, qopts).qsnr_db;

        const auto ri = quantize_tensor(t, mxint8, -1, qopts);
        // realized kappa and rho over the tensor's blocks
        const std::int64_t blocks = t.size() / 32;
        double kappa_sum = 0.0, rho_sum = 0.0;
        for (std::int64_t b = 0; b < blocks; ++b) {
            double amax = 0.0, sumsq = 0.0;
            const double* p = t.data.data() + b * 32;
            for (int j = 0; j < 32; ++j) {
                amax = std::max(amax, std::fabs(p[j]));
                sumsq += p[j] * p[j];
            }
            kappa_sum += amax / std::sqrt(sumsq / 32.0);
            rho_sum += ri.scales[static_cast<std::size_t>(b)].value * 127.0 / amax;
        }
        const double kappa = kappa_sum / static_cast<double>(blocks);
        const double rho = rho_sum / static_cast<double>(blocks);
        if (std::fabs(ri.qsnr_db - qsnr_int_ue8m0(8, rho, kappa)) <= 1.5) ++within;
    }
    const double fp8_mean = fp8_sum / static_cast<double>(corpus.tensor_count);
    const bool mc_ok = fp8_mean >= 31.0 && fp8_mean <= 32.0;
    const double secs = timer.seconds();
    report(2, "FP ceiling (closed form + Monte Carlo)",
           ceiling_ok && mc_ok && secs < 60.0,
           fmt("theory M=3: %.3f/%.3f dB; MXFP8 corpus mean %.3f dB", fp8, fp6, fp8_mean),
           secs);

    const double frac = static_cast<double>(within) / static_cast<double>(corpus.tensor_count);
    report(3, "theory-vs-empirics oracle (MXINT8)", frac >= 0.95 && secs < 60.0,
           fmt("%.1f%% of tensors within 1.5 dB of the INT QSNR law", 100.0 * frac), secs);
}

// ---- criterion 4: numerical-stability experiment ---------------------------

void criterion_stability() {
    Timer timer;
    const auto bf = stability_experiment(4096, PrecisionKind::bf16, 0);
    const auto fp16 = stability_experiment(4096, PrecisionKind::fp16, 0);
    const auto fp32 = stability_experiment(4096, PrecisionKind::fp32, 0);
    const bool ok_bf = std::fabs(bf.ratio - 0.1682) <= 0.010;
    const bool ok_fp16 = fp16.ratio >= 0.0 && fp16.ratio <= 0.0004; // 0.02% +- 0.02pt
    const bool ok_fp32 = fp32.ratio == 0.0;
    const double secs = timer.seconds();
    report(4, "stability experiment (n=4096)",
           ok_bf && ok_fp16 && ok_fp32 && secs < 30.0,
           fmt("bf16 %.4f%%, fp16 %.4f%%, fp32 %.4f%%", 100 * bf.ratio, 100 * fp16.ratio,
               100 * fp32.ratio),
           secs);
}

// ---- criterion 5: symmetric clipping under bf16 scale arithmetic -----------

void criterion_symmetric_clipping() {
    Timer timer;
    const std::int64_t total = 10'000'000;
    const auto sym = make_format("ACC_INT8_SYM", IntLayout::make(8, true), 32,
                                 ScaleMode::exact, 1.0);
    const auto asym = make_format("ACC_INT8_ASYM", IntLayout::make(8, false), 32,
                                  ScaleMode::exact, 1.0);
    QuantOptions opts;
    opts.scale_arith = ScaleArith::bf16;

    std::int64_t sym_hits = 0, asym_hits = 0;
    const std::int64_t chunk_rows = 31250; // 1e6 values per chunk
    for (int c = 0; c < 10; ++c) {
        Tensor t = gaussian_tensor(chunk_rows, 32, derive_seed(1000, static_cast<std::uint64_t>(c)));
        const auto rs = quantize_tensor(t, sym, -1, opts);
        for (auto code : rs.codes) {
            if (code == -128) ++sym_hits;
        }
        const auto ra = quantize_tensor(t, asym, -1, opts);
        for (auto code : ra.codes) {
            if (code == -128) ++asym_hits;
        }
    }
    const double secs = timer.seconds();
    report(5, "symmetric clipping eliminates the -128 code",
           sym_hits == 0 && asym_hits > 0,
           fmt("%lld values scanned; symmetric hits %lld, asymmetric hits %lld",
               static_cast<long long>(total), static_cast<long long>(sym_hits),
               static_cast<long long>(asym_hits)),
           secs);
}

// ---- criterion 6: quantizer correctness vs brute force ---------------------

std::size_t brute_nearest(const Codebook& cb, double x) {
    std::size_t best = 0;
    double best_d = std::fabs(x - cb.values[0]);
    for (std::size_t i = 1; i < cb.values.size(); ++i) {
        const double d = std::fabs(x - cb.values[i]);
        if (d < best_d || (d == best_d && cb.mantissa_lsb[i] == 0 && cb.mantissa_lsb[best] != 0)) {
            best = i;
            best_d = d;
        }
    }
    return best;
}

long long brute_nearest_int(double x, long long lo, long long hi) {
    long long best = lo;
    double best_d = std::fabs(x - static_cast<double>(lo));
    for (long long c = lo + 1; c <= hi; ++c) {
        const double d = std::fabs(x - static_cast<double>(c));
        if (d < best_d || (d == best_d && c % 2 == 0 && best % 2 != 0)) {
            best = c;
            best_d = d;
        }
    }
    return best;
}

void criterion_quantizer_correctness() {
    Timer timer;
    bool ok = true;
    std::int64_t checked = 0;
    std::string bad;
    for (const char* name : {"MXFP8", "MXINT8", "MXFP6", "MXINT6", "MXFP4", "MXINT4",
                             "NVFP4", "NVINT4"}) {
        const auto& spec = lookup_format(name);
        NormalSampler s(derive_seed(77, static_cast<std::uint64_t>(checked)));
        const BlockScale unit{1.0, ScaleMode::exact, std::nullopt};
        std::vector<double> xs;
        xs.reserve(100'000);
        for (int i = 0; i < 100'000; ++i) {
            // scaled-domain values spanning clip range and subnormal region
            const double mag = std::exp2(6.0 * s.next() - 2.0);
            xs.push_back(s.next() * mag * spec.q_ref() * 0.25);
        }
        const auto out = quantize_block(xs, spec, unit);
        if (spec.is_fp()) {
            const auto& cb = *spec.codebook;
            for (std::size_t i = 0; i < xs.size(); ++i) {
                if (cb.values[static_cast<std::size_t>(out.codes[i])] !=
                    cb.values[brute_nearest(cb, xs[i])]) {
                    ok = false;
                    bad = name;
                }
            }
        } else {
            const auto& il = spec.integer();
            for (std::size_t i = 0; i < xs.size(); ++i) {
                if (out.codes[i] != brute_nearest_int(xs[i], il.q_min, il.q_max)) {
                    ok = false;
                    bad = name;
                }
            }
        }
        // idempotence on the emitted outputs (same block scale)
        const auto again = quantize_block(out.dequantized, spec, unit);
        if (again.codes != out.codes || again.dequantized != out.dequantized) {
            ok = false;
            bad = std::string(name) + " idempotence";
        }
        checked += static_cast<std::int64_t>(xs.size());
    }
    report(6, "quantizer correctness (brute-force oracle + idempotence)", ok,
           ok ? fmt("%lld codes matched across 8 formats", static_cast<long long>(checked))
              : "mismatch in " + bad,
           timer.seconds());
}

// ---- criterion 7: E4M3-scale gain ------------------------------------------

void criterion_e4m3_gain() {
    Timer timer;
    bool identity_ok = true;
    for (int g : {2, 16, 32}) {
        for (int b : {4, 6, 8}) {
            for (double k : {1.0, 2.39, 3.7}) {
                const double lhs =
                    qsnr_int_e4m3(b, k, g) - (4.78 + 6.02 * b - 20.0 * std::log10(k));
                const double rhs = 10.0 * std::log10(static_cast<double>(g) / (g - 1));
                if (std::fabs(lhs - rhs) > 1e-9) identity_ok = false;
            }
        }
    }

    // Monte Carlo, rho = 1 (exact high-precision scale): the block maximum
    // maps to the top code +-q_ref and reconstructs at the working-precision
    // floor (<= 4 ulp), fourteen orders below the quantization step
    const std::int64_t blocks = 20'000;
    const auto int4 = make_format("ACC_NVINT4_RHO1", IntLayout::make(4), 16,
                                  ScaleMode::exact, 1.0);
    const auto fp4 = make_format("ACC_NVFP4_RHO1", FpLayout::make(2, 1, 1), 16,
                                 ScaleMode::exact, 1.0);
    std::int64_t exact_hits = 0, total = 0;
    for (const FormatSpec* spec : {&int4, &fp4}) {
        Tensor t = gaussian_tensor(blocks, 16, 4242);
        const auto res = quantize_tensor(t, *spec, -1);
        for (std::int64_t b = 0; b < blocks; ++b) {
            double amax = 0.0;
            std::int64_t arg = 0;
            const double* p = t.data.data() + b * 16;
            for (int j = 0; j < 16; ++j) {
                if (std::fabs(p[j]) > amax) {
                    amax = std::fabs(p[j]);
                    arg = j;
                }
            }
            const auto idx = static_cast<std::size_t>(b * 16 + arg);
            const double code_mag =
                spec->is_fp()
                    ? std::fabs(spec->codebook->values[static_cast<std::size_t>(res.codes[idx])])
                    : std::fabs(static_cast<double>(res.codes[idx]));
            const double round_trip_err = std::fabs(res.dequantized.data[idx] - t.data[idx]);
            if (code_mag == spec->q_ref() && round_trip_err <= 4.0 * amax * 0x1p-53) {
                ++exact_hits;
            }
            ++total;
        }
    }
    const double frac = static_cast<double>(exact_hits) / static_cast<double>(total);
    report(7, "E4M3-scale gain (identity + error-free block max)",
           identity_ok && frac >= 0.999,
           fmt("identity to 1e-9 for g in {2,16,32}; block max error-free in %.3f%%",
               100 * frac),
           timer.seconds());
}

// ---- criterion 8: hardware ordering ----------------------------------------

void criterion_hardware_ordering() {
    Timer timer;
    const auto cells = CellFactors::defaults();
    auto mmu = [&](const char* name) {
        const auto cfgn = mac_config_for(lookup_format(name));
        return aggregate_cost(mmu_counts(cfgn), cells, cfgn.lanes);
    };
    const auto mxint8 = mmu("MXINT8");
    const auto mxfp8 = mmu("MXFP8");
    const auto nvint4 = mmu("NVINT4");
    const auto nvfp4 = mmu("NVFP4");
    const auto mixed_int = mixed_format_cost(ReuseScheme::int_reuse_2, cells);
    const auto mixed_fp = mixed_format_cost(ReuseScheme::fp_reuse, cells);

    const bool ok = mxint8.energy_total < mxfp8.energy_total &&
                    mxint8.area_total < mxfp8.area_total &&
                    nvint4.energy_total < nvfp4.energy_total &&
                    nvint4.area_total < nvfp4.area_total &&
                    mixed_int.area_total < mixed_fp.area_total &&
                    mixed_int.energy_total < mixed_fp.energy_total;
    const double secs = timer.seconds();
    report(8, "hardware ordering (cost directions, not ratios)", ok && secs < 1.0,
           fmt("MXINT8/MXFP8 E %.0f/%.0f A %.0f/%.0f; NVINT4/NVFP4 A %.0f/%.0f; "
               "mixed A %.0f/%.0f E %.0f/%.0f",
               mxint8.energy_total, mxfp8.energy_total, mxint8.area_total, mxfp8.area_total,
               nvint4.area_total, nvfp4.area_total, mixed_int.area_total, mixed_fp.area_total,
               mixed_int.energy_total, mixed_fp.energy_total),
           secs);
}

// ---- criterion 9: rotation properties ---------------------------------------

void criterion_rotation() {
    Timer timer;
    bool ortho_ok = true;
    for (int dim : {16, 32}) {
        const auto m = hadamard_matrix(RotationSpec{dim, 2026});
        for (int i = 0; i < dim; ++i) {
            for (int j = 0; j < dim; ++j) {
                double acc = 0.0;
                for (int k = 0; k < dim; ++k) {
                    acc += m[static_cast<std::size_t>(k * dim + i)] *
                           m[static_cast<std::size_t>(k * dim + j)];
                }
                if (std::fabs(acc - (i == j ? 1.0 : 0.0)) > 1e-6) ortho_ok = false;
            }
        }
    }

    // outlier-injected corpus: one 10x-RMS element per 32-block
    const std::int64_t blocks = 5000;
    Tensor t = gaussian_tensor(blocks, 32, 31337);
    NormalSampler pick(404);
    for (std::int64_t b = 0; b < blocks; ++b) {
        const auto j = static_cast<std::size_t>(std::fabs(pick.next() * 1000)) % 32;
        t.data[static_cast<std::size_t>(b * 32) + j] = 10.0;
    }
    const double before = mean_block_crest(t, -1, 32);
    const double after = mean_block_crest(t, -1, 32, RotationSpec{32, 7});
    report(9, "rotation properties (orthogonality + crest reduction)",
           ortho_ok && after < before,
           fmt("mean block kappa %.3f -> %.3f", before, after), timer.seconds());
}

} // namespace

int main() {
    criterion_crossover();
    criterion_fp_ceiling_and_theory_oracle();
    criterion_stability();
    criterion_symmetric_clipping();
    criterion_quantizer_correctness();
    criterion_e4m3_gain();
    criterion_hardware_ordering();
    criterion_rotation();
    if (failures == 0) {
        std::printf("all acceptance criteria passed\n");
        return 0;
    }
    std::printf("%d criterion(s) failed\n", failures);
    return 1;
}
