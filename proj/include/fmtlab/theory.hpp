// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fmtlab/formats.hpp"

namespace fmtlab {

// Closed-form QSNR (dB) of b-bit symmetric INT quantization with a rounded
// power-of-two scale of overhead rho: 4.78 + 6.02 b - 20 log10(rho) - 20 log10(kappa).
double qsnr_int_ue8m0(int bits, double rho, double kappa);

// INT with a high-precision (E4M3) scale: no rho overhead, one (near)
// error-free element per block of g.
double qsnr_int_e4m3(int bits, double kappa, int g);

struct SubnormalStats {
    double w_norm = 1.0; // fraction of signal energy in the normal region
    double p_sub = 0.0;  // probability a value encodes as subnormal
};
// Standard-normal split at the scaled subnormal threshold t = rho*kappa*n_min/q_max.
SubnormalStats gaussian_subnormal_stats(double kappa, double rho, const FpLayout& layout);

struct FpNoiseTerms {
    double alpha_m = 0; // 1 / (24 * 2^(2M))
    double beta = 0;    // 2^(2(1-B-M)) / (12 * q_max^2)
    double w_norm = 1;
    double p_sub = 0;
};
FpNoiseTerms fp_noise_terms(const FpLayout& layout, double kappa, double rho);

double qsnr_fp_ue8m0(const FpLayout& layout, double rho, double kappa);
double qsnr_fp_e4m3(const FpLayout& layout, double kappa, int g);

/// Theory evaluation point; kappa above sqrt(g) needs the explicit flag
/// (block vectors cannot exceed the max/RMS bound).
struct GaussianQsnrModel {
    double kappa = 1.0;
    double rho = 1.0;
    int g = 32;
    FormatSpec format;

    double evaluate(bool allow_kappa_beyond_block_bound = false) const;
};

// Curve kappa -> QSNR(dB) for a format under its scale mode (UE8M0 modes use
// rho; E4M3 two-level uses the g-refined forms). No kappa gating: crossover
// search may evaluate beyond sqrt(g).
std::function<double(double)> theory_qsnr_curve(const FormatSpec& spec, double rho);

struct CrossoverResult {
    bool found = false;
    double kappa_star = 0.0;
    double qsnr_at_crossover_db = 0.0;
    std::pair<double, double> bracket{0.0, 0.0};
};
// Bisection for INT(k) == FP(k) to |delta| < 1e-6 dB. No sign change over the
// bracket yields found = false (not an error).
CrossoverResult crossover_kappa(const std::function<double(double)>& int_curve,
                                const std::function<double(double)>& fp_curve,
                                std::pair<double, double> bracket);

struct CurvePoint {
    double kappa = 0.0;
    std::string format;
    double qsnr_db = 0.0;
};
// Evaluates both formats of a pair over the grid; rows are CSV-ready.
std::vector<CurvePoint> qsnr_curve(const FormatSpec& fmt_a, const FormatSpec& fmt_b,
                                   const std::vector<double>& kappa_grid, double rho);

} // namespace fmtlab
