// SPDX-License-Identifier: Apache-2.0
#include "fmtlab/theory.hpp"

#include <cmath>

#include "fmtlab/error.hpp"

namespace fmtlab {

namespace {

constexpr double kEnergyGuard = 1e-12; // keeps the e4m3 normal term positive

double std_normal_cdf(double t) { return 0.5 * std::erfc(-t / std::sqrt(2.0)); }

double std_normal_pdf(double t) {
    return std::exp(-0.5 * t * t) / std::sqrt(2.0 * M_PI);
}

void check_int_args(int bits, double kappa) {
    if (bits < 2) throw ConfigError("qsnr_int: bits must be >= 2");
    if (!(kappa > 0.0)) throw ConfigError("qsnr_int: kappa must be positive");
}

} // namespace

double qsnr_int_ue8m0(int bits, double rho, double kappa) {
    check_int_args(bits, kappa);
    if (!(rho >= 1.0)) throw ConfigError("qsnr_int_ue8m0: rho must be >= 1");
    return 4.78 + 6.02 * bits - 20.0 * std::log10(rho) - 20.0 * std::log10(kappa);
}

double qsnr_int_e4m3(int bits, double kappa, int g) {
    check_int_args(bits, kappa);
    if (g < 2) throw ConfigError("qsnr_int_e4m3: g must be >= 2");
    return 4.78 + 6.02 * bits - 20.0 * std::log10(kappa) +
           10.0 * std::log10(static_cast<double>(g) / (g - 1));
}

SubnormalStats gaussian_subnormal_stats(double kappa, double rho, const FpLayout& layout) {
    if (!(kappa > 0.0) || !(rho > 0.0)) {
        throw ConfigError("gaussian_subnormal_stats: kappa and rho must be positive");
    }
    const double t = rho * kappa * layout.n_min / layout.q_max;
    SubnormalStats s;
    s.p_sub = 2.0 * std_normal_cdf(t) - 1.0;
    // 1 - E[Z^2 1{|Z|<t}] with the closed form of the truncated second moment.
    s.w_norm = 1.0 - (s.p_sub - 2.0 * t * std_normal_pdf(t));
    return s;
}

FpNoiseTerms fp_noise_terms(const FpLayout& layout, double kappa, double rho) {
    FpNoiseTerms t;
    t.alpha_m = 1.0 / (24.0 * std::ldexp(1.0, 2 * layout.mantissa_bits));
    t.beta = std::ldexp(1.0, 2 * (1 - layout.bias - layout.mantissa_bits)) /
             (12.0 * layout.q_max * layout.q_max);
    const auto stats = gaussian_subnormal_stats(kappa, rho, layout);
    t.w_norm = stats.w_norm;
    t.p_sub = stats.p_sub;
    return t;
}

double qsnr_fp_ue8m0(const FpLayout& layout, double rho, double kappa) {
    const auto t = fp_noise_terms(layout, kappa, rho);
    const double rel_mse = t.alpha_m * t.w_norm + t.beta * (rho * kappa) * (rho * kappa) * t.p_sub;
    return -10.0 * std::log10(rel_mse);
}

double qsnr_fp_e4m3(const FpLayout& layout, double kappa, int g) {
    if (g < 2) throw ConfigError("qsnr_fp_e4m3: g must be >= 2");
    const auto t = fp_noise_terms(layout, kappa, 1.0);
    const double normal_energy = std::max(t.w_norm - kappa * kappa / g, kEnergyGuard);
    const double rel_mse = t.alpha_m * normal_energy + t.beta * kappa * kappa * t.p_sub;
    return -10.0 * std::log10(rel_mse);
}

double GaussianQsnrModel::evaluate(bool allow_kappa_beyond_block_bound) const {
    if (!allow_kappa_beyond_block_bound && kappa > std::sqrt(static_cast<double>(g)) * (1 + 1e-12)) {
        throw ConfigError("kappa " + std::to_string(kappa) + " exceeds sqrt(g) block bound; "
                          "pass the explicit flag to evaluate anyway");
    }
    return theory_qsnr_curve(format, rho)(kappa);
}

std::function<double(double)> theory_qsnr_curve(const FormatSpec& spec, double rho) {
    const int g = spec.block_size;
    const bool e4m3_scale = spec.scale_mode == ScaleMode::e4m3_two_level;
    if (spec.is_fp()) {
        const FpLayout layout = spec.fp();
        if (e4m3_scale) {
            return [layout, g](double k) { return qsnr_fp_e4m3(layout, k, g); };
        }
        const double r = spec.scale_mode == ScaleMode::exact ? 1.0 : rho;
        return [layout, r](double k) { return qsnr_fp_ue8m0(layout, r, k); };
    }
    const int bits = spec.integer().bits;
    if (e4m3_scale) {
        return [bits, g](double k) { return qsnr_int_e4m3(bits, k, g); };
    }
    const double r = spec.scale_mode == ScaleMode::exact ? 1.0 : rho;
    return [bits, r](double k) { return qsnr_int_ue8m0(bits, r, k); };
}

CrossoverResult crossover_kappa(const std::function<double(double)>& int_curve,
                                const std::function<double(double)>& fp_curve,
                                std::pair<double, double> bracket) {
    auto diff = [&](double k) { return int_curve(k) - fp_curve(k); };
    CrossoverResult res;
    res.bracket = bracket;
    double lo = bracket.first, hi = bracket.second;
    if (!(lo > 0.0) || !(hi > lo)) throw ConfigError("crossover_kappa: bad bracket");
    double flo = diff(lo);
    const double fhi = diff(hi);
    if (flo == 0.0) {
        res.found = true;
        res.kappa_star = lo;
        res.qsnr_at_crossover_db = int_curve(lo);
        return res;
    }
    if ((flo > 0.0) == (fhi > 0.0)) return res; // no sign change: no crossover

    double mid = lo, fmid = flo;
    for (int it = 0; it < 200; ++it) {
        mid = 0.5 * (lo + hi);
        fmid = diff(mid);
        if (std::fabs(fmid) < 1e-6) break;
        if ((fmid > 0.0) == (flo > 0.0)) {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
        }
    }
    res.found = true;
    res.kappa_star = mid;
    res.qsnr_at_crossover_db = int_curve(mid);
    return res;
}

std::vector<CurvePoint> qsnr_curve(const FormatSpec& fmt_a, const FormatSpec& fmt_b,
                                   const std::vector<double>& kappa_grid, double rho) {
    std::vector<CurvePoint> out;
    out.reserve(2 * kappa_grid.size());
    const auto curve_a = theory_qsnr_curve(fmt_a, rho);
    const auto curve_b = theory_qsnr_curve(fmt_b, rho);
    for (double k : kappa_grid) {
        out.push_back({k, fmt_a.name, curve_a(k)});
        out.push_back({k, fmt_b.name, curve_b(k)});
    }
    return out;
}

} // namespace fmtlab
