// SPDX-License-Identifier: Apache-2.0
#include "fmtlab/formats.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <sstream>

#include "fmtlab/error.hpp"

namespace fmtlab {

FpLayout FpLayout::make(int exponent_bits, int mantissa_bits, int bias,
                        SpecialCodes special) {
    if (exponent_bits < 1) {
        throw ConfigError("FpLayout: exponent_bits must be >= 1 (got " +
                          std::to_string(exponent_bits) + ")");
    }
    if (mantissa_bits < 0) {
        throw ConfigError("FpLayout: mantissa_bits must be >= 0");
    }
    FpLayout l;
    l.exponent_bits = exponent_bits;
    l.mantissa_bits = mantissa_bits;
    l.bias = bias;
    l.special_codes = special;
    l.n_min = std::ldexp(1.0, 1 - bias);
    l.s_min = std::ldexp(1.0, 1 - bias - mantissa_bits);

    // Largest finite magnitude: top exponent, top mantissa code that is not
    // excluded by the special-code policy.
    const int top_exp = (1 << exponent_bits) - 1;
    const int full_mant = (1 << mantissa_bits) - 1;
    int top_mant = full_mant;
    if (special == SpecialCodes::e4m3_nan) top_mant = full_mant - 1;
    if (top_mant < 0) {
        throw ConfigError("FpLayout: special-code exclusion leaves no code at top exponent");
    }
    const double mant = 1.0 + std::ldexp(static_cast<double>(top_mant), -mantissa_bits);
    l.q_max = mant * std::ldexp(1.0, top_exp - bias);
    return l;
}

IntLayout IntLayout::make(int bits, bool symmetric) {
    if (bits < 2) {
        throw ConfigError("IntLayout: bits must be >= 2 (got " + std::to_string(bits) + ")");
    }
    IntLayout l;
    l.bits = bits;
    l.symmetric = symmetric;
    l.q_max = (std::int64_t{1} << (bits - 1)) - 1;
    l.q_min = symmetric ? -l.q_max : -(std::int64_t{1} << (bits - 1));
    return l;
}

Codebook build_codebook(const FpLayout& layout) {
    const int n_exp = 1 << layout.exponent_bits;
    const int n_mant = 1 << layout.mantissa_bits;

    // Non-negative magnitudes with their mantissa codes. Negative zero
    // collapses to the single zero entry.
    std::vector<std::pair<double, int>> pos;
    for (int e = 0; e < n_exp; ++e) {
        for (int m = 0; m < n_mant; ++m) {
            if (layout.special_codes == SpecialCodes::e4m3_nan &&
                e == n_exp - 1 && m == n_mant - 1) {
                continue;
            }
            double v;
            if (e == 0) {
                v = std::ldexp(static_cast<double>(m), 1 - layout.bias - layout.mantissa_bits);
            } else {
                v = (1.0 + std::ldexp(static_cast<double>(m), -layout.mantissa_bits)) *
                    std::ldexp(1.0, e - layout.bias);
            }
            pos.emplace_back(v, m);
        }
    }
    std::sort(pos.begin(), pos.end());

    Codebook cb;
    cb.normal_threshold = layout.n_min;
    cb.values.reserve(2 * pos.size() - 1);
    cb.mantissa_lsb.reserve(2 * pos.size() - 1);
    for (auto it = pos.rbegin(); it != pos.rend(); ++it) {
        if (it->first == 0.0) continue;
        cb.values.push_back(-it->first);
        cb.mantissa_lsb.push_back(static_cast<std::uint8_t>(it->second & 1));
    }
    for (const auto& [v, m] : pos) {
        cb.values.push_back(v);
        cb.mantissa_lsb.push_back(static_cast<std::uint8_t>(m & 1));
    }

    // Adjacent codes always differ in mantissa parity, so nearest() ties are
    // well defined.
    for (std::size_t i = 0; i + 1 < cb.values.size(); ++i) {
        if (cb.values[i] >= cb.values[i + 1]) {
            throw ConfigError("build_codebook: values not strictly increasing");
        }
    }
    return cb;
}

std::size_t Codebook::nearest_index(double x) const {
    const auto begin = values.begin();
    auto it = std::lower_bound(begin, values.end(), x);
    if (it == begin) return 0;
    if (it == values.end()) return values.size() - 1;
    const std::size_t hi = static_cast<std::size_t>(it - begin);
    const std::size_t lo = hi - 1;
    const double d_lo = x - values[lo];
    const double d_hi = values[hi] - x;
    if (d_lo < d_hi) return lo;
    if (d_hi < d_lo) return hi;
    return mantissa_lsb[lo] == 0 ? lo : hi;
}

int FormatSpec::element_bits() const {
    if (is_fp()) return 1 + fp().exponent_bits + fp().mantissa_bits;
    return integer().bits;
}

FormatSpec make_format(std::string name, std::variant<IntLayout, FpLayout> element,
                       int block_size, ScaleMode mode, double rho_model) {
    if (block_size < 1) throw ConfigError("FormatSpec: block_size must be positive");
    FormatSpec spec;
    spec.name = std::move(name);
    spec.element = std::move(element);
    spec.block_size = block_size;
    spec.scale_mode = mode;
    spec.rho_model = rho_model;
    if (spec.is_fp()) {
        spec.codebook = std::make_shared<const Codebook>(build_codebook(spec.fp()));
    }
    return spec;
}

namespace {

std::map<std::string, FormatSpec>& registry() {
    static std::map<std::string, FormatSpec> reg = [] {
        std::map<std::string, FormatSpec> r;
        auto add = [&r](FormatSpec s) { r.emplace(s.name, std::move(s)); };
        const auto e4m3 = FpLayout::make(4, 3, 7, SpecialCodes::e4m3_nan);
        const auto e2m3 = FpLayout::make(2, 3, 1);
        const auto e2m1 = FpLayout::make(2, 1, 1);
        add(make_format("MXFP8", e4m3, 32, ScaleMode::ue8m0_round_up, 1.5));
        add(make_format("MXINT8", IntLayout::make(8), 32, ScaleMode::ue8m0_round_up, 1.5));
        add(make_format("MXFP6", e2m3, 32, ScaleMode::ue8m0_round_up, 1.5));
        add(make_format("MXINT6", IntLayout::make(6), 32, ScaleMode::ue8m0_round_up, 1.5));
        add(make_format("MXFP4", e2m1, 32, ScaleMode::ue8m0_round_up, 1.5));
        add(make_format("MXINT4", IntLayout::make(4), 32, ScaleMode::ue8m0_round_up, 1.5));
        add(make_format("NVFP4", e2m1, 16, ScaleMode::e4m3_two_level, 1.0));
        add(make_format("NVINT4", IntLayout::make(4), 16, ScaleMode::e4m3_two_level, 1.0));
        return r;
    }();
    return reg;
}

std::mutex& registry_mutex() {
    static std::mutex m;
    return m;
}

} // namespace

const FormatSpec& lookup_format(const std::string& name) {
    std::lock_guard<std::mutex> lock(registry_mutex());
    const auto& reg = registry();
    auto it = reg.find(name);
    if (it == reg.end()) {
        std::ostringstream msg;
        msg << "unknown format \"" << name << "\"; available:";
        for (const auto& [k, v] : reg) msg << ' ' << k;
        throw ConfigError(msg.str());
    }
    return it->second;
}

void register_format(FormatSpec spec) {
    if (spec.name.empty()) throw ConfigError("register_format: empty name");
    std::lock_guard<std::mutex> lock(registry_mutex());
    registry().insert_or_assign(spec.name, std::move(spec));
}

std::vector<std::string> registered_format_names() {
    std::lock_guard<std::mutex> lock(registry_mutex());
    std::vector<std::string> names;
    for (const auto& [k, v] : registry()) names.push_back(k);
    return names;
}

const char* to_string(ScaleMode mode) {
    switch (mode) {
        case ScaleMode::ue8m0_round_up: return "ue8m0_round_up";
        case ScaleMode::ue8m0_round_down: return "ue8m0_round_down";
        case ScaleMode::e4m3_two_level: return "e4m3_two_level";
        case ScaleMode::exact: return "exact";
    }
    return "?";
}

ScaleMode scale_mode_from_string(const std::string& s) {
    if (s == "ue8m0_round_up") return ScaleMode::ue8m0_round_up;
    if (s == "ue8m0_round_down") return ScaleMode::ue8m0_round_down;
    if (s == "e4m3_two_level") return ScaleMode::e4m3_two_level;
    if (s == "exact") return ScaleMode::exact;
    throw ConfigError("unknown scale mode \"" + s + "\"");
}

} // namespace fmtlab
