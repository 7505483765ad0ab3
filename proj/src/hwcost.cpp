// SPDX-License-Identifier: Apache-2.0
#include "fmtlab/hwcost.hpp"

#include <cmath>

#include "fmtlab/error.hpp"

namespace fmtlab {

const char* to_string(Gate g) {
    switch (g) {
        case Gate::fa: return "FA";
        case Gate::ha: return "HA";
        case Gate::xor_gate: return "XOR";
        case Gate::and_gate: return "AND";
        case Gate::or_gate: return "OR";
        case Gate::mux: return "MUX";
    }
    return "?";
}

CellFactors CellFactors::defaults() {
    // Placeholder relative units; the TSMC library the trends were published
    // with is proprietary. Overridable via cells.json.
    CellFactors c;
    c[Gate::fa] = {1.0, 1.0};
    c[Gate::ha] = {0.5, 0.5};
    c[Gate::xor_gate] = {0.5, 0.5};
    c[Gate::and_gate] = {0.25, 0.2};
    c[Gate::or_gate] = {0.25, 0.2};
    c[Gate::mux] = {0.45, 0.4};
    c.toggle_rate = 1.0;
    return c;
}

MacConfig mac_config_for(const FormatSpec& spec) {
    MacConfig cfg;
    cfg.lanes = spec.block_size; // k = 32 for MX, 16 for NV
    cfg.scale_kind =
        spec.scale_mode == ScaleMode::e4m3_two_level ? ScaleKind::e4m3 : ScaleKind::ue8m0;
    if (spec.is_fp()) {
        cfg.exponent_bits = spec.fp().exponent_bits;
        cfg.mantissa_bits = spec.fp().mantissa_bits;
    } else {
        cfg.exponent_bits = 0;
        cfg.mantissa_bits = spec.integer().bits - 1;
    }
    return cfg;
}

int aligner_width(const MacConfig& config) {
    if (config.exponent_bits < 0 || config.mantissa_bits < 0) {
        throw ConfigError("aligner_width: negative field width");
    }
    const int raw = (1 << (config.exponent_bits + 1)) + 2 * config.mantissa_bits;
    return std::min(raw, config.psum_bit_width);
}

namespace {

GateVec zero() { return GateVec{0, 0, 0, 0, 0, 0}; }

void add_gate(GateVec& v, Gate g, std::int64_t n) { v[static_cast<int>(g)] += n; }

// m x m array multiplier: m^2 AND, m(m-2) FA, m HA.
GateVec square_multiplier(int m) {
    GateVec v = zero();
    add_gate(v, Gate::and_gate, static_cast<std::int64_t>(m) * m);
    if (m >= 2) {
        add_gate(v, Gate::fa, static_cast<std::int64_t>(m) * (m - 2));
        add_gate(v, Gate::ha, m);
    }
    return v;
}

// a x b array multiplier (a >= b not required): ab AND, ab - 2*max FA, max HA.
GateVec rect_multiplier(int a, int b) {
    GateVec v = zero();
    add_gate(v, Gate::and_gate, static_cast<std::int64_t>(a) * b);
    if (a >= 2 && b >= 2) {
        add_gate(v, Gate::fa, std::max<std::int64_t>(0, static_cast<std::int64_t>(a) * b -
                                                            2 * std::max(a, b)));
        add_gate(v, Gate::ha, std::max(a, b));
    }
    return v;
}

// w-bit ripple adder: (w-1) FA + 1 HA.
GateVec ripple_adder(int w) {
    GateVec v = zero();
    if (w >= 1) {
        add_gate(v, Gate::fa, w - 1);
        add_gate(v, Gate::ha, 1);
    }
    return v;
}

GateVec comparator(int x) {
    GateVec v = zero();
    add_gate(v, Gate::xor_gate, x);
    add_gate(v, Gate::and_gate, x);
    add_gate(v, Gate::or_gate, x);
    return v;
}

GateVec subtractor(int x) {
    GateVec v = zero();
    add_gate(v, Gate::xor_gate, x);
    add_gate(v, Gate::fa, x);
    return v;
}

int ceil_log2_int(int n) {
    int s = 0;
    while ((1 << s) < n) ++s;
    return s;
}

// n-wide barrel shifter: one MUX per bit per stage, ceil(log2 n) stages.
GateVec barrel(int n) {
    GateVec v = zero();
    if (n >= 2) add_gate(v, Gate::mux, static_cast<std::int64_t>(n) * ceil_log2_int(n));
    return v;
}

GateVec normalizer(int n) {
    GateVec v = barrel(n);
    add_gate(v, Gate::or_gate, n);
    return v;
}

GateVec scaled(GateVec v, std::int64_t k) {
    for (auto& c : v) c *= k;
    return v;
}

GateVec added(GateVec a, const GateVec& b) {
    for (int i = 0; i < kGateCount; ++i) a[i] += b[i];
    return a;
}

} // namespace

GateCounts mac_gate_counts(const MacConfig& config) {
    const int x = config.exponent_bits;
    const int y = config.mantissa_bits;
    const std::int64_t k = config.lanes;
    if (k < 1) throw ConfigError("mac_gate_counts: lanes must be >= 1");
    GateCounts counts;
    if (x == 0) {
        // INT path: exponent, align and normalize logic vanishes at x=0.
        counts["multiplier"] = scaled(square_multiplier(x + y + 1), k);
        counts["adder"] = scaled(ripple_adder(2 * (x + y + 1)), k);
        counts["exponent_adder"] = zero();
        counts["exponent_subtractor"] = zero();
        counts["comparator"] = zero();
        counts["aligner"] = zero();
        counts["normalizer"] = zero();
    } else {
        const int n = aligner_width(config);
        counts["multiplier"] = scaled(square_multiplier(y + 1), k);
        counts["exponent_adder"] = scaled(ripple_adder(x), k);
        counts["adder"] = scaled(ripple_adder(n), k);
        counts["exponent_subtractor"] = scaled(subtractor(x), k);
        counts["comparator"] = scaled(comparator(x), k);
        counts["aligner"] = scaled(barrel(n), k);
        counts["normalizer"] = normalizer(n); // one shared instance
    }
    return counts;
}

GateCounts dequant_counts(const MacConfig& config) {
    GateCounts counts;
    if (config.scale_kind == ScaleKind::ue8m0) {
        // Fused as two 8-bit integer additions.
        counts["dequantizer"] = scaled(ripple_adder(8), 2);
    } else {
        // Two FP multiplications at E4M3 scale precision.
        const GateVec fp_mul = added(square_multiplier(3 + 1), ripple_adder(4));
        counts["dequantizer"] = scaled(fp_mul, 2);
    }
    return counts;
}

GateCounts acc32_counts() {
    // FP adder sub-blocks at (x=8, y=23) with its own 48-bit psum cap.
    MacConfig acc;
    acc.exponent_bits = 8;
    acc.mantissa_bits = 23;
    acc.psum_bit_width = 48;
    const int n = aligner_width(acc);
    GateVec v = ripple_adder(n);
    v = added(v, subtractor(8));
    v = added(v, comparator(8));
    v = added(v, barrel(n));
    v = added(v, normalizer(n));
    GateCounts counts;
    counts["acc32"] = v;
    return counts;
}

GateCounts merge_counts(const GateCounts& a, const GateCounts& b) {
    GateCounts out = a;
    for (const auto& [name, v] : b) {
        auto it = out.find(name);
        if (it == out.end()) out[name] = v;
        else it->second = added(it->second, v);
    }
    return out;
}

GateCounts mmu_counts(const MacConfig& config) {
    return merge_counts(merge_counts(mac_gate_counts(config), dequant_counts(config)),
                        acc32_counts());
}

bool is_shared_block(const std::string& sub_block) {
    return sub_block == "normalizer" || sub_block == "dequantizer" || sub_block == "acc32";
}

MmuCostReport aggregate_cost(const GateCounts& counts, const CellFactors& cells, int lanes) {
    if (lanes < 1) throw ConfigError("aggregate_cost: lanes must be >= 1");
    MmuCostReport rep;
    rep.lanes = lanes;
    for (const auto& [name, v] : counts) {
        double area = 0.0, energy = 0.0;
        for (int g = 0; g < kGateCount; ++g) {
            if (v[g] < 0) throw ConfigError("aggregate_cost: negative gate count");
            area += static_cast<double>(v[g]) * cells.gates[g].area;
            energy += static_cast<double>(v[g]) * cells.gates[g].energy * cells.toggle_rate;
        }
        rep.breakdown[name] = {area, energy};
        rep.area_total += area;
        rep.energy_total += energy;
    }
    rep.area_per_lane = rep.area_total / lanes;
    rep.energy_per_lane = rep.energy_total / lanes;
    return rep;
}

const char* to_string(ReuseScheme s) {
    switch (s) {
        case ReuseScheme::int_no_reuse: return "int_no_reuse";
        case ReuseScheme::int_reuse_1: return "int_reuse_1";
        case ReuseScheme::int_reuse_2: return "int_reuse_2";
        case ReuseScheme::fp_no_reuse: return "fp_no_reuse";
        case ReuseScheme::fp_reuse: return "fp_reuse";
    }
    return "?";
}

ReuseScheme reuse_scheme_from_string(const std::string& s) {
    if (s == "int_no_reuse") return ReuseScheme::int_no_reuse;
    if (s == "int_reuse_1") return ReuseScheme::int_reuse_1;
    if (s == "int_reuse_2") return ReuseScheme::int_reuse_2;
    if (s == "fp_no_reuse") return ReuseScheme::fp_no_reuse;
    if (s == "fp_reuse") return ReuseScheme::fp_reuse;
    throw ConfigError("unknown reuse scheme \"" + s +
                      "\" (int_no_reuse|int_reuse_1|int_reuse_2|fp_no_reuse|fp_reuse)");
}

namespace {

MacConfig int_config(int bits, int lanes) {
    MacConfig c;
    c.exponent_bits = 0;
    c.mantissa_bits = bits - 1;
    c.lanes = lanes;
    return c;
}

MacConfig fp_config(int x, int y, int lanes) {
    MacConfig c;
    c.exponent_bits = x;
    c.mantissa_bits = y;
    c.lanes = lanes;
    return c;
}

// Reconfigurable int8 x (u)int4 lane: 8x5 multiplier plus one MUX layer per
// product bit, then the int8-width adder.
GateCounts int8xu4_counts(int lanes) {
    GateVec mult = rect_multiplier(8, 5);
    add_gate(mult, Gate::mux, 13); // 8x5 product width
    GateCounts counts;
    counts["multiplier"] = scaled(mult, lanes);
    counts["adder"] = scaled(ripple_adder(16), lanes);
    return counts;
}

struct UnitCost {
    double area = 0.0;
    double energy = 0.0;
};

UnitCost unit_cost(const GateCounts& counts, const CellFactors& cells) {
    UnitCost u;
    for (const auto& [name, v] : counts) {
        for (int g = 0; g < kGateCount; ++g) {
            u.area += static_cast<double>(v[g]) * cells.gates[g].area;
            u.energy += static_cast<double>(v[g]) * cells.gates[g].energy * cells.toggle_rate;
        }
    }
    return u;
}

} // namespace

MixedCostReport mixed_format_cost(ReuseScheme scheme, const CellFactors& cells, int lanes) {
    const UnitCost int8 = unit_cost(mac_gate_counts(int_config(8, lanes)), cells);
    const UnitCost int4 = unit_cost(mac_gate_counts(int_config(4, lanes)), cells);
    const UnitCost e4m3 = unit_cost(mac_gate_counts(fp_config(4, 3, lanes)), cells);
    const UnitCost e2m1 = unit_cost(mac_gate_counts(fp_config(2, 1, lanes)), cells);
    const UnitCost i8x4 = unit_cost(int8xu4_counts(lanes), cells);

    MixedCostReport rep;
    rep.scheme = scheme;
    auto put = [&rep](const std::string& name, const UnitCost& u, int copies) {
        rep.unit_breakdown[name] = {u.area * copies, u.energy * copies};
        rep.area_total += u.area * copies;
    };
    switch (scheme) {
        case ReuseScheme::int_no_reuse:
            put("int8_mac_unit", int8, 1);
            put("int4_mac_unit", int4, 2);
            rep.energy_mode_8bit = int8.energy;
            rep.energy_mode_4bit = 2.0 * int4.energy;
            break;
        case ReuseScheme::int_reuse_1:
            // int8 lane doubles as an int4 path in 4-bit mode.
            put("int8_mac_unit", int8, 1);
            put("int4_mac_unit", int4, 1);
            rep.energy_mode_8bit = int8.energy;
            rep.energy_mode_4bit = int8.energy + int4.energy;
            break;
        case ReuseScheme::int_reuse_2:
            // Two int8x(u)int4 lanes reconfigure into one int8 or two int4 lanes.
            put("int8_uint4_mac_unit", i8x4, 2);
            rep.energy_mode_8bit = 2.0 * i8x4.energy;
            rep.energy_mode_4bit = 2.0 * i8x4.energy;
            break;
        case ReuseScheme::fp_no_reuse:
            put("e4m3_mac_unit", e4m3, 1);
            put("e2m1_mac_unit", e2m1, 2);
            rep.energy_mode_8bit = e4m3.energy;
            rep.energy_mode_4bit = 2.0 * e2m1.energy;
            break;
        case ReuseScheme::fp_reuse:
            // e4m3 lane doubles as an e2m1 path in 4-bit mode.
            put("e4m3_mac_unit", e4m3, 1);
            put("e2m1_mac_unit", e2m1, 1);
            rep.energy_mode_8bit = e4m3.energy;
            rep.energy_mode_4bit = e4m3.energy + e2m1.energy;
            break;
    }
    rep.energy_total = rep.energy_mode_8bit + rep.energy_mode_4bit;
    return rep;
}

} // namespace fmtlab
