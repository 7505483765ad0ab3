// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>

#include "fmtlab/formats.hpp"

namespace fmtlab {

enum class Gate { fa = 0, ha, xor_gate, and_gate, or_gate, mux };
constexpr int kGateCount = 6;
const char* to_string(Gate g);

/// Per-gate technology factors (relative units) plus the global toggle rate.
struct CellFactors {
    struct Factor {
        double area = 0.0;
        double energy = 0.0;
    };
    std::array<Factor, kGateCount> gates{};
    double toggle_rate = 1.0;

    static CellFactors defaults();
    const Factor& operator[](Gate g) const { return gates[static_cast<int>(g)]; }
    Factor& operator[](Gate g) { return gates[static_cast<int>(g)]; }
};

enum class ScaleKind { ue8m0, e4m3 };

/// MAC array shape: x exponent bits (0 for INT), y mantissa bits
/// (x + y + 1 = nominal element width), k lanes.
struct MacConfig {
    int exponent_bits = 0;
    int mantissa_bits = 0;
    int lanes = 32;
    int psum_bit_width = 24;
    ScaleKind scale_kind = ScaleKind::ue8m0;
};
MacConfig mac_config_for(const FormatSpec& spec);

// n = min(2^(x+1) + 2y, psum_bit_width)
int aligner_width(const MacConfig& config);

using GateVec = std::array<std::int64_t, kGateCount>;
// sub-block name -> per-gate-type counts
using GateCounts = std::map<std::string, GateVec>;

GateCounts mac_gate_counts(const MacConfig& config);
GateCounts dequant_counts(const MacConfig& config); // shared across lanes
GateCounts acc32_counts();                          // shared FP32 accumulator
GateCounts merge_counts(const GateCounts& a, const GateCounts& b);
// MAC + DEQ + ACC32 for one format configuration.
GateCounts mmu_counts(const MacConfig& config);

bool is_shared_block(const std::string& sub_block);

struct MmuCostReport {
    double area_total = 0.0;
    double energy_total = 0.0;
    // sub-block -> {area, energy}
    std::map<std::string, std::pair<double, double>> breakdown;
    double area_per_lane = 0.0;   // shared blocks amortized over k
    double energy_per_lane = 0.0;
    int lanes = 0;
};
// area = sum counts*A_g; energy = sum counts*E_g*tau.
MmuCostReport aggregate_cost(const GateCounts& counts, const CellFactors& cells, int lanes);

enum class ReuseScheme { int_no_reuse, int_reuse_1, int_reuse_2, fp_no_reuse, fp_reuse };
const char* to_string(ReuseScheme s);
ReuseScheme reuse_scheme_from_string(const std::string& s);

/// Cost of a mixed 8-bit/4-bit MAC configuration at 1:2 throughput.
/// Energies are per operating mode; energy_total is the matched-throughput
/// workload sum (one 8-bit slot + one doubled-rate 4-bit slot).
struct MixedCostReport {
    ReuseScheme scheme = ReuseScheme::int_no_reuse;
    double area_total = 0.0;
    double energy_mode_8bit = 0.0;
    double energy_mode_4bit = 0.0;
    double energy_total = 0.0;
    std::map<std::string, std::pair<double, double>> unit_breakdown; // unit -> {area, energy}
};
MixedCostReport mixed_format_cost(ReuseScheme scheme, const CellFactors& cells, int lanes = 32);

} // namespace fmtlab
