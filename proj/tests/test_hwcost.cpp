// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <random>

#include "fmtlab/error.hpp"
#include "fmtlab/hwcost.hpp"

using namespace fmtlab;

namespace {

MacConfig cfg(int x, int y, int k, int psum = 24) {
    MacConfig c;
    c.exponent_bits = x;
    c.mantissa_bits = y;
    c.lanes = k;
    c.psum_bit_width = psum;
    return c;
}

std::int64_t gate(const GateCounts& counts, const std::string& block, Gate g) {
    auto it = counts.find(block);
    REQUIRE(it != counts.end());
    return it->second[static_cast<int>(g)];
}

std::int64_t block_total(const GateCounts& counts, const std::string& block) {
    std::int64_t t = 0;
    auto it = counts.find(block);
    if (it == counts.end()) return 0;
    for (auto v : it->second) t += v;
    return t;
}

} // namespace

TEST_CASE("aligner width examples") {
    CHECK(aligner_width(cfg(4, 3, 32)) == 24); // min(38, 24)
    CHECK(aligner_width(cfg(0, 7, 32)) == 16); // min(16, 24)
    CHECK(aligner_width(cfg(2, 1, 32)) == 10); // min(10, 24)
    CHECK(aligner_width(cfg(8, 23, 1, 48)) == 48);
}

TEST_CASE("multiplier unit counts match the complexity table") {
    // FP E4M3, k=32: 32*(3+1)^2 = 512 partial products (AND array)
    const auto fp = mac_gate_counts(cfg(4, 3, 32));
    CHECK(gate(fp, "multiplier", Gate::and_gate) == 512);
    // INT8, k=32: 32*8^2 = 2048
    const auto i8 = mac_gate_counts(cfg(0, 7, 32));
    CHECK(gate(i8, "multiplier", Gate::and_gate) == 2048);
}

TEST_CASE("INT configs zero every FP-only sub-block") {
    const auto counts = mac_gate_counts(cfg(0, 7, 32));
    for (const char* block :
         {"exponent_adder", "exponent_subtractor", "comparator", "aligner", "normalizer"}) {
        CHECK(block_total(counts, block) == 0);
    }
}

TEST_CASE("gate counts track the symbolic table rows") {
    std::mt19937 eng(5);
    std::uniform_int_distribution<int> yd(1, 10), kd(1, 64), xd(1, 6);
    for (int trial = 0; trial < 50; ++trial) {
        const int y = yd(eng), k = kd(eng);
        // INT rows
        const auto ic = cfg(0, y, k);
        const auto i = mac_gate_counts(ic);
        CHECK(gate(i, "multiplier", Gate::and_gate) ==
              static_cast<std::int64_t>(k) * (y + 1) * (y + 1));
        CHECK(gate(i, "adder", Gate::fa) + gate(i, "adder", Gate::ha) ==
              static_cast<std::int64_t>(k) * 2 * (y + 1));
        // FP rows
        const int x = xd(eng);
        const auto fc = cfg(x, y, k);
        const auto f = mac_gate_counts(fc);
        const int n = aligner_width(fc);
        int stages = 0;
        while ((1 << stages) < n) ++stages;
        CHECK(gate(f, "adder", Gate::fa) + gate(f, "adder", Gate::ha) ==
              static_cast<std::int64_t>(k) * n);
        CHECK(gate(f, "exponent_adder", Gate::fa) + gate(f, "exponent_adder", Gate::ha) ==
              static_cast<std::int64_t>(k) * x);
        CHECK(gate(f, "exponent_subtractor", Gate::xor_gate) ==
              static_cast<std::int64_t>(k) * x);
        CHECK(gate(f, "comparator", Gate::xor_gate) == static_cast<std::int64_t>(k) * x);
        CHECK(gate(f, "aligner", Gate::mux) == static_cast<std::int64_t>(k) * n * stages);
        CHECK(gate(f, "normalizer", Gate::mux) == static_cast<std::int64_t>(n) * stages);
        CHECK(gate(f, "normalizer", Gate::or_gate) == n);
    }
}

TEST_CASE("dequantizer models: UE8M0 adders vs E4M3 multipliers") {
    MacConfig ue = cfg(0, 7, 32);
    ue.scale_kind = ScaleKind::ue8m0;
    const auto d1 = dequant_counts(ue);
    CHECK(gate(d1, "dequantizer", Gate::fa) == 14); // 2 x (8-bit ripple: 7 FA)
    CHECK(gate(d1, "dequantizer", Gate::ha) == 2);

    MacConfig e4 = cfg(0, 3, 16);
    e4.scale_kind = ScaleKind::e4m3;
    const auto d2 = dequant_counts(e4);
    CHECK(gate(d2, "dequantizer", Gate::and_gate) == 32); // 2 x 4x4 array
    CHECK(gate(d2, "dequantizer", Gate::fa) == 2 * (8 + 3));
    CHECK(gate(d2, "dequantizer", Gate::ha) == 2 * (4 + 1));
}

TEST_CASE("acc32 block: shared, format-independent, bigger than any 8-bit adder") {
    const auto a = acc32_counts();
    const auto b = acc32_counts();
    CHECK(a.at("acc32") == b.at("acc32"));
    // per-lane share halves exactly from k=16 to k=32
    const auto cells = CellFactors::defaults();
    const auto r16 = aggregate_cost(a, cells, 16);
    const auto r32 = aggregate_cost(a, cells, 32);
    CHECK(r16.area_per_lane == doctest::Approx(2.0 * r32.area_per_lane).epsilon(1e-12));
    // strictly more FA than an 8-bit-format mantissa adder row (per lane)
    const auto i8 = mac_gate_counts(cfg(0, 7, 1));
    CHECK(gate(a, "acc32", Gate::fa) > gate(i8, "adder", Gate::fa));
}

TEST_CASE("aggregate_cost: zero, linearity, toggle rate, sharing rule") {
    const auto cells = CellFactors::defaults();
    GateCounts zero;
    zero["multiplier"] = GateVec{0, 0, 0, 0, 0, 0};
    const auto rz = aggregate_cost(zero, cells, 32);
    CHECK(rz.area_total == 0.0);
    CHECK(rz.energy_total == 0.0);

    const auto counts = mmu_counts(mac_config_for(lookup_format("MXINT8")));
    const auto base = aggregate_cost(counts, cells, 32);
    CellFactors doubled = cells;
    for (auto& g : doubled.gates) {
        g.area *= 2.0;
        g.energy *= 2.0;
    }
    const auto twice = aggregate_cost(counts, doubled, 32);
    CHECK(twice.area_total == doctest::Approx(2.0 * base.area_total).epsilon(1e-12));
    CHECK(twice.energy_total == doctest::Approx(2.0 * base.energy_total).epsilon(1e-12));

    CellFactors half_toggle = cells;
    half_toggle.toggle_rate = 0.5;
    const auto ht = aggregate_cost(counts, half_toggle, 32);
    CHECK(ht.energy_total == doctest::Approx(0.5 * base.energy_total).epsilon(1e-12));
    CHECK(ht.area_total == base.area_total);

    // non-shared blocks: per-lane x k recovers the total exactly
    GateCounts non_shared;
    for (const auto& [name, v] : counts) {
        if (!is_shared_block(name)) non_shared[name] = v;
    }
    const auto ns = aggregate_cost(non_shared, cells, 32);
    CHECK(ns.area_per_lane * 32 == doctest::Approx(ns.area_total).epsilon(1e-12));

    // breakdown sums to the totals
    double sum = 0.0;
    for (const auto& [name, ae] : base.breakdown) sum += ae.first;
    CHECK(sum == doctest::Approx(base.area_total).epsilon(1e-12));
}

TEST_CASE("counts are monotone in x, y, k and the psum cap") {
    auto leq = [](const GateCounts& a, const GateCounts& b) {
        for (const auto& [name, v] : a) {
            const auto it = b.find(name);
            for (int g = 0; g < kGateCount; ++g) {
                const std::int64_t bv = it == b.end() ? 0 : it->second[g];
                if (v[g] > bv) return false;
            }
        }
        return true;
    };
    CHECK(leq(mac_gate_counts(cfg(2, 1, 16)), mac_gate_counts(cfg(2, 1, 32))));
    CHECK(leq(mac_gate_counts(cfg(2, 1, 16)), mac_gate_counts(cfg(2, 3, 16))));
    CHECK(leq(mac_gate_counts(cfg(2, 1, 16)), mac_gate_counts(cfg(4, 1, 16))));
    CHECK(leq(mac_gate_counts(cfg(4, 3, 16, 16)), mac_gate_counts(cfg(4, 3, 16, 24))));
    CHECK(leq(mac_gate_counts(cfg(0, 3, 16)), mac_gate_counts(cfg(0, 7, 16))));
}

TEST_CASE("default factors order INT below FP at matched width") {
    const auto cells = CellFactors::defaults();
    const auto mxint8 = aggregate_cost(mmu_counts(mac_config_for(lookup_format("MXINT8"))),
                                       cells, 32);
    const auto mxfp8 = aggregate_cost(mmu_counts(mac_config_for(lookup_format("MXFP8"))),
                                      cells, 32);
    CHECK(mxint8.energy_total < mxfp8.energy_total);
    CHECK(mxint8.area_total < mxfp8.area_total);

    const auto nvint4 = aggregate_cost(mmu_counts(mac_config_for(lookup_format("NVINT4"))),
                                       cells, 16);
    const auto nvfp4 = aggregate_cost(mmu_counts(mac_config_for(lookup_format("NVFP4"))),
                                      cells, 16);
    CHECK(nvint4.energy_total < nvfp4.energy_total);
    CHECK(nvint4.area_total < nvfp4.area_total);
}

TEST_CASE("mixed schemes: composition identities") {
    const auto cells = CellFactors::defaults();
    const auto reuse2 = mixed_format_cost(ReuseScheme::int_reuse_2, cells);
    REQUIRE(reuse2.unit_breakdown.count("int8_uint4_mac_unit") == 1);
    // area is exactly two of the reconfigurable units
    const auto& [area, energy] = reuse2.unit_breakdown.at("int8_uint4_mac_unit");
    CHECK(reuse2.area_total == doctest::Approx(area).epsilon(1e-12));
    CHECK(reuse2.energy_mode_8bit == doctest::Approx(energy).epsilon(1e-12));
    CHECK(reuse2.energy_mode_4bit == reuse2.energy_mode_8bit);

    const auto fp_reuse = mixed_format_cost(ReuseScheme::fp_reuse, cells);
    REQUIRE(fp_reuse.unit_breakdown.count("e4m3_mac_unit") == 1);
    REQUIRE(fp_reuse.unit_breakdown.count("e2m1_mac_unit") == 1);
    CHECK(fp_reuse.area_total ==
          doctest::Approx(fp_reuse.unit_breakdown.at("e4m3_mac_unit").first +
                          fp_reuse.unit_breakdown.at("e2m1_mac_unit").first));
    // 4-bit mode runs the fp8 lane as an fp4 path on top of the fp4 unit
    CHECK(fp_reuse.energy_mode_4bit > fp_reuse.energy_mode_8bit);

    CHECK_THROWS_AS(reuse_scheme_from_string("turbo"), ConfigError);
}

TEST_CASE("reuse never costs more area than no-reuse (randomized factors)") {
    std::mt19937 eng(17);
    // subset schemes hold for any positive factors
    std::uniform_real_distribution<double> wild(0.01, 10.0);
    for (int trial = 0; trial < 200; ++trial) {
        CellFactors cells;
        for (auto& g : cells.gates) {
            g.area = wild(eng);
            g.energy = wild(eng);
        }
        cells.toggle_rate = 1.0;
        const auto no_int = mixed_format_cost(ReuseScheme::int_no_reuse, cells);
        const auto r1 = mixed_format_cost(ReuseScheme::int_reuse_1, cells);
        const auto no_fp = mixed_format_cost(ReuseScheme::fp_no_reuse, cells);
        const auto rf = mixed_format_cost(ReuseScheme::fp_reuse, cells);
        CHECK(no_int.area_total >= r1.area_total);
        CHECK(no_fp.area_total >= rf.area_total);
    }
    // the reconfigurable scheme trades MUXes for area; dominance holds in a
    // library-uncertainty neighborhood of the defaults
    std::uniform_real_distribution<double> nearby(0.8, 1.25);
    const auto defaults = CellFactors::defaults();
    for (int trial = 0; trial < 200; ++trial) {
        CellFactors cells = defaults;
        for (auto& g : cells.gates) {
            g.area *= nearby(eng);
            g.energy *= nearby(eng);
        }
        const auto no_int = mixed_format_cost(ReuseScheme::int_no_reuse, cells);
        const auto r2 = mixed_format_cost(ReuseScheme::int_reuse_2, cells);
        CHECK(no_int.area_total >= r2.area_total);
    }
}

TEST_CASE("mac_config_for maps formats to datapath shapes") {
    const auto i8 = mac_config_for(lookup_format("MXINT8"));
    CHECK(i8.exponent_bits == 0);
    CHECK(i8.mantissa_bits == 7);
    CHECK(i8.lanes == 32);
    CHECK(i8.scale_kind == ScaleKind::ue8m0);
    const auto nv = mac_config_for(lookup_format("NVFP4"));
    CHECK(nv.exponent_bits == 2);
    CHECK(nv.mantissa_bits == 1);
    CHECK(nv.lanes == 16);
    CHECK(nv.scale_kind == ScaleKind::e4m3);
}
