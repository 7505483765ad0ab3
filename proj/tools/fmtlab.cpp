// SPDX-License-Identifier: Apache-2.0
// fmtlab: block-format quantization emulation, QSNR theory/measurement, and
// MAC-datapath cost estimation from one seeded, replayable CLI.
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fmtlab/empirics.hpp"
#include "fmtlab/error.hpp"
#include "fmtlab/hwcost.hpp"
#include "fmtlab/quant.hpp"
#include "fmtlab/tensor.hpp"
#include "fmtlab/theory.hpp"

using nlohmann::json;
using namespace fmtlab;

namespace {

constexpr const char* kVersion = "0.1.0";

json json_number(double v) {
    if (std::isinf(v)) return v > 0 ? json("inf") : json("-inf");
    return json(v);
}

int resolve_threads(int flag_value) {
    if (flag_value > 0) return flag_value;
    if (const char* env = std::getenv("FMTLAB_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    return 1;
}

json envelope(const json& config, const json& result, double seconds) {
    return json{{"tool", {{"name", "fmtlab"}, {"version", kVersion}}},
                {"config", config},
                {"duration_seconds", seconds},
                {"result", result}};
}

void emit(const json& config, const json& result, double seconds,
          const std::string& out_path) {
    const json env = envelope(config, result, seconds);
    if (out_path.empty()) {
        std::cout << env.dump(2) << "\n";
    } else {
        std::ofstream out(out_path, std::ios::trunc);
        if (!out) throw IoError("cannot open for writing: " + out_path);
        out << env.dump(2) << "\n";
    }
}

void write_csv(const std::string& path, const json& config,
               const std::string& header, const std::vector<std::string>& rows) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "# fmtlab " << kVersion << " config=" << config.dump() << "\n";
    out << header << "\n";
    for (const auto& r : rows) out << r << "\n";
    if (!out) throw IoError("write failed: " + path);
}

std::string csv_num(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

std::pair<std::string, std::string> parse_pair(const std::string& s) {
    const auto colon = s.find(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 >= s.size()) {
        throw ConfigError("expected a pair like MXINT8:MXFP8, got \"" + s + "\"");
    }
    return {s.substr(0, colon), s.substr(colon + 1)};
}

std::vector<std::int64_t> parse_shape(const std::string& s) {
    std::vector<std::int64_t> dims;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, 'x')) {
        const long long d = std::atoll(item.c_str());
        if (d <= 0) throw ConfigError("bad shape \"" + s + "\"");
        dims.push_back(d);
    }
    if (dims.empty()) throw ConfigError("bad shape \"" + s + "\"");
    return dims;
}

std::vector<double> parse_grid(const std::string& s) {
    double lo = 0, hi = 0, step = 0;
    if (std::sscanf(s.c_str(), "%lf:%lf:%lf", &lo, &hi, &step) != 3 || step <= 0 || hi < lo) {
        throw ConfigError("expected a grid like 1:16:0.05, got \"" + s + "\"");
    }
    std::vector<double> grid;
    for (double k = lo; k <= hi + 1e-12; k += step) grid.push_back(k);
    return grid;
}

json format_to_json(const FormatSpec& spec) {
    json j{{"name", spec.name},
           {"block_size", spec.block_size},
           {"scale_mode", to_string(spec.scale_mode)},
           {"rho_model", spec.rho_model}};
    if (spec.is_fp()) {
        const auto& fp = spec.fp();
        j["element"] = {{"kind", "fp"},
                        {"exponent_bits", fp.exponent_bits},
                        {"mantissa_bits", fp.mantissa_bits},
                        {"bias", fp.bias},
                        {"q_max", fp.q_max},
                        {"n_min", fp.n_min},
                        {"s_min", fp.s_min},
                        {"special_codes",
                         fp.special_codes == SpecialCodes::e4m3_nan ? "e4m3_nan" : "none"}};
        j["codebook_size"] = spec.codebook->values.size();
    } else {
        const auto& il = spec.integer();
        j["element"] = {{"kind", "int"},
                        {"bits", il.bits},
                        {"q_max", il.q_max},
                        {"q_min", il.q_min},
                        {"symmetric", il.symmetric}};
    }
    return j;
}

CellFactors cells_from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open cells file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("cells file parse error: " + std::string(e.what()));
    }
    CellFactors cells = CellFactors::defaults();
    static const std::pair<const char*, Gate> gate_names[] = {
        {"FA", Gate::fa},        {"HA", Gate::ha},      {"XOR", Gate::xor_gate},
        {"AND", Gate::and_gate}, {"OR", Gate::or_gate}, {"MUX", Gate::mux}};
    for (const auto& [name, gate] : gate_names) {
        if (j.contains(name)) {
            cells[gate].area = j[name].at("area").get<double>();
            cells[gate].energy = j[name].at("energy").get<double>();
        }
    }
    if (j.contains("toggle_rate")) cells.toggle_rate = j["toggle_rate"].get<double>();
    return cells;
}

json cells_to_json(const CellFactors& cells) {
    json j;
    for (int g = 0; g < kGateCount; ++g) {
        j[to_string(static_cast<Gate>(g))] = {{"area", cells.gates[g].area},
                                              {"energy", cells.gates[g].energy}};
    }
    j["toggle_rate"] = cells.toggle_rate;
    return j;
}

json mmu_report_to_json(const MmuCostReport& rep, const GateCounts& counts) {
    json breakdown;
    for (const auto& [name, ae] : rep.breakdown) {
        json gates = json::object();
        const auto& v = counts.at(name);
        for (int g = 0; g < kGateCount; ++g) {
            if (v[g] != 0) gates[to_string(static_cast<Gate>(g))] = v[g];
        }
        breakdown[name] = {{"area", ae.first},
                           {"energy", ae.second},
                           {"shared", is_shared_block(name)},
                           {"gates", gates}};
    }
    return json{{"area_total", rep.area_total},
                {"energy_total", rep.energy_total},
                {"area_per_lane", rep.area_per_lane},
                {"energy_per_lane", rep.energy_per_lane},
                {"lanes", rep.lanes},
                {"sub_blocks", breakdown}};
}

struct Command {
    json config;
    std::function<json()> run;
    std::string out_path; // empty = stdout
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"fmtlab: fine-grained block-format quantization lab"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    Command cmd;

    // ---- formats ----
    {
        auto* sub = app.add_subcommand("formats", "dump the format registry");
        auto json_flag = std::make_shared<bool>(false);
        sub->add_flag("--json", *json_flag, "machine-readable output");
        auto out = std::make_shared<std::string>();
        sub->add_option("--out", *out, "write the report here instead of stdout");
        sub->callback([&cmd, json_flag, out] {
            cmd.config = {{"subcommand", "formats"}, {"json", *json_flag}};
            cmd.out_path = *out;
            cmd.run = [json_flag]() -> json {
                json rows = json::array();
                for (const auto& name : registered_format_names()) {
                    rows.push_back(format_to_json(lookup_format(name)));
                }
                if (!*json_flag) {
                    for (const auto& r : rows) {
                        std::cout << r["name"].get<std::string>() << "  block "
                                  << r["block_size"] << "  scale "
                                  << r["scale_mode"].get<std::string>() << "\n";
                    }
                    return json(); // table only, no envelope
                }
                return json{{"formats", rows}};
            };
        });
    }

    // ---- quantize ----
    {
        auto* sub = app.add_subcommand("quantize", "block-quantize a tensor file");
        struct Args {
            std::string in, format, out, report;
            int axis = -1;
            bool rotate = false;
            std::uint64_t seed = 0;
            int rot_dim = 0;
            std::string scale_arith = "exact";
            bool dump_scales = false;
        };
        auto a = std::make_shared<Args>();
        sub->add_option("--in", a->in, "input .ftnsr tensor")->required();
        sub->add_option("--format", a->format, "format name")->required();
        sub->add_option("--axis", a->axis, "quantization axis (default -1)");
        sub->add_flag("--rotate", a->rotate, "apply a random Hadamard rotation first");
        sub->add_option("--seed", a->seed, "rotation sign seed");
        sub->add_option("--rot-dim", a->rot_dim, "rotation size (default: block size)");
        sub->add_option("--scale-arith", a->scale_arith, "exact|bf16 scale arithmetic");
        sub->add_option("--out", a->out, "dequantized output .ftnsr")->required();
        sub->add_option("--report", a->report, "write the JSON report here");
        sub->add_flag("--dump-scales", a->dump_scales, "include per-block scales in the report");
        sub->callback([&cmd, a] {
            cmd.config = {{"subcommand", "quantize"}, {"in", a->in},
                          {"format", a->format},      {"axis", a->axis},
                          {"rotate", a->rotate},      {"seed", a->seed},
                          {"rot_dim", a->rot_dim},    {"scale_arith", a->scale_arith},
                          {"out", a->out},            {"dump_scales", a->dump_scales}};
            cmd.out_path = a->report;
            cmd.run = [a] {
                const auto& spec = lookup_format(a->format);
                const Tensor t = read_tensor(a->in);
                QuantOptions opts;
                opts.keep_codes = false;
                if (a->scale_arith == "bf16") {
                    opts.scale_arith = ScaleArith::bf16;
                } else if (a->scale_arith != "exact") {
                    throw ConfigError("scale-arith must be exact or bf16");
                }
                if (a->rotate) {
                    opts.rotation =
                        RotationSpec{a->rot_dim > 0 ? a->rot_dim : spec.block_size, a->seed};
                }
                const auto res = quantize_tensor(t, spec, a->axis, opts);
                write_tensor(res.dequantized, a->out);
                json result{{"qsnr_db", json_number(res.qsnr_db)},
                            {"blocks", res.scales.size()},
                            {"block_size", spec.block_size},
                            {"scale_mode", to_string(spec.scale_mode)},
                            {"output", a->out}};
                if (spec.scale_mode == ScaleMode::e4m3_two_level && !res.scales.empty()) {
                    result["tensor_scale"] = *res.scales.front().second_level;
                }
                if (a->dump_scales) {
                    json scales = json::array();
                    for (const auto& s : res.scales) scales.push_back(s.value);
                    result["scales"] = scales;
                }
                return result;
            };
        });
    }

    // ---- linear-sim ----
    {
        auto* sub = app.add_subcommand("linear-sim",
                                       "quantize the six linear-layer sites and report QSNR");
        struct Args {
            std::string x, w, dy, format, gen;
            bool rotate = false;
            std::uint64_t seed = 0;
            std::string out;
        };
        auto a = std::make_shared<Args>();
        sub->add_option("--x", a->x, "activations .ftnsr (MxK)");
        sub->add_option("--w", a->w, "weights .ftnsr (KxN)");
        sub->add_option("--dy", a->dy, "output gradient .ftnsr (MxN)");
        sub->add_option("--gen", a->gen, "generate Gaussian operands MxKxN instead of files");
        sub->add_option("--format", a->format, "format name")->required();
        sub->add_flag("--rotate", a->rotate, "rotate all six sites");
        sub->add_option("--seed", a->seed, "generation/rotation seed");
        sub->add_option("--out", a->out, "write the report here instead of stdout");
        sub->callback([&cmd, a] {
            cmd.config = {{"subcommand", "linear-sim"}, {"x", a->x},     {"w", a->w},
                          {"dy", a->dy},                {"gen", a->gen}, {"format", a->format},
                          {"rotate", a->rotate},        {"seed", a->seed}};
            cmd.out_path = a->out;
            cmd.run = [a] {
                const auto& spec = lookup_format(a->format);
                Tensor x, w, dy;
                if (!a->gen.empty()) {
                    const auto dims = parse_shape(a->gen);
                    if (dims.size() != 3) throw ConfigError("--gen expects MxKxN");
                    x = gaussian_tensor(dims[0], dims[1], derive_seed(a->seed, 1));
                    w = gaussian_tensor(dims[1], dims[2], derive_seed(a->seed, 2));
                    dy = gaussian_tensor(dims[0], dims[2], derive_seed(a->seed, 3));
                } else {
                    if (a->x.empty() || a->w.empty() || a->dy.empty()) {
                        throw ConfigError("provide --x/--w/--dy or --gen MxKxN");
                    }
                    x = read_tensor(a->x);
                    w = read_tensor(a->w);
                    dy = read_tensor(a->dy);
                }
                LinearSimOptions opts;
                if (a->rotate) opts.rotation = RotationSpec{spec.block_size, a->seed};
                const auto rep = linear_layer_sim(x, w, dy, spec, opts);
                static const char* site_names[6] = {"X", "W", "dY", "W_T", "X_T", "dY_T"};
                json sites;
                for (int s = 0; s < 6; ++s) {
                    sites[site_names[s]] = json_number(rep.site_qsnr_db[s]);
                }
                return json{{"site_qsnr_db", sites},
                            {"y_qsnr_db", json_number(rep.y_qsnr_db)},
                            {"dx_qsnr_db", json_number(rep.dx_qsnr_db)},
                            {"dw_qsnr_db", json_number(rep.dw_qsnr_db)}};
            };
        });
    }

    // ---- qsnr-theory ----
    {
        auto* sub = app.add_subcommand("qsnr-theory", "closed-form QSNR prediction");
        struct Args {
            std::string format;
            double kappa = 0;
            double rho = 1.5;
            bool allow_extreme = false;
            std::string out;
        };
        auto a = std::make_shared<Args>();
        sub->add_option("--format", a->format)->required();
        sub->add_option("--kappa", a->kappa, "crest factor")->required();
        sub->add_option("--rho", a->rho, "UE8M0 scale overhead (default 1.5)");
        sub->add_flag("--allow-extreme-kappa", a->allow_extreme,
                      "evaluate past the sqrt(g) block bound");
        sub->add_option("--out", a->out);
        sub->callback([&cmd, a] {
            cmd.config = {{"subcommand", "qsnr-theory"},
                          {"format", a->format},
                          {"kappa", a->kappa},
                          {"rho", a->rho},
                          {"allow_extreme_kappa", a->allow_extreme}};
            cmd.out_path = a->out;
            cmd.run = [a] {
                const auto& spec = lookup_format(a->format);
                GaussianQsnrModel model;
                model.kappa = a->kappa;
                model.rho = a->rho;
                model.g = spec.block_size;
                model.format = spec;
                json result{{"qsnr_db", model.evaluate(a->allow_extreme)},
                            {"g", spec.block_size}};
                if (spec.is_fp()) {
                    const bool ue8m0 = spec.scale_mode == ScaleMode::ue8m0_round_up ||
                                       spec.scale_mode == ScaleMode::ue8m0_round_down;
                    const auto terms =
                        fp_noise_terms(spec.fp(), a->kappa, ue8m0 ? a->rho : 1.0);
                    result["terms"] = {{"alpha_m", terms.alpha_m},
                                       {"beta", terms.beta},
                                       {"w_norm", terms.w_norm},
                                       {"p_sub", terms.p_sub}};
                }
                return result;
            };
        });
    }

    // ---- qsnr-curve ----
    {
        auto* sub = app.add_subcommand("qsnr-curve", "tabulate INT/FP QSNR curves as CSV");
        struct Args {
            std::string pairs = "all";
            std::string kappa = "1:16:0.05";
            double rho = 1.5;
            std::string out;
        };
        auto a = std::make_shared<Args>();
        sub->add_option("--pairs", a->pairs, "all or A:B[,C:D...]");
        sub->add_option("--kappa", a->kappa, "grid lo:hi:step");
        sub->add_option("--rho", a->rho);
        sub->add_option("--out", a->out, "CSV path")->required();
        sub->callback([&cmd, a] {
            cmd.config = {{"subcommand", "qsnr-curve"},
                          {"pairs", a->pairs},
                          {"kappa", a->kappa},
                          {"rho", a->rho},
                          {"out", a->out}};
            cmd.run = [&cmd, a] {
                std::vector<std::pair<std::string, std::string>> pairs;
                if (a->pairs == "all") {
                    pairs = {{"MXINT8", "MXFP8"},
                             {"MXINT6", "MXFP6"},
                             {"MXINT4", "MXFP4"},
                             {"NVINT4", "NVFP4"}};
                } else {
                    std::stringstream ss(a->pairs);
                    std::string item;
                    while (std::getline(ss, item, ',')) pairs.push_back(parse_pair(item));
                }
                const auto grid = parse_grid(a->kappa);
                std::vector<std::string> rows;
                for (const auto& [fa, fb] : pairs) {
                    const auto pts =
                        qsnr_curve(lookup_format(fa), lookup_format(fb), grid, a->rho);
                    for (const auto& p : pts) {
                        rows.push_back(csv_num(p.kappa) + "," + p.format + "," +
                                       csv_num(p.qsnr_db));
                    }
                }
                write_csv(a->out, cmd.config, "kappa,format,qsnr_db", rows);
                return json{{"rows", rows.size()}, {"csv", a->out}};
            };
        });
    }

    // ---- crossover ----
    {
        auto* sub =
            app.add_subcommand("crossover", "solve for the INT/FP crossover crest factor");
        struct Args {
            std::string pair;
            double rho = 1.5;
            std::string bracket = "1.05:16";
            std::string out;
        };
        auto a = std::make_shared<Args>();
        sub->add_option("--pair", a->pair, "INT:FP format pair")->required();
        sub->add_option("--rho", a->rho);
        sub->add_option("--bracket", a->bracket, "search bracket lo:hi");
        sub->add_option("--out", a->out);
        sub->callback([&cmd, a] {
            cmd.config = {{"subcommand", "crossover"},
                          {"pair", a->pair},
                          {"rho", a->rho},
                          {"bracket", a->bracket}};
            cmd.out_path = a->out;
            cmd.run = [a] {
                const auto [fa, fb] = parse_pair(a->pair);
                double lo = 0, hi = 0;
                if (std::sscanf(a->bracket.c_str(), "%lf:%lf", &lo, &hi) != 2) {
                    throw ConfigError("bad bracket \"" + a->bracket + "\"");
                }
                const auto res =
                    crossover_kappa(theory_qsnr_curve(lookup_format(fa), a->rho),
                                    theory_qsnr_curve(lookup_format(fb), a->rho), {lo, hi});
                json result{{"found", res.found},
                            {"bracket", {res.bracket.first, res.bracket.second}}};
                if (res.found) {
                    result["kappa_star"] = res.kappa_star;
                    result["qsnr_at_crossover_db"] = res.qsnr_at_crossover_db;
                }
                return result;
            };
        });
    }

    // ---- mc-qsnr ----
    {
        auto* sub =
            app.add_subcommand("mc-qsnr", "Monte-Carlo QSNR scatter over a Gaussian corpus");
        struct Args {
            std::string pair;
            std::int64_t tensors = 512;
            std::string shape = "64x4096";
            std::uint64_t seed = 0;
            bool rotate = false;
            int rot_dim = 0;
            int threads = 0;
            std::string out;
        };
        auto a = std::make_shared<Args>();
        sub->add_option("--pair", a->pair, "format pair, e.g. MXINT8:MXFP8")->required();
        sub->add_option("--tensors", a->tensors);
        sub->add_option("--shape", a->shape, "RxC");
        sub->add_option("--seed", a->seed);
        sub->add_flag("--rotate", a->rotate);
        sub->add_option("--rot-dim", a->rot_dim, "rotation size (default: smaller block size)");
        sub->add_option("--threads", a->threads, "0 = FMTLAB_THREADS or 1");
        sub->add_option("--out", a->out, "CSV path")->required();
        sub->callback([&cmd, a] {
            const int threads = resolve_threads(a->threads);
            cmd.config = {{"subcommand", "mc-qsnr"}, {"pair", a->pair},
                          {"tensors", a->tensors},   {"shape", a->shape},
                          {"seed", a->seed},         {"rotate", a->rotate},
                          {"rot_dim", a->rot_dim},   {"threads", threads},
                          {"out", a->out}};
            cmd.run = [&cmd, a, threads] {
                const auto [fa, fb] = parse_pair(a->pair);
                const auto& fmt_a = lookup_format(fa);
                const auto& fmt_b = lookup_format(fb);
                const auto dims = parse_shape(a->shape);
                if (dims.size() != 2) throw ConfigError("--shape expects RxC");
                const CorpusSpec corpus{a->tensors, dims[0], dims[1], a->seed};
                std::optional<RotationSpec> rot;
                if (a->rotate) {
                    rot = RotationSpec{a->rot_dim > 0
                                           ? a->rot_dim
                                           : std::min(fmt_a.block_size, fmt_b.block_size),
                                       a->seed};
                }
                const auto rep = mc_qsnr_scatter(fmt_a, fmt_b, corpus, rot, threads);
                std::vector<std::string> rows;
                rows.reserve(rep.samples.size());
                for (std::size_t i = 0; i < rep.samples.size(); ++i) {
                    const auto& s = rep.samples[i];
                    rows.push_back(std::to_string(i) + "," + csv_num(s.kappa) + "," +
                                   csv_num(s.qsnr_a) + "," + csv_num(s.qsnr_b));
                }
                write_csv(a->out, cmd.config, "tensor_id,kappa,qsnr_int,qsnr_fp", rows);
                return json{{"mean_qsnr_int", json_number(rep.mean_qsnr_a)},
                            {"mean_qsnr_fp", json_number(rep.mean_qsnr_b)},
                            {"win_rate_int", rep.win_rate_a},
                            {"win_rate_fp", rep.win_rate_b},
                            {"tie_rate", rep.tie_rate},
                            {"csv", a->out}};
            };
        });
    }

    // ---- crest ----
    {
        auto* sub = app.add_subcommand("crest", "crest-factor statistics of a tensor file");
        struct Args {
            std::string in;
            int block = 32;
            int axis = -1;
            bool rotate = false;
            std::uint64_t seed = 0;
            int rot_dim = 0;
            std::string out;
        };
        auto a = std::make_shared<Args>();
        sub->add_option("--in", a->in)->required();
        sub->add_option("--block", a->block, "block size, -1 for per-channel");
        sub->add_option("--axis", a->axis);
        sub->add_flag("--rotate", a->rotate);
        sub->add_option("--seed", a->seed);
        sub->add_option("--rot-dim", a->rot_dim, "rotation size (default: block or 32)");
        sub->add_option("--out", a->out);
        sub->callback([&cmd, a] {
            cmd.config = {{"subcommand", "crest"}, {"in", a->in},
                          {"block", a->block},     {"axis", a->axis},
                          {"rotate", a->rotate},   {"seed", a->seed},
                          {"rot_dim", a->rot_dim}};
            cmd.out_path = a->out;
            cmd.run = [a] {
                const Tensor t = read_tensor(a->in);
                std::optional<RotationSpec> rot;
                if (a->rotate) {
                    rot = RotationSpec{a->rot_dim > 0 ? a->rot_dim
                                                      : (a->block > 0 ? a->block : 32),
                                       a->seed};
                }
                const auto kappas = block_crest_factors(t, a->axis, a->block, rot);
                const auto stats = crest_stats(kappas, a->block);
                double mean = 0;
                for (double k : kappas) mean += k;
                mean /= static_cast<double>(kappas.size());
                return json{{"blocks", kappas.size()},
                            {"mean_kappa", mean},
                            {"boxplot",
                             {{"min", stats.min},
                              {"q1", stats.q1},
                              {"median", stats.median},
                              {"q3", stats.q3},
                              {"max", stats.max}}}};
            };
        });
    }

    // ---- stability ----
    {
        auto* sub = app.add_subcommand("stability",
                                       "low-precision scale pathology (ratio mapped to 128)");
        struct Args {
            std::string precision = "bf16";
            std::int64_t n = 4096;
            std::uint64_t seed = 0;
            std::string out;
        };
        auto a = std::make_shared<Args>();
        sub->add_option("--precision", a->precision, "bf16|fp16|fp32");
        sub->add_option("--n", a->n, "matrix dimension");
        sub->add_option("--seed", a->seed);
        sub->add_option("--out", a->out);
        sub->callback([&cmd, a] {
            cmd.config = {{"subcommand", "stability"},
                          {"precision", a->precision},
                          {"n", a->n},
                          {"seed", a->seed}};
            cmd.out_path = a->out;
            cmd.run = [a] {
                const auto res =
                    stability_experiment(a->n, precision_from_string(a->precision), a->seed);
                return json{{"ratio", res.ratio},
                            {"percent", 100.0 * res.ratio},
                            {"count_pos_128", res.count_pos},
                            {"count_neg_128", res.count_neg},
                            {"total", res.total}};
            };
        });
    }

    // ---- hwcost ----
    {
        auto* sub = app.add_subcommand("hwcost", "gate-level MMU area/energy for a format");
        struct Args {
            std::string format, cells, out;
        };
        auto a = std::make_shared<Args>();
        sub->add_option("--format", a->format)->required();
        sub->add_option("--cells", a->cells, "cells.json with per-gate factors");
        sub->add_option("--out", a->out);
        sub->callback([&cmd, a] {
            cmd.config = {{"subcommand", "hwcost"},
                          {"format", a->format},
                          {"cells", a->cells}};
            cmd.out_path = a->out;
            cmd.run = [&cmd, a] {
                const auto cells =
                    a->cells.empty() ? CellFactors::defaults() : cells_from_file(a->cells);
                cmd.config["cell_factors"] = cells_to_json(cells);
                const auto cfg = mac_config_for(lookup_format(a->format));
                const auto counts = mmu_counts(cfg);
                const auto rep = aggregate_cost(counts, cells, cfg.lanes);
                json result = mmu_report_to_json(rep, counts);
                result["aligner_width"] = aligner_width(cfg);
                result["config"] = {{"exponent_bits", cfg.exponent_bits},
                                    {"mantissa_bits", cfg.mantissa_bits},
                                    {"lanes", cfg.lanes},
                                    {"psum_bit_width", cfg.psum_bit_width},
                                    {"scale_kind",
                                     cfg.scale_kind == ScaleKind::ue8m0 ? "ue8m0" : "e4m3"}};
                return result;
            };
        });
    }

    // ---- hwcost-mixed ----
    {
        auto* sub = app.add_subcommand("hwcost-mixed",
                                       "mixed 8-bit/4-bit MAC cost at 1:2 throughput");
        struct Args {
            std::string scheme, cells, out;
            int lanes = 32;
        };
        auto a = std::make_shared<Args>();
        sub->add_option("--scheme", a->scheme,
                        "int_no_reuse|int_reuse_1|int_reuse_2|fp_no_reuse|fp_reuse")
            ->required();
        sub->add_option("--cells", a->cells);
        sub->add_option("--lanes", a->lanes);
        sub->add_option("--out", a->out);
        sub->callback([&cmd, a] {
            cmd.config = {{"subcommand", "hwcost-mixed"},
                          {"scheme", a->scheme},
                          {"cells", a->cells},
                          {"lanes", a->lanes}};
            cmd.out_path = a->out;
            cmd.run = [&cmd, a] {
                const auto cells =
                    a->cells.empty() ? CellFactors::defaults() : cells_from_file(a->cells);
                cmd.config["cell_factors"] = cells_to_json(cells);
                const auto rep =
                    mixed_format_cost(reuse_scheme_from_string(a->scheme), cells, a->lanes);
                json units;
                for (const auto& [name, ae] : rep.unit_breakdown) {
                    units[name] = {{"area", ae.first}, {"energy", ae.second}};
                }
                return json{{"scheme", to_string(rep.scheme)},
                            {"area_total", rep.area_total},
                            {"energy_mode_8bit", rep.energy_mode_8bit},
                            {"energy_mode_4bit", rep.energy_mode_4bit},
                            {"energy_total", rep.energy_total},
                            {"units", units}};
            };
        });
    }

    // ---- gen-corpus ----
    {
        auto* sub = app.add_subcommand("gen-corpus", "write a seeded Gaussian tensor corpus");
        struct Args {
            std::int64_t tensors = 8;
            std::string shape = "64x4096";
            std::uint64_t seed = 0;
            std::string out;
        };
        auto a = std::make_shared<Args>();
        sub->add_option("--tensors", a->tensors);
        sub->add_option("--shape", a->shape);
        sub->add_option("--seed", a->seed);
        sub->add_option("--out", a->out, "output directory")->required();
        sub->callback([&cmd, a] {
            cmd.config = {{"subcommand", "gen-corpus"},
                          {"tensors", a->tensors},
                          {"shape", a->shape},
                          {"seed", a->seed},
                          {"out", a->out}};
            cmd.run = [&cmd, a] {
                const auto dims = parse_shape(a->shape);
                if (dims.size() != 2) throw ConfigError("--shape expects RxC");
                std::filesystem::create_directories(a->out);
                json files = json::array();
                for (std::int64_t i = 0; i < a->tensors; ++i) {
                    const Tensor t = gaussian_tensor(
                        dims[0], dims[1], derive_seed(a->seed, static_cast<std::uint64_t>(i)));
                    char name[32];
                    std::snprintf(name, sizeof(name), "t%05lld.ftnsr",
                                  static_cast<long long>(i));
                    const auto path = (std::filesystem::path(a->out) / name).string();
                    write_tensor(t, path);
                    files.push_back(name);
                }
                std::ofstream manifest(std::filesystem::path(a->out) / "manifest.json");
                manifest << envelope(cmd.config, json{{"files", files}}, 0.0).dump(2) << "\n";
                return json{{"files", files}, {"dir", a->out}};
            };
        });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2; // bad usage = config error
    }

    const auto t0 = std::chrono::steady_clock::now();
    try {
        const json result = cmd.run();
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (!result.is_null()) emit(cmd.config, result, secs, cmd.out_path);
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 1;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 1;
    }
}
