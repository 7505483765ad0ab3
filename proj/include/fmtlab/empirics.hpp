// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "fmtlab/formats.hpp"
#include "fmtlab/quant.hpp"
#include "fmtlab/tensor.hpp"

namespace fmtlab {

// -10*log10(|X - Xq|^2 / |X|^2). +inf when the error is exactly zero;
// all-zero original is a data error.
double measure_qsnr(std::span<const double> original, std::span<const double> quantized);
double measure_qsnr(const Tensor& original, const Tensor& quantized);

enum class PrecisionKind { bf16, fp16, fp32 };
PrecisionKind precision_from_string(const std::string& s);
const char* to_string(PrecisionKind k);

// Round-to-nearest-even onto the target format's grid, with subnormals and
// overflow to infinity. Idempotent.
double emulate_precision(double x, PrecisionKind kind);

/// Boxplot summary of per-tensor mean crest factors. block_size -1 denotes
/// one block per axis run (per-channel).
struct CrestStats {
    int block_size = 0;
    double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
};

// Per-block kappa = max|x| / RMS(x) along `axis`; zero-RMS blocks report 1.
std::vector<double> block_crest_factors(const Tensor& t, int axis, int block_size,
                                        const std::optional<RotationSpec>& rotation = {});
double mean_block_crest(const Tensor& t, int axis, int block_size,
                        const std::optional<RotationSpec>& rotation = {});
// Boxplot stats (linear-interpolation quartiles) over per-tensor means.
CrestStats crest_stats(std::vector<double> per_tensor_means, int block_size);

/// Deterministic Gaussian corpus: tensor i uses seed derive_seed(seed, i).
struct CorpusSpec {
    std::int64_t tensor_count = 512;
    std::int64_t rows = 64;
    std::int64_t cols = 4096;
    std::uint64_t seed = 0;
};

struct McSample {
    double kappa = 0;    // mean block crest factor of the (rotated) tensor
    double qsnr_a = 0;   // first format of the pair
    double qsnr_b = 0;
};

struct McReport {
    std::vector<McSample> samples;
    double mean_qsnr_a = 0, mean_qsnr_b = 0;
    double win_rate_a = 0, win_rate_b = 0, tie_rate = 0;
};

McReport mc_qsnr_scatter(const FormatSpec& fmt_a, const FormatSpec& fmt_b,
                         const CorpusSpec& corpus,
                         const std::optional<RotationSpec>& rotation = {},
                         int threads = 1);

/// Ratio of elements whose normalized magnitude rounds to 2^(b-1) = 128 in
/// the emulated precision (the low-precision scale pathology).
struct StabilityResult {
    double ratio = 0;
    std::int64_t count_pos = 0;
    std::int64_t count_neg = 0;
    std::int64_t total = 0;
};
StabilityResult stability_experiment(std::int64_t n, PrecisionKind kind, std::uint64_t seed);

// Deterministic standard-normal sampling on top of mt19937_64 via the polar
// method. Avoids std::normal_distribution, whose algorithm is
// implementation-defined and would break seed reproducibility across
// standard libraries.
class NormalSampler {
public:
    explicit NormalSampler(std::uint64_t seed) : eng_(seed) {}
    double next();

private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);
Tensor gaussian_tensor(std::int64_t rows, std::int64_t cols, std::uint64_t seed);

} // namespace fmtlab
