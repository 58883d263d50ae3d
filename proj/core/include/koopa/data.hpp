#pragma once

#include "koopa/matrix.hpp"
#include "koopa/model.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace koopa::data {

enum class DateColumn { detect, present, absent };

struct CsvSchema {
    /// `detect` treats the first column as a date when its first data cell
    /// does not parse as a number.
    DateColumn date_column = DateColumn::detect;
    char delimiter = ',';
};

/// Time-ordered multivariate series with chronological split bounds.
/// Rows [0, train_end) train, [train_end, val_end) validate and
/// [val_end, test_end) test; rows past test_end are unused.
struct Dataset {
    std::string name;
    Matrix values; // N x C
    std::vector<std::string> column_names;
    std::vector<std::string> timestamps;          // raw date cells, when present
    std::vector<std::int64_t> timestamp_seconds; // seconds since the epoch, when every cell parsed
    std::size_t train_end = 0;
    std::size_t val_end = 0;
    std::size_t test_end = 0;
    DataScaler scaler;

    std::size_t rows() const noexcept { return values.rows(); }
    std::size_t variates() const noexcept { return values.cols(); }
    bool has_split() const noexcept { return test_end > 0; }
};

/// Reads a CSV file. A header row is required; every other cell must be a
/// finite number. Throws IoError if the file cannot be opened and
/// ParseError (with the 1-based line number) on malformed content.
Dataset load_csv(const std::string& path, const CsvSchema& schema = {});
Dataset parse_csv(std::istream& in, const std::string& name, const CsvSchema& schema = {});

/// Writes the dataset in the schema load_csv reads (values unscaled).
void write_csv(const Dataset& ds, std::ostream& out);
void save_csv(const Dataset& ds, const std::string& path);

/// Seconds since 1970-01-01 for "YYYY-MM-DD", "YYYY-MM-DD HH:MM" or
/// "YYYY-MM-DD HH:MM:SS" (UTC); nullopt otherwise.
std::optional<std::int64_t> parse_timestamp(const std::string& s);

enum class SplitPreset { ratios, etth, ettm };

struct SplitSpec {
    SplitPreset preset = SplitPreset::ratios;
    double train_ratio = 0.7;
    double val_ratio = 0.1;
};

/// Fixed ETT bounds: 12/4/4 months of hourly rows (8640/11520/14400) for
/// ETTh files and four times that for the 15-minute ETTm files.
struct PresetBounds {
    std::size_t train_end;
    std::size_t val_end;
    std::size_t test_end;
};
PresetBounds ett_bounds(SplitPreset preset);

/// Picks the preset from the file name: ETTh*, ETTm* or generic ratios.
SplitSpec split_spec_for(const std::string& dataset_name);

/// Sets split bounds. ETT presets fall back to 60/20/20 row ratios when
/// the series is shorter than the preset. Validation and test windows take
/// their lookback from the rows preceding the split, so each split needs at
/// least `horizon` rows of its own (and the training split lookback +
/// horizon). Throws ArgumentError otherwise.
void chronological_split(Dataset& ds, const SplitSpec& spec, std::size_t lookback, std::size_t horizon);

/// Fits the per-variate standardisation on the training rows only; the
/// standard deviation is floored at 1e-8.
void fit_scaler(Dataset& ds, double std_floor = 1e-8);

enum class Split { train, val, test, all };

std::string to_string(Split s);
/// Parses "train", "val", "test" or "all"; throws ConfigError otherwise.
Split parse_split(const std::string& name);

/// Row range [begin, end) from which windows of a split are cut, including
/// the borrowed lookback context.
struct RowRange {
    std::size_t begin;
    std::size_t end;
};
RowRange split_range(const Dataset& ds, Split split, std::size_t lookback);

struct WindowPair {
    Matrix lookback;          // T x C
    Matrix target;            // H x C
    std::size_t origin_index; // row of the first lookback element
};

/// Every window of the split with the given stride, on the scaled values when
/// a scaler is fitted and `scaled` is set.
std::vector<WindowPair> windows(const Dataset& ds, Split split, std::size_t lookback, std::size_t horizon,
                                std::size_t stride = 1, bool scaled = true);
/// Windows over an arbitrary row range of a matrix.
std::vector<WindowPair> windows(const Matrix& values, RowRange range, std::size_t lookback, std::size_t horizon,
                                std::size_t stride = 1);

/// Values passed through the dataset scaler (unchanged when none is fitted).
Matrix scaled_values(const Dataset& ds);

// --- synthetic data ----------------------------------------------------------

enum class SynthKind { sinusoid_mix, trend_plus_season, regime_switch_linear, var_process };

std::string to_string(SynthKind k);
/// Parses the kind name; throws ConfigError otherwise.
SynthKind parse_synth_kind(const std::string& name);

struct SynthParams {
    std::size_t rows = 2000;
    std::size_t variates = 1;
    double noise = 0.05;
    /// Periods (in rows) of the seasonal tones.
    std::vector<double> periods{24.0, 12.0};
    /// trend_plus_season: slope per row.
    double trend = 0.002;
    /// regime_switch_linear: rows per regime and number of distinct regimes.
    std::size_t regime_length = 240;
    std::size_t regimes = 2;
    /// regime_switch_linear: amplitude of the switching component relative
    /// to the seasonal one.
    double variant_scale = 0.6;
    /// var_process: spectral radius of the transition matrix.
    double spectral_radius = 0.9;
};

struct SynthResult {
    Dataset dataset;
    /// var_process: transition matrix A with x_{t+1} = A x_t + noise.
    Matrix transition;
    /// regime_switch_linear: regime index per row.
    std::vector<std::size_t> regime;
};

SynthResult synth_generate(SynthKind kind, const SynthParams& params, std::uint64_t seed);

} // namespace koopa::data
