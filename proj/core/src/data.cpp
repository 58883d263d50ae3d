#include "koopa/data.hpp"

#include "koopa/error.hpp"
#include "koopa/linalg.hpp"
#include "koopa/rng.hpp"
#include "koopa/text.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace koopa::data {
namespace {

std::optional<double> parse_number(std::string_view s) {
    s = text::trim(s);
    if (!s.empty() && s.front() == '+') {
        s.remove_prefix(1);
    }
    if (s.empty()) {
        return std::nullopt;
    }
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        return std::nullopt;
    }
    return v;
}

// Days from 1970-01-01 to the given civil date (proleptic Gregorian).
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
    y -= m <= 2 ? 1 : 0;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const auto yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

std::size_t min_rows_for(std::size_t lookback, std::size_t horizon) {
    return lookback + horizon;
}

} // namespace

std::optional<std::int64_t> parse_timestamp(const std::string& raw) {
    const std::string_view s = text::trim(raw);
    int y = 0;
    unsigned mo = 0;
    unsigned d = 0;
    unsigned hh = 0;
    unsigned mm = 0;
    unsigned ss = 0;
    auto read = [&](std::size_t pos, std::size_t len, auto& out) {
        if (pos + len > s.size()) {
            return false;
        }
        const auto res = std::from_chars(s.data() + pos, s.data() + pos + len, out);
        return res.ec == std::errc{} && res.ptr == s.data() + pos + len;
    };
    if (s.size() < 10 || s[4] != '-' || s[7] != '-' || !read(0, 4, y) || !read(5, 2, mo) || !read(8, 2, d)) {
        return std::nullopt;
    }
    if (s.size() > 10) {
        if ((s[10] != ' ' && s[10] != 'T') || s.size() < 16 || s[13] != ':' || !read(11, 2, hh) ||
            !read(14, 2, mm)) {
            return std::nullopt;
        }
        if (s.size() > 16) {
            if (s.size() != 19 || s[16] != ':' || !read(17, 2, ss)) {
                return std::nullopt;
            }
        }
    }
    if (mo < 1 || mo > 12 || d < 1 || d > 31 || hh > 23 || mm > 59 || ss > 60) {
        return std::nullopt;
    }
    return days_from_civil(y, mo, d) * 86400 + hh * 3600 + mm * 60 + ss;
}

Dataset parse_csv(std::istream& in, const std::string& name, const CsvSchema& schema) {
    Dataset ds;
    ds.name = name;
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (!text::trim(line).empty()) {
            header = text::split(text::trim(line), schema.delimiter);
            break;
        }
    }
    if (header.empty()) {
        throw ParseError("CSV '" + name + "' is empty (a header row is required)", line_no == 0 ? 1 : line_no);
    }
    for (auto& h : header) {
        h = std::string(text::trim(h));
    }

    std::vector<double> values;
    std::optional<bool> has_date;
    if (schema.date_column == DateColumn::present) {
        has_date = true;
    } else if (schema.date_column == DateColumn::absent) {
        has_date = false;
    }
    std::size_t rows = 0;
    std::size_t cols = 0;
    bool all_times_parsed = true;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view trimmed = text::trim(line);
        if (trimmed.empty()) {
            continue;
        }
        const std::vector<std::string> cells = text::split(trimmed, schema.delimiter);
        if (cells.size() != header.size()) {
            throw ParseError("CSV '" + name + "': expected " + std::to_string(header.size()) + " cells, found " +
                                 std::to_string(cells.size()),
                             line_no);
        }
        if (!has_date) {
            has_date = !parse_number(cells[0]).has_value();
        }
        const std::size_t first = *has_date ? 1 : 0;
        if (cells.size() <= first) {
            throw ParseError("CSV '" + name + "': no value columns", line_no);
        }
        cols = cells.size() - first;
        if (*has_date) {
            ds.timestamps.emplace_back(text::trim(cells[0]));
            if (all_times_parsed) {
                const auto ts = parse_timestamp(ds.timestamps.back());
                if (ts) {
                    ds.timestamp_seconds.push_back(*ts);
                } else {
                    all_times_parsed = false;
                    ds.timestamp_seconds.clear();
                }
            }
        }
        for (std::size_t j = first; j < cells.size(); ++j) {
            const auto v = parse_number(cells[j]);
            if (!v || !std::isfinite(*v)) {
                throw ParseError("CSV '" + name + "': column '" + header[j] + "' holds non-numeric or missing value '" +
                                     std::string(text::trim(cells[j])) + "'",
                                 line_no);
            }
            values.push_back(*v);
        }
        ++rows;
    }
    if (rows == 0) {
        throw ParseError("CSV '" + name + "' has a header but no data rows", line_no);
    }
    const std::size_t first = *has_date ? 1 : 0;
    ds.column_names.assign(header.begin() + static_cast<std::ptrdiff_t>(first), header.end());
    ds.values = Matrix(rows, cols, std::move(values));
    return ds;
}

Dataset load_csv(const std::string& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open data file '" + path + "'");
    }
    std::string name = path;
    const auto slash = name.find_last_of("/\\");
    if (slash != std::string::npos) {
        name = name.substr(slash + 1);
    }
    return parse_csv(in, name, schema);
}

void write_csv(const Dataset& ds, std::ostream& out) {
    const bool dated = !ds.timestamps.empty();
    if (dated) {
        out << "date";
    }
    for (std::size_t j = 0; j < ds.variates(); ++j) {
        if (dated || j > 0) {
            out << ',';
        }
        out << (j < ds.column_names.size() ? ds.column_names[j] : "x" + std::to_string(j));
    }
    out << '\n';
    for (std::size_t r = 0; r < ds.rows(); ++r) {
        if (dated) {
            out << ds.timestamps[r];
        }
        for (std::size_t j = 0; j < ds.variates(); ++j) {
            if (dated || j > 0) {
                out << ',';
            }
            out << text::format_double(ds.values(r, j));
        }
        out << '\n';
    }
}

void save_csv(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write '" + path + "'");
    }
    write_csv(ds, out);
    if (!out) {
        throw IoError("failed while writing '" + path + "'");
    }
}

PresetBounds ett_bounds(SplitPreset preset) {
    constexpr std::size_t hourly_month = 30 * 24;
    const std::size_t scale = preset == SplitPreset::ettm ? 4 : 1;
    return {12 * hourly_month * scale, 16 * hourly_month * scale, 20 * hourly_month * scale};
}

SplitSpec split_spec_for(const std::string& dataset_name) {
    SplitSpec spec;
    if (dataset_name.rfind("ETTh", 0) == 0) {
        spec.preset = SplitPreset::etth;
    } else if (dataset_name.rfind("ETTm", 0) == 0) {
        spec.preset = SplitPreset::ettm;
    }
    return spec;
}

void chronological_split(Dataset& ds, const SplitSpec& spec, std::size_t lookback, std::size_t horizon) {
    const std::size_t n = ds.rows();
    std::size_t train_end = 0;
    std::size_t val_end = 0;
    std::size_t test_end = n;
    auto by_ratio = [&](double tr, double va) {
        if (!(tr > 0.0) || va < 0.0 || tr + va >= 1.0) {
            throw ArgumentError("chronological_split: ratios must satisfy train > 0, val >= 0 and train + val < 1");
        }
        // The small offset keeps products such as 0.8 * 1000 from flooring to 799.
        train_end = static_cast<std::size_t>(std::floor(tr * static_cast<double>(n) + 1e-9));
        val_end = static_cast<std::size_t>(std::floor((tr + va) * static_cast<double>(n) + 1e-9));
        test_end = n;
    };
    if (spec.preset == SplitPreset::ratios) {
        by_ratio(spec.train_ratio, spec.val_ratio);
    } else {
        const PresetBounds b = ett_bounds(spec.preset);
        if (n >= b.test_end) {
            train_end = b.train_end;
            val_end = b.val_end;
            test_end = b.test_end;
        } else {
            by_ratio(0.6, 0.2);
        }
    }
    const std::size_t need = min_rows_for(lookback, horizon);
    if (train_end < need) {
        throw ArgumentError("chronological_split: training split has " + std::to_string(train_end) +
                            " rows, at least " + std::to_string(need) + " are required");
    }
    if (val_end - train_end < horizon) {
        throw ArgumentError("chronological_split: validation split has " + std::to_string(val_end - train_end) +
                            " rows; with borrowed lookback at least " + std::to_string(need) +
                            " rows of context are required (" + std::to_string(horizon) + " own rows)");
    }
    if (test_end - val_end < horizon) {
        throw ArgumentError("chronological_split: test split has " + std::to_string(test_end - val_end) +
                            " rows; with borrowed lookback at least " + std::to_string(need) +
                            " rows of context are required (" + std::to_string(horizon) + " own rows)");
    }
    ds.train_end = train_end;
    ds.val_end = val_end;
    ds.test_end = test_end;
}

void fit_scaler(Dataset& ds, double std_floor) {
    if (!ds.has_split()) {
        throw StateError("fit_scaler: dataset has no split bounds");
    }
    const std::size_t rows = ds.train_end;
    DataScaler sc;
    sc.mean.assign(ds.variates(), 0.0);
    sc.stddev.assign(ds.variates(), 0.0);
    for (std::size_t j = 0; j < ds.variates(); ++j) {
        double mean = 0.0;
        for (std::size_t r = 0; r < rows; ++r) {
            mean += ds.values(r, j);
        }
        mean /= static_cast<double>(rows);
        double var = 0.0;
        for (std::size_t r = 0; r < rows; ++r) {
            const double e = ds.values(r, j) - mean;
            var += e * e;
        }
        sc.mean[j] = mean;
        sc.stddev[j] = std::max(std::sqrt(var / static_cast<double>(rows)), std_floor);
    }
    ds.scaler = std::move(sc);
}

std::string to_string(Split s) {
    switch (s) {
    case Split::train:
        return "train";
    case Split::val:
        return "val";
    case Split::test:
        return "test";
    case Split::all:
        return "all";
    }
    return "all";
}

Split parse_split(const std::string& name) {
    if (name == "train") {
        return Split::train;
    }
    if (name == "val") {
        return Split::val;
    }
    if (name == "test") {
        return Split::test;
    }
    if (name == "all") {
        return Split::all;
    }
    throw ConfigError("unknown split '" + name + "' (expected train, val, test or all)");
}

RowRange split_range(const Dataset& ds, Split split, std::size_t lookback) {
    if (split == Split::all) {
        return {0, ds.rows()};
    }
    if (!ds.has_split()) {
        throw StateError("split_range: dataset has no split bounds");
    }
    auto back = [&](std::size_t start) { return start >= lookback ? start - lookback : 0; };
    switch (split) {
    case Split::train:
        return {0, ds.train_end};
    case Split::val:
        return {back(ds.train_end), ds.val_end};
    case Split::test:
        return {back(ds.val_end), ds.test_end};
    case Split::all:
        break;
    }
    return {0, ds.rows()};
}

Matrix scaled_values(const Dataset& ds) {
    return ds.scaler.transform(ds.values);
}

std::vector<WindowPair> windows(const Matrix& values, RowRange range, std::size_t lookback, std::size_t horizon,
                                std::size_t stride) {
    if (stride == 0) {
        throw ArgumentError("windows: stride must be positive");
    }
    if (lookback == 0 || horizon == 0) {
        throw ArgumentError("windows: lookback and horizon must be positive");
    }
    if (range.end > values.rows() || range.begin > range.end) {
        throw ArgumentError("windows: row range outside the series");
    }
    const std::size_t span = lookback + horizon;
    const std::size_t rows = range.end - range.begin;
    if (rows < span) {
        throw ArgumentError("windows: range holds " + std::to_string(rows) + " rows, at least " +
                            std::to_string(span) + " are required");
    }
    std::vector<WindowPair> out;
    out.reserve((rows - span) / stride + 1);
    for (std::size_t o = range.begin; o + span <= range.end; o += stride) {
        out.push_back({values.slice_rows(o, o + lookback), values.slice_rows(o + lookback, o + span), o});
    }
    return out;
}

std::vector<WindowPair> windows(const Dataset& ds, Split split, std::size_t lookback, std::size_t horizon,
                                std::size_t stride, bool scaled) {
    const RowRange range = split_range(ds, split, lookback);
    return windows(scaled ? scaled_values(ds) : ds.values, range, lookback, horizon, stride);
}

// --- synthetic data ----------------------------------------------------------

std::string to_string(SynthKind k) {
    switch (k) {
    case SynthKind::sinusoid_mix:
        return "sinusoid_mix";
    case SynthKind::trend_plus_season:
        return "trend_plus_season";
    case SynthKind::regime_switch_linear:
        return "regime_switch_linear";
    case SynthKind::var_process:
        return "var_process";
    }
    return "sinusoid_mix";
}

SynthKind parse_synth_kind(const std::string& name) {
    for (SynthKind k : {SynthKind::sinusoid_mix, SynthKind::trend_plus_season, SynthKind::regime_switch_linear,
                        SynthKind::var_process}) {
        if (to_string(k) == name) {
            return k;
        }
    }
    throw ConfigError("unknown synthetic kind '" + name +
                      "' (expected sinusoid_mix, trend_plus_season, regime_switch_linear or var_process)");
}

SynthResult synth_generate(SynthKind kind, const SynthParams& p, std::uint64_t seed) {
    if (p.rows < 2 || p.variates < 1) {
        throw ArgumentError("synth_generate: need at least 2 rows and 1 variate");
    }
    if (p.noise < 0.0) {
        throw ArgumentError("synth_generate: noise must be non-negative");
    }
    for (double period : p.periods) {
        if (!(period > 0.0)) {
            throw ArgumentError("synth_generate: periods must be positive");
        }
    }
    const Rng root(seed);
    Rng phase_rng = root.split(1);
    Rng noise_rng = root.split(2);
    Rng dyn_rng = root.split(3);
    const double two_pi = 2.0 * std::numbers::pi;

    SynthResult out;
    Dataset& ds = out.dataset;
    ds.name = to_string(kind);
    ds.values = Matrix(p.rows, p.variates);
    for (std::size_t j = 0; j < p.variates; ++j) {
        ds.column_names.push_back("x" + std::to_string(j));
    }

    Matrix phases(p.periods.size(), p.variates);
    for (double& v : phases.data()) {
        v = phase_rng.uniform(0.0, two_pi);
    }
    auto season = [&](std::size_t t, std::size_t j) {
        double s = 0.0;
        for (std::size_t i = 0; i < p.periods.size(); ++i) {
            const double amp = 1.0 / static_cast<double>(i + 1);
            s += amp * std::sin(two_pi * static_cast<double>(t) / p.periods[i] + phases(i, j));
        }
        return s;
    };

    switch (kind) {
    case SynthKind::sinusoid_mix:
        if (p.periods.empty()) {
            throw ArgumentError("synth_generate: sinusoid_mix needs at least one period");
        }
        for (std::size_t t = 0; t < p.rows; ++t) {
            for (std::size_t j = 0; j < p.variates; ++j) {
                ds.values(t, j) = season(t, j) + p.noise * noise_rng.normal();
            }
        }
        break;
    case SynthKind::trend_plus_season:
        for (std::size_t t = 0; t < p.rows; ++t) {
            for (std::size_t j = 0; j < p.variates; ++j) {
                ds.values(t, j) = p.trend * static_cast<double>(t) + season(t, j) + p.noise * noise_rng.normal();
            }
        }
        break;
    case SynthKind::regime_switch_linear: {
        if (p.regimes < 1 || p.regime_length < 1) {
            throw ArgumentError("synth_generate: regime_switch_linear needs regimes >= 1 and regime_length >= 1");
        }
        // Each regime rotates a 2-d latent state at its own frequency, so the
        // latent oscillation keeps its amplitude and changes pace at every
        // regime boundary.
        constexpr double kPi = std::numbers::pi;
        std::vector<Matrix> dyn;
        for (std::size_t r = 0; r < p.regimes; ++r) {
            const double omega = dyn_rng.uniform(kPi / 24.0, kPi / 3.0);
            dyn.push_back(Matrix::from_rows({{std::cos(omega), -std::sin(omega)}, {std::sin(omega), std::cos(omega)}}));
        }
        Matrix loadings(p.variates, 2);
        for (double& v : loadings.data()) {
            v = dyn_rng.normal();
        }
        for (std::size_t j = 0; j < p.variates; ++j) {
            const double norm = std::hypot(loadings(j, 0), loadings(j, 1));
            loadings(j, 0) /= norm;
            loadings(j, 1) /= norm;
        }
        Vector z{1.0, 0.0};
        for (std::size_t t = 0; t < p.rows; ++t) {
            const std::size_t r = (t / p.regime_length) % p.regimes;
            out.regime.push_back(r);
            z = matvec(dyn[r], z);
            for (std::size_t j = 0; j < p.variates; ++j) {
                const double latent = loadings(j, 0) * z[0] + loadings(j, 1) * z[1];
                ds.values(t, j) = season(t, j) + p.variant_scale * latent + p.noise * noise_rng.normal();
            }
        }
        break;
    }
    case SynthKind::var_process: {
        if (!(p.spectral_radius > 0.0 && p.spectral_radius < 1.0)) {
            throw ArgumentError("synth_generate: var_process needs a spectral radius in (0, 1)");
        }
        const std::size_t c = p.variates;
        Matrix a(c, c);
        for (double& v : a.data()) {
            v = dyn_rng.normal();
        }
        double radius = 0.0;
        for (const auto& l : eigenvalues(a).eigenvalues) {
            radius = std::max(radius, std::abs(l));
        }
        a = scale(a, p.spectral_radius / std::max(radius, 1e-12));
        Vector x(c);
        for (double& v : x) {
            v = dyn_rng.normal();
        }
        for (std::size_t t = 0; t < p.rows; ++t) {
            for (std::size_t j = 0; j < c; ++j) {
                ds.values(t, j) = x[j];
            }
            x = matvec(a, x);
            for (double& v : x) {
                v += p.noise * noise_rng.normal();
            }
        }
        out.transition = std::move(a);
        break;
    }
    }
    return out;
}

} // namespace koopa::data
