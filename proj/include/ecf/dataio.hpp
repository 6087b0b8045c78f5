#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "ecf/error.hpp"
#include "ecf/rng.hpp"
#include "ecf/tensor.hpp"

namespace ecf {

/// Shortest decimal form that parses back to the identical double.
inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view text, const std::string& where) {
    double v = 0.0;
    auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
        raise(ErrorCode::NonNumeric, where + ": cannot parse '" + std::string(text) + "' as a number");
    }
    return v;
}

/// Raw comma-separated table: one header row plus string cells. The lowest
/// layer of the CSV format; every file this toolkit emits reads back
/// through it.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

inline CsvTable read_csv_table(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorCode::ParseError, "cannot open '" + path + "'");
    CsvTable table;
    std::string line;
    std::size_t line_no = 0;
    auto split = [](const std::string& s) {
        std::vector<std::string> cells;
        std::string cell;
        std::stringstream ss(s);
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!s.empty() && s.back() == ',') cells.emplace_back();
        return cells;
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back(); // CRLF
        if (line.empty()) continue;
        auto cells = split(line);
        if (table.header.empty()) {
            table.header = std::move(cells);
            continue;
        }
        if (cells.size() != table.header.size()) {
            raise(ErrorCode::ParseError, path + ": row " + std::to_string(table.rows.size() + 1) +
                                             " has " + std::to_string(cells.size()) +
                                             " cells, header has " +
                                             std::to_string(table.header.size()));
        }
        table.rows.push_back(std::move(cells));
    }
    if (table.header.empty()) raise(ErrorCode::ParseError, path + ": file is empty");
    return table;
}

/// Influential-factor matrix plus electricity-value targets. targets may be
/// empty only for prediction inputs whose file carried no ev column.
struct Dataset {
    std::vector<std::string> factor_names;
    Matrix factors; // rows x factor count
    std::vector<double> targets;
    std::vector<std::string> month_labels;

    std::size_t rows() const { return factors.rows; }
    bool has_targets() const { return !targets.empty(); }

    void validate() const {
        if (rows() == 0) raise(ErrorCode::EmptyDataset, "dataset has no rows");
        if (factor_names.size() != factors.cols) {
            raise(ErrorCode::DimensionMismatch, "factor names do not match factor columns");
        }
        if (month_labels.size() != rows()) {
            raise(ErrorCode::DimensionMismatch, "month labels do not match rows");
        }
        if (has_targets() && targets.size() != rows()) {
            raise(ErrorCode::DimensionMismatch, "targets do not match rows");
        }
        for (double v : factors.values)
            if (!std::isfinite(v)) raise(ErrorCode::NonFinite, "non-finite factor value");
        for (double v : targets)
            if (!std::isfinite(v)) raise(ErrorCode::NonFinite, "non-finite target value");
    }
};

/// Reads the documented schema: header `month,<factors...>[,ev]`, decimal
/// point, comma separator, LF or CRLF. Row order is preserved.
inline Dataset load_csv(const std::string& path) {
    CsvTable table = read_csv_table(path);
    if (table.header.front() != "month") {
        raise(ErrorCode::MissingColumn, path + ": first column must be 'month', got '" +
                                            table.header.front() + "'");
    }
    bool has_ev = table.header.back() == "ev";
    std::size_t factor_count = table.header.size() - 1 - (has_ev ? 1 : 0);
    if (factor_count == 0) {
        raise(ErrorCode::MissingColumn, path + ": no factor columns between 'month' and 'ev'");
    }
    if (table.rows.empty()) raise(ErrorCode::ParseError, path + ": no data rows");

    Dataset d;
    d.factor_names.assign(table.header.begin() + 1, table.header.begin() + 1 + factor_count);
    d.factors = Matrix(table.rows.size(), factor_count);
    d.month_labels.reserve(table.rows.size());
    if (has_ev) d.targets.reserve(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& cells = table.rows[r];
        d.month_labels.push_back(cells[0]);
        std::string where = path + ": row " + std::to_string(r + 1);
        for (std::size_t c = 0; c < factor_count; ++c) {
            d.factors.at(r, c) =
                parse_double(cells[1 + c], where + ", column '" + d.factor_names[c] + "'");
        }
        if (has_ev) d.targets.push_back(parse_double(cells.back(), where + ", column 'ev'"));
    }
    d.validate();
    return d;
}

inline void save_csv(const Dataset& d, const std::string& path) {
    d.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(ErrorCode::ParseError, "cannot write '" + path + "'");
    out << "month";
    for (const auto& name : d.factor_names) out << ',' << name;
    if (d.has_targets()) out << ",ev";
    out << '\n';
    for (std::size_t r = 0; r < d.rows(); ++r) {
        out << d.month_labels[r];
        for (std::size_t c = 0; c < d.factors.cols; ++c) out << ',' << format_double(d.factors.at(r, c));
        if (d.has_targets()) out << ',' << format_double(d.targets[r]);
        out << '\n';
    }
}

/// Chronological split: train takes the earliest rows, test the following
/// block. Never shuffles.
struct SplitSpec {
    std::size_t train_rows = 50;
    std::size_t test_rows = 12;
};

inline std::pair<Dataset, Dataset> split(const Dataset& d, const SplitSpec& s) {
    d.validate();
    if (s.train_rows == 0 || s.test_rows == 0) {
        raise(ErrorCode::SplitTooLarge, "train and test row counts must both be >= 1");
    }
    if (s.train_rows + s.test_rows > d.rows()) {
        raise(ErrorCode::SplitTooLarge, "split needs " + std::to_string(s.train_rows + s.test_rows) +
                                            " rows, dataset has " + std::to_string(d.rows()));
    }
    auto slice = [&](std::size_t begin, std::size_t count) {
        Dataset out;
        out.factor_names = d.factor_names;
        out.factors = Matrix(count, d.factors.cols);
        for (std::size_t r = 0; r < count; ++r)
            for (std::size_t c = 0; c < d.factors.cols; ++c)
                out.factors.at(r, c) = d.factors.at(begin + r, c);
        out.month_labels.assign(d.month_labels.begin() + begin,
                                d.month_labels.begin() + begin + count);
        if (d.has_targets())
            out.targets.assign(d.targets.begin() + begin, d.targets.begin() + begin + count);
        return out;
    };
    return {slice(0, s.train_rows), slice(s.train_rows, s.test_rows)};
}

/// Per-column training means and population standard deviations, for factors
/// and the target alike.
struct StandardizationStats {
    std::vector<double> factor_mean;
    std::vector<double> factor_sd;
    double target_mean = 0.0;
    double target_sd = 1.0;
};

namespace detail {

inline std::pair<double, double> mean_and_population_sd(std::span<const double> values) {
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(values.size());
    return {mean, std::sqrt(var)};
}

constexpr double kMinSd = 1e-12;

} // namespace detail

/// Computes stats from the given (training) rows only and returns the
/// standardized copy. Constant columns are rejected.
inline std::pair<StandardizationStats, Dataset> standardize(const Dataset& train) {
    train.validate();
    if (!train.has_targets()) raise(ErrorCode::EmptyDataset, "standardize needs targets");
    StandardizationStats stats;
    Dataset out = train;
    std::vector<double> column(train.rows());
    for (std::size_t c = 0; c < train.factors.cols; ++c) {
        for (std::size_t r = 0; r < train.rows(); ++r) column[r] = train.factors.at(r, c);
        auto [mean, sd] = detail::mean_and_population_sd(column);
        if (sd < detail::kMinSd) {
            raise(ErrorCode::ConstantColumn, "factor column '" + train.factor_names[c] +
                                                 "' is constant; cannot standardize");
        }
        stats.factor_mean.push_back(mean);
        stats.factor_sd.push_back(sd);
        for (std::size_t r = 0; r < train.rows(); ++r)
            out.factors.at(r, c) = (train.factors.at(r, c) - mean) / sd;
    }
    auto [tmean, tsd] = detail::mean_and_population_sd(train.targets);
    if (tsd < detail::kMinSd) {
        raise(ErrorCode::ConstantColumn, "target column is constant; cannot standardize");
    }
    stats.target_mean = tmean;
    stats.target_sd = tsd;
    for (std::size_t r = 0; r < train.rows(); ++r)
        out.targets[r] = (train.targets[r] - tmean) / tsd;
    return {stats, out};
}

inline Matrix standardize_factors(const StandardizationStats& stats, const Matrix& factors) {
    if (factors.cols != stats.factor_mean.size()) {
        raise(ErrorCode::DimensionMismatch, "matrix has " + std::to_string(factors.cols) +
                                                " columns, stats describe " +
                                                std::to_string(stats.factor_mean.size()));
    }
    Matrix out = factors;
    for (std::size_t r = 0; r < out.rows; ++r)
        for (std::size_t c = 0; c < out.cols; ++c)
            out.at(r, c) = (out.at(r, c) - stats.factor_mean[c]) / stats.factor_sd[c];
    return out;
}

inline std::vector<double> standardize_targets(const StandardizationStats& stats,
                                               std::span<const double> targets) {
    std::vector<double> out(targets.begin(), targets.end());
    for (double& v : out) v = (v - stats.target_mean) / stats.target_sd;
    return out;
}

inline std::vector<double> destandardize_targets(const StandardizationStats& stats,
                                                 std::span<const double> standardized) {
    std::vector<double> out(standardized.begin(), standardized.end());
    for (double& v : out) v = v * stats.target_sd + stats.target_mean;
    return out;
}

// --- synthetic data ---------------------------------------------------------
//
// Stand-in for the (private) plant data. Eight seasonal operating factors:
//
//   f_k(i) = center_k + amp_k * sin(s + phase_k) + jitter_k * u_{k,i}
//
// with s = 2*pi*(i mod 12)/12 and u ~ U(-1, 1). Writing n_k = (f_k -
// center_k) / amp_k, the target is the documented nonlinear map
//
//   ev(i) = 36.5 + 1.3*mean(n1..n4) + 0.9*mean(n5..n8) + 0.45*max(n1..n4)
//           + 0.3*mean(n1..n4)*mean(n5..n8) + 0.2*sin(s - 0.8)
//           + noise_sd * g_i,           g ~ N(0, 1)
//
// so with noise_sd = 0 the target is an exact function of the factors and
// the month index, and the noise floor of any predictor is noise_sd^2.

struct SyntheticFactor {
    const char* name;
    double center;
    double amp;
    double phase;
    double jitter;
};

inline std::span<const SyntheticFactor> synthetic_factor_table() {
    static constexpr SyntheticFactor table[8] = {
        {"ore_grade_pct", 30.0, 2.0, 0.30, 0.8},
        {"crude_ore_kt", 500.0, 40.0, 1.10, 25.0},
        {"mill_fill_rate", 0.42, 0.05, 1.97, 0.02},
        {"ambient_temp_c", 9.0, 13.0, -1.20, 2.5},
        {"equipment_hours", 680.0, 30.0, 2.47, 18.0},
        {"downtime_hours", 26.0, 6.0, 2.00, 4.0},
        {"feed_hardness_bwi", 11.5, 1.4, 1.07, 0.7},
        {"recovery_rate", 0.86, 0.02, 2.40, 0.012},
    };
    return table;
}

/// The deterministic part of the synthetic target, given the factor values
/// and the month index. Exposed so tests can pin the noise-free case.
inline double synthetic_target(std::span<const double> factors, std::size_t month_index) {
    auto table = synthetic_factor_table();
    double n[8];
    for (std::size_t k = 0; k < 8; ++k) n[k] = (factors[k] - table[k].center) / table[k].amp;
    double mean_a = (n[0] + n[1] + n[2] + n[3]) / 4.0;
    double mean_b = (n[4] + n[5] + n[6] + n[7]) / 4.0;
    double max_a = std::max(std::max(n[0], n[1]), std::max(n[2], n[3]));
    double s = 2.0 * 3.14159265358979323846 * static_cast<double>(month_index % 12) / 12.0;
    return 36.5 + 1.3 * mean_a + 0.9 * mean_b + 0.45 * max_a + 0.3 * mean_a * mean_b +
           0.2 * std::sin(s - 0.8);
}

inline Dataset generate_synthetic(std::size_t months, std::uint64_t seed, double noise_sd) {
    if (months < 2) raise(ErrorCode::DegenerateInput, "need at least 2 months");
    if (noise_sd < 0.0) raise(ErrorCode::DegenerateInput, "noise_sd must be >= 0");
    auto table = synthetic_factor_table();
    Rng rng(seed);
    Dataset d;
    for (const auto& f : table) d.factor_names.emplace_back(f.name);
    d.factors = Matrix(months, table.size());
    d.targets.resize(months);
    d.month_labels.reserve(months);
    for (std::size_t i = 0; i < months; ++i) {
        unsigned year = static_cast<unsigned>(2012 + i / 12);
        unsigned month = static_cast<unsigned>(i % 12 + 1);
        char label[16];
        std::snprintf(label, sizeof(label), "%04u-%02u", year, month);
        d.month_labels.emplace_back(label);
        double s = 2.0 * 3.14159265358979323846 * static_cast<double>(i % 12) / 12.0;
        std::vector<double> row(table.size());
        for (std::size_t k = 0; k < table.size(); ++k) {
            double u = rng.uniform(-1.0, 1.0);
            row[k] = table[k].center + table[k].amp * std::sin(s + table[k].phase) +
                     table[k].jitter * u;
            d.factors.at(i, k) = row[k];
        }
        d.targets[i] = synthetic_target(row, i) + noise_sd * rng.gaussian();
    }
    return d;
}

} // namespace ecf
