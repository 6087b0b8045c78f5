#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>

#include "ecf/error.hpp"

namespace ecf {

/// One evaluation row: the MSE / MAPE / CV-RMSE triple plus sample count and
/// wall time. Percentages are stored in percent units (1.975 means 1.975%).
struct EvalReport {
    double mse = 0.0;
    double mape_percent = 0.0;
    double cv_rmse_percent = 0.0;              // relative-error numerator variant (see cv_rmse)
    double cv_rmse_conventional_percent = 0.0; // RMSE / mean(y)
    std::size_t n = 0;
    double elapsed_seconds = 0.0;
};

namespace detail {

inline void check_pair(std::span<const double> y, std::span<const double> yhat) {
    if (y.size() != yhat.size()) {
        raise(ErrorCode::LengthMismatch, "y has " + std::to_string(y.size()) +
                                             " entries, yhat has " + std::to_string(yhat.size()));
    }
    if (y.empty()) raise(ErrorCode::Empty, "metric inputs are empty");
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (!std::isfinite(y[i]) || !std::isfinite(yhat[i])) {
            raise(ErrorCode::NonFinite, "non-finite value at index " + std::to_string(i));
        }
    }
}

} // namespace detail

/// Mean squared error, (1/N) * sum (y_i - yhat_i)^2.
inline double mse(std::span<const double> y, std::span<const double> yhat) {
    detail::check_pair(y, yhat);
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        double e = y[i] - yhat[i];
        acc += e * e;
    }
    return acc / static_cast<double>(y.size());
}

/// Mean absolute percentage error, 100 * (1/N) * sum |(y_i - yhat_i) / y_i|.
inline double mape(std::span<const double> y, std::span<const double> yhat) {
    detail::check_pair(y, yhat);
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] == 0.0) {
            raise(ErrorCode::ZeroTarget, "y[" + std::to_string(i) + "] is zero");
        }
        acc += std::abs((y[i] - yhat[i]) / y[i]);
    }
    return 100.0 * acc / static_cast<double>(y.size());
}

/// CV-RMSE with a relative-error numerator:
/// 100 * sqrt((1/N) * sum ((y_i - yhat_i)/y_i)^2) / ((1/N) * sum y_i).
/// This is deliberately not the conventional RMSE/mean form; see
/// cv_rmse_conventional for that one.
inline double cv_rmse(std::span<const double> y, std::span<const double> yhat) {
    detail::check_pair(y, yhat);
    double acc = 0.0;
    double mean = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] == 0.0) {
            raise(ErrorCode::ZeroTarget, "y[" + std::to_string(i) + "] is zero");
        }
        double r = (y[i] - yhat[i]) / y[i];
        acc += r * r;
        mean += y[i];
    }
    double n = static_cast<double>(y.size());
    mean /= n;
    if (mean == 0.0) raise(ErrorCode::ZeroMean, "mean of y is zero");
    return 100.0 * std::sqrt(acc / n) / mean;
}

/// Conventional coefficient of variation of the RMSE: 100 * RMSE / mean(y).
inline double cv_rmse_conventional(std::span<const double> y, std::span<const double> yhat) {
    double root = std::sqrt(mse(y, yhat));
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(y.size());
    if (mean == 0.0) raise(ErrorCode::ZeroMean, "mean of y is zero");
    return 100.0 * root / mean;
}

inline EvalReport evaluate(std::span<const double> y, std::span<const double> yhat,
                           double elapsed_seconds = 0.0) {
    EvalReport report;
    report.mse = mse(y, yhat);
    report.mape_percent = mape(y, yhat);
    report.cv_rmse_percent = cv_rmse(y, yhat);
    report.cv_rmse_conventional_percent = cv_rmse_conventional(y, yhat);
    report.n = y.size();
    report.elapsed_seconds = elapsed_seconds;
    return report;
}

} // namespace ecf
