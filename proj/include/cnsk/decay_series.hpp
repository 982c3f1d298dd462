#pragma once
// Time series of a norm and its log-log power-law fit.

#include <cmath>
#include <cstddef>
#include <sstream>
#include <string>
#include <vector>

#include "cnsk/numerics.hpp"

namespace cnsk {

struct FitResult {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    std::size_t samples = 0;
};

struct DecaySeries {
    std::string quantity;
    std::vector<double> times;
    std::vector<double> values;
    double fit_t0 = 0.0;
    double fit_t1 = 0.0;
    FitResult fit;

    void push(double t, double v) {
        if (!times.empty() && !(t > times.back())) throw ParameterError("DecaySeries times must increase");
        times.push_back(t);
        values.push_back(v);
    }
};

/// Least-squares slope of log(value) against log(1 + t) over samples with
/// t in [t0, t1]. Needs at least 8 samples, all positive.
inline FitResult fit_power_law(const std::vector<double>& times, const std::vector<double>& values, double t0,
                               double t1) {
    std::vector<double> X, Y;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (times[i] < t0 || times[i] > t1) continue;
        if (!(values[i] > 0.0)) {
            std::ostringstream msg;
            msg << "fit_exponent: nonpositive value " << values[i] << " at t = " << times[i];
            throw ParameterError(msg.str());
        }
        X.push_back(std::log1p(times[i]));
        Y.push_back(std::log(values[i]));
    }
    if (X.size() < 8) throw ParameterError("fit_exponent: fewer than 8 samples in the fit window");
    const double n = static_cast<double>(X.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < X.size(); ++i) {
        mx += X[i];
        my += Y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < X.size(); ++i) {
        sxx += (X[i] - mx) * (X[i] - mx);
        sxy += (X[i] - mx) * (Y[i] - my);
        syy += (Y[i] - my) * (Y[i] - my);
    }
    FitResult f;
    f.samples = X.size();
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r2 = syy > 0.0 ? std::min(1.0, sxy * sxy / (sxx * syy)) : 1.0;
    return f;
}

inline FitResult fit_exponent(DecaySeries& s) {
    s.fit = fit_power_law(s.times, s.values, s.fit_t0, s.fit_t1);
    return s.fit;
}

/// Least-squares line of y against x (used for log-linear tails); r2 as above.
inline FitResult fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw ParameterError("fit_line needs two equal-length series");
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    FitResult f;
    f.samples = x.size();
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r2 = syy > 0.0 ? std::min(1.0, sxy * sxy / (sxx * syy)) : 1.0;
    return f;
}

/// Geometric time ladder of `count` points on [t0, t1].
inline std::vector<double> geometric_ladder(double t0, double t1, std::size_t count) {
    std::vector<double> t(count);
    for (std::size_t i = 0; i < count; ++i)
        t[i] = t0 * std::pow(t1 / t0, count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1));
    return t;
}

}  // namespace cnsk
