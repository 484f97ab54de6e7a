#ifndef TRAFFIC_ARIMA_HPP
#define TRAFFIC_ARIMA_HPP

#include <vector>

#include "traffic/errors.hpp"
#include "traffic/series.hpp"

namespace traffic {

struct ArimaOrder {
    int p = 0;
    int d = 0;
    int q = 0;

    // p + q >= 1 unless the model is a pure random walk.
    bool valid() const { return p >= 0 && q >= 0 && d >= 0 && d <= 2 &&
                                (p + q >= 1 || d >= 1); }
};

struct ArimaModel {
    ArimaOrder order;
    double c = 0.0;                  // intercept on the differenced scale
    std::vector<double> phi;         // AR coefficients, length p
    std::vector<double> theta;       // MA coefficients, length q
    double sigma2 = 0.0;
    // State needed to forecast: recent differenced observations (newest
    // last), recent residuals, and the last d original values.
    std::vector<double> recent_diff;
    std::vector<double> recent_resid;
    std::vector<double> integrate_tail;
};

// Applies the first-difference operator d times.
std::vector<double> difference(const std::vector<double>& values, int d);

// Inverse of `difference`: rebuilds the original scale from the last d
// pre-difference values (oldest first).
std::vector<double> integrate(const std::vector<double>& diffs, int d,
                              const std::vector<double>& initial);

// Conditional residual recursion with zeroed pre-sample values; residuals
// are defined for t >= p, so the result has size() - p entries.
std::vector<double> css_residuals(const ArimaOrder& order, double c,
                                  const std::vector<double>& phi,
                                  const std::vector<double>& theta,
                                  const std::vector<double>& series);

// Conditional-sum-of-squares fit; pure least squares when q = 0, damped
// Gauss-Newton otherwise. Rejects non-stationary AR estimates.
ArimaModel fit(const TrafficSeries& series, const ArimaOrder& order);

// AIC grid search over valid orders; ties broken by smallest p + q, then d.
ArimaOrder select_order(const TrafficSeries& series, int max_p = 3,
                        int max_d = 2, int max_q = 3);

// Iterates the recursion with future residuals at zero, un-differences,
// and clamps at zero.
std::vector<double> forecast(const ArimaModel& model, int horizon);

// Rebuilds the forecast state from a fresh history without refitting.
ArimaModel reanchor(const ArimaModel& model, const TrafficSeries& history);

// True when all AR characteristic roots lie outside the unit circle.
bool is_stationary(const std::vector<double>& phi);

}  // namespace traffic

#endif
