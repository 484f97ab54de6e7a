#include "traffic/arima.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <string>

namespace traffic {

namespace {

// Solves A x = b (dense, square) by Gaussian elimination with partial
// pivoting. Throws SingularNormalEquations when a pivot collapses.
std::vector<double> solve_linear(std::vector<std::vector<double>> a,
                                 std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
        if (std::abs(a[pivot][col]) < 1e-12)
            throw SingularNormalEquations("normal equations singular at column " +
                                          std::to_string(col));
        std::swap(a[col], a[pivot]);
        std::swap(b[col], b[pivot]);
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a[r][col] / a[col][col];
            for (std::size_t k = col; k < n; ++k) a[r][k] -= f * a[col][k];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n, 0.0);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t k = i + 1; k < n; ++k) s -= a[i][k] * x[k];
        x[i] = s / a[i][i];
    }
    return x;
}

// Roots of a monic polynomial given by ascending coefficients
// c[0] + c[1] z + ... + z^deg, via Durand-Kerner.
std::vector<std::complex<double>> poly_roots(const std::vector<double>& coeffs) {
    const std::size_t deg = coeffs.size();
    std::vector<std::complex<double>> roots(deg);
    std::complex<double> seed(0.4, 0.9);
    std::complex<double> acc(1.0, 0.0);
    for (std::size_t i = 0; i < deg; ++i) {
        acc *= seed;
        roots[i] = acc;
    }
    auto eval = [&](std::complex<double> z) {
        std::complex<double> v(1.0, 0.0);
        for (std::size_t k = deg; k-- > 0;) v = v * z + coeffs[k];
        return v;
    };
    for (int iter = 0; iter < 200; ++iter) {
        double shift = 0.0;
        for (std::size_t i = 0; i < deg; ++i) {
            std::complex<double> denom(1.0, 0.0);
            for (std::size_t j = 0; j < deg; ++j)
                if (j != i) denom *= roots[i] - roots[j];
            const std::complex<double> delta = eval(roots[i]) / denom;
            roots[i] -= delta;
            shift = std::max(shift, std::abs(delta));
        }
        if (shift < 1e-12) break;
    }
    return roots;
}

double rss_of(const std::vector<double>& resid) {
    double s = 0.0;
    for (double r : resid) s += r * r;
    return s;
}

struct CoeffView {
    double c = 0.0;
    std::vector<double> phi;
    std::vector<double> theta;
};

CoeffView unpack(const std::vector<double>& beta, const ArimaOrder& order) {
    CoeffView v;
    v.c = beta[0];
    v.phi.assign(beta.begin() + 1, beta.begin() + 1 + order.p);
    v.theta.assign(beta.begin() + 1 + order.p, beta.end());
    return v;
}

// OLS of y_t on [1, y_{t-1} .. y_{t-p}] for t >= p.
std::vector<double> ols_ar(const std::vector<double>& y, int p) {
    const std::size_t n = y.size();
    const std::size_t k = static_cast<std::size_t>(p) + 1;
    std::vector<std::vector<double>> xtx(k, std::vector<double>(k, 0.0));
    std::vector<double> xty(k, 0.0);
    std::vector<double> row(k);
    for (std::size_t t = static_cast<std::size_t>(p); t < n; ++t) {
        row[0] = 1.0;
        for (int i = 1; i <= p; ++i) row[i] = y[t - i];
        for (std::size_t a = 0; a < k; ++a) {
            xty[a] += row[a] * y[t];
            for (std::size_t b = 0; b < k; ++b) xtx[a][b] += row[a] * row[b];
        }
    }
    return solve_linear(std::move(xtx), std::move(xty));
}

}  // namespace

bool is_stationary(const std::vector<double>& phi) {
    if (phi.empty()) return true;
    // characteristic polynomial z^p - phi_1 z^{p-1} - ... - phi_p must
    // have all roots strictly inside the unit circle
    std::vector<double> coeffs(phi.size());
    for (std::size_t j = 0; j < phi.size(); ++j)
        coeffs[phi.size() - 1 - j] = -phi[j];
    for (const auto& root : poly_roots(coeffs))
        if (std::abs(root) >= 1.0 - 1e-9) return false;
    return true;
}

std::vector<double> difference(const std::vector<double>& values, int d) {
    if (static_cast<int>(values.size()) <= d)
        throw SeriesTooShort("cannot difference " + std::to_string(values.size()) +
                             " values " + std::to_string(d) + " times");
    std::vector<double> out = values;
    for (int round = 0; round < d; ++round) {
        for (std::size_t i = 0; i + 1 < out.size(); ++i) out[i] = out[i + 1] - out[i];
        out.pop_back();
    }
    return out;
}

std::vector<double> integrate(const std::vector<double>& diffs, int d,
                              const std::vector<double>& initial) {
    if (d == 0) return diffs;
    if (static_cast<int>(initial.size()) != d)
        throw ShapeMismatch("integration needs exactly d preceding values");
    // tails[j] = last element of the j-fold differenced initial values
    std::vector<double> tails(d);
    std::vector<double> work = initial;
    for (int j = 0; j < d; ++j) {
        tails[j] = work.back();
        for (std::size_t i = 0; i + 1 < work.size(); ++i) work[i] = work[i + 1] - work[i];
        work.pop_back();
    }
    std::vector<double> out;
    out.reserve(diffs.size());
    for (double x : diffs) {
        double v = x;
        for (int j = d - 1; j >= 0; --j) {
            v += tails[j];
            tails[j] = v;
        }
        out.push_back(v);
    }
    return out;
}

std::vector<double> css_residuals(const ArimaOrder& order, double c,
                                  const std::vector<double>& phi,
                                  const std::vector<double>& theta,
                                  const std::vector<double>& series) {
    const int p = order.p;
    const int q = order.q;
    const std::size_t n = series.size();
    std::vector<double> resid;
    if (n <= static_cast<std::size_t>(p)) return resid;
    resid.reserve(n - p);
    // eps[t] for the full index range; pre-sample entries stay 0
    std::vector<double> eps(n, 0.0);
    for (std::size_t t = static_cast<std::size_t>(p); t < n; ++t) {
        double pred = c;
        for (int i = 1; i <= p; ++i) pred += phi[i - 1] * series[t - i];
        for (int j = 1; j <= q; ++j)
            if (t >= static_cast<std::size_t>(j)) pred += theta[j - 1] * eps[t - j];
        eps[t] = series[t] - pred;
        resid.push_back(eps[t]);
    }
    return resid;
}

ArimaModel fit(const TrafficSeries& series, const ArimaOrder& order) {
    series.validate();
    if (!order.valid())
        throw InvalidSeries("order (" + std::to_string(order.p) + "," +
                            std::to_string(order.d) + "," + std::to_string(order.q) +
                            ") violates p + q >= 1 unless a pure random walk");

    const std::vector<double> y = difference(series.counts, order.d);
    const std::size_t n = y.size();
    if (n < 10 * static_cast<std::size_t>(order.p + order.q + 1))
        throw SeriesTooShort("need at least " +
                             std::to_string(10 * (order.p + order.q + 1)) +
                             " differenced samples, got " + std::to_string(n));

    ArimaModel model;
    model.order = order;

    if (order.p == 0 && order.q == 0) {
        // pure random walk: no parameters, flat forecast
        model.c = 0.0;
        model.sigma2 = rss_of(y) / static_cast<double>(n);
    } else if (order.q == 0) {
        const std::vector<double> beta = ols_ar(y, order.p);
        model.c = beta[0];
        model.phi.assign(beta.begin() + 1, beta.end());
        if (!is_stationary(model.phi))
            throw NonStationaryFit("estimated AR polynomial has roots inside the unit circle");
        const auto resid = css_residuals(order, model.c, model.phi, model.theta, y);
        model.sigma2 = rss_of(resid) / static_cast<double>(resid.size());
    } else {
        // initialize from an AR fit, then damped Gauss-Newton over all
        // coefficients with a numerically differenced Jacobian
        std::vector<double> beta(1 + order.p + order.q, 0.0);
        if (order.p > 0) {
            try {
                const std::vector<double> init = ols_ar(y, order.p);
                std::copy(init.begin(), init.end(), beta.begin());
            } catch (const SingularNormalEquations&) {
                throw;
            }
        } else {
            double mean = 0.0;
            for (double v : y) mean += v;
            beta[0] = mean / static_cast<double>(n);
        }

        auto residuals_at = [&](const std::vector<double>& b) {
            const CoeffView v = unpack(b, order);
            return css_residuals(order, v.c, v.phi, v.theta, y);
        };

        std::vector<double> resid = residuals_at(beta);
        double rss = rss_of(resid);
        const std::size_t m = resid.size();
        const std::size_t k = beta.size();

        for (int iter = 0; iter < 200; ++iter) {
            // central-difference Jacobian of the residual vector
            std::vector<std::vector<double>> jac(k);
            for (std::size_t j = 0; j < k; ++j) {
                const double h = 1e-6 * std::max(1.0, std::abs(beta[j]));
                std::vector<double> bp = beta, bm = beta;
                bp[j] += h;
                bm[j] -= h;
                const auto rp = residuals_at(bp);
                const auto rm = residuals_at(bm);
                jac[j].resize(m);
                for (std::size_t t = 0; t < m; ++t)
                    jac[j][t] = (rp[t] - rm[t]) / (2.0 * h);
            }
            std::vector<std::vector<double>> jtj(k, std::vector<double>(k, 0.0));
            std::vector<double> jtr(k, 0.0);
            for (std::size_t a = 0; a < k; ++a) {
                for (std::size_t t = 0; t < m; ++t) jtr[a] += jac[a][t] * resid[t];
                for (std::size_t b = a; b < k; ++b) {
                    double s = 0.0;
                    for (std::size_t t = 0; t < m; ++t) s += jac[a][t] * jac[b][t];
                    jtj[a][b] = jtj[b][a] = s;
                }
            }
            std::vector<double> delta = solve_linear(std::move(jtj), std::move(jtr));

            // step halving until the objective decreases
            double lambda = 1.0;
            bool accepted = false;
            std::vector<double> cand(k);
            for (int half = 0; half < 40; ++half) {
                for (std::size_t j = 0; j < k; ++j) cand[j] = beta[j] - lambda * delta[j];
                const auto cand_resid = residuals_at(cand);
                const double cand_rss = rss_of(cand_resid);
                if (cand_rss < rss) {
                    const double rel = (rss - cand_rss) / std::max(rss, 1e-300);
                    beta = cand;
                    resid = cand_resid;
                    rss = cand_rss;
                    accepted = rel >= 1e-10;
                    break;
                }
                lambda *= 0.5;
            }
            if (!accepted) break;
        }

        const CoeffView v = unpack(beta, order);
        model.c = v.c;
        model.phi = v.phi;
        model.theta = v.theta;
        if (!is_stationary(model.phi))
            throw NonStationaryFit("estimated AR polynomial has roots inside the unit circle");
        // the residual recursion runs the inverted MA filter, so a
        // non-invertible estimate would make re-anchoring diverge
        std::vector<double> neg_theta = model.theta;
        for (double& t : neg_theta) t = -t;
        if (!is_stationary(neg_theta))
            throw NonStationaryFit("estimated MA polynomial is not invertible");
        model.sigma2 = rss / static_cast<double>(m);
    }

    return reanchor(model, series);
}

ArimaModel reanchor(const ArimaModel& model, const TrafficSeries& history) {
    history.validate();
    const int d = model.order.d;
    const int p = model.order.p;
    const int q = model.order.q;
    if (static_cast<int>(history.size()) < d + p + 1)
        throw SeriesTooShort("history too short to anchor the forecast state");

    ArimaModel out = model;
    const std::vector<double> y = difference(history.counts, d);
    const auto resid = css_residuals(model.order, model.c, model.phi, model.theta, y);

    out.recent_diff.assign(y.end() - std::min<std::size_t>(y.size(), std::max(p, 1)), y.end());
    out.recent_resid.clear();
    if (q > 0) {
        const std::size_t take = std::min<std::size_t>(resid.size(), q);
        out.recent_resid.assign(resid.end() - take, resid.end());
    }
    out.integrate_tail.assign(history.counts.end() - d, history.counts.end());
    return out;
}

std::vector<double> forecast(const ArimaModel& model, int horizon) {
    if (horizon < 1) throw InvalidSeries("horizon must be >= 1");
    const int p = model.order.p;
    const int q = model.order.q;

    std::vector<double> y = model.recent_diff;
    std::vector<double> eps = model.recent_resid;
    std::vector<double> diffs;
    diffs.reserve(horizon);
    for (int h = 0; h < horizon; ++h) {
        double pred = model.c;
        for (int i = 1; i <= p; ++i) {
            const std::size_t idx = y.size() >= static_cast<std::size_t>(i)
                                        ? y.size() - i
                                        : static_cast<std::size_t>(-1);
            pred += model.phi[i - 1] * (idx == static_cast<std::size_t>(-1) ? 0.0 : y[idx]);
        }
        for (int j = 1; j <= q; ++j) {
            if (eps.size() >= static_cast<std::size_t>(j))
                pred += model.theta[j - 1] * eps[eps.size() - j];
        }
        y.push_back(pred);
        eps.push_back(0.0);
        diffs.push_back(pred);
    }

    std::vector<double> values = integrate(diffs, model.order.d, model.integrate_tail);
    for (double& v : values) v = std::max(0.0, v);
    return values;
}

ArimaOrder select_order(const TrafficSeries& series, int max_p, int max_d, int max_q) {
    if (max_p > 3 || max_d > 2 || max_q > 3 || max_p < 0 || max_d < 0 || max_q < 0)
        throw InvalidSeries("grid bounds limited to p <= 3, d <= 2, q <= 3");

    ArimaOrder best;
    double best_aic = std::numeric_limits<double>::infinity();
    bool found = false;
    for (int d = 0; d <= max_d; ++d) {
        for (int p = 0; p <= max_p; ++p) {
            for (int q = 0; q <= max_q; ++q) {
                const ArimaOrder order{p, d, q};
                if (!order.valid()) continue;
                double aic;
                try {
                    const ArimaModel m = fit(series, order);
                    const std::size_t n = difference(series.counts, d).size() - p;
                    const double rss = m.sigma2 * static_cast<double>(n);
                    if (rss <= 0.0 || !std::isfinite(rss)) continue;
                    aic = static_cast<double>(n) * std::log(rss / static_cast<double>(n)) +
                          2.0 * (p + q + 1);
                } catch (const Error&) {
                    continue;  // failed fits are skipped
                }
                if (!std::isfinite(aic)) continue;
                const bool better =
                    !found || aic < best_aic ||
                    (aic == best_aic &&
                     (p + q < best.p + best.q ||
                      (p + q == best.p + best.q && d < best.d)));
                if (better) {
                    best = order;
                    best_aic = aic;
                    found = true;
                }
            }
        }
    }
    if (!found) throw NoViableOrder("every fit in the order grid failed");
    return best;
}

}  // namespace traffic
