#include "traffic/datagen.hpp"

#include <algorithm>
#include <cmath>

#include "traffic/rng.hpp"
#include "traffic/timeutil.hpp"

namespace traffic {

namespace {

double profile_vph(const GenSpec& spec, int minute) {
    double v = spec.base_level;
    for (const RushPeak& peak : spec.rush_peaks) {
        // wrap distance so late-evening peaks bleed across midnight
        double delta = std::abs(minute - peak.center_minute);
        delta = std::min(delta, 1440.0 - delta);
        v += peak.amplitude * std::exp(-0.5 * (delta / peak.width_minutes) *
                                       (delta / peak.width_minutes));
    }
    return v;
}

}  // namespace

GeneratedSeries generate(const GenSpec& spec) {
    if (spec.days <= 0) throw InvalidSeries("days must be positive");
    if (spec.noise_sd < 0.0) throw InvalidSeries("noise_sd must be non-negative");
    if (spec.spike_rate < 0.0 || spec.spike_rate >= 1.0)
        throw InvalidSeries("spike_rate must lie in [0, 1)");
    if (!(spec.weekend_scale > 0.0 && spec.weekend_scale <= 1.0))
        throw InvalidSeries("weekend_scale must lie in (0, 1]");

    const std::size_t n = static_cast<std::size_t>(spec.days) * 96;
    GeneratedSeries out;
    out.series.start = spec.start;
    out.series.interval = kQuarterHour;
    out.series.counts.reserve(n);
    out.spike_mask.resize(n, false);
    out.noiseless.reserve(n);

    Rng rng(spec.seed);
    const double spike_size = spec.spike_magnitude_sigmas * spec.noise_sd;
    for (std::size_t i = 0; i < n; ++i) {
        const std::int64_t ts = out.series.timestamp_at(i);
        double signal = profile_vph(spec, minute_of_day(ts)) / 4.0;  // per 15 min
        if (is_weekend(ts)) signal *= spec.weekend_scale;
        out.noiseless.push_back(std::max(0.0, signal));

        double value = signal;
        if (spec.noise_sd > 0.0) value += spec.noise_sd * rng.normal();
        if (spec.spike_rate > 0.0 && rng.bernoulli(spec.spike_rate)) {
            out.spike_mask[i] = true;
            value += rng.bernoulli(0.5) ? spike_size : -spike_size;
        }
        out.series.counts.push_back(std::max(0.0, value));
    }
    return out;
}

}  // namespace traffic
