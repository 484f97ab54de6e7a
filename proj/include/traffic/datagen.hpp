#ifndef TRAFFIC_DATAGEN_HPP
#define TRAFFIC_DATAGEN_HPP

#include <cstdint>
#include <vector>

#include "traffic/series.hpp"

namespace traffic {

struct RushPeak {
    int center_minute = 0;   // minute of day
    double width_minutes = 60.0;
    double amplitude = 0.0;  // vehicles per hour at the peak
};

struct GenSpec {
    int days = 60;
    std::uint64_t seed = 0;
    double base_level = 500.0;  // vehicles per hour
    std::vector<RushPeak> rush_peaks = {{390, 75.0, 800.0},    // 06:30
                                        {1050, 90.0, 360.0}};  // 17:30
    double weekend_scale = 0.85;
    double noise_sd = 6.0;      // per 15-minute sample
    double spike_rate = 0.0;
    double spike_magnitude_sigmas = 6.0;
    std::int64_t start = 1704067200;  // 2024-01-01T00:00:00Z, a Monday
};

struct GeneratedSeries {
    TrafficSeries series;            // 900 s interval
    std::vector<bool> spike_mask;    // ground truth spike positions
    std::vector<double> noiseless;   // clean signal, same length
};

// Daily double-peak profile with weekend scaling, white noise, and
// Bernoulli spikes; clamped at zero and fully seed-deterministic.
GeneratedSeries generate(const GenSpec& spec);

}  // namespace traffic

#endif
