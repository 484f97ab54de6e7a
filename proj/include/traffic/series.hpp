#ifndef TRAFFIC_SERIES_HPP
#define TRAFFIC_SERIES_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "traffic/errors.hpp"

namespace traffic {

constexpr int kQuarterHour = 900;
constexpr int kHour = 3600;

// Timestamped fixed-interval vehicle counts. The value at index i covers
// [start + i*interval, start + (i+1)*interval).
struct TrafficSeries {
    std::int64_t start = 0;     // UTC seconds
    int interval = kQuarterHour;  // 900 or 3600
    std::vector<double> counts;

    std::size_t size() const { return counts.size(); }
    std::int64_t timestamp_at(std::size_t i) const {
        return start + static_cast<std::int64_t>(i) * interval;
    }
    // First timestamp past the covered range.
    std::int64_t end() const { return timestamp_at(counts.size()); }

    // Throws InvalidSeries on any violated invariant.
    void validate() const;
};

struct SingularityMask {
    std::vector<bool> flags;
    int window = 0;
    double threshold_k = 0.0;

    std::size_t singular_count() const;
};

struct NormParams {
    double min = 0.0;
    double max = 1.0;
};

// Aggregates to a coarser interval by summation; total volume is conserved.
TrafficSeries resample(const TrafficSeries& series, int target_interval);

// Min-max scaling to [0, 1].
std::pair<TrafficSeries, NormParams> normalize(const TrafficSeries& series);
TrafficSeries denormalize(const TrafficSeries& series, const NormParams& params);
double denormalize_value(double v, const NormParams& params);

// Robust z-score outlier flags: |x - median| > k * 1.4826 * MAD over a
// centered window (clipped at the boundaries). A zero MAD flags any
// nonzero deviation.
SingularityMask detect_singular_points(const TrafficSeries& series,
                                       int window = 25, double k = 3.0);

// N_q / N clamped into [p_min, p_max]; the SD-dropout probability.
double singularity_ratio(const SingularityMask& mask,
                         double p_min = 0.05, double p_max = 0.5);

// Chronological split; train gets floor(n * train_fraction) samples.
std::pair<TrafficSeries, TrafficSeries> split(const TrafficSeries& series,
                                              double train_fraction);

// CSV format: header "timestamp,count", ISO-8601 UTC rows one interval
// apart. Parse errors carry the offending row number.
TrafficSeries read_series_csv(std::istream& in);
TrafficSeries read_series_csv_file(const std::string& path);
void write_series_csv(const TrafficSeries& series, std::ostream& out);
void write_series_csv_file(const TrafficSeries& series, const std::string& path);

}  // namespace traffic

#endif
