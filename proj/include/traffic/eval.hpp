#ifndef TRAFFIC_EVAL_HPP
#define TRAFFIC_EVAL_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "traffic/combiner.hpp"
#include "traffic/series.hpp"

namespace traffic {

// Mean absolute percentage error, (100/N) * sum |a - p| / a.
double mape(const std::vector<double>& actual, const std::vector<double>& predicted);

enum class DayClass { Working, NonWorking, All };

const char* to_string(DayClass dc);

struct EvalPoint {
    std::int64_t timestamp = 0;
    double actual = 0.0;
    double predicted = 0.0;
    double ape_percent = 0.0;
};

struct HourStat {
    double mean_ape = 0.0;
    std::size_t count = 0;
};

struct EvalReport {
    std::vector<EvalPoint> per_point;
    std::array<HourStat, 24> per_hour_of_day{};
    double overall_mape = 0.0;
    std::string label;
    DayClass day_class = DayClass::All;
    std::int64_t span_begin = 0;
    std::int64_t span_end = 0;
    std::size_t zero_actual_skipped = 0;
};

struct EvalOptions {
    // When set, zero-actual points are dropped (and counted) instead of
    // raising ZeroActual.
    bool skip_zero_actual = false;
};

// Scores a hybrid forecast against the fine-grained truth. Hourly points
// are compared against hourly sums of the truth; 15-minute points against
// the raw samples.
EvalReport evaluate(const HybridForecast& forecast, const TrafficSeries& truth,
                    DayClass day_class, const std::string& label,
                    const EvalOptions& options = {});

struct Ranking {
    std::vector<EvalReport> ordered;  // ascending overall MAPE
    // per-hour mean-APE difference of each report against the best one
    std::vector<std::array<double, 24>> hour_delta_vs_best;
};

Ranking compare(const std::vector<EvalReport>& reports);

void write_report_csv(const EvalReport& report, const std::string& path);
void write_report_json(const EvalReport& report, const std::string& path);

}  // namespace traffic

#endif
