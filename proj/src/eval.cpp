#include "traffic/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"
#include "traffic/timeutil.hpp"

namespace traffic {

double mape(const std::vector<double>& actual, const std::vector<double>& predicted) {
    if (actual.size() != predicted.size())
        throw LengthMismatch("actual has " + std::to_string(actual.size()) +
                             " values, predicted has " + std::to_string(predicted.size()));
    if (actual.empty()) throw LengthMismatch("sequences must be non-empty");
    double sum = 0.0;
    for (std::size_t i = 0; i < actual.size(); ++i) {
        if (actual[i] <= 0.0)
            throw ZeroActual("actual value at index " + std::to_string(i) +
                             " is zero or negative; percentage error undefined");
        sum += std::abs(actual[i] - predicted[i]) / actual[i];
    }
    return 100.0 * sum / static_cast<double>(actual.size());
}

const char* to_string(DayClass dc) {
    switch (dc) {
        case DayClass::Working: return "working";
        case DayClass::NonWorking: return "non-working";
        default: return "all";
    }
}

namespace {

bool keep_day(DayClass dc, std::int64_t ts) {
    if (dc == DayClass::All) return true;
    return (dc == DayClass::NonWorking) == is_weekend(ts);
}

double actual_for_point(const HybridPoint& point, const TrafficSeries& truth) {
    if ((point.timestamp - truth.start) % truth.interval != 0)
        throw AlignmentError("forecast point at " + format_iso8601(point.timestamp) +
                             " is not aligned to the truth grid");
    if (point.timestamp < truth.start ||
        point.timestamp + point.interval > truth.end())
        throw AlignmentError("forecast point at " + format_iso8601(point.timestamp) +
                             " falls outside the truth span");
    const std::size_t idx =
        static_cast<std::size_t>((point.timestamp - truth.start) / truth.interval);
    if (point.interval == truth.interval) return truth.counts[idx];
    if (point.interval % truth.interval != 0)
        throw AlignmentError("forecast interval is finer than the truth series");
    const std::size_t ratio = static_cast<std::size_t>(point.interval / truth.interval);
    double sum = 0.0;
    for (std::size_t j = 0; j < ratio; ++j) sum += truth.counts[idx + j];
    return sum;
}

}  // namespace

EvalReport evaluate(const HybridForecast& forecast, const TrafficSeries& truth,
                    DayClass day_class, const std::string& label,
                    const EvalOptions& options) {
    truth.validate();
    EvalReport report;
    report.label = label;
    report.day_class = day_class;

    std::array<double, 24> hour_sum{};
    double total = 0.0;
    for (const HybridPoint& point : forecast.points) {
        if (!keep_day(day_class, point.timestamp)) continue;
        const double actual = actual_for_point(point, truth);
        if (actual <= 0.0) {
            if (options.skip_zero_actual) {
                ++report.zero_actual_skipped;
                continue;
            }
            throw ZeroActual("actual value at " + format_iso8601(point.timestamp) +
                             " is zero; percentage error undefined");
        }
        const double ape = 100.0 * std::abs(actual - point.value) / actual;
        report.per_point.push_back({point.timestamp, actual, point.value, ape});
        const int hour = minute_of_day(point.timestamp) / 60;
        hour_sum[hour] += ape;
        report.per_hour_of_day[hour].count += 1;
        total += ape;
        if (report.per_point.size() == 1) report.span_begin = point.timestamp;
        report.span_end = point.timestamp;
    }
    for (int h = 0; h < 24; ++h)
        if (report.per_hour_of_day[h].count > 0)
            report.per_hour_of_day[h].mean_ape =
                hour_sum[h] / static_cast<double>(report.per_hour_of_day[h].count);
    if (!report.per_point.empty())
        report.overall_mape = total / static_cast<double>(report.per_point.size());
    return report;
}

Ranking compare(const std::vector<EvalReport>& reports) {
    if (reports.size() < 2)
        throw SpanMismatch("comparison needs at least two reports");
    for (const EvalReport& r : reports)
        if (r.span_begin != reports.front().span_begin ||
            r.span_end != reports.front().span_end)
            throw SpanMismatch("report '" + r.label +
                               "' covers a different truth span than '" +
                               reports.front().label + "'");

    Ranking ranking;
    ranking.ordered = reports;
    std::sort(ranking.ordered.begin(), ranking.ordered.end(),
              [](const EvalReport& a, const EvalReport& b) {
                  if (a.overall_mape != b.overall_mape)
                      return a.overall_mape < b.overall_mape;
                  return a.label < b.label;
              });
    const EvalReport& best = ranking.ordered.front();
    for (const EvalReport& r : ranking.ordered) {
        std::array<double, 24> delta{};
        for (int h = 0; h < 24; ++h)
            delta[h] = r.per_hour_of_day[h].mean_ape - best.per_hour_of_day[h].mean_ape;
        ranking.hour_delta_vs_best.push_back(delta);
    }
    return ranking;
}

void write_report_csv(const EvalReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << "timestamp,actual,predicted,ape_percent\n";
    out.precision(17);
    for (const EvalPoint& p : report.per_point)
        out << format_iso8601(p.timestamp) << ',' << p.actual << ',' << p.predicted
            << ',' << p.ape_percent << '\n';
}

void write_report_json(const EvalReport& report, const std::string& path) {
    nlohmann::json j;
    j["label"] = report.label;
    j["day_class"] = to_string(report.day_class);
    j["overall_mape"] = report.overall_mape;
    j["points"] = report.per_point.size();
    j["zero_actual_skipped"] = report.zero_actual_skipped;
    j["span_begin"] = format_iso8601(report.span_begin);
    j["span_end"] = format_iso8601(report.span_end);
    nlohmann::json hours = nlohmann::json::array();
    for (int h = 0; h < 24; ++h) {
        nlohmann::json entry;
        entry["hour"] = h;
        entry["mean_ape"] = report.per_hour_of_day[h].mean_ape;
        entry["count"] = report.per_hour_of_day[h].count;
        hours.push_back(entry);
    }
    j["per_hour"] = hours;
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << j.dump(2) << '\n';
}

}  // namespace traffic
