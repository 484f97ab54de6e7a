#include "traffic/combiner.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "traffic/timeutil.hpp"

namespace traffic {

const char* to_string(ModelKind kind) {
    return kind == ModelKind::Arima ? "ARIMA" : "SDLSTM";
}

void CombinerSchedule::validate() const {
    if (windows.empty()) throw BadSchedule("schedule has no windows");
    int cursor = 0;
    for (const ScheduleWindow& w : windows) {
        if (w.start_minute != cursor)
            throw BadSchedule("window starting at minute " + std::to_string(w.start_minute) +
                              " leaves a gap or overlap at minute " + std::to_string(cursor));
        if (w.end_minute <= w.start_minute)
            throw BadSchedule("window at minute " + std::to_string(w.start_minute) +
                              " is empty or reversed");
        const int align = w.kind == ModelKind::Arima ? 15 : 60;
        if (w.start_minute % align != 0 || w.end_minute % align != 0)
            throw BadSchedule("window boundaries must fall on " + std::to_string(align) +
                              "-minute marks");
        cursor = w.end_minute;
    }
    if (cursor != 1440) throw BadSchedule("windows must cover the full day");
}

const ScheduleWindow& CombinerSchedule::window_at(int minute) const {
    for (const ScheduleWindow& w : windows)
        if (minute >= w.start_minute && minute < w.end_minute) return w;
    throw BadSchedule("minute " + std::to_string(minute) + " outside every window");
}

CombinerSchedule default_schedule() {
    CombinerSchedule s;
    s.windows = {{0, 300, ModelKind::Sdlstm},
                 {300, 480, ModelKind::Arima},
                 {480, 1440, ModelKind::Sdlstm}};
    return s;
}

namespace {

// Incremental hourly recursion: real hourly history first, then the
// model's own predictions appended as inputs.
class HourlyRecursion {
public:
    HourlyRecursion(const SdLstmModel& model, const TrafficSeries& history_15min)
        : model_(model) {
        const std::int64_t floor_hour = (history_15min.end() / kHour) * kHour;
        if (history_15min.start % kHour != 0)
            throw MisalignedSeries("history must start on an hour boundary for hourly forecasts");
        TrafficSeries truncated = history_15min;
        const std::size_t keep =
            static_cast<std::size_t>((floor_hour - history_15min.start) / kQuarterHour);
        truncated.counts.resize(keep);
        hourly_ = resample(truncated, kHour);
        next_hour_ = hourly_.end();
    }

    double value_at(std::int64_t hour_ts) {
        while (next_hour_ <= hour_ts) {
            const double pred = predict_next(model_, hourly_);
            hourly_.counts.push_back(pred);
            next_hour_ += kHour;
        }
        return hourly_.counts[static_cast<std::size_t>((hour_ts - hourly_.start) / kHour)];
    }

private:
    const SdLstmModel& model_;
    TrafficSeries hourly_;
    std::int64_t next_hour_ = 0;
};

}  // namespace

HybridForecast predict_hybrid(const SdLstmModel& lstm, const ArimaModel& arima_model,
                              const CombinerSchedule& schedule,
                              const TrafficSeries& history_15min,
                              std::int64_t horizon_end) {
    history_15min.validate();
    schedule.validate();
    if (history_15min.interval != kQuarterHour)
        throw IntervalMismatch("hybrid forecasting needs a 15-minute history");
    const std::int64_t origin = history_15min.end();
    if (origin % kQuarterHour != 0)
        throw MisalignedSeries("history must end on a 15-minute boundary");

    HybridForecast out;
    if (horizon_end <= origin) return out;

    // statistical side: anchored once on the true history
    std::vector<double> arima_values;
    const int n_fine = static_cast<int>((horizon_end - origin + kQuarterHour - 1) / kQuarterHour);
    bool need_arima = false, need_lstm = false;
    for (std::int64_t t = origin; t < horizon_end; t += kQuarterHour) {
        const ScheduleWindow& w = schedule.window_at(minute_of_day(t));
        if (w.kind == ModelKind::Arima) need_arima = true;
        else if (t % kHour == 0) need_lstm = true;
    }
    if (need_arima)
        arima_values = forecast(reanchor(arima_model, history_15min), n_fine);

    std::optional<HourlyRecursion> recursion;
    if (need_lstm) recursion.emplace(lstm, history_15min);

    for (std::int64_t t = origin; t < horizon_end; t += kQuarterHour) {
        const ScheduleWindow& w = schedule.window_at(minute_of_day(t));
        if (w.kind == ModelKind::Arima) {
            out.points.push_back({t, arima_values[static_cast<std::size_t>((t - origin) / kQuarterHour)],
                                  ModelKind::Arima, kQuarterHour});
        } else if (t % kHour == 0) {
            out.points.push_back({t, std::max(0.0, recursion->value_at(t)),
                                  ModelKind::Sdlstm, kHour});
        }
    }
    return out;
}

void update_models(NodeEntry& entry, const TrafficSeries& new_observations,
                   const RetrainPolicy& policy) {
    new_observations.validate();
    if (!entry.has_history) {
        entry.history = new_observations;
        entry.has_history = true;
    } else {
        if (new_observations.interval != entry.history.interval)
            throw HistoryGap("observation interval does not match the stored history");
        if (new_observations.start != entry.history.end())
            throw HistoryGap("observations start at " + format_iso8601(new_observations.start) +
                             " but history ends at " + format_iso8601(entry.history.end()));
        entry.history.counts.insert(entry.history.counts.end(),
                                    new_observations.counts.begin(),
                                    new_observations.counts.end());
    }
    entry.pending += new_observations.size();
    if (entry.pending < policy.threshold) return;

    try {
        // statistical model: recent fine-grained window
        const std::size_t window_samples =
            std::min(entry.history.size(),
                     static_cast<std::size_t>(policy.arima_window_days) * 96);
        TrafficSeries recent{entry.history.timestamp_at(entry.history.size() - window_samples),
                             entry.history.interval,
                             {entry.history.counts.end() - window_samples,
                              entry.history.counts.end()}};
        const ArimaOrder order = select_order(recent, policy.max_arima_p,
                                              policy.max_arima_d, policy.max_arima_q);
        ArimaModel arima_model = fit(recent, order);

        // hourly model: trained on the full extended series
        TrafficSeries aligned = entry.history;
        if (aligned.start % kHour != 0) {
            const std::size_t drop =
                static_cast<std::size_t>((kHour - aligned.start % kHour) / kQuarterHour);
            aligned.counts.erase(aligned.counts.begin(), aligned.counts.begin() + drop);
            aligned.start += static_cast<std::int64_t>(drop) * kQuarterHour;
        }
        aligned.counts.resize(aligned.counts.size() - aligned.counts.size() % 4);
        const TrafficSeries hourly = resample(aligned, kHour);
        SdLstmModel lstm =
            entry.lstm ? resume_training(*entry.lstm, hourly, policy.train, policy.resume_epochs)
                       : train(hourly, policy.train);

        entry.arima = std::move(arima_model);
        entry.lstm = std::move(lstm);
        entry.version += 1;
        entry.last_retrain_ts = entry.history.end();
        entry.pending = 0;
    } catch (const Error&) {
        // not enough data yet (or a degenerate stretch); try again on the
        // next threshold crossing with more history
    }
}

}  // namespace traffic
