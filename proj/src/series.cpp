#include "traffic/series.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "traffic/timeutil.hpp"

namespace traffic {

namespace {

double median_of(std::vector<double>& v) {
    const std::size_t n = v.size();
    const std::size_t mid = n / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    if (n % 2 == 1) return v[mid];
    const double hi = v[mid];
    std::nth_element(v.begin(), v.begin() + mid - 1, v.begin() + mid);
    return 0.5 * (v[mid - 1] + hi);
}

}  // namespace

void TrafficSeries::validate() const {
    if (interval != kQuarterHour && interval != kHour)
        throw InvalidSeries("interval must be 900 or 3600 seconds, got " +
                            std::to_string(interval));
    if (counts.empty()) throw InvalidSeries("series must contain at least one count");
    for (std::size_t i = 0; i < counts.size(); ++i) {
        if (!std::isfinite(counts[i]) || counts[i] < 0.0)
            throw InvalidSeries("count at index " + std::to_string(i) +
                                " is negative or non-finite");
    }
}

std::size_t SingularityMask::singular_count() const {
    return static_cast<std::size_t>(std::count(flags.begin(), flags.end(), true));
}

TrafficSeries resample(const TrafficSeries& series, int target_interval) {
    series.validate();
    if (target_interval < series.interval)
        throw DisaggregationUnsupported(
            "cannot disaggregate " + std::to_string(series.interval) +
            " s series to " + std::to_string(target_interval) + " s");
    if (target_interval == series.interval) return series;
    if (target_interval % series.interval != 0)
        throw MisalignedSeries("target interval is not a multiple of the source interval");
    const std::size_t ratio = static_cast<std::size_t>(target_interval / series.interval);
    if (series.size() % ratio != 0)
        throw MisalignedSeries("series length " + std::to_string(series.size()) +
                               " is not a multiple of " + std::to_string(ratio));
    if (series.start % target_interval != 0)
        throw MisalignedSeries("series start is not aligned to the target interval");

    TrafficSeries out;
    out.start = series.start;
    out.interval = target_interval;
    out.counts.reserve(series.size() / ratio);
    for (std::size_t i = 0; i < series.size(); i += ratio) {
        double sum = 0.0;
        for (std::size_t j = 0; j < ratio; ++j) sum += series.counts[i + j];
        out.counts.push_back(sum);
    }
    return out;
}

std::pair<TrafficSeries, NormParams> normalize(const TrafficSeries& series) {
    series.validate();
    const auto [lo, hi] = std::minmax_element(series.counts.begin(), series.counts.end());
    if (*lo == *hi)
        throw DegenerateSeries("all values equal (" + std::to_string(*lo) +
                               "); min-max scaling undefined");
    NormParams params{*lo, *hi};
    TrafficSeries out = series;
    const double span = params.max - params.min;
    for (double& v : out.counts) v = (v - params.min) / span;
    return {out, params};
}

double denormalize_value(double v, const NormParams& params) {
    return v * (params.max - params.min) + params.min;
}

TrafficSeries denormalize(const TrafficSeries& series, const NormParams& params) {
    TrafficSeries out = series;
    for (double& v : out.counts) v = denormalize_value(v, params);
    return out;
}

SingularityMask detect_singular_points(const TrafficSeries& series,
                                       int window, double k) {
    series.validate();
    if (window < 3 || window % 2 == 0)
        throw InvalidSeries("window must be odd and >= 3");
    if (k <= 0.0) throw InvalidSeries("k must be positive");
    const std::size_t n = series.size();
    if (n < static_cast<std::size_t>(window))
        throw SeriesTooShort("series length " + std::to_string(n) +
                             " shorter than window " + std::to_string(window));

    SingularityMask mask;
    mask.window = window;
    mask.threshold_k = k;
    mask.flags.resize(n, false);

    const int half = window / 2;
    std::vector<double> buf, dev;
    for (std::size_t t = 0; t < n; ++t) {
        const std::size_t lo = t >= static_cast<std::size_t>(half) ? t - half : 0;
        const std::size_t hi = std::min(n, t + half + 1);
        buf.assign(series.counts.begin() + lo, series.counts.begin() + hi);
        const double med = median_of(buf);
        dev.resize(buf.size());
        for (std::size_t j = 0; j < buf.size(); ++j)
            dev[j] = std::abs(series.counts[lo + j] - med);
        const double mad = median_of(dev);
        const double deviation = std::abs(series.counts[t] - med);
        if (mad == 0.0)
            mask.flags[t] = deviation > 0.0;
        else
            mask.flags[t] = deviation > k * 1.4826 * mad;
    }
    return mask;
}

double singularity_ratio(const SingularityMask& mask, double p_min, double p_max) {
    if (!(0.0 < p_min && p_min < p_max && p_max < 1.0))
        throw InvalidSeries("clamp bounds must satisfy 0 < p_min < p_max < 1");
    if (mask.flags.empty()) throw EmptyMask("mask has no samples");
    const double ratio = static_cast<double>(mask.singular_count()) /
                         static_cast<double>(mask.flags.size());
    return std::clamp(ratio, p_min, p_max);
}

std::pair<TrafficSeries, TrafficSeries> split(const TrafficSeries& series,
                                              double train_fraction) {
    series.validate();
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw InvalidSeries("train_fraction must lie in (0, 1)");
    const std::size_t n = series.size();
    const std::size_t n_train =
        static_cast<std::size_t>(std::floor(static_cast<double>(n) * train_fraction));
    if (n_train == 0 || n_train == n)
        throw SeriesTooShort("split of length " + std::to_string(n) +
                             " leaves an empty half");
    TrafficSeries train{series.start, series.interval,
                        {series.counts.begin(), series.counts.begin() + n_train}};
    TrafficSeries test{series.timestamp_at(n_train), series.interval,
                       {series.counts.begin() + n_train, series.counts.end()}};
    return {train, test};
}

TrafficSeries read_series_csv(std::istream& in) {
    std::string line;
    std::size_t row = 0;
    if (!std::getline(in, line))
        throw CsvFormatError("row 1: missing header");
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "timestamp,count")
        throw CsvFormatError("row 1: expected header 'timestamp,count', got '" + line + "'");

    TrafficSeries series;
    series.interval = 0;
    std::int64_t prev_ts = 0;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw CsvFormatError("row " + std::to_string(row) + ": missing comma");
        const auto ts = parse_iso8601(line.substr(0, comma));
        if (!ts)
            throw CsvFormatError("row " + std::to_string(row) + ": bad timestamp '" +
                                 line.substr(0, comma) + "'");
        double count = 0.0;
        try {
            std::size_t used = 0;
            count = std::stod(line.substr(comma + 1), &used);
            if (used != line.size() - comma - 1) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw CsvFormatError("row " + std::to_string(row) + ": bad count '" +
                                 line.substr(comma + 1) + "'");
        }
        if (!std::isfinite(count) || count < 0.0)
            throw CsvFormatError("row " + std::to_string(row) + ": negative or non-finite count");

        if (series.counts.empty()) {
            series.start = *ts;
        } else if (series.interval == 0) {
            const std::int64_t step = *ts - prev_ts;
            if (step != kQuarterHour && step != kHour)
                throw CsvFormatError("row " + std::to_string(row) +
                                     ": interval must be 900 or 3600 seconds, got " +
                                     std::to_string(step));
            series.interval = static_cast<int>(step);
        } else if (*ts != prev_ts + series.interval) {
            if (*ts <= prev_ts)
                throw CsvFormatError("row " + std::to_string(row) +
                                     ": duplicate or out-of-order timestamp");
            throw CsvFormatError("row " + std::to_string(row) + ": gap in series (expected " +
                                 format_iso8601(prev_ts + series.interval) + ")");
        }
        prev_ts = *ts;
        series.counts.push_back(count);
    }
    if (series.counts.empty()) throw CsvFormatError("no data rows");
    if (series.interval == 0) series.interval = kQuarterHour;  // single row: assume fine grain
    series.validate();
    return series;
}

TrafficSeries read_series_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    return read_series_csv(in);
}

void write_series_csv(const TrafficSeries& series, std::ostream& out) {
    out << "timestamp,count\n";
    std::ostringstream num;
    num.precision(17);
    for (std::size_t i = 0; i < series.size(); ++i) {
        num.str("");
        num << series.counts[i];
        out << format_iso8601(series.timestamp_at(i)) << ',' << num.str() << '\n';
    }
}

void write_series_csv_file(const TrafficSeries& series, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    write_series_csv(series, out);
}

}  // namespace traffic
