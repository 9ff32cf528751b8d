#pragma once

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "icdet/core.hpp"

namespace icdet {

/// Protocol phase onsets plus run delimiters. The enum order is also the
/// tie-break order when events share a sample index.
enum class EventCode { IncStatOn = 0, IcCueOn, IcStatOn, IncCueOn, RunStart, RunEnd };

inline const char* event_code_name(EventCode c) {
    switch (c) {
        case EventCode::IncStatOn: return "INC_STAT_ON";
        case EventCode::IcCueOn: return "IC_CUE_ON";
        case EventCode::IcStatOn: return "IC_STAT_ON";
        case EventCode::IncCueOn: return "INC_CUE_ON";
        case EventCode::RunStart: return "RUN_START";
        case EventCode::RunEnd: return "RUN_END";
    }
    return "?";
}

inline bool parse_event_code(std::string_view s, EventCode& out) {
    for (int i = 0; i <= static_cast<int>(EventCode::RunEnd); ++i) {
        if (s == event_code_name(static_cast<EventCode>(i))) {
            out = static_cast<EventCode>(i);
            return true;
        }
    }
    return false;
}

struct Event {
    std::size_t sample_index = 0;
    EventCode code = EventCode::IncStatOn;

    friend bool operator<(const Event& a, const Event& b) {
        if (a.sample_index != b.sample_index) return a.sample_index < b.sample_index;
        return static_cast<int>(a.code) < static_cast<int>(b.code);
    }
    friend bool operator==(const Event& a, const Event& b) {
        return a.sample_index == b.sample_index && a.code == b.code;
    }
};

/// Named electrode set. Mc covers the sensorimotor strip, FPc spreads over
/// frontal and parietal rows as well.
struct Montage {
    std::string name;
    std::vector<std::string> labels;

    static Montage mc() {
        return make("Mc", {"Fz", "FC3", "FC1", "FCz", "FC2", "FC4", "C3", "C1", "Cz", "C2", "C4",
                           "CP3", "CP1", "CPz", "CP2", "CP4"});
    }
    static Montage fpc() {
        return make("FPc", {"F3", "F1", "Fz", "F2", "F4", "FCz", "C3", "C1", "Cz", "C2", "C4",
                            "P3", "P1", "Pz", "P2", "P4"});
    }
    static Montage custom(std::vector<std::string> labels) { return make("custom", std::move(labels)); }

    static Montage by_name(const std::string& name) {
        if (name == "Mc") return mc();
        if (name == "FPc") return fpc();
        throw std::invalid_argument("unknown montage name: " + name);
    }

    int index_of(const std::string& label) const {
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == label) return static_cast<int>(i);
        return -1;
    }

private:
    static Montage make(std::string name, std::vector<std::string> labels) {
        std::set<std::string> seen;
        for (const auto& l : labels) {
            require(!l.empty(), "montage label must not be empty");
            require(seen.insert(l).second, "duplicate channel label: " + l);
        }
        return Montage{std::move(name), std::move(labels)};
    }
};

/// One multichannel recording: samples [n_samples x n_channels] in
/// microvolts plus a sorted event list. Immutable by convention after
/// construction, so it is safe to share across workers.
struct Recording {
    unsigned sample_rate = 0;
    std::vector<std::string> channels;
    Matrix samples;
    std::vector<Event> events;

    std::size_t n_samples() const { return samples.rows(); }
    std::size_t n_channels() const { return samples.cols(); }
    double duration_seconds() const {
        return static_cast<double>(n_samples()) / static_cast<double>(sample_rate);
    }

    void validate() const {
        require(sample_rate > 0, "sample rate must be positive");
        require(channels.size() == samples.cols(), "channel label count does not match sample columns");
        std::set<std::string> seen;
        for (const auto& c : channels) require(seen.insert(c).second, "duplicate channel label: " + c);
        for (const auto& e : events)
            require(e.sample_index < n_samples(), "event out of range: index " + std::to_string(e.sample_index));
        require(std::is_sorted(events.begin(), events.end()), "events must be sorted");
    }
};

namespace detail {

inline std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == ',') {
            out.push_back(line.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

inline double parse_double(std::string_view s, const std::string& context) {
    double v = 0.0;
    const auto* begin = s.data();
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end)
        throw std::runtime_error("malformed number '" + std::string(s) + "' in " + context);
    return v;
}

inline unsigned long long parse_uint(std::string_view s, const std::string& context) {
    unsigned long long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw std::runtime_error("malformed integer '" + std::string(s) + "' in " + context);
    return v;
}

inline void strip_cr(std::string& line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
}

} // namespace detail

/// Signal file format: `#sr=<Hz>` header, comma-separated label row, then
/// one comma-separated row per sample with fixed 6-decimal values.
/// Events file: `sample_index,code` header plus one row per event.
inline void write_recording(const Recording& rec, const std::string& signal_path,
                            const std::string& events_path) {
    rec.validate();
    {
        std::ofstream f(signal_path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot open for writing: " + signal_path);
        f << "#sr=" << rec.sample_rate << "\n";
        for (std::size_t c = 0; c < rec.channels.size(); ++c) {
            if (c) f << ',';
            f << rec.channels[c];
        }
        f << "\n";
        std::string buf;
        buf.reserve(rec.n_channels() * 16 + 2);
        char num[32];
        for (std::size_t r = 0; r < rec.n_samples(); ++r) {
            buf.clear();
            for (std::size_t c = 0; c < rec.n_channels(); ++c) {
                if (c) buf.push_back(',');
                const int len = std::snprintf(num, sizeof num, "%.6f", rec.samples(r, c));
                buf.append(num, static_cast<std::size_t>(len));
            }
            buf.push_back('\n');
            f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
        }
        if (!f) throw std::runtime_error("write failed: " + signal_path);
    }
    {
        std::ofstream f(events_path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot open for writing: " + events_path);
        f << "sample_index,code\n";
        for (const auto& e : rec.events) f << e.sample_index << ',' << event_code_name(e.code) << "\n";
        if (!f) throw std::runtime_error("write failed: " + events_path);
    }
}

inline Recording read_recording(const std::string& signal_path, const std::string& events_path) {
    Recording rec;
    std::ifstream f(signal_path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open signal file: " + signal_path);

    std::string line;
    if (!std::getline(f, line)) throw std::runtime_error("malformed header: empty signal file " + signal_path);
    detail::strip_cr(line);
    if (line.rfind("#sr=", 0) != 0)
        throw std::runtime_error("malformed header: expected '#sr=<Hz>' in " + signal_path);
    rec.sample_rate = static_cast<unsigned>(detail::parse_uint(
        std::string_view(line).substr(4), "sample-rate header of " + signal_path));
    if (rec.sample_rate == 0) throw std::runtime_error("malformed header: sample rate 0 in " + signal_path);

    if (!std::getline(f, line)) throw std::runtime_error("malformed header: missing label row in " + signal_path);
    detail::strip_cr(line);
    std::set<std::string> seen;
    for (auto part : detail::split_csv(line)) {
        std::string label(part);
        if (label.empty()) throw std::runtime_error("malformed header: empty channel label in " + signal_path);
        if (!seen.insert(label).second)
            throw std::runtime_error("duplicate channel label '" + label + "' in " + signal_path);
        rec.channels.push_back(std::move(label));
    }
    const std::size_t n_channels = rec.channels.size();

    std::vector<double> values;
    std::size_t n_rows = 0;
    while (std::getline(f, line)) {
        detail::strip_cr(line);
        if (line.empty()) continue;
        const auto parts = detail::split_csv(line);
        if (parts.size() != n_channels)
            throw std::runtime_error("ragged row " + std::to_string(n_rows + 1) + " in " + signal_path +
                                     ": expected " + std::to_string(n_channels) + " values, got " +
                                     std::to_string(parts.size()));
        for (auto part : parts)
            values.push_back(detail::parse_double(part, "row " + std::to_string(n_rows + 1) + " of " + signal_path));
        ++n_rows;
    }
    rec.samples = Matrix(n_rows, n_channels);
    rec.samples.data() = std::move(values);

    std::ifstream ef(events_path, std::ios::binary);
    if (!ef) throw std::runtime_error("cannot open events file: " + events_path);
    if (!std::getline(ef, line)) throw std::runtime_error("malformed header: empty events file " + events_path);
    detail::strip_cr(line);
    if (line != "sample_index,code")
        throw std::runtime_error("malformed header: expected 'sample_index,code' in " + events_path);
    std::size_t row = 1;
    while (std::getline(ef, line)) {
        detail::strip_cr(line);
        if (line.empty()) continue;
        ++row;
        const auto parts = detail::split_csv(line);
        if (parts.size() != 2)
            throw std::runtime_error("malformed event row " + std::to_string(row) + " in " + events_path);
        Event e;
        e.sample_index = detail::parse_uint(parts[0], "events file " + events_path);
        if (!parse_event_code(parts[1], e.code))
            throw std::runtime_error("unknown event code '" + std::string(parts[1]) + "' in " + events_path);
        if (e.sample_index >= rec.n_samples())
            throw std::runtime_error("event out of range: index " + std::to_string(e.sample_index) +
                                     " >= " + std::to_string(rec.n_samples()) + " in " + events_path);
        rec.events.push_back(e);
    }
    std::sort(rec.events.begin(), rec.events.end());
    rec.validate();
    return rec;
}

} // namespace icdet
