#pragma once

#include "tphd/error.hpp"
#include "tphd/frame.hpp"
#include "tphd/monte_carlo.hpp"
#include "tphd/simulator.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace tphd {

/// Decimal with 17 significant digits; round-trips every double.
inline std::string fmt_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline constexpr const char* kTruthHeader = "target,class,scan,model,px,vx,py,vy,pz,vz";
inline constexpr const char* kFramesHeader = "scan,index,azimuth,elevation,range,source";
inline constexpr const char* kEstimatesHeader =
    "run,scan,track,birth,length,class,class_prob,weight,px,vx,py,vy,pz,vz,sequence";
inline constexpr const char* kStatesHeader = "sequence,time,px,vx,py,vy,pz,vz";
inline constexpr const char* kMetricsHeader = "scan,metric,value,class,run";

inline void write_truth_csv(std::ostream& out, const GroundTruth& truth) {
    out << kTruthHeader << '\n';
    for (std::size_t i = 0; i < truth.targets.size(); ++i) {
        const auto& tr = truth.targets[i];
        for (int k = 0; k < tr.length; ++k) {
            out << i << ',' << tr.class_id << ',' << tr.birth + k << ',' << tr.models[static_cast<std::size_t>(k)];
            for (int d = 0; d < kStateDim; ++d) out << ',' << fmt_num(tr.states[static_cast<std::size_t>(k)](d));
            out << '\n';
        }
    }
}

inline void write_frames_csv(std::ostream& out, const std::vector<MeasurementFrame>& frames) {
    out << kFramesHeader << '\n';
    for (const auto& f : frames) {
        for (std::size_t i = 0; i < f.measurements.size(); ++i) {
            const auto& z = f.measurements[i];
            out << f.time << ',' << i << ',' << fmt_num(z(0)) << ',' << fmt_num(z(1)) << ',' << fmt_num(z(2)) << ','
                << (i < f.provenance.size() ? f.provenance[i] : -1) << '\n';
        }
    }
}

namespace detail {

struct CsvTable {
    std::vector<std::vector<std::string>> rows;
    std::vector<int> lines;  ///< 1-based source line of each row
};

inline CsvTable read_csv(std::istream& in, const std::string& expected_header, const std::string& source) {
    CsvTable table;
    std::string line;
    int n = 0;
    if (!std::getline(in, line)) throw ConfigError(source + ":1: empty file");
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != expected_header) throw ConfigError(source + ":1: expected header '" + expected_header + "'");
    while (std::getline(in, line)) {
        ++n;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        table.rows.push_back(std::move(cells));
        table.lines.push_back(n);
    }
    return table;
}

inline double parse_double(const std::string& s, const std::string& where) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used == s.size() && std::isfinite(v)) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError(where + ": '" + s + "' is not a finite number");
}

inline long long parse_int(const std::string& s, const std::string& where) {
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) throw ConfigError(where + ": '" + s + "' is not an integer");
    return v;
}

}  // namespace detail

/// Frames for scans 1..duration; scans without rows are empty.
inline std::vector<MeasurementFrame> read_frames_csv(std::istream& in, int duration,
                                                     const std::string& source = "frames.csv") {
    const auto table = detail::read_csv(in, kFramesHeader, source);
    std::vector<MeasurementFrame> frames(static_cast<std::size_t>(duration));
    for (int t = 1; t <= duration; ++t) frames[static_cast<std::size_t>(t - 1)].time = t;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::string where = source + ":" + std::to_string(table.lines[r]);
        if (row.size() != 6) throw ConfigError(where + ": expected 6 columns");
        const auto scan = detail::parse_int(row[0], where);
        if (scan < 1 || scan > duration) throw ConfigError(where + ": scan outside 1.." + std::to_string(duration));
        Measurement z{detail::parse_double(row[2], where), detail::parse_double(row[3], where),
                      detail::parse_double(row[4], where)};
        auto& f = frames[static_cast<std::size_t>(scan - 1)];
        f.measurements.push_back(z);
        f.provenance.push_back(static_cast<int>(detail::parse_int(row[5], where)));
    }
    return frames;
}

inline GroundTruth read_truth_csv(std::istream& in, int duration, const std::string& source = "truth.csv") {
    const auto table = detail::read_csv(in, kTruthHeader, source);
    GroundTruth truth;
    truth.duration = duration;
    std::map<long long, std::size_t> slot;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::string where = source + ":" + std::to_string(table.lines[r]);
        if (row.size() != 10) throw ConfigError(where + ": expected 10 columns");
        const auto id = detail::parse_int(row[0], where);
        const auto scan = static_cast<int>(detail::parse_int(row[2], where));
        if (scan < 1 || scan > duration) throw ConfigError(where + ": scan outside 1.." + std::to_string(duration));
        auto [it, inserted] = slot.emplace(id, truth.targets.size());
        if (inserted) {
            TruthTrack t;
            t.name = "target" + std::to_string(id);
            t.class_id = static_cast<int>(detail::parse_int(row[1], where));
            t.birth = scan;
            truth.targets.push_back(std::move(t));
        }
        TruthTrack& t = truth.targets[it->second];
        if (scan != t.birth + t.length) throw ConfigError(where + ": scans of a target must be consecutive");
        Vec6 x;
        for (int d = 0; d < kStateDim; ++d) x(d) = detail::parse_double(row[static_cast<std::size_t>(4 + d)], where);
        t.states.push_back(x);
        t.models.push_back(static_cast<int>(detail::parse_int(row[3], where)));
        ++t.length;
    }
    return truth;
}

/// Writes `content` to `path`, raising IoError on failure.
inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << content;
    out.flush();
    if (!out) throw IoError("failed writing '" + path + "'");
}

inline std::ifstream open_input(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    return in;
}

inline std::string sequence_key(int run, int scan, std::uint64_t track) {
    return std::to_string(run) + ":" + std::to_string(scan) + ":" + std::to_string(track);
}

enum class SequenceOutput {
    final_scan,  ///< full sequences of the estimates emitted at each run's last scan
    all_scans,
};

/// estimates.csv rows plus the states.csv sequences they reference.
inline void write_estimates(std::ostream& estimates, std::ostream& states, const std::vector<RunRecord>& runs,
                            SequenceOutput sequences) {
    estimates << kEstimatesHeader << '\n';
    states << kStatesHeader << '\n';
    for (const auto& run : runs) {
        const int last_scan = run.tm.empty() ? 0 : static_cast<int>(run.tm.size());
        for (const auto& row : run.rows) {
            const bool with_sequence = sequences == SequenceOutput::all_scans || row.scan == last_scan;
            const std::string key = with_sequence ? sequence_key(run.run, row.scan, row.track) : "";
            estimates << run.run << ',' << row.scan << ',' << row.track << ',' << row.birth << ',' << row.length << ','
                      << row.class_id << ',' << fmt_num(row.class_prob) << ',' << fmt_num(row.weight);
            for (int d = 0; d < kStateDim; ++d) estimates << ',' << fmt_num(row.state(d));
            estimates << ',' << key << '\n';
        }
        if (sequences == SequenceOutput::all_scans && run.estimates.empty())
            throw InvalidParameter("per-scan sequences requested but the run did not keep its estimates");
        for (int scan = 1; scan <= last_scan; ++scan) {
            if (sequences == SequenceOutput::final_scan && scan != last_scan) continue;
            const auto& list = sequences == SequenceOutput::final_scan
                                   ? run.final_estimates
                                   : run.estimates[static_cast<std::size_t>(scan - 1)];
            for (const auto& e : list) {
                const std::string key = sequence_key(run.run, scan, e.track_id);
                for (std::size_t i = 0; i < e.states.size(); ++i) {
                    states << key << ',' << e.birth + static_cast<int>(i);
                    for (int d = 0; d < kStateDim; ++d) states << ',' << fmt_num(e.states[i](d));
                    states << '\n';
                }
            }
        }
    }
}

inline void write_metrics(std::ostream& out, const std::vector<RunRecord>& runs,
                          const std::map<int, std::string>& class_names) {
    out << kMetricsHeader << '\n';
    auto name = [&](int c) {
        auto it = class_names.find(c);
        return it == class_names.end() ? std::to_string(c) : it->second;
    };
    for (const auto& run : runs) {
        for (std::size_t k = 0; k < run.tm.size(); ++k) {
            const auto scan = k + 1;
            out << scan << ",tm," << fmt_num(run.tm[k]) << ",all," << run.run << '\n';
            out << scan << ",switches," << run.switches[k] << ",all," << run.run << '\n';
            for (const auto& [c, count] : run.cardinality[k]) {
                out << scan << ",card_estimated," << fmt_num(count.estimated) << ',' << name(c) << ',' << run.run << '\n';
                out << scan << ",card_truth," << fmt_num(count.truth) << ',' << name(c) << ',' << run.run << '\n';
            }
            for (const auto& [c, tally] : run.classification[k]) {
                out << scan << ",class_correct," << tally.correct << ',' << name(c) << ',' << run.run << '\n';
                out << scan << ",class_matched," << tally.matched << ',' << name(c) << ',' << run.run << '\n';
            }
        }
    }
}

}  // namespace tphd
