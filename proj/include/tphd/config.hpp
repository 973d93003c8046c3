#pragma once

#include "tphd/error.hpp"
#include "tphd/monte_carlo.hpp"

#include "json.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

namespace tphd {

using Json = nlohmann::json;

/// Fully parsed experiment file.
struct LoadedConfig {
    Experiment experiment;
    Json canonical;
    std::string digest;  ///< 16 hex digits
    std::map<int, std::string> class_names;
};

namespace detail {

inline double deg_to_rad(double deg) { return deg / 180.0 * std::numbers::pi; }

/// Minimal scanner that maps a slash-separated key path to the 1-based line where its
/// value starts. Used only to annotate diagnostics of an already valid
/// document; returns 0 when the pointer cannot be resolved.
class LineLocator {
public:
    explicit LineLocator(const std::string& text) : text_(text) {}

    int find(const std::string& pointer) {
        target_ = pointer;
        pos_ = 0;
        line_ = 1;
        found_ = 0;
        skip_ws();
        value("");
        return found_;
    }

private:
    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
            if (text_[pos_] == '\n') ++line_;
            ++pos_;
        }
    }

    std::string string_token() {
        std::string out;
        ++pos_;
        while (pos_ < text_.size() && text_[pos_] != '"') {
            if (text_[pos_] == '\\' && pos_ + 1 < text_.size()) ++pos_;
            out += text_[pos_++];
        }
        ++pos_;
        return out;
    }

    void value(const std::string& path) {
        if (found_ != 0 || pos_ >= text_.size()) return;
        if (path == target_) {
            found_ = line_;
            return;
        }
        const char c = text_[pos_];
        if (c == '{') {
            ++pos_;
            skip_ws();
            while (pos_ < text_.size() && text_[pos_] != '}' && found_ == 0) {
                const std::string key = string_token();
                skip_ws();
                ++pos_;  // ':'
                skip_ws();
                value(path + "/" + key);
                skip_ws();
                if (pos_ < text_.size() && text_[pos_] == ',') {
                    ++pos_;
                    skip_ws();
                }
            }
            ++pos_;
        } else if (c == '[') {
            ++pos_;
            skip_ws();
            for (int i = 0; pos_ < text_.size() && text_[pos_] != ']' && found_ == 0; ++i) {
                value(path + "/" + std::to_string(i));
                skip_ws();
                if (pos_ < text_.size() && text_[pos_] == ',') {
                    ++pos_;
                    skip_ws();
                }
            }
            ++pos_;
        } else if (c == '"') {
            string_token();
        } else {
            while (pos_ < text_.size() && text_[pos_] != ',' && text_[pos_] != '}' && text_[pos_] != ']' &&
                   !std::isspace(static_cast<unsigned char>(text_[pos_])))
                ++pos_;
        }
    }

    const std::string& text_;
    std::string target_;
    std::size_t pos_ = 0;
    int line_ = 1;
    int found_ = 0;
};

/// Raised while reading the document; carries the JSON pointer of the
/// offending value so the loader can report its line.
struct FieldError {
    std::string pointer;
    std::string message;
};

class Reader {
public:
    Reader(const Json& node, std::string pointer) : node_(&node), pointer_(std::move(pointer)) {}

    [[nodiscard]] const std::string& pointer() const { return pointer_; }
    [[nodiscard]] const Json& node() const { return *node_; }

    [[noreturn]] void fail(const std::string& message) const { throw FieldError{pointer_, message}; }

    [[nodiscard]] bool has(const std::string& key) const { return node_->is_object() && node_->contains(key); }

    [[nodiscard]] Reader at(const std::string& key) const {
        if (!node_->is_object()) fail("expected an object");
        auto it = node_->find(key);
        if (it == node_->end()) fail("missing field '" + key + "'");
        return {*it, pointer_ + "/" + key};
    }

    [[nodiscard]] Reader at(std::size_t i) const {
        if (!node_->is_array() || i >= node_->size()) fail("index out of range");
        return {(*node_)[i], pointer_ + "/" + std::to_string(i)};
    }

    [[nodiscard]] std::size_t size() const {
        if (!node_->is_array()) fail("expected an array");
        return node_->size();
    }

    [[nodiscard]] double number() const {
        if (!node_->is_number()) fail("expected a number");
        return node_->get<double>();
    }

    [[nodiscard]] std::int64_t integer() const {
        if (node_->is_number_integer()) return node_->get<std::int64_t>();
        if (node_->is_number_float()) {
            const double v = node_->get<double>();
            if (std::nearbyint(v) == v && std::abs(v) < 9.0e15) return static_cast<std::int64_t>(v);
        }
        fail("expected an integer");
    }

    [[nodiscard]] std::uint64_t unsigned_integer() const {
        if (node_->is_number_unsigned()) return node_->get<std::uint64_t>();
        if (node_->is_number_integer() && node_->get<std::int64_t>() >= 0)
            return static_cast<std::uint64_t>(node_->get<std::int64_t>());
        fail("expected a non-negative integer");
    }

    [[nodiscard]] bool boolean() const {
        if (!node_->is_boolean()) fail("expected true or false");
        return node_->get<bool>();
    }

    [[nodiscard]] std::string string() const {
        if (!node_->is_string()) fail("expected a string");
        return node_->get<std::string>();
    }

    [[nodiscard]] std::vector<double> numbers(std::size_t expected = 0) const {
        const std::size_t n = size();
        if (expected != 0 && n != expected) fail("expected " + std::to_string(expected) + " numbers");
        std::vector<double> out;
        for (std::size_t i = 0; i < n; ++i) out.push_back(at(i).number());
        return out;
    }

    [[nodiscard]] double number_or(const std::string& key, double fallback) const {
        return has(key) ? at(key).number() : fallback;
    }

private:
    const Json* node_;
    std::string pointer_;
};

inline Vec6 to_vec6(const Reader& r) {
    const auto v = r.numbers(6);
    Vec6 out;
    for (int i = 0; i < 6; ++i) out(i) = v[static_cast<std::size_t>(i)];
    return out;
}

inline int class_by_name(const std::map<std::string, int>& names, const Reader& r) {
    const std::string name = r.string();
    auto it = names.find(name);
    if (it == names.end()) r.fail("unknown class '" + name + "'");
    return it->second;
}

inline TargetClassSpec read_class(const Reader& r, double dt) {
    TargetClassSpec spec;
    spec.id = static_cast<int>(r.at("id").integer());
    spec.name = r.at("name").string();
    spec.p_survive = r.at("p_survive").number();
    spec.p_detect = r.at("p_detect").number();
    const double sigma_sq = r.at("process_noise_variance").number();
    const Reader models = r.at("models");
    for (std::size_t i = 0; i < models.size(); ++i) {
        const Reader m = models.at(i);
        const std::string type = m.at("type").string();
        if (type == "cv") {
            spec.models.push_back(MotionModel::constant_velocity(dt, sigma_sq));
        } else if (type == "ct") {
            const double deg = m.at("turn_rate_deg").number();
            spec.models.push_back(
                MotionModel::coordinated_turn(deg_to_rad(deg), dt, sigma_sq, "CT(" + Json(deg).dump() + " deg/s)"));
        } else {
            m.at("type").fail("model type must be 'cv' or 'ct'");
        }
    }
    const Reader sw = r.at("switch_matrix");
    const auto n = static_cast<Eigen::Index>(sw.size());
    spec.switch_matrix.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto row = sw.at(static_cast<std::size_t>(i)).numbers(static_cast<std::size_t>(n));
        for (Eigen::Index j = 0; j < n; ++j) spec.switch_matrix(i, j) = row[static_cast<std::size_t>(j)];
    }
    try {
        spec.validate();
    } catch (const Error& e) {
        r.fail(e.what());
    }
    return spec;
}

inline SensorModel read_sensor(const Reader& r) {
    SensorModel s;
    const std::string type = r.at("type").string();
    if (type == "range_bearing") {
        s.mode = SensorModel::Mode::ekf;
        const double az = deg_to_rad(r.at("azimuth_std_deg").number());
        const double el = deg_to_rad(r.at("elevation_std_deg").number());
        const double rg = r.at("range_std").number();
        s.noise = Vec3{az * az, el * el, rg * rg}.asDiagonal();
        s.axis_guard = r.number_or("axis_guard", s.axis_guard);
        s.relinearize_ratio = r.number_or("relinearize_ratio", s.relinearize_ratio);
        if (r.has("relinearize_iterations"))
            s.relinearize_iterations = static_cast<int>(r.at("relinearize_iterations").integer());
    } else if (type == "linear") {
        s.mode = SensorModel::Mode::linear;
        const double sd = r.at("position_std").number();
        s.noise = Mat3::Identity() * (sd * sd);
    } else {
        r.at("type").fail("sensor type must be 'range_bearing' or 'linear'");
    }
    try {
        s.validate();
    } catch (const Error& e) {
        r.fail(e.what());
    }
    return s;
}

inline ClutterModel read_clutter(const Reader& r) {
    ClutterModel c;
    c.rate = r.at("rate").number();
    if (r.has("azimuth_deg")) {
        const auto v = r.at("azimuth_deg").numbers(2);
        c.azimuth_min = deg_to_rad(v[0]);
        c.azimuth_max = deg_to_rad(v[1]);
    }
    if (r.has("elevation_deg")) {
        const auto v = r.at("elevation_deg").numbers(2);
        c.elevation_min = deg_to_rad(v[0]);
        c.elevation_max = deg_to_rad(v[1]);
    }
    if (r.has("range")) {
        const auto v = r.at("range").numbers(2);
        c.range_min = v[0];
        c.range_max = v[1];
    }
    try {
        c.validate();
    } catch (const Error& e) {
        r.fail(e.what());
    }
    return c;
}

inline BirthModel read_birth(const Reader& r, const std::map<std::string, int>& names, const ClassRegistry& classes) {
    BirthModel birth;
    const double sd = r.at("std").number();
    const Mat6 cov = Mat6::Identity() * (sd * sd);
    std::vector<Vec6> locations;
    const Reader loc = r.at("locations");
    for (std::size_t i = 0; i < loc.size(); ++i) locations.push_back(to_vec6(loc.at(i)));

    const Reader per_class = r.at("classes");
    for (std::size_t i = 0; i < per_class.size(); ++i) {
        const Reader c = per_class.at(i);
        const int id = class_by_name(names, c.at("class"));
        const double w = c.at("weight").number();
        const auto model_weights = c.at("model_weights").numbers();
        for (const auto& m : locations) birth.entries[id].push_back({w, model_weights, m, cov});
    }
    try {
        birth.validate(classes);
    } catch (const Error& e) {
        r.fail(e.what());
    }
    return birth;
}

inline FilterConfig read_filter(const Reader& r) {
    FilterConfig f;
    if (r.has("l_scan")) {
        const Reader l = r.at("l_scan");
        if (l.node().is_string()) {
            if (l.string() != "unbounded") l.fail("l_scan must be a positive integer or \"unbounded\"");
            f.l_scan = kUnboundedWindow;
        } else {
            const auto v = l.integer();
            if (v < 1 || v > kUnboundedWindow) l.fail("l_scan must be >= 1");
            f.l_scan = static_cast<int>(v);
        }
    }
    f.prune_threshold = r.number_or("prune_threshold", f.prune_threshold);
    f.absorb_threshold = r.number_or("absorb_threshold", f.absorb_threshold);
    if (r.has("max_components")) f.max_components = static_cast<int>(r.at("max_components").integer());
    if (r.has("model_merge")) {
        const std::string m = r.at("model_merge").string();
        if (m == "pair_exact") f.model_merge = FilterConfig::ModelMerge::pair_exact;
        else if (m == "imm_merge") f.model_merge = FilterConfig::ModelMerge::imm_merge;
        else r.at("model_merge").fail("model_merge must be 'pair_exact' or 'imm_merge'");
    }
    if (r.has("extraction")) {
        const std::string m = r.at("extraction").string();
        if (m == "top_n") f.extraction = FilterConfig::Extraction::top_n;
        else if (m == "threshold") f.extraction = FilterConfig::Extraction::threshold;
        else r.at("extraction").fail("extraction must be 'top_n' or 'threshold'");
    }
    f.extraction_threshold = r.number_or("extraction_threshold", f.extraction_threshold);
    try {
        f.validate();
    } catch (const Error& e) {
        r.fail(e.what());
    }
    return f;
}

inline MetricConfig read_metric(const Reader& r) {
    MetricConfig m;
    m.order = r.number_or("order", m.order);
    m.cutoff = r.number_or("cutoff", m.cutoff);
    m.switch_cost = r.number_or("switch_cost", m.switch_cost);
    if (r.has("include_velocity")) m.include_velocity = r.at("include_velocity").boolean();
    try {
        m.validate();
    } catch (const Error& e) {
        r.fail(e.what());
    }
    return m;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace detail

/// FNV-1a over the canonical dump (object keys sorted, no whitespace), so
/// key order and formatting do not change the digest.
inline std::string config_digest(const Json& doc) { return detail::hex64(label_hash(doc.dump())); }

/// Parses and validates an experiment document. Errors are ConfigError with
/// "<source>:<line>: <message>".
inline LoadedConfig parse_config(const std::string& text, const std::string& source = "config") {
    Json doc;
    try {
        doc = Json::parse(text);
    } catch (const Json::parse_error& e) {
        int line = 1;
        const std::size_t end = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
        for (std::size_t i = 0; i < end; ++i)
            if (text[i] == '\n') ++line;
        std::string what = e.what();
        if (auto p = what.find("parse error"); p != std::string::npos) what = what.substr(p);
        throw ConfigError(source + ":" + std::to_string(line) + ": " + what);
    }

    LoadedConfig out;
    try {
        const detail::Reader root(doc, "");
        if (!doc.is_object()) root.fail("top level must be an object");
        Experiment& exp = out.experiment;
        const detail::Reader sc = root.at("scenario");
        const auto duration = sc.at("duration").integer();
        if (duration < 1 || duration > 1000000) sc.at("duration").fail("duration must be >= 1");
        exp.scenario.duration = static_cast<int>(duration);
        exp.scenario.dt = sc.number_or("dt", 1.0);
        if (!(exp.scenario.dt > 0.0)) sc.at("dt").fail("dt must be > 0");
        exp.scenario.seed = sc.has("seed") ? sc.at("seed").unsigned_integer() : 0;
        if (sc.has("regenerate_truth")) exp.scenario.regenerate_truth = sc.at("regenerate_truth").boolean();

        std::map<std::string, int> names;
        const detail::Reader classes = root.at("classes");
        if (classes.size() == 0) classes.fail("at least one class is required");
        for (std::size_t i = 0; i < classes.size(); ++i) {
            const detail::Reader c = classes.at(i);
            TargetClassSpec spec = detail::read_class(c, exp.scenario.dt);
            if (exp.scenario.classes.count(spec.id) != 0) c.at("id").fail("duplicate class id");
            if (names.count(spec.name) != 0) c.at("name").fail("duplicate class name");
            names[spec.name] = spec.id;
            out.class_names[spec.id] = spec.name;
            exp.scenario.classes[spec.id] = std::move(spec);
        }

        exp.scenario.sensor = detail::read_sensor(root.at("sensor"));
        exp.scenario.clutter = detail::read_clutter(root.at("clutter"));
        if (exp.scenario.sensor.mode == SensorModel::Mode::linear && exp.scenario.clutter.rate > 0.0)
            root.at("clutter").at("rate").fail("clutter requires the range_bearing sensor");

        const detail::Reader targets = sc.at("targets");
        for (std::size_t i = 0; i < targets.size(); ++i) {
            const detail::Reader t = targets.at(i);
            TargetSpec spec;
            spec.name = t.has("name") ? t.at("name").string() : "target" + std::to_string(i + 1);
            spec.class_id = detail::class_by_name(names, t.at("class"));
            spec.birth_time = static_cast<int>(t.at("birth").integer());
            spec.death_time = static_cast<int>(t.at("death").integer());
            spec.initial = detail::to_vec6(t.at("state"));
            if (t.has("initial_model")) spec.initial_model = static_cast<int>(t.at("initial_model").integer());
            if (t.has("schedule")) {
                const detail::Reader s = t.at("schedule");
                for (std::size_t k = 0; k < s.size(); ++k) spec.schedule.push_back(static_cast<int>(s.at(k).integer()));
            }
            exp.scenario.targets.push_back(std::move(spec));
            try {
                exp.scenario.validate();
            } catch (const Error& e) {
                t.fail(e.what());
            }
        }
        try {
            exp.scenario.validate();
        } catch (const Error& e) {
            sc.fail(e.what());
        }

        exp.birth = detail::read_birth(root.at("birth"), names, exp.scenario.classes);
        exp.filter = root.has("filter") ? detail::read_filter(root.at("filter")) : FilterConfig{};
        exp.metric = root.has("metric") ? detail::read_metric(root.at("metric")) : MetricConfig{};
    } catch (const detail::FieldError& e) {
        const int line = detail::LineLocator(text).find(e.pointer);
        const std::string where = e.pointer.empty() ? "" : " (" + e.pointer + ")";
        throw ConfigError(source + ":" + std::to_string(line) + ": " + e.message + where);
    }

    out.canonical = doc;
    out.digest = config_digest(doc);
    return out;
}

inline LoadedConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(path + ":0: cannot open config file");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path);
}

}  // namespace tphd
