#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "traceauth/clustering.hpp"
#include "traceauth/format.hpp"
#include "traceauth/geo.hpp"
#include "traceauth/observation.hpp"
#include "traceauth/time.hpp"
#include "traceauth/verifier_mc.hpp"
#include "traceauth/verifier_mshmm.hpp"
#include "traceauth/verifier_sm.hpp"

namespace traceauth {

namespace detail {

inline std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open file: " + path);
    return in;
}

inline std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot open file for writing: " + path);
    return out;
}

inline void strip_cr(std::string& line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
}

inline std::vector<std::string> split_fields(const std::string& line, char delimiter) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(delimiter, start);
        if (pos == std::string::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

inline double parse_field_double(const std::string& field, std::size_t line_no,
                                 const char* what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(field, &used);
        if (used != field.size())
            throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error("line " + std::to_string(line_no) + ": malformed " + what +
                                 " field: '" + field + "'");
    }
}

inline void check_coordinates(double lat, double lon, std::size_t line_no) {
    if (lat < -90.0 || lat > 90.0)
        throw std::runtime_error("line " + std::to_string(line_no) + ": latitude out of range");
    if (lon < -180.0 || lon > 180.0)
        throw std::runtime_error("line " + std::to_string(line_no) + ": longitude out of range");
}

} // namespace detail

// ---------------------------------------------------------------------------
// GeoLife PLT
// ---------------------------------------------------------------------------

// Parses one PLT trajectory file: six header lines, then comma-separated
// records `latitude,longitude,flag,altitude,serial-date,date,time`. The
// explicit date/time fields are authoritative; the serial-date is ignored.
// Tolerates CRLF and LF endings alike. The whole file becomes one session.
inline Trace parse_plt(const std::string& path) {
    std::ifstream in = detail::open_input(path);
    Trace trace;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        detail::strip_cr(line);
        if (line_no <= 6) continue; // header block
        if (line.empty()) continue;
        const std::vector<std::string> fields = detail::split_fields(line, ',');
        if (fields.size() < 7)
            throw std::runtime_error("line " + std::to_string(line_no) +
                                     ": malformed record: expected 7 fields, got " +
                                     std::to_string(fields.size()));
        const double lat = detail::parse_field_double(fields[0], line_no, "latitude");
        const double lon = detail::parse_field_double(fields[1], line_no, "longitude");
        detail::check_coordinates(lat, lon, line_no);
        CivilSeconds ts;
        try {
            ts = parse_iso8601(fields[5] + " " + fields[6]);
        } catch (const std::exception& e) {
            throw std::runtime_error("line " + std::to_string(line_no) + ": " + e.what());
        }
        trace.points.push_back({lat, lon, ts});
    }
    if (!trace.points.empty()) trace.sessions = {{0, trace.points.size()}};
    return trace;
}

// ---------------------------------------------------------------------------
// Generic trace CSV
// ---------------------------------------------------------------------------

// Column layout for generic trace CSVs. Defaults match the writer below:
// `timestamp,lat,lon,session`. Columns set to -1 are absent.
struct ColumnMap {
    int time_col = 0;
    int lat_col = 1;
    int lon_col = 2;
    int session_col = 3;
    int user_col = -1;
    bool has_header = true;
    char delimiter = ',';
};

inline Trace parse_csv(const std::string& path, const ColumnMap& columns = {}) {
    if (columns.time_col < 0 || columns.lat_col < 0 || columns.lon_col < 0)
        throw std::invalid_argument("column map must set time, lat and lon columns");
    std::ifstream in = detail::open_input(path);
    Trace trace;
    std::string line;
    std::size_t line_no = 0;
    std::string session_value;
    bool have_session = false;
    const int max_col = std::max({columns.time_col, columns.lat_col, columns.lon_col,
                                  columns.session_col, columns.user_col});
    while (std::getline(in, line)) {
        ++line_no;
        detail::strip_cr(line);
        if (line_no == 1 && columns.has_header) continue;
        if (line.empty()) continue;
        const std::vector<std::string> fields = detail::split_fields(line, columns.delimiter);
        if (static_cast<int>(fields.size()) <= max_col)
            throw std::runtime_error("line " + std::to_string(line_no) + ": missing column " +
                                     std::to_string(max_col));
        const double lat =
            detail::parse_field_double(fields[columns.lat_col], line_no, "latitude");
        const double lon =
            detail::parse_field_double(fields[columns.lon_col], line_no, "longitude");
        detail::check_coordinates(lat, lon, line_no);
        CivilSeconds ts;
        try {
            ts = parse_iso8601(fields[columns.time_col]);
        } catch (const std::exception& e) {
            throw std::runtime_error("line " + std::to_string(line_no) + ": " + e.what());
        }
        if (columns.user_col >= 0) {
            const std::string& user = fields[columns.user_col];
            if (trace.user_id.empty())
                trace.user_id = user;
            else if (trace.user_id != user)
                throw std::runtime_error("line " + std::to_string(line_no) +
                                         ": multiple users in one file: '" + trace.user_id +
                                         "' and '" + user + "'");
        }
        if (columns.session_col >= 0) {
            const std::string& session = fields[columns.session_col];
            if (!have_session || session != session_value) {
                trace.sessions.emplace_back(trace.points.size(), trace.points.size());
                session_value = session;
                have_session = true;
            }
            trace.sessions.back().second = trace.points.size() + 1;
        }
        trace.points.push_back({lat, lon, ts});
    }
    if (trace.sessions.empty() && !trace.points.empty())
        trace.sessions = {{0, trace.points.size()}};
    return trace;
}

// Writes `timestamp,lat,lon,session` rows; parse_csv on the output
// reproduces the trace exactly (17-significant-digit coordinates).
inline void write_trace_csv(std::ostream& os, const Trace& trace) {
    os << "timestamp,lat,lon,session\n";
    std::vector<std::size_t> session_of(trace.points.size(), 0);
    for (std::size_t s = 0; s < trace.sessions.size(); ++s)
        for (std::size_t i = trace.sessions[s].first; i < trace.sessions[s].second; ++i)
            session_of[i] = s;
    for (std::size_t i = 0; i < trace.points.size(); ++i) {
        const GeoPoint& p = trace.points[i];
        os << format_iso8601(p.timestamp) << ',' << detail::format_double(p.lat) << ','
           << detail::format_double(p.lon) << ',' << session_of[i] << '\n';
    }
}

inline void write_trace_csv(const std::string& path, const Trace& trace) {
    std::ofstream out = detail::open_output(path);
    write_trace_csv(out, trace);
}

// ---------------------------------------------------------------------------
// Corpus manifest
// ---------------------------------------------------------------------------

struct CorpusEntry {
    std::string user_id;
    std::vector<std::string> files; // relative to the manifest directory
    std::string format = "csv";     // "csv" or "plt"
};

struct CorpusManifest {
    std::vector<CorpusEntry> users;
    std::string notes;
};

namespace detail {

inline void check_unique_users(const CorpusManifest& manifest) {
    for (std::size_t i = 0; i < manifest.users.size(); ++i)
        for (std::size_t j = i + 1; j < manifest.users.size(); ++j)
            if (manifest.users[i].user_id == manifest.users[j].user_id)
                throw std::runtime_error("duplicate user id in manifest: " +
                                         manifest.users[i].user_id);
}

} // namespace detail

inline void save_manifest(const std::string& path, const CorpusManifest& manifest) {
    detail::check_unique_users(manifest);
    nlohmann::json doc;
    doc["users"] = nlohmann::json::array();
    for (const CorpusEntry& entry : manifest.users) {
        nlohmann::json u;
        u["id"] = entry.user_id;
        u["files"] = entry.files;
        u["format"] = entry.format;
        doc["users"].push_back(std::move(u));
    }
    doc["notes"] = manifest.notes;
    std::ofstream out = detail::open_output(path);
    out << doc.dump(2) << '\n';
}

inline CorpusManifest load_manifest(const std::string& path) {
    std::ifstream in = detail::open_input(path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const std::exception& e) {
        throw std::runtime_error("malformed manifest " + path + ": " + e.what());
    }
    CorpusManifest manifest;
    if (doc.contains("notes")) manifest.notes = doc["notes"].get<std::string>();
    if (!doc.contains("users") || !doc["users"].is_array())
        throw std::runtime_error("malformed manifest " + path + ": missing users array");
    for (const auto& u : doc["users"]) {
        CorpusEntry entry;
        entry.user_id = u.at("id").get<std::string>();
        entry.files = u.at("files").get<std::vector<std::string>>();
        if (u.contains("format")) entry.format = u["format"].get<std::string>();
        if (entry.format != "csv" && entry.format != "plt")
            throw std::runtime_error("unknown trace format in manifest: " + entry.format);
        manifest.users.push_back(std::move(entry));
    }
    detail::check_unique_users(manifest);
    return manifest;
}

// Loads every user's files (paths resolved against base_dir), ordering the
// files chronologically; each file contributes its own sessions. Falls back
// to a whole-trace sort with a single session if files interleave in time.
inline std::vector<Trace> load_corpus(const CorpusManifest& manifest,
                                      const std::string& base_dir) {
    detail::check_unique_users(manifest);
    std::vector<Trace> corpus;
    corpus.reserve(manifest.users.size());
    for (const CorpusEntry& entry : manifest.users) {
        std::vector<Trace> parts;
        for (const std::string& file : entry.files) {
            const std::string full =
                (std::filesystem::path(base_dir) / file).string();
            parts.push_back(entry.format == "plt" ? parse_plt(full) : parse_csv(full));
        }
        std::stable_sort(parts.begin(), parts.end(), [](const Trace& a, const Trace& b) {
            if (a.points.empty() || b.points.empty()) return b.points.empty() < a.points.empty();
            return a.points.front().timestamp < b.points.front().timestamp;
        });
        Trace merged;
        merged.user_id = entry.user_id;
        for (const Trace& part : parts) {
            const std::size_t offset = merged.points.size();
            merged.points.insert(merged.points.end(), part.points.begin(), part.points.end());
            for (const auto& [begin, end] : part.sessions)
                merged.sessions.emplace_back(begin + offset, end + offset);
        }
        if (!merged.sorted()) {
            std::stable_sort(merged.points.begin(), merged.points.end(),
                             [](const GeoPoint& a, const GeoPoint& b) {
                                 return a.timestamp < b.timestamp;
                             });
            merged.sessions = {{0, merged.points.size()}};
        }
        corpus.push_back(std::move(merged));
    }
    return corpus;
}

// ---------------------------------------------------------------------------
// Model persistence
// ---------------------------------------------------------------------------

// A persisted model: the originating cluster model plus at most one trained
// verifier. kind is one of "cluster", "sm", "mc", "mshmm" (the hmm-lap
// variant persists as kind "mshmm" with mode laplace).
struct SavedModel {
    std::string kind = "cluster";
    ClusterModel clusters;
    std::variant<std::monostate, SMModel, MCModel, MSHMMModel> verifier;
};

namespace detail {

constexpr const char* kModelMagic = "trace-auth-model";
constexpr const char* kModelVersion = "v1";

inline void write_doubles(std::ostream& os, const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i)
        os << (i ? " " : "") << format_double(values[i]);
    os << '\n';
}

struct ModelReader {
    std::ifstream in;
    explicit ModelReader(const std::string& path) : in(open_input(path)) {}

    template <typename T>
    T next() {
        T value;
        if (!(in >> value))
            throw std::runtime_error("truncated or malformed model file");
        return value;
    }

    void expect(const std::string& token) {
        const std::string got = next<std::string>();
        if (got != token)
            throw std::runtime_error("truncated or malformed model file: expected '" + token +
                                     "', found '" + got + "'");
    }

    std::vector<double> doubles(std::size_t count) {
        std::vector<double> values(count);
        for (double& v : values) v = next<double>();
        return values;
    }
};

} // namespace detail

inline void save_model(const std::string& path, const SavedModel& model) {
    std::ofstream out = detail::open_output(path);
    out << detail::kModelMagic << ' ' << detail::kModelVersion << ' ' << model.kind << '\n';
    const ClusterModel& cm = model.clusters;
    out << "user " << (cm.user_id.empty() ? "-" : cm.user_id) << '\n';
    out << "r_max " << detail::format_double(cm.r_max_m) << '\n';
    out << "unknown_radius " << detail::format_double(cm.unknown_radius_m) << '\n';
    out << "transit_speed " << detail::format_double(cm.transit_speed_mps) << '\n';
    out << "clusters " << cm.clusters.size() << '\n';
    for (const LocationCluster& c : cm.clusters)
        out << c.id << ' ' << detail::format_double(c.center_lat) << ' '
            << detail::format_double(c.center_lon) << ' ' << detail::format_double(c.radius_m)
            << '\n';

    if (model.kind == "cluster") {
        if (!std::holds_alternative<std::monostate>(model.verifier))
            throw std::invalid_argument("cluster model must not carry a verifier");
    } else if (model.kind == "sm") {
        const SMModel& sm = std::get<SMModel>(model.verifier);
        out << "symbols " << sm.training_symbols.size() << '\n';
        for (std::size_t i = 0; i < sm.training_symbols.size(); ++i)
            out << (i ? " " : "") << sm.training_symbols[i];
        out << '\n';
    } else if (model.kind == "mc") {
        const MCModel& mc = std::get<MCModel>(model.verifier);
        out << "vocab " << mc.vocab_size << " delta " << detail::format_double(mc.delta) << '\n';
        detail::write_doubles(out, mc.prior);
        for (int row = 0; row < mc.vocab_size; ++row) {
            std::vector<double> r(mc.transitions.begin() + static_cast<std::ptrdiff_t>(row) * mc.vocab_size,
                                  mc.transitions.begin() + static_cast<std::ptrdiff_t>(row + 1) * mc.vocab_size);
            detail::write_doubles(out, r);
        }
    } else if (model.kind == "mshmm") {
        const MSHMMModel& hm = std::get<MSHMMModel>(model.verifier);
        out << "hidden " << hm.hidden_states << " vocab " << hm.vocab_size << " mode "
            << to_string(hm.mode) << " delta " << detail::format_double(hm.delta) << '\n';
        detail::write_doubles(out, hm.pi);
        for (int row = 0; row < hm.hidden_states; ++row) {
            std::vector<double> r(hm.a.begin() + static_cast<std::ptrdiff_t>(row) * hm.hidden_states,
                                  hm.a.begin() + static_cast<std::ptrdiff_t>(row + 1) * hm.hidden_states);
            detail::write_doubles(out, r);
        }
        for (int row = 0; row < hm.hidden_states; ++row) {
            std::vector<double> r(hm.b.begin() + static_cast<std::ptrdiff_t>(row) * hm.vocab_size,
                                  hm.b.begin() + static_cast<std::ptrdiff_t>(row + 1) * hm.vocab_size);
            detail::write_doubles(out, r);
        }
    } else {
        throw std::invalid_argument("unknown model kind: " + model.kind);
    }
    if (!out)
        throw std::runtime_error("failed writing model file: " + path);
}

inline SavedModel load_model(const std::string& path) {
    detail::ModelReader reader(path);
    if (reader.next<std::string>() != detail::kModelMagic)
        throw std::runtime_error("not a trace-auth-model file: " + path);
    const std::string version = reader.next<std::string>();
    if (version != detail::kModelVersion)
        throw std::runtime_error("unsupported model version: " + version);

    SavedModel model;
    model.kind = reader.next<std::string>();
    reader.expect("user");
    model.clusters.user_id = reader.next<std::string>();
    if (model.clusters.user_id == "-") model.clusters.user_id.clear();
    reader.expect("r_max");
    model.clusters.r_max_m = reader.next<double>();
    reader.expect("unknown_radius");
    model.clusters.unknown_radius_m = reader.next<double>();
    reader.expect("transit_speed");
    model.clusters.transit_speed_mps = reader.next<double>();
    reader.expect("clusters");
    const auto n_clusters = reader.next<std::size_t>();
    model.clusters.clusters.resize(n_clusters);
    for (LocationCluster& c : model.clusters.clusters) {
        c.id = reader.next<int>();
        c.center_lat = reader.next<double>();
        c.center_lon = reader.next<double>();
        c.radius_m = reader.next<double>();
    }

    if (model.kind == "cluster") {
        // nothing more to read
    } else if (model.kind == "sm") {
        reader.expect("symbols");
        const auto count = reader.next<std::size_t>();
        SMModel sm;
        sm.training_symbols.resize(count);
        for (int& s : sm.training_symbols) s = reader.next<int>();
        model.verifier = std::move(sm);
    } else if (model.kind == "mc") {
        reader.expect("vocab");
        MCModel mc;
        mc.vocab_size = reader.next<int>();
        reader.expect("delta");
        mc.delta = reader.next<double>();
        mc.prior = reader.doubles(static_cast<std::size_t>(mc.vocab_size));
        mc.transitions =
            reader.doubles(static_cast<std::size_t>(mc.vocab_size) * mc.vocab_size);
        model.verifier = std::move(mc);
    } else if (model.kind == "mshmm") {
        reader.expect("hidden");
        MSHMMModel hm;
        hm.hidden_states = reader.next<int>();
        reader.expect("vocab");
        hm.vocab_size = reader.next<int>();
        reader.expect("mode");
        const std::string mode = reader.next<std::string>();
        if (mode == "marginal")
            hm.mode = SmoothingMode::marginal;
        else if (mode == "laplace")
            hm.mode = SmoothingMode::laplace;
        else
            throw std::runtime_error("truncated or malformed model file: bad mode '" + mode +
                                     "'");
        reader.expect("delta");
        hm.delta = reader.next<double>();
        hm.pi = reader.doubles(static_cast<std::size_t>(hm.hidden_states));
        hm.a = reader.doubles(static_cast<std::size_t>(hm.hidden_states) * hm.hidden_states);
        hm.b = reader.doubles(static_cast<std::size_t>(hm.hidden_states) * hm.vocab_size);
        model.verifier = std::move(hm);
    } else {
        throw std::runtime_error("unknown model kind: " + model.kind);
    }
    return model;
}

// Typed load: fails loudly when the file holds a different model kind.
inline SavedModel load_model_as(const std::string& path, const std::string& kind) {
    SavedModel model = load_model(path);
    if (model.kind != kind)
        throw std::runtime_error("model kind mismatch: expected " + kind + ", found " +
                                 model.kind);
    return model;
}

// ---------------------------------------------------------------------------
// Observation sequence export
// ---------------------------------------------------------------------------

// One `timestamp,symbol_id` pair per line.
inline void write_sequence(std::ostream& os, const ObservationSequence& seq) {
    for (const Observation& o : seq.symbols)
        os << format_iso8601(o.timestamp) << ',' << o.symbol << '\n';
}

inline void write_sequence(const std::string& path, const ObservationSequence& seq) {
    std::ofstream out = detail::open_output(path);
    write_sequence(out, seq);
}

inline ObservationSequence read_sequence(const std::string& path,
                                         const std::string& user_id = "") {
    std::ifstream in = detail::open_input(path);
    ObservationSequence seq;
    seq.user_id = user_id;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        detail::strip_cr(line);
        if (line.empty()) continue;
        const std::size_t comma = line.rfind(',');
        if (comma == std::string::npos)
            throw std::runtime_error("line " + std::to_string(line_no) +
                                     ": malformed sequence line");
        Observation o;
        try {
            o.timestamp = parse_iso8601(line.substr(0, comma));
            o.symbol = std::stoi(line.substr(comma + 1));
        } catch (const std::exception& e) {
            throw std::runtime_error("line " + std::to_string(line_no) + ": " + e.what());
        }
        seq.symbols.push_back(o);
    }
    return seq;
}

} // namespace traceauth
