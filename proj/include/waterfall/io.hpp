#pragma once

// Artifact serialization.
//
// Text artifacts (CSV, JSON, the sale-vector store) are byte-stable:
// floating point values use the shortest round-trip decimal form and JSON
// objects serialize with sorted keys. The matrix store is a little-endian
// binary file with a JSON sidecar describing its contents.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "core.hpp"
#include "evaluate.hpp"
#include "ingest.hpp"
#include "search.hpp"
#include "simulate.hpp"
#include "valuation.hpp"

namespace waterfall {

using json = nlohmann::json;

/// A referenced file is absent or unreadable.
struct IoError : Error {
    using Error::Error;
};

namespace detail {

inline std::ifstream open_input(const std::string& path, bool binary = false) {
    std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    return in;
}

inline std::ofstream open_output(const std::string& path, bool binary = false) {
    std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    return out;
}

template <typename T>
void put_raw(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get_raw(std::istream& in, const char* what) {
    T v{};
    if (!in.read(reinterpret_cast<char*>(&v), sizeof v))
        throw FormatError(std::string("truncated matrix store while reading ") + what);
    return v;
}

inline void put_string(std::ostream& out, const std::string& s) {
    put_raw<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& in, const char* what) {
    auto n = get_raw<std::uint32_t>(in, what);
    std::string s(n, '\0');
    if (n && !in.read(s.data(), n))
        throw FormatError(std::string("truncated matrix store while reading ") + what);
    return s;
}

} // namespace detail

// ---- hashing -----------------------------------------------------------------

/// FNV-1a of a file's bytes, as fixed-width hex. Used in manifests.
inline std::string file_digest(const std::string& path) {
    auto in = detail::open_input(path, true);
    std::uint64_t h = 0xcbf29ce484222325ull;
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ull;
        }
        if (!in) break;
    }
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
    return hex;
}

// ---- waterfall CSV --------------------------------------------------------------

inline void write_waterfall_csv(std::ostream& out, const Waterfall& w) {
    out << "position,network,price\n";
    for (std::size_t i = 0; i < w.instances.size(); ++i)
        out << i << ',' << w.instances[i].network.value << ','
            << format_double(w.instances[i].price) << '\n';
}

inline void save_waterfall_csv(const std::string& path, const Waterfall& w) {
    auto out = detail::open_output(path);
    write_waterfall_csv(out, w);
}

inline Waterfall read_waterfall_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw FormatError("waterfall CSV is empty, expected a header");
    if (detail::trim(line) != "position,network,price")
        throw FormatError("waterfall CSV header must be position,network,price");
    std::vector<std::pair<std::int64_t, Instance>> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        auto t = detail::trim(line);
        if (t.empty()) continue;
        auto cols = detail::split_csv_line(t);
        std::int64_t pos;
        double price;
        if (cols.size() != 3 || !detail::parse_int(detail::trim(cols[0]), pos) ||
            !detail::parse_double(detail::trim(cols[2]), price) ||
            detail::trim(cols[1]).empty())
            throw FormatError("waterfall CSV line " + std::to_string(line_no) + " is malformed");
        rows.emplace_back(pos, Instance{AdNetworkId(std::string(detail::trim(cols[1]))), price});
    }
    std::sort(rows.begin(), rows.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    Waterfall w;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].first != static_cast<std::int64_t>(i))
            throw FormatError("waterfall CSV positions must be 0..n-1 without gaps");
        w.instances.push_back(rows[i].second);
    }
    return w;
}

inline Waterfall load_waterfall_csv(const std::string& path) {
    auto in = detail::open_input(path);
    return read_waterfall_csv(in);
}

inline json to_json(const Waterfall& w) {
    json j = json::array();
    for (const auto& inst : w.instances) {
        json ji;
        ji["network"] = inst.network.value;
        ji["price"] = inst.price;
        j.push_back(ji);
    }
    return j;
}

inline Waterfall waterfall_from_json(const json& j) {
    if (!j.is_array()) throw FormatError("expected a waterfall: an array of instances");
    Waterfall w;
    for (const auto& ji : j) {
        if (!ji.is_object() || !ji.contains("network") || !ji.contains("price"))
            throw FormatError("waterfall instances need \"network\" and \"price\"");
        w.instances.push_back(
            {AdNetworkId(ji["network"].get<std::string>()), ji["price"].get<double>()});
    }
    return w;
}

// ---- impression vectors and simulation results -------------------------------------

inline json to_json(const SimulationResult& r) {
    json j;
    j["q_prime"] = r.q_prime;
    j["requests"] = r.requests;
    j["unsold_users"] = r.unsold_users;
    j["revenue"] = r.revenue;
    j["seed"] = r.seed;
    return j;
}

/// Accepts a bare JSON array, or an object with "q", "q_prime", or
/// "impressions".
inline ImpressionVector impressions_from_json(const json& j) {
    const json* arr = nullptr;
    if (j.is_array()) {
        arr = &j;
    } else if (j.is_object()) {
        for (const char* key : {"q", "q_prime", "impressions"})
            if (j.contains(key) && j[key].is_array()) {
                arr = &j[key];
                break;
            }
    }
    if (!arr) throw FormatError("expected an impression vector: an array or {\"q\": [...]}");
    ImpressionVector q;
    for (const auto& v : *arr) {
        if (!v.is_number_integer() && !v.is_number_unsigned())
            throw FormatError("impression counts must be integers");
        q.push_back(v.get<std::int64_t>());
    }
    return q;
}

inline json parse_json_file(const std::string& path) {
    auto in = detail::open_input(path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw FormatError("'" + path + "' is not valid JSON");
    return j;
}

inline void save_json(const std::string& path, const json& j) {
    auto out = detail::open_output(path);
    out << j.dump(2) << '\n';
}

// ---- calibration artifacts -----------------------------------------------------------

inline json to_json(const CalibrationCoefficients& z) {
    json j;
    j["zeta"] = json::object();
    for (const auto& [net, v] : z.zeta) j["zeta"][net] = v;
    return j;
}

inline CalibrationCoefficients zeta_from_json(const json& j) {
    if (!j.is_object() || !j.contains("zeta") || !j["zeta"].is_object())
        throw FormatError("expected {\"zeta\": {network: coefficient}}");
    CalibrationCoefficients z;
    for (const auto& [net, v] : j["zeta"].items()) {
        if (!v.is_number()) throw FormatError("calibration coefficients must be numbers");
        double d = v.get<double>();
        if (!(d > 0.0)) throw FormatError("calibration coefficients must be positive");
        z.zeta[net] = d;
    }
    return z;
}

inline json to_json(const CalibrationReport& r) {
    json j;
    j["initial_score"] = r.initial_score;
    j["final_score"] = r.final_score;
    j["round_scores"] = r.round_scores;
    j["evaluations"] = r.evaluations;
    j["converged"] = r.converged;
    j["steps"] = json::array();
    for (const auto& s : r.steps) {
        json e;
        e["round"] = s.round;
        e["network"] = s.network;
        e["zeta"] = s.zeta;
        e["score"] = s.score;
        j["steps"].push_back(e);
    }
    return j;
}

// ---- search traces --------------------------------------------------------------------

inline json to_json(const SearchTrace& t) {
    json j;
    j["algorithm"] = t.algorithm;
    j["converged"] = t.converged;
    j["total_candidates"] = t.total_candidates;
    j["entries"] = json::array();
    for (const auto& e : t.entries) {
        json je;
        je["iteration"] = e.iteration;
        je["move_kind"] = e.move_kind;
        je["move_detail"] = e.move_detail;
        je["revenue"] = e.revenue;
        je["adopted_revenue"] = e.adopted_revenue;
        je["candidates_evaluated"] = e.candidates_evaluated;
        je["cumulative_candidates"] = e.cumulative_candidates;
        je["waterfall"] = to_json(e.waterfall);
        j["entries"].push_back(je);
    }
    return j;
}

inline SearchTrace trace_from_json(const json& j) {
    if (!j.is_object() || !j.contains("entries") || !j["entries"].is_array())
        throw FormatError("expected a search trace object with an entries array");
    SearchTrace t;
    t.algorithm = j.value("algorithm", std::string());
    t.converged = j.value("converged", false);
    t.total_candidates = j.value("total_candidates", std::uint64_t{0});
    for (const auto& je : j["entries"]) {
        TraceEntry e;
        e.iteration = je.at("iteration").get<int>();
        e.move_kind = je.at("move_kind").get<std::string>();
        e.move_detail = je.value("move_detail", std::string());
        e.revenue = je.at("revenue").get<double>();
        e.adopted_revenue = je.value("adopted_revenue", e.revenue);
        e.candidates_evaluated = je.value("candidates_evaluated", std::uint64_t{0});
        e.cumulative_candidates = je.value("cumulative_candidates", std::uint64_t{0});
        if (je.contains("waterfall")) e.waterfall = waterfall_from_json(je["waterfall"]);
        t.entries.push_back(std::move(e));
    }
    return t;
}

inline void write_trace_csv(std::ostream& out, const SearchTrace& t) {
    out << "iteration,revenue,candidates_evaluated,move_kind,move_detail\n";
    for (const auto& e : t.entries)
        out << e.iteration << ',' << format_double(e.revenue) << ',' << e.candidates_evaluated
            << ',' << e.move_kind << ',' << e.move_detail << '\n';
}

inline void save_trace(const std::string& json_path, const std::string& csv_path,
                       const SearchTrace& t) {
    save_json(json_path, to_json(t));
    auto out = detail::open_output(csv_path);
    write_trace_csv(out, t);
}

// ---- sales CSV ---------------------------------------------------------------------------

/// Inverse of parse_records: emits the canonical sales header and one row
/// per record, dates in ISO form.
inline void write_sales_csv(std::ostream& out, const SaleEventDataset& ds) {
    out << "date,hour,ad_network,user_id,impressions,revenue\n";
    for (const auto& r : ds.records)
        out << detail::day_to_string(r.day) << ',' << r.hour << ',' << r.network.value << ','
            << r.user << ',' << r.impressions << ',' << format_double(r.revenue) << '\n';
}

inline void save_sales_csv(const std::string& path, const SaleEventDataset& ds) {
    auto out = detail::open_output(path);
    write_sales_csv(out, ds);
}

// ---- sale-vector store ------------------------------------------------------------------

/// Line format: user <TAB> network <TAB> count <TAB> space-separated prices.
/// Rows are sorted by (user, network).
inline void write_vector_store(std::ostream& out, const UserSaleVectors& v) {
    out << "WFVEC1\n";
    for (const auto& [user, nets] : v.by_user)
        for (const auto& [net, samples] : nets) {
            out << user << '\t' << net.value << '\t' << samples.size() << '\t';
            for (std::size_t i = 0; i < samples.size(); ++i) {
                if (i) out << ' ';
                out << format_double(samples[i]);
            }
            out << '\n';
        }
}

inline void save_vector_store(const std::string& path, const UserSaleVectors& v) {
    auto out = detail::open_output(path);
    write_vector_store(out, v);
}

inline UserSaleVectors read_vector_store(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || detail::trim(line) != "WFVEC1")
        throw FormatError("sale-vector store must start with the WFVEC1 magic line");
    UserSaleVectors v;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        std::istringstream ls(line);
        std::string user, net, count_s;
        if (!std::getline(ls, user, '\t') || !std::getline(ls, net, '\t') ||
            !std::getline(ls, count_s, '\t'))
            throw FormatError("vector store line " + std::to_string(line_no) + " is malformed");
        std::int64_t n;
        if (!detail::parse_int(count_s, n) || n < 0)
            throw FormatError("vector store line " + std::to_string(line_no) + ": bad count");
        std::vector<double> samples;
        samples.reserve(static_cast<std::size_t>(n));
        double x;
        while (ls >> x) samples.push_back(x);
        if (static_cast<std::int64_t>(samples.size()) != n)
            throw FormatError("vector store line " + std::to_string(line_no) +
                              ": count does not match the sample list");
        v.by_user[user][AdNetworkId(net)] = std::move(samples);
    }
    return v;
}

inline UserSaleVectors load_vector_store(const std::string& path) {
    auto in = detail::open_input(path);
    return read_vector_store(in);
}

// ---- matrix store --------------------------------------------------------------------------

/// Binary layout: "WFBM1\n", u64 user count, u64 network count, f64 price
/// scale, user ids, network ids, then row-major (alpha f64, beta f64,
/// provenance u8). A JSON sidecar at <path>.meta.json carries summary
/// metadata for humans and manifests.
inline void save_matrix(const std::string& path, const ValuationMatrix& m,
                        std::uint64_t seed = 0) {
    {
        auto out = detail::open_output(path, true);
        out << "WFBM1\n";
        detail::put_raw<std::uint64_t>(out, m.user_count());
        detail::put_raw<std::uint64_t>(out, m.network_count());
        detail::put_raw<double>(out, m.price_scale());
        for (const auto& u : m.users()) detail::put_string(out, u);
        for (const auto& k : m.networks()) detail::put_string(out, k.value);
        for (const auto& e : m.entries()) {
            detail::put_raw<double>(out, e.alpha);
            detail::put_raw<double>(out, e.beta);
            detail::put_raw<std::uint8_t>(out, static_cast<std::uint8_t>(e.provenance));
        }
    }
    json meta;
    meta["users"] = m.user_count();
    meta["networks"] = json::array();
    for (const auto& k : m.networks()) meta["networks"].push_back(k.value);
    meta["price_scale"] = m.price_scale();
    meta["seed"] = seed;
    std::map<std::string, std::uint64_t> prov;
    for (const auto& e : m.entries()) ++prov[to_string(e.provenance)];
    meta["provenance_counts"] = prov;
    save_json(path + ".meta.json", meta);
}

inline ValuationMatrix load_matrix(const std::string& path) {
    auto in = detail::open_input(path, true);
    std::string magic(6, '\0');
    if (!in.read(magic.data(), 6) || magic != "WFBM1\n")
        throw FormatError("'" + path + "' is not a matrix store (bad magic)");
    auto U = detail::get_raw<std::uint64_t>(in, "user count");
    auto K = detail::get_raw<std::uint64_t>(in, "network count");
    auto scale = detail::get_raw<double>(in, "price scale");
    if (U == 0 || K == 0 || U > (1ull << 32) || K > (1ull << 20))
        throw FormatError("matrix store dimensions are implausible");
    std::vector<std::string> users;
    users.reserve(U);
    for (std::uint64_t i = 0; i < U; ++i) users.push_back(detail::get_string(in, "user id"));
    std::vector<AdNetworkId> nets;
    nets.reserve(K);
    for (std::uint64_t i = 0; i < K; ++i)
        nets.push_back(AdNetworkId(detail::get_string(in, "network id")));
    std::vector<BetaParams> entries;
    entries.reserve(U * K);
    for (std::uint64_t i = 0; i < U * K; ++i) {
        BetaParams p;
        p.alpha = detail::get_raw<double>(in, "alpha");
        p.beta = detail::get_raw<double>(in, "beta");
        p.provenance = static_cast<Provenance>(detail::get_raw<std::uint8_t>(in, "provenance"));
        entries.push_back(p);
    }
    return ValuationMatrix(std::move(users), std::move(nets), scale, std::move(entries));
}

// ---- flat key=value config ---------------------------------------------------------------

/// Flat `key = value` lines; '#' starts a comment; blank lines are ignored.
inline std::map<std::string, std::string> parse_config(std::istream& in) {
    std::map<std::string, std::string> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto t = detail::trim(line);
        if (t.empty()) continue;
        auto eq = t.find('=');
        if (eq == std::string::npos)
            throw FormatError("config line " + std::to_string(line_no) +
                              " is not of the form key = value");
        std::string key(detail::trim(t.substr(0, eq)));
        std::string value(detail::trim(t.substr(eq + 1)));
        if (key.empty())
            throw FormatError("config line " + std::to_string(line_no) + " has an empty key");
        out[key] = value;
    }
    return out;
}

inline std::map<std::string, std::string> load_config(const std::string& path) {
    auto in = detail::open_input(path);
    return parse_config(in);
}

// ---- manifests -------------------------------------------------------------------------------

/// Provenance record written next to every command's outputs. The timing
/// object is the only part expected to differ between identical runs.
inline void write_manifest(const std::string& path, const std::string& command,
                           const std::vector<std::string>& input_paths,
                           const std::vector<std::string>& output_paths, std::uint64_t seed,
                           const std::map<std::string, std::string>& settings,
                           const std::string& started_at, double wall_ms) {
    json j;
    j["command"] = command;
    j["inputs"] = json::object();
    for (const auto& p : input_paths) j["inputs"][p] = file_digest(p);
    j["outputs"] = output_paths;
    j["seed"] = seed;
    j["settings"] = settings;
    j["timing"] = {{"started_at", started_at}, {"wall_ms", wall_ms}};
    save_json(path, j);
}

} // namespace waterfall
