#ifndef FIGP_IO_HPP
#define FIGP_IO_HPP

#include <charconv>
#include <cstdio>
#include <limits>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "figp/data.hpp"
#include "figp/error.hpp"
#include "figp/diagnostics.hpp"
#include "figp/fpca.hpp"
#include "figp/inference.hpp"
#include "figp/kernel.hpp"
#include "figp/priors.hpp"

namespace figp {

using Json = nlohmann::json;
namespace fs = std::filesystem;

/// Shortest round-trip decimal form; "nan", "inf", "-inf" for non-finite values.
inline std::string format_double(double x)
{
    if (std::isnan(x))
        return "nan";
    if (std::isinf(x))
        return x > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    if (s == "nan" || s == "NaN" || s == "NA")
        return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf")
        return std::numeric_limits<double>::infinity();
    if (s == "-inf")
        return -std::numeric_limits<double>::infinity();
    double v = 0.0;
    const char* first = s.data();
    if (!s.empty() && s.front() == '+')
        ++first;
    auto res = std::from_chars(first, s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw DataError("csv: cannot parse number '" + std::string(s) + "'");
    return v;
}

// ---------------------------------------------------------------------------
// Provenance
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a64(std::string_view s)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Config hash and master seed stamped into every artifact.
struct Provenance {
    std::string config_hash;
    std::uint64_t seed = 0;

    std::string csv_comment() const { return "# figp config_hash=" + config_hash + " seed=" + std::to_string(seed); }

    void stamp(Json& j) const
    {
        j["config_hash"] = config_hash;
        j["seed"] = seed;
    }
};

/// Hash of the effective configuration, independent of where output goes.
inline std::string config_hash(Json config)
{
    config.erase("output");
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(config.dump())));
    return buf;
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

inline void ensure_parent(const fs::path& p)
{
    if (p.has_parent_path())
        fs::create_directories(p.parent_path());
}

inline std::ofstream open_out(const fs::path& p)
{
    ensure_parent(p);
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out)
        throw DataError("cannot write " + p.string());
    return out;
}

inline void write_json(const fs::path& p, const Json& j)
{
    auto out = open_out(p);
    out << j.dump(2) << '\n';
}

inline Json read_json(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    if (!in)
        throw DataError("cannot read " + p.string());
    try {
        return Json::parse(in);
    } catch (const Json::exception& e) {
        throw DataError("invalid JSON in " + p.string() + ": " + e.what());
    }
}

/// Delimited table: an optional header and numeric rows.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    Index column(std::string_view name) const
    {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name)
                return static_cast<Index>(i);
        throw DataError("csv: missing column '" + std::string(name) + "'");
    }

    MatrixXd matrix(std::size_t first_row = 0) const
    {
        if (first_row >= rows.size())
            return MatrixXd(0, header.empty() && !rows.empty() ? static_cast<Index>(rows[0].size()) : static_cast<Index>(header.size()));
        const Index n = static_cast<Index>(rows.size() - first_row);
        const Index m = static_cast<Index>(rows[first_row].size());
        MatrixXd out(n, m);
        for (Index i = 0; i < n; ++i) {
            const auto& r = rows[first_row + static_cast<std::size_t>(i)];
            if (static_cast<Index>(r.size()) != m)
                throw ShapeError("csv: ragged rows");
            for (Index j = 0; j < m; ++j)
                out(i, j) = r[static_cast<std::size_t>(j)];
        }
        return out;
    }
};

inline std::vector<std::string> split_line(const std::string& line)
{
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ','))
        out.push_back(cell);
    if (!line.empty() && line.back() == ',')
        out.emplace_back();
    return out;
}

/// Reads a comma-separated numeric table. Lines starting with '#' are
/// skipped; with `has_header` the first remaining line names the columns.
inline CsvTable read_csv(const fs::path& p, bool has_header)
{
    std::ifstream in(p, std::ios::binary);
    if (!in)
        throw DataError("cannot read " + p.string());
    CsvTable t;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty() || line[0] == '#')
            continue;
        auto cells = split_line(line);
        if (first && has_header) {
            t.header = std::move(cells);
            first = false;
            continue;
        }
        first = false;
        std::vector<double> row;
        row.reserve(cells.size());
        for (const auto& c : cells)
            row.push_back(parse_double(c));
        t.rows.push_back(std::move(row));
    }
    return t;
}

class CsvWriter {
public:
    CsvWriter(const fs::path& p, const Provenance& prov) : out_(open_out(p)) { out_ << prov.csv_comment() << '\n'; }

    CsvWriter& header(const std::vector<std::string>& names)
    {
        for (std::size_t i = 0; i < names.size(); ++i)
            out_ << (i ? "," : "") << names[i];
        out_ << '\n';
        return *this;
    }

    template <class Row>
    CsvWriter& row(const Row& values)
    {
        bool first = true;
        for (double v : values) {
            out_ << (first ? "" : ",") << format_double(v);
            first = false;
        }
        out_ << '\n';
        return *this;
    }

    CsvWriter& row(const VectorXd& v) { return row(std::vector<double>(v.data(), v.data() + v.size())); }

    /// Mixed text/number row.
    CsvWriter& cells(const std::vector<std::string>& values)
    {
        for (std::size_t i = 0; i < values.size(); ++i)
            out_ << (i ? "," : "") << values[i];
        out_ << '\n';
        return *this;
    }

private:
    std::ofstream out_;
};

// ---------------------------------------------------------------------------
// Profiles and outputs
// ---------------------------------------------------------------------------

/// One input variable: first row the index grid, then one profile per row.
inline void write_profiles(const fs::path& p, const IndexGrid& grid, const MatrixXd& x, const Provenance& prov)
{
    CsvWriter w(p, prov);
    w.row(grid.values());
    for (Index i = 0; i < x.rows(); ++i)
        w.row(VectorXd(x.row(i).transpose()));
}

struct Profiles {
    VectorXd grid_values;
    MatrixXd x;
};

inline Profiles read_profiles(const fs::path& p)
{
    CsvTable t = read_csv(p, false);
    if (t.rows.size() < 2)
        throw DataError(p.string() + ": need a grid row and at least one profile");
    MatrixXd all = t.matrix();
    return {all.row(0).transpose(), all.bottomRows(all.rows() - 1)};
}

inline void write_outputs(const fs::path& p, const VectorXd& y, const Provenance& prov)
{
    CsvWriter w(p, prov);
    w.header({"y"});
    for (Index i = 0; i < y.size(); ++i)
        w.row(std::vector<double>{y(i)});
}

inline VectorXd read_outputs(const fs::path& p)
{
    CsvTable t = read_csv(p, true);
    if (t.header.size() != 1)
        throw DataError(p.string() + ": expected a single output column");
    MatrixXd m = t.matrix();
    return m.col(0);
}

// ---------------------------------------------------------------------------
// Structured values
// ---------------------------------------------------------------------------

inline Json prior_to_json(const Prior1D& p)
{
    return std::visit(
        [](const auto& d) -> Json {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, Flat>)
                return {{"dist", "flat"}};
            else if constexpr (std::is_same_v<T, InverseGamma>)
                return {{"dist", "inv_gamma"}, {"shape", d.shape}, {"scale", d.scale}};
            else if constexpr (std::is_same_v<T, Beta>)
                return {{"dist", "beta"}, {"a", d.a}, {"b", d.b}};
            else if constexpr (std::is_same_v<T, HalfNormal>)
                return {{"dist", "half_normal"}, {"scale", d.scale}};
            else
                return {{"dist", "normal"}, {"mean", d.mean}, {"sd", d.sd}};
        },
        p);
}

inline Prior1D prior_from_json(const Json& j)
{
    try {
        const std::string d = j.at("dist").get<std::string>();
        if (d == "flat")
            return Flat{};
        if (d == "inv_gamma")
            return InverseGamma{j.at("shape").get<double>(), j.at("scale").get<double>()};
        if (d == "beta")
            return Beta{j.at("a").get<double>(), j.at("b").get<double>()};
        if (d == "half_normal")
            return HalfNormal{j.at("scale").get<double>()};
        if (d == "normal")
            return Normal{j.at("mean").get<double>(), j.at("sd").get<double>()};
        throw ConfigError("unknown prior distribution '" + d + "'");
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("prior: ") + e.what());
    }
}

/// Defaults overridden by any of the keys length_scale, phi, tau, lambda,
/// log_kappa, sigma_f, sigma_eps.
inline PriorSet priors_from_json(const Json& j)
{
    PriorSet p;
    if (j.is_null())
        return p;
    if (!j.is_object())
        throw ConfigError("priors must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        Prior1D v = prior_from_json(it.value());
        const std::string& k = it.key();
        if (k == "length_scale") p.length_scale = v;
        else if (k == "phi") p.phi = v;
        else if (k == "tau") p.tau = v;
        else if (k == "lambda") p.lambda = v;
        else if (k == "log_kappa") p.log_kappa = v;
        else if (k == "sigma_f") p.sigma_f = v;
        else if (k == "sigma_eps") p.sigma_eps = v;
        else throw ConfigError("unknown prior key '" + k + "'");
    }
    return p;
}

inline Json vector_to_json(const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline VectorXd vector_from_json(const Json& j)
{
    auto v = j.get<std::vector<double>>();
    return Eigen::Map<const VectorXd>(v.data(), static_cast<Index>(v.size()));
}

inline Json matrix_to_json(const MatrixXd& m)
{
    Json rows = Json::array();
    for (Index i = 0; i < m.rows(); ++i)
        rows.push_back(vector_to_json(m.row(i).transpose()));
    return rows;
}

inline MatrixXd matrix_from_json(const Json& j)
{
    const Index n = static_cast<Index>(j.size());
    if (n == 0)
        return {};
    const Index m = static_cast<Index>(j[0].size());
    MatrixXd out(n, m);
    for (Index i = 0; i < n; ++i) {
        VectorXd r = vector_from_json(j[static_cast<std::size_t>(i)]);
        if (r.size() != m)
            throw ShapeError("matrix: ragged rows");
        out.row(i) = r.transpose();
    }
    return out;
}

inline Json fpca_to_json(const FpcaModel& m)
{
    return {{"interior_knots", m.system.basis.interior_knots()},
            {"grid", vector_to_json(m.system.grid.values())},
            {"mean", vector_to_json(m.mean)},
            {"loadings", matrix_to_json(m.loadings)},
            {"eigenvalues", vector_to_json(m.eigenvalues)},
            {"k99", m.k99},
            {"degenerate", m.degenerate}};
}

inline FpcaModel fpca_from_json(const Json& j)
{
    try {
        IndexGrid grid(vector_from_json(j.at("grid")));
        FpcaModel m{fit_basis(grid, j.at("interior_knots").get<int>()),
                    vector_from_json(j.at("mean")),
                    matrix_from_json(j.at("loadings")),
                    vector_from_json(j.at("eigenvalues")),
                    j.at("k99").get<Index>(),
                    j.at("degenerate").get<bool>()};
        const Index l = m.system.basis.size();
        if (m.mean.size() != l || m.loadings.rows() != l || m.loadings.cols() != l || m.eigenvalues.size() != l)
            throw ShapeError("fpca: stored dimensions do not match the basis");
        return m;
    } catch (const Json::exception& e) {
        throw DataError(std::string("fpca file: ") + e.what());
    }
}

/// Columns: constrained parameters, then lp, accept_stat, treedepth.
inline void write_posterior(const fs::path& p, const PosteriorSample& s, const Provenance& prov)
{
    CsvWriter w(p, prov);
    std::vector<std::string> h = s.layout.names();
    h.insert(h.end(), {"lp", "accept_stat", "treedepth"});
    w.header(h);
    for (Index m = 0; m < s.size(); ++m) {
        std::vector<double> r;
        for (Index j = 0; j < s.draws.cols(); ++j)
            r.push_back(s.draws(m, j));
        r.push_back(s.log_posts(m));
        r.push_back(m < s.accept_stats.size() ? s.accept_stats(m) : std::numeric_limits<double>::quiet_NaN());
        r.push_back(m < s.treedepths.size() ? static_cast<double>(s.treedepths(m)) : 0.0);
        w.row(r);
    }
}

inline PosteriorSample read_posterior(const fs::path& p, const ParamLayout& layout)
{
    CsvTable t = read_csv(p, true);
    const Index d = layout.dim();
    if (static_cast<Index>(t.header.size()) != d + 3)
        throw DataError(p.string() + ": column count does not match the model");
    for (Index j = 0; j < d; ++j)
        if (t.header[static_cast<std::size_t>(j)] != layout.names()[static_cast<std::size_t>(j)])
            throw DataError(p.string() + ": unexpected column '" + t.header[static_cast<std::size_t>(j)] + "'");
    MatrixXd all = t.matrix();
    PosteriorSample s;
    s.layout = layout;
    s.draws = all.leftCols(d);
    s.log_posts = all.col(d);
    s.accept_stats = all.col(d + 1);
    s.treedepths = all.col(d + 2).cast<int>();
    return s;
}

inline Json diagnostics_to_json(const DiagnosticsReport& r)
{
    Json q = Json::array();
    for (const auto& m : r.quantities)
        q.push_back({{"name", m.name},
                     {"mean", m.mean},
                     {"sd", m.sd},
                     {"geweke_z", std::isnan(m.geweke_z) ? Json(nullptr) : Json(m.geweke_z)},
                     {"mcse", m.mcse},
                     {"geweke_ok", m.geweke_ok},
                     {"mcse_ok", m.mcse_ok}});
    return {{"quantities", q},
            {"divergences", r.divergences},
            {"treedepth_hits", r.treedepth_hits},
            {"geweke_threshold", r.geweke_threshold},
            {"mean_accept", r.mean_accept},
            {"step_size", r.step_size},
            {"geweke_pass", r.geweke_pass()},
            {"mcse_pass", r.mcse_pass()},
            {"pass", r.pass()}};
}

} // namespace figp

#endif
