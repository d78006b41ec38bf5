#ifndef FIGP_EXPERIMENT_HPP
#define FIGP_EXPERIMENT_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <iostream>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "figp/data.hpp"
#include "figp/error.hpp"
#include "figp/fpca.hpp"
#include "figp/gp.hpp"
#include "figp/inference.hpp"
#include "figp/io.hpp"
#include "figp/screening.hpp"
#include "figp/simulate.hpp"
#include "figp/validation.hpp"

namespace figp {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct InputSource {
    std::string name;
    fs::path path;
    std::optional<ScalingBounds> value_scaling;
    std::optional<ScalingBounds> index_scaling;
};

struct ScreenConfig {
    std::vector<double> bounds; // empty: equidistant
    int intervals = 10;
    int n_perms = 1;
    int subset = 1;
    std::string variable; // empty: first input
    std::optional<ModelKind> overlay_model;

    IndexPartition partition() const
    {
        return bounds.empty() ? IndexPartition::equidistant(intervals) : IndexPartition(bounds);
    }
};

/// Effective settings of one experiment. `raw` is the JSON the hash is taken over.
struct ExperimentConfig {
    std::uint64_t seed = 0;
    fs::path output = "figp_out";
    int jobs = 1;

    bool synthetic = true;
    SyntheticSpec synthetic_spec;
    std::vector<std::string> synthetic_variables{"x"};
    std::vector<InputSource> inputs;
    fs::path outputs_path;

    std::vector<ModelKind> models{ModelKind::ARD, ModelKind::SDE};
    int subsets = 1;
    Index n_per = 0; // 0: half of the rows per subset
    McmcConfig mcmc;
    PriorSet priors;
    int interior_knots = 8;
    ThinConfig thin;
    ScreenConfig screen;

    Json raw;

    std::vector<std::string> variables() const
    {
        if (synthetic)
            return synthetic_variables;
        std::vector<std::string> v;
        for (const auto& i : inputs)
            v.push_back(i.name);
        return v;
    }

    Provenance provenance() const
    {
        Json h = raw;
        h.erase("jobs");
        return {config_hash(h), seed};
    }

    fs::path data_dir() const { return output / "data"; }
    fs::path fit_dir(int h, ModelKind m, const std::string& var) const
    {
        return output / "fits" / ("h" + std::to_string(h) + "_" + std::string(model_name(m)) + "_" + var);
    }
};

namespace detail {

inline void expect_keys(const Json& j, std::initializer_list<const char*> keys, const std::string& where)
{
    if (!j.is_object())
        throw ConfigError(where + " must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* k : keys)
            known = known || it.key() == k;
        if (!known)
            throw ConfigError("unknown key '" + it.key() + "' in " + where);
    }
}

template <class T>
T get_or(const Json& j, const char* key, T fallback, const std::string& where)
{
    if (!j.contains(key) || j.at(key).is_null())
        return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const Json::exception&) {
        throw ConfigError(where + "." + key + " has the wrong type");
    }
}

inline ScalingBounds bounds_from_json(const Json& j, const std::string& where)
{
    expect_keys(j, {"lower", "upper"}, where);
    ScalingBounds b{get_or(j, "lower", 0.0, where), get_or(j, "upper", 1.0, where)};
    b.check();
    return b;
}

inline fs::path resolve(const fs::path& base, const std::string& p)
{
    fs::path q(p);
    return q.is_absolute() ? q : base / q;
}

} // namespace detail

/// Generating kernel of synthetic data: {model, phi, tau, lambda1, lambda2, sigma_f, sigma_eps}.
inline KernelSpec kernel_from_json(const Json& j)
{
    const std::string w = "data.synthetic.kernel";
    detail::expect_keys(j, {"model", "phi", "tau", "lambda1", "lambda2", "sigma_f", "sigma_eps"}, w);
    ModelKind m;
    try {
        m = parse_model(detail::get_or<std::string>(j, "model", "SDE", w));
    } catch (const Error& e) {
        throw ConfigError(w + ": " + e.what());
    }
    if (!is_functional(m))
        throw ConfigError(w + ": the generating model must be Edn, SDE or ADE");
    double phi = detail::get_or(j, "phi", 0.5, w);
    double tau = detail::get_or(j, "tau", 0.3, w);
    double l1 = detail::get_or(j, "lambda1", 7.6, w);
    double l2 = detail::get_or(j, "lambda2", 7.6, w);
    if (!(l1 > 0.0 && l2 > 0.0))
        throw ConfigError(w + ": rates must be positive");
    AlfParams alf = AlfParams::from_rates(tau, l1, l2);
    if (m == ModelKind::Edn) {
        if (tau != 0.0 || l1 != l2)
            throw ConfigError(w + ": Edn needs tau = 0 and lambda1 = lambda2");
        alf = AlfParams::edn(l1);
    } else if (m == ModelKind::SDE) {
        if (l1 != l2)
            throw ConfigError(w + ": SDE needs lambda1 = lambda2");
        alf = AlfParams::sde(tau, l1);
    }
    KernelSpec k{FunctionalDistance{phi, alf}, detail::get_or(j, "sigma_f", 1.0, w), detail::get_or(j, "sigma_eps", 0.05, w)};
    if (!k.valid())
        throw ConfigError(w + ": invalid parameter values");
    return k;
}

inline Json kernel_to_json(const KernelSpec& k)
{
    const auto& f = std::get<FunctionalDistance>(k.distance);
    std::string model = f.alf.variant == AlfVariant::Edn ? "Edn" : f.alf.variant == AlfVariant::SDE ? "SDE" : "ADE";
    return {{"model", model},           {"phi", f.phi},         {"tau", f.alf.tau},
            {"lambda1", f.alf.lambda1()}, {"lambda2", f.alf.lambda2()}, {"sigma_f", k.sigma_f},
            {"sigma_eps", k.sigma_eps}};
}

/// Parses a config document. Relative paths resolve against `base_dir`.
inline ExperimentConfig parse_config(const Json& j, const fs::path& base_dir)
{
    using detail::get_or;
    detail::expect_keys(j,
                        {"seed", "output", "jobs", "data", "models", "partition", "mcmc", "priors", "fpca",
                         "validation", "screen"},
                        "config");
    ExperimentConfig c;
    c.raw = j;
    if (!j.contains("seed") || !j.at("seed").is_number_unsigned())
        throw ConfigError("config: 'seed' is mandatory and must be a non-negative integer");
    c.seed = j.at("seed").get<std::uint64_t>();
    c.output = detail::resolve(base_dir, get_or<std::string>(j, "output", "figp_out", "config"));
    c.jobs = get_or(j, "jobs", 1, "config");
    if (c.jobs < 1)
        throw ConfigError("config: jobs must be positive");

    const Json data = j.value("data", Json::object());
    detail::expect_keys(data, {"source", "synthetic", "inputs", "outputs"}, "data");
    const std::string source = get_or<std::string>(data, "source", "synthetic", "data");
    if (source == "synthetic") {
        const Json s = data.value("synthetic", Json::object());
        detail::expect_keys(s, {"n", "k", "variables", "kernel", "profile_length_scale", "profile_sd"},
                            "data.synthetic");
        c.synthetic_spec.n = get_or<Index>(s, "n", 300, "data.synthetic");
        c.synthetic_spec.grid = IndexGrid::uniform(get_or<Index>(s, "k", 40, "data.synthetic"));
        c.synthetic_spec.kernel = kernel_from_json(s.value("kernel", Json::object()));
        c.synthetic_spec.profile_length_scale = get_or(s, "profile_length_scale", 0.2, "data.synthetic");
        c.synthetic_spec.profile_sd = get_or(s, "profile_sd", 1.0, "data.synthetic");
        c.synthetic_variables = get_or(s, "variables", std::vector<std::string>{"x"}, "data.synthetic");
        c.synthetic_spec.check();
    } else if (source == "files") {
        c.synthetic = false;
        if (!data.contains("inputs") || !data.at("inputs").is_array() || data.at("inputs").empty())
            throw ConfigError("data.inputs must list at least one input file");
        for (const auto& in : data.at("inputs")) {
            detail::expect_keys(in, {"name", "path", "value_scaling", "index_scaling"}, "data.inputs[]");
            InputSource src;
            src.name = get_or<std::string>(in, "name", "", "data.inputs[]");
            src.path = detail::resolve(base_dir, get_or<std::string>(in, "path", "", "data.inputs[]"));
            if (in.contains("value_scaling"))
                src.value_scaling = detail::bounds_from_json(in.at("value_scaling"), "data.inputs[].value_scaling");
            if (in.contains("index_scaling"))
                src.index_scaling = detail::bounds_from_json(in.at("index_scaling"), "data.inputs[].index_scaling");
            if (src.name.empty())
                throw ConfigError("data.inputs[]: name is required");
            if (!fs::exists(src.path))
                throw ConfigError("data.inputs[]: file not found: " + src.path.string());
            c.inputs.push_back(std::move(src));
        }
        c.outputs_path = detail::resolve(base_dir, get_or<std::string>(data, "outputs", "", "data"));
        if (!fs::exists(c.outputs_path))
            throw ConfigError("data.outputs: file not found: " + c.outputs_path.string());
    } else {
        throw ConfigError("data.source must be 'synthetic' or 'files'");
    }
    {
        auto vars = c.variables();
        std::set<std::string> uniq(vars.begin(), vars.end());
        if (uniq.size() != vars.size() || vars.empty())
            throw ConfigError("input variable names must be unique and non-empty");
        for (const auto& v : vars)
            if (v.empty() || v.find_first_of("/\\,") != std::string::npos)
                throw ConfigError("input variable name '" + v + "' is not usable in file names");
    }

    if (j.contains("models")) {
        c.models.clear();
        for (const auto& m : j.at("models")) {
            try {
                c.models.push_back(parse_model(m.get<std::string>()));
            } catch (const std::exception& e) {
                throw ConfigError(std::string("models: ") + e.what());
            }
        }
        if (c.models.empty())
            throw ConfigError("models must not be empty");
    }

    const Json part = j.value("partition", Json::object());
    detail::expect_keys(part, {"H", "n_per"}, "partition");
    c.subsets = get_or(part, "H", 1, "partition");
    c.n_per = get_or<Index>(part, "n_per", 0, "partition");
    if (c.subsets < 1 || c.n_per < 0)
        throw ConfigError("partition: H must be positive and n_per non-negative");

    const Json mc = j.value("mcmc", Json::object());
    detail::expect_keys(mc, {"n_random", "n_opts", "warmup", "draws", "target_accept", "max_treedepth", "sampler"},
                        "mcmc");
    c.mcmc.n_random = get_or(mc, "n_random", c.mcmc.n_random, "mcmc");
    c.mcmc.n_opts = get_or(mc, "n_opts", c.mcmc.n_opts, "mcmc");
    c.mcmc.warmup = get_or(mc, "warmup", c.mcmc.warmup, "mcmc");
    c.mcmc.draws = get_or(mc, "draws", c.mcmc.draws, "mcmc");
    c.mcmc.target_accept = get_or(mc, "target_accept", c.mcmc.target_accept, "mcmc");
    c.mcmc.max_treedepth = get_or(mc, "max_treedepth", c.mcmc.max_treedepth, "mcmc");
    const std::string sampler = get_or<std::string>(mc, "sampler", "nuts", "mcmc");
    if (sampler == "nuts")
        c.mcmc.sampler = SamplerKind::Nuts;
    else if (sampler == "random_walk")
        c.mcmc.sampler = SamplerKind::RandomWalk;
    else
        throw ConfigError("mcmc.sampler must be 'nuts' or 'random_walk'");
    c.mcmc.check();

    c.priors = priors_from_json(j.value("priors", Json()));

    const Json fp = j.value("fpca", Json::object());
    detail::expect_keys(fp, {"interior_knots"}, "fpca");
    c.interior_knots = get_or(fp, "interior_knots", 8, "fpca");
    if (c.interior_knots < 0)
        throw ConfigError("fpca.interior_knots must be non-negative");

    const Json va = j.value("validation", Json::object());
    detail::expect_keys(va, {"m_tilde", "thinning", "batch"}, "validation");
    c.thin.m_tilde = get_or(va, "m_tilde", 100, "validation");
    c.thin.batch = get_or(va, "batch", 150, "validation");
    const std::string thin = get_or<std::string>(va, "thinning", "systematic", "validation");
    if (thin == "systematic")
        c.thin.kind = ThinKind::Systematic;
    else if (thin == "batch")
        c.thin.kind = ThinKind::Batch;
    else
        throw ConfigError("validation.thinning must be 'systematic' or 'batch'");
    if (c.thin.m_tilde < 1)
        throw ConfigError("validation.m_tilde must be positive");

    const Json sc = j.value("screen", Json::object());
    detail::expect_keys(sc, {"intervals", "bounds", "n_perms", "subset", "variable", "overlay_model"}, "screen");
    c.screen.intervals = get_or(sc, "intervals", 10, "screen");
    c.screen.bounds = get_or(sc, "bounds", std::vector<double>{}, "screen");
    c.screen.n_perms = get_or(sc, "n_perms", 1, "screen");
    c.screen.subset = get_or(sc, "subset", 1, "screen");
    c.screen.variable = get_or<std::string>(sc, "variable", "", "screen");
    if (sc.contains("overlay_model")) {
        ModelKind m = parse_model(sc.at("overlay_model").get<std::string>());
        if (!is_functional(m))
            throw ConfigError("screen.overlay_model must be Edn, SDE or ADE");
        c.screen.overlay_model = m;
    }
    (void)c.screen.partition();
    if (c.screen.n_perms < 1 || c.screen.subset < 1 || c.screen.subset > c.subsets)
        throw ConfigError("screen: n_perms must be positive and subset within 1..H");
    if (!c.screen.variable.empty()) {
        auto vars = c.variables();
        if (std::find(vars.begin(), vars.end(), c.screen.variable) == vars.end())
            throw ConfigError("screen.variable '" + c.screen.variable + "' is not an input");
    }
    return c;
}

/// Command-line values that take precedence over the file.
struct ConfigOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> output;
    std::optional<int> jobs;
};

/// Reads a config file and applies overrides. Overridden values are written
/// into the document before parsing, so the hash covers them.
inline ExperimentConfig load_config(const fs::path& path, const ConfigOverrides& o = {})
{
    Json j;
    {
        std::ifstream in(path, std::ios::binary);
        if (!in)
            throw ConfigError("cannot read config " + path.string());
        try {
            j = Json::parse(in);
        } catch (const Json::exception& e) {
            throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
        }
    }
    if (!j.is_object())
        throw ConfigError("config must be a JSON object");
    if (o.seed)
        j["seed"] = *o.seed;
    if (o.jobs)
        j["jobs"] = *o.jobs;
    fs::path base = fs::absolute(path).parent_path();
    if (o.output) {
        j["output"] = fs::absolute(*o.output).string();
    }
    return parse_config(j, base);
}

// ---------------------------------------------------------------------------
// Scheduling and logging
// ---------------------------------------------------------------------------

class Log {
public:
    static void info(const std::string& s) { write("figp: " + s); }
    static void warn(const std::string& s) { write("figp: warning: " + s); }
    static void error(const std::string& s) { write("figp: error: " + s); }

private:
    static void write(const std::string& s)
    {
        static std::mutex mu;
        std::lock_guard<std::mutex> lock(mu);
        std::cerr << s << '\n';
    }
};

/// 0 ok, 1 config error, 2 data error, 3 numerical error.
inline int exit_code_for(std::exception_ptr e)
{
    try {
        std::rethrow_exception(e);
    } catch (const ConfigError&) {
        return 1;
    } catch (const DataError&) {
        return 2;
    } catch (const NumericalError&) {
        return 3;
    } catch (const fs::filesystem_error&) {
        return 2;
    } catch (const Json::exception&) {
        return 1;
    } catch (...) {
        return 3;
    }
}

inline std::string message_of(std::exception_ptr e)
{
    try {
        std::rethrow_exception(e);
    } catch (const std::exception& x) {
        return x.what();
    } catch (...) {
        return "unknown error";
    }
}

struct TaskFailure {
    std::size_t task = 0;
    std::string label;
    std::exception_ptr error;
};

/// Runs fn(0..n-1) on up to `jobs` threads. Failures are returned in task
/// order; the remaining tasks still run.
template <class F>
std::vector<TaskFailure> run_tasks(std::size_t n, int jobs, const std::vector<std::string>& labels, F&& fn)
{
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t threads = std::min<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), n);
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t)
            pool.emplace_back(worker);
        for (auto& t : pool)
            t.join();
    }
    std::vector<TaskFailure> out;
    for (std::size_t i = 0; i < n; ++i)
        if (errors[i])
            out.push_back({i, i < labels.size() ? labels[i] : std::to_string(i), errors[i]});
    return out;
}

/// Logs each failure and rethrows the first one.
inline void report_failures(const std::vector<TaskFailure>& failures)
{
    for (const auto& f : failures)
        Log::error(f.label + ": " + message_of(f.error));
    if (!failures.empty())
        std::rethrow_exception(failures.front().error);
}

// ---------------------------------------------------------------------------
// Data
// ---------------------------------------------------------------------------

struct ExperimentData {
    std::vector<std::string> names;
    std::vector<Dataset> variables;

    const Dataset& at(const std::string& name) const
    {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name)
                return variables[i];
        throw ConfigError("unknown input variable '" + name + "'");
    }
};

inline ExperimentData load_data(const ExperimentConfig& c)
{
    ExperimentData d;
    d.names = c.variables();
    VectorXd y;
    std::vector<Profiles> profiles;
    if (c.synthetic) {
        fs::path dir = c.data_dir();
        if (!fs::exists(dir / "outputs.csv"))
            throw DataError("no simulated data in " + dir.string() + "; run `figp simulate` first");
        y = read_outputs(dir / "outputs.csv");
        for (const auto& v : d.names)
            profiles.push_back(read_profiles(dir / (v + ".csv")));
    } else {
        y = read_outputs(c.outputs_path);
        for (const auto& in : c.inputs) {
            Profiles p = read_profiles(in.path);
            if (in.index_scaling)
                p.grid_values = normalize(p.grid_values, *in.index_scaling);
            if (in.value_scaling) {
                p.x = normalize(p.x, *in.value_scaling);
                Index out = 0;
                for (Index i = 0; i < p.x.rows(); ++i)
                    out += count_out_of_unit(p.x.row(i).transpose());
                if (out > 0)
                    Log::warn(in.name + ": " + std::to_string(out) + " normalized values outside [0, 1] (kept)");
            }
            profiles.push_back(std::move(p));
        }
    }
    for (std::size_t i = 0; i < profiles.size(); ++i) {
        try {
            d.variables.emplace_back(std::move(profiles[i].x), IndexGrid(profiles[i].grid_values), y);
        } catch (const ConfigError& e) {
            throw DataError(d.names[i] + ": " + e.what());
        }
    }
    return d;
}

/// Row split shared by all input variables.
inline std::vector<std::pair<std::vector<Index>, std::vector<Index>>> experiment_split(const ExperimentConfig& c,
                                                                                      Index n_rows)
{
    Index n_per = c.n_per > 0 ? c.n_per : n_rows / (2 * c.subsets);
    if (n_per < 1)
        throw ConfigError("partition: too few rows for " + std::to_string(c.subsets) + " subsets");
    return partition_indices(n_rows, c.subsets, n_per, stream_seed(c.seed, {3}));
}

/// Training and test design of one (subset, model, input) combination.
struct ModelDesign {
    ModelKind model = ModelKind::ARD;
    std::optional<FpcaModel> fpca;
    GpData train;
    MatrixXd test_x;
    VectorXd test_y;
    std::vector<Index> test_rows;

    ParamLayout layout() const { return ParamLayout(model, train.features()); }
};

inline Index pca_features(ModelKind m, const FpcaModel& f) { return m == ModelKind::FPCA ? f.k99 : f.components(); }

/// Builds the design; PCA models project both halves on components fitted to
/// the training profiles, or on `stored` when given.
inline ModelDesign make_design(ModelKind m, const Dataset& var, const std::vector<Index>& train_rows,
                               const std::vector<Index>& test_rows, int interior_knots,
                               const std::optional<FpcaModel>& stored = std::nullopt)
{
    Dataset train = var.subset(train_rows);
    Dataset test = var.subset(test_rows);
    ModelDesign d;
    d.model = m;
    d.test_y = test.outputs();
    d.test_rows = test_rows;
    if (is_pca(m)) {
        FpcaModel f = stored ? *stored : fit_fpca(train, interior_knots);
        Index n = pca_features(m, f);
        d.train = GpData(transform(f, train, n), train.outputs());
        d.test_x = transform(f, test, n);
        d.fpca = std::move(f);
    } else {
        d.train = GpData::from_profiles(train);
        d.test_x = test.inputs();
    }
    return d;
}

struct Combination {
    int h = 1;
    ModelKind model = ModelKind::ARD;
    std::string variable;
    std::size_t model_index = 0;
    std::size_t variable_index = 0;

    std::string label() const { return "h" + std::to_string(h) + "_" + std::string(model_name(model)) + "_" + variable; }
};

inline std::vector<Combination> combinations(const ExperimentConfig& c)
{
    std::vector<Combination> out;
    auto vars = c.variables();
    for (int h = 1; h <= c.subsets; ++h)
        for (std::size_t v = 0; v < vars.size(); ++v)
            for (auto m : c.models) {
                std::size_t mi = 0;
                while (all_model_kinds[mi] != m)
                    ++mi;
                out.push_back({h, m, vars[v], mi, v});
            }
    return out;
}

inline std::vector<std::string> labels_of(const std::vector<Combination>& cs)
{
    std::vector<std::string> l;
    for (const auto& c : cs)
        l.push_back(c.label());
    return l;
}

/// A completed fit read back from disk.
struct StoredFit {
    ModelDesign design;
    PosteriorSample posterior;
};

inline StoredFit load_fit(const ExperimentConfig& c, const ExperimentData& data,
                          const std::vector<std::pair<std::vector<Index>, std::vector<Index>>>& split,
                          const Combination& k)
{
    fs::path dir = c.fit_dir(k.h, k.model, k.variable);
    if (!fs::exists(dir / "posterior.csv"))
        throw DataError("missing fit " + k.label() + " (" + (dir / "posterior.csv").string() +
                        "); run `figp fit` with model " + std::string(model_name(k.model)));
    std::optional<FpcaModel> stored;
    if (is_pca(k.model))
        stored = fpca_from_json(read_json(dir / "fpca.json"));
    const auto& rows = split[static_cast<std::size_t>(k.h - 1)];
    StoredFit f{make_design(k.model, data.at(k.variable), rows.first, rows.second, c.interior_knots, stored), {}};
    f.posterior = read_posterior(dir / "posterior.csv", f.design.layout());
    if (f.posterior.size() < 1)
        throw DataError(k.label() + ": posterior file has no draws");
    return f;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

inline double r2_optimum(const KernelSpec& k)
{
    double f = k.sigma_f * k.sigma_f, e = k.sigma_eps * k.sigma_eps;
    return 1.0 - e / (f + e);
}

/// Writes data/<var>.csv, data/outputs.csv and data/truth.json. The output
/// depends on the first variable; further variables are independent profiles.
inline void cmd_simulate(const ExperimentConfig& c)
{
    if (!c.synthetic)
        throw ConfigError("simulate needs data.source = synthetic");
    const Provenance prov = c.provenance();
    const auto vars = c.variables();
    Dataset active = simulate(c.synthetic_spec, stream_seed(c.seed, {4, 0}));
    write_outputs(c.data_dir() / "outputs.csv", active.outputs(), prov);
    write_profiles(c.data_dir() / (vars[0] + ".csv"), active.grid(), active.inputs(), prov);
    for (std::size_t v = 1; v < vars.size(); ++v) {
        Rng rng(stream_seed(c.seed, {4, static_cast<std::uint64_t>(v)}));
        MatrixXd x = simulate_profiles(c.synthetic_spec.n, c.synthetic_spec.grid, c.synthetic_spec.profile_length_scale,
                                       c.synthetic_spec.profile_sd, rng);
        write_profiles(c.data_dir() / (vars[v] + ".csv"), c.synthetic_spec.grid, x, prov);
    }
    const auto& f = std::get<FunctionalDistance>(c.synthetic_spec.kernel.distance);
    Json truth = {{"kernel", kernel_to_json(c.synthetic_spec.kernel)},
                  {"active_variable", vars[0]},
                  {"n", c.synthetic_spec.n},
                  {"k", c.synthetic_spec.grid.size()},
                  {"lambda", f.alf.lambda},
                  {"kappa", f.alf.kappa},
                  {"profile_length_scale", c.synthetic_spec.profile_length_scale},
                  {"profile_sd", c.synthetic_spec.profile_sd},
                  {"r2_optimum", r2_optimum(c.synthetic_spec.kernel)},
                  {"omega", vector_to_json(alf_weights(c.synthetic_spec.grid, f.alf))}};
    prov.stamp(truth);
    write_json(c.data_dir() / "truth.json", truth);
    Log::info("simulated " + std::to_string(c.synthetic_spec.n) + " rows, " + std::to_string(vars.size()) +
              " input(s) into " + c.data_dir().string());
}

inline void cmd_fit(const ExperimentConfig& c)
{
    const Provenance prov = c.provenance();
    ExperimentData data = load_data(c);
    auto split = experiment_split(c, data.variables.front().size());
    auto combos = combinations(c);
    auto failures = run_tasks(combos.size(), c.jobs, labels_of(combos), [&](std::size_t i) {
        const Combination& k = combos[i];
        const auto& rows = split[static_cast<std::size_t>(k.h - 1)];
        ModelDesign d = make_design(k.model, data.at(k.variable), rows.first, rows.second, c.interior_knots);
        PosteriorDensity post(d.layout(), d.train, c.priors);
        FitResult r = fit(post, c.mcmc,
                          stream_seed(c.seed, {10, static_cast<std::uint64_t>(k.h), k.model_index, k.variable_index}));
        fs::path dir = c.fit_dir(k.h, k.model, k.variable);
        write_posterior(dir / "posterior.csv", r.posterior, prov);

        Json map = {{"names", d.layout().names()},
                    {"theta", vector_to_json(r.map.theta)},
                    {"log_post", r.map.log_post},
                    {"starts", r.map.starts},
                    {"failures", r.map.failures}};
        Json top = Json::array();
        for (const auto& cand : r.top)
            top.push_back(cand.log_post);
        map["candidate_log_posts"] = top;
        prov.stamp(map);
        write_json(dir / "map.json", map);

        Json diag = diagnostics_to_json(r.diagnostics);
        diag["model"] = model_label(k.model);
        diag["input"] = k.variable;
        diag["subset"] = k.h;
        diag["warmup_divergences"] = r.posterior.warmup_divergences;
        prov.stamp(diag);
        write_json(dir / "diagnostics.json", diag);
        if (d.fpca) {
            Json fj = fpca_to_json(*d.fpca);
            prov.stamp(fj);
            write_json(dir / "fpca.json", fj);
        }
        if (r.diagnostics.divergences > 0)
            Log::warn(k.label() + ": " + std::to_string(r.diagnostics.divergences) + " divergent transitions");
        if (!r.diagnostics.pass())
            Log::warn(k.label() + ": convergence diagnostics flagged (see diagnostics.json)");
        Log::info("fitted " + k.label());
    });
    report_failures(failures);
}

/// Posterior predictive mean and sd of each test row, averaged over thinned draws.
inline void cmd_predict(const ExperimentConfig& c)
{
    const Provenance prov = c.provenance();
    ExperimentData data = load_data(c);
    auto split = experiment_split(c, data.variables.front().size());
    auto combos = combinations(c);
    auto failures = run_tasks(combos.size(), c.jobs, labels_of(combos), [&](std::size_t i) {
        const Combination& k = combos[i];
        StoredFit f = load_fit(c, data, split, k);
        ThinConfig thin = c.thin;
        thin.seed = stream_seed(c.seed, {6, static_cast<std::uint64_t>(k.h), k.model_index, k.variable_index});
        const Index n = f.design.test_x.rows();
        VectorXd mean = VectorXd::Zero(n), second = VectorXd::Zero(n);
        auto idx = thin_indices(f.posterior.size(), thin);
        for (Index m : idx) {
            FittedGP gp(f.posterior.layout.to_spec(f.posterior.theta(m)), f.design.train);
            PredictiveDist p = gp.predict(f.design.test_x, true);
            mean += p.mean;
            second += (p.cov.diagonal().array() + p.mean.array().square()).matrix();
        }
        const double m = static_cast<double>(idx.size());
        mean /= m;
        second /= m;
        CsvWriter w(c.output / "predictions" / (k.label() + ".csv"), prov);
        w.header({"row", "y", "mean", "sd"});
        for (Index r = 0; r < n; ++r)
            w.row(std::vector<double>{static_cast<double>(f.design.test_rows[static_cast<std::size_t>(r)]),
                                      f.design.test_y(r), mean(r),
                                      std::sqrt(std::max(0.0, second(r) - mean(r) * mean(r)))});
        Log::info("predicted " + k.label());
    });
    report_failures(failures);
}

/// Per-subset statistics plus the aggregated model-by-input tables. Missing
/// fits are listed and skipped.
inline void cmd_validate(const ExperimentConfig& c)
{
    const Provenance prov = c.provenance();
    ExperimentData data = load_data(c);
    auto split = experiment_split(c, data.variables.front().size());
    auto combos = combinations(c);
    std::vector<std::optional<PosteriorValidation>> results(combos.size());
    std::vector<VectorXd> post_means(combos.size());
    std::vector<std::string> missing;
    for (const auto& k : combos)
        if (!fs::exists(c.fit_dir(k.h, k.model, k.variable) / "posterior.csv"))
            missing.push_back(k.label());
    auto failures = run_tasks(combos.size(), c.jobs, labels_of(combos), [&](std::size_t i) {
        const Combination& k = combos[i];
        if (std::find(missing.begin(), missing.end(), k.label()) != missing.end())
            return;
        StoredFit f = load_fit(c, data, split, k);
        ThinConfig thin = c.thin;
        thin.seed = stream_seed(c.seed, {6, static_cast<std::uint64_t>(k.h), k.model_index, k.variable_index});
        results[i] = posterior_stats(f.posterior, f.design.train, f.design.test_x, f.design.test_y, thin);
        post_means[i] = f.posterior.mean();
    });
    report_failures(failures);
    for (const auto& m : missing)
        Log::warn("validate: skipping missing fit " + m);

    const fs::path dir = c.output / "validation";
    {
        CsvWriter w(dir / "subsets.csv", prov);
        w.header({"subset", "model", "input", "rmse", "r2", "neg_ppld", "neg_mean_log_ppld", "neg_crps", "coverage95",
                  "draws"});
        for (std::size_t i = 0; i < combos.size(); ++i) {
            if (!results[i])
                continue;
            const auto& r = *results[i];
            w.cells({std::to_string(combos[i].h), model_label(combos[i].model), combos[i].variable,
                     format_double(r.rmse), format_double(r.r2), format_double(r.neg_ppld),
                     format_double(r.neg_mean_log_ppld), format_double(r.neg_crps), format_double(r.coverage95),
                     std::to_string(r.draws)});
        }
    }

    struct Row {
        ModelKind model;
        std::string input;
        Aggregate rmse, r2, neg_ppld, neg_crps, coverage;
        double tau = std::numeric_limits<double>::quiet_NaN();
        double lambda = std::numeric_limits<double>::quiet_NaN();
        int subsets = 0;
    };
    std::vector<Row> rows;
    for (const auto& var : c.variables()) {
        for (auto m : c.models) {
            std::vector<double> rm, r2, np, nc, cv, tau, lam;
            for (std::size_t i = 0; i < combos.size(); ++i) {
                if (combos[i].model != m || combos[i].variable != var || !results[i])
                    continue;
                rm.push_back(results[i]->rmse);
                r2.push_back(results[i]->r2);
                np.push_back(results[i]->neg_ppld);
                nc.push_back(results[i]->neg_crps);
                cv.push_back(results[i]->coverage95);
                ParamLayout layout(m, is_functional(m) ? data.at(var).grid_size() : 1);
                if (Index t = layout.index_of(ParamRole::Tau); t >= 0)
                    tau.push_back(post_means[i](t));
                if (Index l = layout.index_of(ParamRole::Lambda); l >= 0)
                    lam.push_back(post_means[i](l));
            }
            if (rm.empty())
                continue;
            Row r{m, var, aggregate(rm), aggregate(r2), aggregate(np), aggregate(nc), aggregate(cv)};
            if (!tau.empty())
                r.tau = aggregate(tau).mean;
            if (!lam.empty())
                r.lambda = aggregate(lam).mean;
            r.subsets = static_cast<int>(rm.size());
            rows.push_back(r);
        }
    }

    const bool with_se = c.subsets >= 2;
    {
        std::vector<std::string> h{"model", "input", "subsets", "tau", "lambda"};
        for (const char* s : {"rmse", "r2", "neg_ppld", "neg_crps", "coverage95"}) {
            h.push_back(s);
            if (with_se)
                h.push_back(std::string(s) + "_se");
        }
        for (const char* s : {"best_rmse", "best_r2", "best_neg_ppld", "best_neg_crps", "best_coverage95"})
            h.push_back(s);
        CsvWriter w(dir / "table1.csv", prov);
        w.header(h);
        for (const auto& r : rows) {
            auto best = [&](auto key, bool lower) {
                double b = key(r);
                for (const auto& o : rows)
                    if (o.input == r.input && (lower ? key(o) < b : key(o) > b))
                        return std::string("0");
                return std::string("1");
            };
            std::vector<std::string> cells{model_label(r.model), r.input, std::to_string(r.subsets),
                                           format_double(r.tau), format_double(r.lambda)};
            for (const Aggregate* a : {&r.rmse, &r.r2, &r.neg_ppld, &r.neg_crps, &r.coverage}) {
                cells.push_back(format_double(a->mean));
                if (with_se)
                    cells.push_back(format_double(a->se));
            }
            cells.push_back(best([](const Row& x) { return x.rmse.mean; }, true));
            cells.push_back(best([](const Row& x) { return x.r2.mean; }, false));
            cells.push_back(best([](const Row& x) { return x.neg_ppld.mean; }, true));
            cells.push_back(best([](const Row& x) { return x.neg_crps.mean; }, true));
            cells.push_back(best([](const Row& x) { return std::abs(x.coverage.mean - 0.95); }, true));
            w.cells(cells);
        }
    }
    {
        std::vector<std::string> h{"model"};
        for (const auto& v : c.variables()) {
            h.push_back(v + ":rmse");
            h.push_back(v + ":neg_ppld");
        }
        CsvWriter w(dir / "table2.csv", prov);
        w.header(h);
        for (auto m : c.models) {
            std::vector<std::string> cells{model_label(m)};
            for (const auto& v : c.variables()) {
                auto it = std::find_if(rows.begin(), rows.end(), [&](const Row& r) { return r.model == m && r.input == v; });
                cells.push_back(it == rows.end() ? "nan" : format_double(it->rmse.mean));
                cells.push_back(it == rows.end() ? "nan" : format_double(it->neg_ppld.mean));
            }
            w.cells(cells);
        }
    }
    Json summary = {{"missing", missing}, {"subsets", c.subsets}, {"m_tilde", c.thin.m_tilde}};
    prov.stamp(summary);
    write_json(dir / "summary.json", summary);
    Log::info("validated " + std::to_string(combos.size() - missing.size()) + " fit(s)");
}

/// PFDI of the ARD fit on one subset's test half, and the aligned posterior
/// mean of the ALF weight for overlay plots.
inline void cmd_screen(const ExperimentConfig& c)
{
    const Provenance prov = c.provenance();
    ExperimentData data = load_data(c);
    auto split = experiment_split(c, data.variables.front().size());
    const std::string var = c.screen.variable.empty() ? data.names.front() : c.screen.variable;
    std::size_t vi = static_cast<std::size_t>(std::find(data.names.begin(), data.names.end(), var) - data.names.begin());
    auto combo_for = [&](ModelKind m) {
        std::size_t mi = 0;
        while (all_model_kinds[mi] != m)
            ++mi;
        return Combination{c.screen.subset, m, var, mi, vi};
    };
    StoredFit ard = load_fit(c, data, split, combo_for(ModelKind::ARD));
    const IndexGrid& grid = data.at(var).grid();
    IndexPartition part = c.screen.partition();
    FittedGP gp(ard.posterior.layout.to_spec(ard.posterior.mean()), ard.design.train);
    PfdiResult r = pfdi(gp, ard.design.test_x, ard.design.test_y, grid, part, c.screen.n_perms, stream_seed(c.seed, {5}));

    const fs::path dir = c.output / "screen";
    {
        CsvWriter w(dir / "pfdi.csv", prov);
        w.header({"u", "lower", "upper", "delta_rmse", "delta_neg_ppld", "normalized"});
        for (int u = 1; u <= part.size(); ++u)
            w.row(std::vector<double>{static_cast<double>(u), part.lower(u), part.upper(u), r.delta_rmse(u - 1),
                                      r.delta_neg_ppld(u - 1), r.normalized_neg_ppld(u - 1)});
    }

    std::optional<ModelKind> overlay = c.screen.overlay_model;
    if (!overlay)
        for (auto m : {ModelKind::ADE, ModelKind::SDE, ModelKind::Edn})
            if (!overlay && std::find(c.models.begin(), c.models.end(), m) != c.models.end() &&
                fs::exists(c.fit_dir(c.screen.subset, m, var) / "posterior.csv"))
                overlay = m;
    VectorXd omega = VectorXd::Constant(grid.size(), std::numeric_limits<double>::quiet_NaN());
    if (overlay) {
        StoredFit f = load_fit(c, data, split, combo_for(*overlay));
        omega = monitored_weights(f.posterior, &grid).colwise().mean().transpose();
    } else {
        Log::warn("screen: no fitted ALF model for the overlay; omega_mean is nan");
    }
    {
        CsvWriter w(dir / "overlay.csv", prov);
        w.header({"t", "omega_mean", "u", "g"});
        for (Index k = 0; k < grid.size(); ++k) {
            int u = part.interval_of(grid[k]);
            w.row(std::vector<double>{grid[k], omega(k), static_cast<double>(u), r.normalized_neg_ppld(u - 1)});
        }
    }
    Log::info("screened " + var + ": largest negPPLD deterioration in interval " + std::to_string(r.argmax_neg_ppld()));
}

} // namespace figp

#endif
