#include "cdapicard/bench.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

namespace cdapicard {

double ra_to_ri(double ra, double nu, double kappa)
{
    if (!(ra > 0.0) || !(nu > 0.0) || !(kappa > 0.0)) {
        throw std::invalid_argument("ra_to_ri: Ra, nu and kappa must be positive");
    }
    return ra * nu * kappa;
}

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

void ExperimentConfig::validate() const
{
    auto fail = [](const std::string& m) { throw ConfigError("config: " + m); };
    if (n < 1) fail("n must be >= 1");
    if (!(ra > 0.0)) fail("ra must be positive");
    if (!(nu > 0.0) || !(kappa > 0.0)) fail("nu and kappa must be positive");
    if (!(graddiv >= 0.0)) fail("graddiv must be non-negative");
    if (coarse_m < 0) fail("H must be 1/m with m >= 1");
    if (!(noise >= 0.0)) fail("noise must be non-negative");
    if (noise > 0.0 && !assimilates()) fail("noise needs observations (set H and a nudging mode)");
    if (mu_u && !(*mu_u >= 0.0)) fail("mu_u must be non-negative");
    if (mu_T && !(*mu_T >= 0.0)) fail("mu_T must be non-negative");
    if (!(tol > 0.0)) fail("tol must be positive");
    if (max_iter < 1) fail("max_iter must be >= 1");
    if (newton_max < 1) fail("newton_max must be >= 1");
    if (!(switch_tol > tol)) fail("switch_tol must exceed tol");
    if (!(divergence_threshold > switch_tol)) fail("divergence_threshold must exceed switch_tol");
}

NudgeConfig ExperimentConfig::nudge() const
{
    if (!assimilates()) return NudgeConfig::off();
    return NudgeConfig::make(effective_mode(), mu_u.value_or(default_mu()), mu_T.value_or(default_mu()));
}

SolverConfig ExperimentConfig::solver() const
{
    SolverConfig s;
    s.tol_residual = tol;
    s.max_iter = max_iter;
    s.divergence_threshold = divergence_threshold;
    s.switch_tol = switch_tol;
    s.hybrid = hybrid;
    s.newton_max = newton_max;
    s.nudge = nudge();
    return s;
}

int parse_coarse_spacing(const std::string& text)
{
    std::string t = text;
    t.erase(std::remove_if(t.begin(), t.end(), [](unsigned char c) { return std::isspace(c); }), t.end());
    if (t.empty() || t == "none" || t == "0") return 0;
    try {
        const auto slash = t.find('/');
        if (slash != std::string::npos) {
            std::size_t pos = 0;
            const double num = std::stod(t.substr(0, slash), &pos);
            if (pos != slash || num != 1.0) throw ConfigError("");
            const std::string den = t.substr(slash + 1);
            const int m = std::stoi(den, &pos);
            if (pos != den.size() || m < 1) throw ConfigError("");
            return m;
        }
        std::size_t pos = 0;
        const double h = std::stod(t, &pos);
        if (pos != t.size()) throw ConfigError("");
        return CoarseGrid::from_spacing(h).m;
    } catch (const std::exception&) {
        throw ConfigError("config: cannot read H = '" + text + "' (expected 1/m or a spacing 1/m)");
    }
}

std::string format_coarse_spacing(int m) { return m > 0 ? "1/" + std::to_string(m) : "none"; }

namespace {

using nlohmann::json;

double as_number(const json& v, const std::string& key)
{
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
        try {
            std::size_t pos = 0;
            const std::string s = v.get<std::string>();
            const double d = std::stod(s, &pos);
            if (pos == s.size()) return d;
        } catch (const std::exception&) {
        }
    }
    throw ConfigError("config: '" + key + "' must be a number");
}

int as_int(const json& v, const std::string& key)
{
    const double d = as_number(v, key);
    if (d != std::floor(d) || std::abs(d) > 1e9) throw ConfigError("config: '" + key + "' must be an integer");
    return static_cast<int>(d);
}

bool as_bool(const json& v, const std::string& key)
{
    if (v.is_boolean()) return v.get<bool>();
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s == "true" || s == "1" || s == "on") return true;
        if (s == "false" || s == "0" || s == "off") return false;
    }
    if (v.is_number_integer()) return v.get<int>() != 0;
    throw ConfigError("config: '" + key + "' must be a boolean");
}

void set_key(ExperimentConfig& c, const std::string& key, const json& v)
{
    if (key == "n") c.n = as_int(v, key);
    else if (key == "ra") c.ra = as_number(v, key);
    else if (key == "nu") c.nu = as_number(v, key);
    else if (key == "kappa") c.kappa = as_number(v, key);
    else if (key == "graddiv") c.graddiv = as_number(v, key);
    else if (key == "H") c.coarse_m = v.is_number() && v.get<double>() == 0.0 ? 0
                                     : parse_coarse_spacing(v.is_string() ? v.get<std::string>() : v.dump());
    else if (key == "mode") {
        if (!v.is_string()) throw ConfigError("config: 'mode' must be a string");
        try {
            c.mode = parse_nudge_mode(v.get<std::string>());
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("config: ") + e.what());
        }
    }
    else if (key == "mu") c.mu_u = c.mu_T = as_number(v, key);
    else if (key == "mu_u") c.mu_u = as_number(v, key);
    else if (key == "mu_T") c.mu_T = as_number(v, key);
    else if (key == "noise") c.noise = as_number(v, key);
    else if (key == "hybrid") c.hybrid = as_bool(v, key);
    else if (key == "tol") c.tol = as_number(v, key);
    else if (key == "max_iter") c.max_iter = as_int(v, key);
    else if (key == "switch_tol") c.switch_tol = as_number(v, key);
    else if (key == "newton_max") c.newton_max = as_int(v, key);
    else if (key == "divergence_threshold") c.divergence_threshold = as_number(v, key);
    else if (key == "output") {
        if (!v.is_string()) throw ConfigError("config: 'output' must be a string");
        c.output = v.get<std::string>();
    }
    else throw ConfigError("config: unknown key '" + key + "'");
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, ExperimentConfig base)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config: top level must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (it.value().is_object() || it.value().is_array()) {
            throw ConfigError("config: '" + it.key() + "' must be a scalar (flat key-value file)");
        }
        set_key(base, it.key(), it.value());
    }
    base.validate();
    return base;
}

ExperimentConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

void apply_override(ExperimentConfig& cfg, const std::string& key, const std::string& value)
{
    json v;
    try {
        v = json::parse(value);
    } catch (const json::parse_error&) {
        v = value;
    }
    if (v.is_object() || v.is_array()) v = value;
    set_key(cfg, key, v);
}

std::string to_json(const ExperimentConfig& c)
{
    json j;
    j["n"] = c.n;
    j["ra"] = c.ra;
    j["nu"] = c.nu;
    j["kappa"] = c.kappa;
    j["graddiv"] = c.graddiv;
    j["H"] = format_coarse_spacing(c.coarse_m);
    j["mode"] = to_string(c.mode);
    if (c.mu_u) j["mu_u"] = *c.mu_u;
    if (c.mu_T) j["mu_T"] = *c.mu_T;
    j["noise"] = c.noise;
    j["hybrid"] = c.hybrid;
    j["tol"] = c.tol;
    j["max_iter"] = c.max_iter;
    j["switch_tol"] = c.switch_tol;
    j["newton_max"] = c.newton_max;
    j["divergence_threshold"] = c.divergence_threshold;
    j["output"] = c.output;
    return j.dump(2);
}

// ---------------------------------------------------------------------------
// Rate fit
// ---------------------------------------------------------------------------

RateFit fit_rate(const IterationTrace& trace)
{
    constexpr std::size_t kSkip = 2;
    constexpr double kFloor = 1e-7;
    constexpr std::size_t kMinIterations = 5;

    RateFit fit;
    const auto& rec = trace.records;
    std::size_t end = kSkip;
    while (end < rec.size() && rec[end].phase != Phase::newton && rec[end].residual_b >= kFloor &&
           std::isfinite(rec[end].residual_b)) {
        ++end;
    }
    const std::size_t count = end > kSkip ? end - kSkip : 0;
    if (count < kMinIterations) {
        fit.reason = "linear regime has " + std::to_string(count) + " iterations, need " +
                     std::to_string(kMinIterations);
        return fit;
    }
    std::vector<double> logs;
    for (std::size_t i = kSkip; i + 1 < end; ++i) logs.push_back(std::log(rec[i + 1].residual_b / rec[i].residual_b));
    const double mean = std::accumulate(logs.begin(), logs.end(), 0.0) / static_cast<double>(logs.size());
    double var = 0.0;
    for (double l : logs) var += (l - mean) * (l - mean);
    fit.ok = true;
    fit.rho = std::exp(mean);
    fit.first = rec[kSkip].k;
    fit.last = rec[end - 1].k;
    fit.log_spread = std::sqrt(var / static_cast<double>(logs.size()));
    return fit;
}

// ---------------------------------------------------------------------------
// Runs
// ---------------------------------------------------------------------------

const ReferenceCache::Entry& ReferenceCache::get(const ExperimentConfig& cfg)
{
    const Key key{cfg.n, cfg.nu, cfg.kappa, cfg.ri(), cfg.graddiv};
    auto it = entries_.find(key);
    if (it != entries_.end()) return it->second;
    ProblemParams p;
    p.nu = cfg.nu;
    p.kappa = cfg.kappa;
    p.ri = cfg.ri();
    p.graddiv = cfg.graddiv;
    auto mesh = std::make_shared<const Mesh>(cavity_mesh(cfg.n));
    Entry e;
    e.disc = std::make_shared<const Discretization>(mesh, p);
    e.reference = std::make_shared<const State>(solve_reference(*e.disc));
    return entries_.emplace(key, std::move(e)).first->second;
}

int ExperimentResult::effective_iterations() const
{
    return converged() ? trace.iterations() : std::numeric_limits<int>::max();
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, ReferenceCache& cache)
{
    cfg.validate();
    const auto& entry = cache.get(cfg);
    const Discretization& disc = *entry.disc;

    std::optional<Assimilation> assim;
    if (cfg.assimilates()) {
        assim.emplace();
        assim->op = std::make_shared<const ObservationOperator>(disc.temperature_space(), CoarseGrid{cfg.coarse_m});
        assim->data = synthesize_observations(*entry.reference, *assim->op, cfg.noise);
    }

    ExperimentResult r;
    r.config = cfg;
    auto solved = solve_nonlinear(disc, initial_guess(disc), cfg.solver(), assim ? &*assim : nullptr,
                                  entry.reference.get());
    r.trace = std::move(solved.trace);
    r.state = std::move(solved.state);
    r.fit = fit_rate(r.trace);

    if (!cfg.output.empty()) {
        std::ofstream trace(cfg.output + ".trace.csv");
        std::ofstream summary(cfg.output + ".summary.csv");
        if (!trace || !summary) throw ConfigError("config: cannot write output prefix '" + cfg.output + "'");
        write_trace_csv(trace, r.trace);
        write_summary_header(summary);
        write_summary_row(summary, r);
    }
    return r;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg)
{
    ReferenceCache cache;
    return run_experiment(cfg, cache);
}

namespace {

std::string sci(double v)
{
    if (std::isnan(v)) return "nan";
    std::ostringstream os;
    os << std::scientific << std::setprecision(10) << v;
    return os.str();
}

std::string num(double v)
{
    std::ostringstream os;
    os << std::setprecision(12) << v;
    return os.str();
}

}  // namespace

void write_trace_csv(std::ostream& os, const IterationTrace& trace)
{
    os << "iter,phase,residual_B,error_B,wall_ms\n";
    for (const auto& r : trace.records) {
        std::ostringstream ms;
        ms << std::fixed << std::setprecision(3) << r.wall_ms;
        os << r.k << ',' << to_string(r.phase) << ',' << sci(r.residual_b) << ',' << sci(r.error_b) << ',' << ms.str()
           << '\n';
    }
}

void write_summary_header(std::ostream& os)
{
    os << "ra,H,mu_u,mu_T,mode,noise,hybrid,status,iters,rate,final_error\n";
}

void write_summary_row(std::ostream& os, const ExperimentResult& r)
{
    const auto& c = r.config;
    const NudgeConfig nc = c.nudge();
    os << num(c.ra) << ',' << format_coarse_spacing(c.coarse_m) << ',' << num(nc.mu_u) << ',' << num(nc.mu_T) << ','
       << to_string(c.effective_mode()) << ',' << num(c.noise) << ',' << (c.hybrid ? "true" : "false") << ','
       << to_string(r.trace.status) << ',' << r.trace.iterations() << ','
       << (r.fit.ok ? sci(r.fit.rho) : std::string("nan")) << ',' << sci(r.trace.final_error()) << '\n';
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

SweepAxis parse_sweep_axis(const std::string& s)
{
    if (s == "H") return SweepAxis::H;
    if (s == "mu") return SweepAxis::mu;
    if (s == "mode") return SweepAxis::mode;
    if (s == "ra" || s == "Ra") return SweepAxis::ra;
    if (s == "noise") return SweepAxis::noise;
    throw ConfigError("sweep: unknown axis '" + s + "' (expected H|mu|mode|ra|noise)");
}

std::string to_string(SweepAxis a)
{
    switch (a) {
    case SweepAxis::H: return "H";
    case SweepAxis::mu: return "mu";
    case SweepAxis::mode: return "mode";
    case SweepAxis::ra: return "ra";
    case SweepAxis::noise: return "noise";
    }
    return "H";
}

namespace {

ExperimentConfig row_config(const ExperimentConfig& base, SweepAxis axis, const std::string& value, std::size_t index)
{
    ExperimentConfig c = base;
    switch (axis) {
    case SweepAxis::H: apply_override(c, "H", value); break;
    case SweepAxis::mu: apply_override(c, "mu", value); break;
    case SweepAxis::mode: apply_override(c, "mode", value); break;
    case SweepAxis::ra: apply_override(c, "ra", value); break;
    case SweepAxis::noise: apply_override(c, "noise", value); break;
    }
    if (!base.output.empty()) c.output = base.output + "." + to_string(axis) + std::to_string(index);
    c.validate();
    return c;
}

/// Row indices sorted by key (stable).
template <class Key>
std::vector<std::size_t> order_by(const std::vector<ExperimentResult>& rows, Key key)
{
    std::vector<std::size_t> idx(rows.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return key(rows[a]) < key(rows[b]); });
    return idx;
}

bool iterations_monotone(const std::vector<ExperimentResult>& rows, const std::vector<std::size_t>& idx, bool nonincreasing)
{
    for (std::size_t i = 1; i < idx.size(); ++i) {
        const int a = rows[idx[i - 1]].effective_iterations();
        const int b = rows[idx[i]].effective_iterations();
        if (nonincreasing ? b > a : b < a) return false;
    }
    return true;
}

}  // namespace

SweepResult sweep(const ExperimentConfig& base, SweepAxis axis, const std::vector<std::string>& values,
                  ReferenceCache& cache)
{
    if (values.empty()) throw ConfigError("sweep: axis values list is empty");
    SweepResult s;
    s.axis = axis;
    s.values = values;
    std::vector<ExperimentConfig> configs;
    for (std::size_t i = 0; i < values.size(); ++i) configs.push_back(row_config(base, axis, values[i], i));
    for (const auto& c : configs) s.rows.push_back(run_experiment(c, cache));

    const auto& rows = s.rows;
    switch (axis) {
    case SweepAxis::H: {
        const auto idx = order_by(rows, [](const ExperimentResult& r) { return r.config.coarse_m; });
        s.verdicts.push_back({"iterations_nonincreasing_as_H_decreases", iterations_monotone(rows, idx, true)});
        bool rates = true;
        for (std::size_t i = 0; i < idx.size(); ++i) {
            if (!rows[idx[i]].fit.ok) rates = false;
            else if (i > 0 && rows[idx[i - 1]].fit.ok && !(rows[idx[i]].fit.rho < rows[idx[i - 1]].fit.rho)) rates = false;
        }
        s.verdicts.push_back({"rate_strictly_decreasing_as_H_decreases", rates});
        break;
    }
    case SweepAxis::mu: {
        const auto idx = order_by(rows, [](const ExperimentResult& r) { return r.config.nudge().mu_u + r.config.nudge().mu_T; });
        s.verdicts.push_back({"iterations_nonincreasing_as_mu_grows", iterations_monotone(rows, idx, true)});
        break;
    }
    case SweepAxis::mode: {
        std::vector<std::size_t> idx(rows.size());
        std::iota(idx.begin(), idx.end(), 0);
        s.verdicts.push_back({"iterations_nondecreasing_in_listed_order", iterations_monotone(rows, idx, false)});
        break;
    }
    case SweepAxis::ra: {
        const auto idx = order_by(rows, [](const ExperimentResult& r) { return r.config.ra; });
        s.verdicts.push_back({"iterations_nondecreasing_as_ra_grows", iterations_monotone(rows, idx, false)});
        break;
    }
    case SweepAxis::noise: {
        double clean = 0.0;
        double noisy = std::numeric_limits<double>::infinity();
        bool any_noisy = false;
        for (const auto& r : rows) {
            const double e = r.trace.final_error();
            if (r.config.noise > 0.0) {
                any_noisy = true;
                noisy = std::min(noisy, std::isfinite(e) ? e : 0.0);
            } else {
                clean = std::max(clean, std::isfinite(e) ? e : std::numeric_limits<double>::infinity());
            }
        }
        s.verdicts.push_back({"error_plateau_only_for_noisy_rows", any_noisy && noisy > 10.0 * clean});
        break;
    }
    }
    return s;
}

void write_sweep_csv(std::ostream& os, const SweepResult& s)
{
    write_summary_header(os);
    for (const auto& r : s.rows) write_summary_row(os, r);
}

void write_verdicts_csv(std::ostream& os, const SweepResult& s)
{
    os << "axis,check,pass\n";
    for (const auto& v : s.verdicts) os << to_string(s.axis) << ',' << v.name << ',' << (v.pass ? "true" : "false") << '\n';
}

}  // namespace cdapicard
