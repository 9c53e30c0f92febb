#pragma once

// Experiment harness: configs, single runs, parameter sweeps, CSV output and
// empirical convergence-rate fits.

#include "cdapicard/solve.hpp"

#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace cdapicard {

/// Raised for malformed or inconsistent experiment configurations.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Ri = Ra * nu * kappa. Throws std::invalid_argument on nonpositive input.
double ra_to_ri(double ra, double nu, double kappa);

struct ExperimentConfig {
    int n = 32;               // unit_square(n) before barycentric refinement; h = sqrt(2)/n
    double ra = 1e4;
    double nu = 0.1;
    double kappa = 0.1;
    double graddiv = 0.0;
    int coarse_m = 0;         // H = 1/coarse_m; 0 means no observations
    NudgeMode mode = NudgeMode::both;
    std::optional<double> mu_u;  // defaults: 1000 on clean data, 1 on noisy data
    std::optional<double> mu_T;
    double noise = 0.0;
    bool hybrid = false;
    double tol = 1e-8;
    int max_iter = 200;
    double switch_tol = 1e-3;
    int newton_max = 20;
    double divergence_threshold = 1e8;
    std::string output;       // file prefix; empty writes nothing

    /// Throws ConfigError.
    void validate() const;

    [[nodiscard]] double ri() const { return ra_to_ri(ra, nu, kappa); }
    [[nodiscard]] double H() const { return coarse_m > 0 ? 1.0 / coarse_m : 0.0; }
    [[nodiscard]] bool assimilates() const { return coarse_m > 0 && effective_mode() != NudgeMode::off; }
    [[nodiscard]] NudgeMode effective_mode() const { return coarse_m > 0 ? mode : NudgeMode::off; }
    [[nodiscard]] double default_mu() const { return noise > 0.0 ? 1.0 : 1000.0; }
    [[nodiscard]] NudgeConfig nudge() const;
    [[nodiscard]] SolverConfig solver() const;
};

/// Parses "1/8", "0.125" or "8"-style (1/H) strings into the integer m with H = 1/m.
int parse_coarse_spacing(const std::string& text);
std::string format_coarse_spacing(int m);

/// Reads a flat JSON object. Unknown keys and bad values raise ConfigError.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& json_text, ExperimentConfig base = {});
/// Applies one key/value override using the same keys as the JSON file.
void apply_override(ExperimentConfig& cfg, const std::string& key, const std::string& value);
std::string to_json(const ExperimentConfig& cfg);

struct RateFit {
    bool ok = false;
    double rho = 0.0;
    int first = 0;            // iteration numbers (1-based) bounding the ratios used
    int last = 0;
    /// Standard deviation of log(r_{k+1}/r_k) over the window.
    double log_spread = 0.0;
    std::string reason;       // set when !ok
};

/// Linear-regime fit: drops the first 2 iterations, stops at the first
/// residual below 1e-7 or the first Newton step; needs >= 5 iterations.
RateFit fit_rate(const IterationTrace& trace);

/// Discretizations and reference solutions, shared across runs with the same
/// (n, nu, kappa, ri, graddiv).
class ReferenceCache {
public:
    struct Entry {
        std::shared_ptr<const Discretization> disc;
        std::shared_ptr<const State> reference;
    };

    const Entry& get(const ExperimentConfig& cfg);
    [[nodiscard]] std::size_t size() const { return entries_.size(); }

private:
    using Key = std::tuple<int, double, double, double, double>;
    std::map<Key, Entry> entries_;
};

struct ExperimentResult {
    ExperimentConfig config;
    IterationTrace trace;
    RateFit fit;
    State state;

    [[nodiscard]] bool converged() const { return trace.status == Status::converged; }
    /// Iteration count, or a very large number when the run did not converge.
    [[nodiscard]] int effective_iterations() const;
};

/// Runs one experiment; writes <output>.trace.csv and <output>.summary.csv
/// when cfg.output is set. Solver failures land in the trace status.
ExperimentResult run_experiment(const ExperimentConfig& cfg, ReferenceCache& cache);
ExperimentResult run_experiment(const ExperimentConfig& cfg);

void write_trace_csv(std::ostream& os, const IterationTrace& trace);
void write_summary_header(std::ostream& os);
void write_summary_row(std::ostream& os, const ExperimentResult& r);

enum class SweepAxis { H, mu, mode, ra, noise };
SweepAxis parse_sweep_axis(const std::string& s);
std::string to_string(SweepAxis a);

struct Verdict {
    std::string name;
    bool pass = false;
};

struct SweepResult {
    SweepAxis axis = SweepAxis::H;
    std::vector<std::string> values;
    std::vector<ExperimentResult> rows;
    std::vector<Verdict> verdicts;
};

/// One run per axis value, in the given order. Verdicts:
///   H:     iterations non-increasing and fitted rate strictly decreasing as H shrinks
///   mu:    iterations non-increasing as mu grows
///   mode:  iterations ordered as listed (e.g. both <= u <= t)
///   ra:    iterations non-decreasing as Ra grows
///   noise: a noisy row's final error exceeds every clean row's
SweepResult sweep(const ExperimentConfig& base, SweepAxis axis, const std::vector<std::string>& values,
                  ReferenceCache& cache);

/// Summary rows followed by nothing else; verdicts go to write_verdicts_csv.
void write_sweep_csv(std::ostream& os, const SweepResult& s);
void write_verdicts_csv(std::ostream& os, const SweepResult& s);

}  // namespace cdapicard
