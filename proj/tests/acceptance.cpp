// End-to-end acceptance checks at desk scale (n = 32). Prints one PASS/FAIL
// line per criterion; `acceptance 3 5` runs a subset.

#include "cdapicard/bench.hpp"
#include "cdapicard/linear_solver.hpp"
#include "cdapicard/verify.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace cdapicard;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

ReferenceCache g_cache;

ExperimentConfig base(double ra, int m = 0)
{
    ExperimentConfig c;
    c.ra = ra;
    c.coarse_m = m;
    return c;
}

ExperimentResult run(const ExperimentConfig& c) { return run_experiment(c, g_cache); }

std::string iters(const ExperimentResult& r)
{
    return r.converged() ? std::to_string(r.trace.iterations()) : to_string(r.trace.status);
}

std::string fmt(double v, int prec = 3)
{
    std::ostringstream os;
    os.precision(prec);
    os << v;
    return os.str();
}

Outcome picard_baseline()
{
    const auto plain = run(base(1e4));
    const auto cda = run(base(1e4, 4));
    Outcome o;
    o.pass = plain.converged() && plain.trace.iterations() <= 200 && plain.trace.final_residual() < 1e-8 &&
             cda.converged() && cda.trace.iterations() < plain.trace.iterations();
    o.detail = "Picard " + iters(plain) + " iterations, CDA H=1/4 " + iters(cda);
    return o;
}

Outcome enablement()
{
    const auto plain = run(base(1e5));
    Outcome o;
    o.pass = !plain.converged() && plain.trace.iterations() == 200;
    o.detail = "Picard " + to_string(plain.trace.status) + " after " + std::to_string(plain.trace.iterations());
    int previous = -1;
    for (int m : {8, 16, 32}) {
        const auto r = run(base(1e5, m));
        o.pass = o.pass && r.converged() && (previous < 0 || r.trace.iterations() <= previous);
        previous = r.converged() ? r.trace.iterations() : 1 << 30;
        o.detail += ", H=1/" + std::to_string(m) + " " + iters(r);
    }
    return o;
}

Outcome rate_scaling()
{
    Outcome o{true, {}};
    std::vector<double> rho;
    std::vector<std::string> labels;
    for (int m : {0, 4, 8, 16, 32}) {
        const auto r = run(base(1e4, m));
        const std::string label = m == 0 ? "plain" : "1/" + std::to_string(m);
        if (!r.fit.ok) {
            o.pass = false;
            o.detail += label + ": no fit (" + r.fit.reason + "); ";
            rho.push_back(std::nan(""));
        } else {
            o.detail += label + ": rho " + fmt(r.fit.rho) + "; ";
            rho.push_back(r.fit.rho);
        }
        labels.push_back(label);
    }
    for (std::size_t i = 0; i + 1 < rho.size(); ++i) o.pass = o.pass && rho[i + 1] < rho[i];
    // Quartering H: indices 1 -> 3 and 2 -> 4.
    for (std::size_t i = 1; i + 2 < rho.size(); ++i) {
        const double q = rho[i + 2] / rho[i];
        o.pass = o.pass && q >= 0.25 && q <= 0.95;
        o.detail += "rho(" + labels[i + 2] + ")/rho(" + labels[i] + ") " + fmt(q) + "; ";
    }
    return o;
}

Outcome mode_ordering()
{
    Outcome o{true, {}};
    for (double ra : {1e4, 1e5}) {
        std::vector<ExperimentResult> rows;
        for (NudgeMode mode : {NudgeMode::both, NudgeMode::u_only, NudgeMode::t_only}) {
            auto c = base(ra, 8);
            c.mode = mode;
            rows.push_back(run(c));
        }
        const int b = rows[0].effective_iterations();
        const int u = rows[1].effective_iterations();
        const int t = rows[2].effective_iterations();
        o.pass = o.pass && rows[0].converged() && b <= u && u <= t;
        if (ra == 1e5) o.pass = o.pass && t > u && t > b;
        o.detail += "Ra " + fmt(ra) + ": both " + iters(rows[0]) + ", u " + iters(rows[1]) + ", T " + iters(rows[2]) + "; ";
    }
    return o;
}

Outcome noise_plateau()
{
    Outcome o{true, {}};
    for (int m : {8, 16, 32}) {
        auto c = base(1e5, m);
        c.noise = 1e-3;
        const auto r = run(c);
        const auto& rec = r.trace.records;
        const double e = r.trace.final_error();
        bool flat = rec.size() >= 3;
        for (std::size_t i = rec.size() >= 3 ? rec.size() - 3 : 0; flat && i < rec.size(); ++i) {
            flat = std::abs(rec[i].error_b - e) <= 0.01 * e;
        }
        o.pass = o.pass && r.converged() && r.trace.final_residual() < 1e-8 && e >= 1e-4 && e <= 1e-2 && flat;
        o.detail += "H=1/" + std::to_string(m) + " " + iters(r) + " iterations, error " + fmt(e) +
                    (flat ? "" : " (not flat)") + "; ";
    }
    return o;
}

Outcome hybrid_handoff()
{
    Outcome o{true, {}};
    for (int m : {8, 16, 32}) {
        auto c = base(1e5, m);
        c.noise = 1e-3;
        c.hybrid = true;
        const auto r = run(c);
        const auto& rec = r.trace.records;
        std::size_t sw = 0;
        while (sw < rec.size() && rec[sw].phase != Phase::newton) ++sw;
        const int newton = static_cast<int>(rec.size() - sw);
        bool bump = sw > 0 && sw < rec.size() && rec[sw].residual_b > rec[sw - 1].residual_b;
        // After the bump every Newton update shrinks, each by a larger factor than the last.
        bool superlinear = newton >= 2;
        for (std::size_t i = sw + 1; superlinear && i < rec.size(); ++i) {
            superlinear = rec[i].residual_b < rec[i - 1].residual_b;
            if (i >= sw + 2) {
                superlinear = superlinear && rec[i].residual_b / rec[i - 1].residual_b <
                                                 rec[i - 1].residual_b / rec[i - 2].residual_b;
            }
        }
        o.pass = o.pass && r.converged() && bump && superlinear && newton <= 6 && r.trace.final_error() <= 1e-8;
        o.detail += "H=1/" + std::to_string(m) + ": switch after " + std::to_string(sw) + ", Newton " +
                    std::to_string(newton) + (bump ? ", bump" : ", no bump") + (superlinear ? "" : ", not superlinear") +
                    ", error " + fmt(r.trace.final_error()) + "; ";
    }
    return o;
}

Outcome from_report(const VerifyReport& r, const std::function<bool(const CheckResult&)>& select = {})
{
    Outcome o{true, {}};
    for (const auto& c : r.checks) {
        if (select && !select(c)) continue;
        o.pass = o.pass && c.pass;
        if (!c.pass || select) o.detail += c.name + " " + fmt(c.value) + (c.pass ? "" : " FAILED") + "; ";
    }
    if (o.detail.empty()) o.detail = std::to_string(r.checks.size()) + " checks";
    return o;
}

Outcome properties() { return from_report(property_suite()); }
Outcome oracle() { return from_report(oracle_suite()); }

Outcome manufactured()
{
    return from_report(manufactured_suite(), [](const CheckResult& c) {
        return c.name.rfind("order_u", 0) == 0 || c.name.rfind("order_T", 0) == 0 || c.name == "nonlinear_solves";
    });
}

struct Criterion {
    int id;
    const char* name;
    double budget_s;  // 0 means no runtime bound
    Outcome (*run)();
};

const Criterion kCriteria[] = {
    {1, "Picard baseline", 300.0, picard_baseline},
    {2, "enablement at higher Ra", 900.0, enablement},
    {3, "rate scaling in H", 0.0, rate_scaling},
    {4, "nudging-mode ordering", 0.0, mode_ordering},
    {5, "noise plateau", 0.0, noise_plateau},
    {6, "hybrid hand-off", 0.0, hybrid_handoff},
    {7, "property suites", 0.0, properties},
    {8, "dense oracle equivalence", 0.0, oracle},
    {9, "manufactured convergence", 0.0, manufactured},
};

}  // namespace

int main(int argc, char** argv)
{
    ensure_sparse_backend(argv);
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::stoi(argv[i]));

    int failures = 0;
    for (const auto& c : kCriteria) {
        if (!selected.empty() && !selected.count(c.id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (c.budget_s > 0.0 && secs > c.budget_s) {
            o.pass = false;
            o.detail += " over the " + fmt(c.budget_s) + " s budget;";
        }
        std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << c.id << " (" << c.name << ", " << fmt(secs, 4)
                  << " s): " << o.detail << std::endl;
        failures += o.pass ? 0 : 1;
    }
    return failures == 0 ? 0 : 1;
}
