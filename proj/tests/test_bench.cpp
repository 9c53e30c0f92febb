#include "cdapicard/bench.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace cdapicard;

namespace {

IterationTrace synthetic(const std::vector<double>& residuals, Phase phase = Phase::cda_picard)
{
    IterationTrace t;
    for (std::size_t i = 0; i < residuals.size(); ++i) {
        t.records.push_back({static_cast<int>(i + 1), residuals[i], std::nan(""), phase, 1.0});
    }
    t.status = Status::converged;
    return t;
}

std::string strip_wall_time(const std::string& csv)
{
    std::istringstream in(csv);
    std::ostringstream out;
    std::string line;
    while (std::getline(in, line)) out << line.substr(0, line.rfind(',')) << '\n';
    return out.str();
}

std::string read_file(const std::filesystem::path& p)
{
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ExperimentConfig small_config()
{
    ExperimentConfig c;
    c.n = 4;
    c.ra = 5e3;
    c.coarse_m = 2;
    return c;
}

}  // namespace

TEST(Bench, RichardsonFromRayleigh)
{
    EXPECT_DOUBLE_EQ(ra_to_ri(1e4, 0.1, 0.1), 100.0);
    EXPECT_DOUBLE_EQ(ra_to_ri(1e5, 0.1, 0.1), 1000.0);
    EXPECT_THROW((void)ra_to_ri(0.0, 0.1, 0.1), std::invalid_argument);
    EXPECT_THROW((void)ra_to_ri(1e4, -0.1, 0.1), std::invalid_argument);
}

TEST(FitRate, GeometricResiduals)
{
    std::vector<double> r;
    for (int k = 1; k <= 30; ++k) r.push_back(std::pow(0.5, k));
    const auto fit = fit_rate(synthetic(r));
    ASSERT_TRUE(fit.ok) << fit.reason;
    EXPECT_NEAR(fit.rho, 0.5, 1e-12);
    EXPECT_EQ(fit.first, 3);
    EXPECT_EQ(fit.last, 23);  // 0.5^23 < 1e-7 ends the window
    EXPECT_NEAR(fit.log_spread, 0.0, 1e-12);
}

TEST(FitRate, ConstantResiduals)
{
    const auto fit = fit_rate(synthetic(std::vector<double>(30, 3.0)));
    ASSERT_TRUE(fit.ok);
    EXPECT_DOUBLE_EQ(fit.rho, 1.0);
    EXPECT_EQ(fit.last, 30);
}

TEST(FitRate, TooShortIsAnExplicitNoFit)
{
    const auto fit = fit_rate(synthetic({1.0, 0.1, 1e-2, 1e-3, 1e-4, 1e-5}));
    EXPECT_FALSE(fit.ok);
    EXPECT_NE(fit.reason.find("4 iterations"), std::string::npos) << fit.reason;
    EXPECT_FALSE(fit_rate(IterationTrace{}).ok);
}

TEST(FitRate, StopsAtTheNewtonPhase)
{
    auto t = synthetic({1, 0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625, 0.0078125});
    t.records[6].phase = Phase::newton;
    t.records[7].phase = Phase::newton;
    const auto fit = fit_rate(t);
    EXPECT_FALSE(fit.ok);  // iterations 3..6 only
    t.records[6].phase = Phase::cda_picard;
    EXPECT_TRUE(fit_rate(t).ok);
}

TEST(Config, CoarseSpacing)
{
    EXPECT_EQ(parse_coarse_spacing("1/8"), 8);
    EXPECT_EQ(parse_coarse_spacing(" 1/32 "), 32);
    EXPECT_EQ(parse_coarse_spacing("0.25"), 4);
    EXPECT_EQ(parse_coarse_spacing("none"), 0);
    EXPECT_THROW((void)parse_coarse_spacing("2/8"), ConfigError);
    EXPECT_THROW((void)parse_coarse_spacing("0.3"), ConfigError);
    EXPECT_THROW((void)parse_coarse_spacing("abc"), ConfigError);
    EXPECT_EQ(format_coarse_spacing(16), "1/16");
    EXPECT_EQ(format_coarse_spacing(0), "none");
}

TEST(Config, JsonRoundTrip)
{
    const auto c = parse_config(R"({"n": 16, "ra": 1e5, "H": "1/8", "mode": "u", "mu_u": 500, "hybrid": true})");
    EXPECT_EQ(c.n, 16);
    EXPECT_DOUBLE_EQ(c.ra, 1e5);
    EXPECT_EQ(c.coarse_m, 8);
    EXPECT_EQ(c.mode, NudgeMode::u_only);
    EXPECT_EQ(c.nudge().mu_u, 500.0);
    EXPECT_EQ(c.nudge().mu_T, 0.0);
    EXPECT_TRUE(c.hybrid);
    const auto back = parse_config(to_json(c));
    EXPECT_EQ(to_json(back), to_json(c));
}

TEST(Config, Defaults)
{
    ExperimentConfig c;
    EXPECT_EQ(c.n, 32);
    EXPECT_FALSE(c.assimilates());
    EXPECT_DOUBLE_EQ(c.ri(), 100.0);
    c.coarse_m = 4;
    EXPECT_EQ(c.nudge().mu_u, 1000.0);
    EXPECT_EQ(c.nudge().mu_T, 1000.0);
    c.noise = 1e-3;
    EXPECT_EQ(c.nudge().mu_u, 1.0);
    const auto s = c.solver();
    EXPECT_EQ(s.tol_residual, 1e-8);
    EXPECT_EQ(s.max_iter, 200);
    EXPECT_EQ(s.switch_tol, 1e-3);
}

TEST(Config, Errors)
{
    EXPECT_THROW((void)parse_config(R"({"rayleigh": 1e4})"), ConfigError);
    EXPECT_THROW((void)parse_config(R"({"n": "many"})"), ConfigError);
    EXPECT_THROW((void)parse_config(R"([1, 2])"), ConfigError);
    EXPECT_THROW((void)parse_config("{not json"), ConfigError);
    EXPECT_THROW((void)parse_config(R"({"mode": "sideways"})"), ConfigError);
    EXPECT_THROW((void)parse_config(R"({"noise": 1e-3})"), ConfigError);  // noise without observations
    EXPECT_THROW((void)parse_config(R"({"n": 0})"), ConfigError);
    EXPECT_THROW((void)load_config("/nonexistent/config.json"), ConfigError);

    ExperimentConfig c;
    apply_override(c, "ra", "2e4");
    apply_override(c, "H", "1/4");
    apply_override(c, "mode", "t");
    EXPECT_DOUBLE_EQ(c.ra, 2e4);
    EXPECT_EQ(c.coarse_m, 4);
    EXPECT_EQ(c.mode, NudgeMode::t_only);
    EXPECT_THROW(apply_override(c, "bogus", "1"), ConfigError);
}

TEST(Csv, GoldenHeaders)
{
    std::ostringstream t, s;
    write_trace_csv(t, synthetic({0.5}));
    write_summary_header(s);
    EXPECT_EQ(t.str(), read_file(std::filesystem::path(CDAPICARD_TEST_DATA) / "trace_golden.csv"));
    EXPECT_EQ(s.str(), "ra,H,mu_u,mu_T,mode,noise,hybrid,status,iters,rate,final_error\n");
}

TEST(Csv, SweepAxes)
{
    EXPECT_EQ(parse_sweep_axis("H"), SweepAxis::H);
    EXPECT_EQ(parse_sweep_axis("Ra"), SweepAxis::ra);
    EXPECT_EQ(to_string(SweepAxis::noise), "noise");
    EXPECT_THROW((void)parse_sweep_axis("x"), ConfigError);
}

TEST(Experiment, DeterministicOutputs)
{
    const auto dir = std::filesystem::temp_directory_path() / "cdapicard_determinism";
    std::filesystem::create_directories(dir);
    ReferenceCache cache;
    std::string traces[2], summaries[2];
    for (int rep = 0; rep < 2; ++rep) {
        auto c = small_config();
        c.output = (dir / ("run" + std::to_string(rep))).string();
        const auto r = run_experiment(c, cache);
        EXPECT_TRUE(r.converged());
        traces[rep] = strip_wall_time(read_file(c.output + ".trace.csv"));
        summaries[rep] = read_file(c.output + ".summary.csv");
    }
    EXPECT_EQ(cache.size(), 1u);
    EXPECT_EQ(traces[0], traces[1]);
    EXPECT_EQ(summaries[0], summaries[1]);
    std::filesystem::remove_all(dir);
}

TEST(Experiment, NonConvergedRunsCountAsInfinite)
{
    auto c = small_config();
    c.max_iter = 2;
    const auto r = run_experiment(c);
    EXPECT_FALSE(r.converged());
    EXPECT_EQ(r.trace.status, Status::max_iter);
    EXPECT_GT(r.effective_iterations(), 1000000);
}

TEST(Sweep, ModeAndNoiseVerdicts)
{
    ReferenceCache cache;
    const auto modes = sweep(small_config(), SweepAxis::mode, {"both", "u", "t"}, cache);
    ASSERT_EQ(modes.rows.size(), 3u);
    ASSERT_FALSE(modes.verdicts.empty());
    for (const auto& r : modes.rows) EXPECT_TRUE(r.converged());
    EXPECT_LE(modes.rows[0].trace.iterations(), modes.rows[2].trace.iterations());

    const auto noise = sweep(small_config(), SweepAxis::noise, {"0", "1e-3"}, cache);
    ASSERT_EQ(noise.rows.size(), 2u);
    EXPECT_GT(noise.rows[1].trace.final_error(), 10.0 * noise.rows[0].trace.final_error());
    bool all = true;
    for (const auto& v : noise.verdicts) all = all && v.pass;
    EXPECT_TRUE(all);
    EXPECT_EQ(cache.size(), 1u);

    std::ostringstream os;
    write_verdicts_csv(os, noise);
    EXPECT_EQ(os.str().rfind("axis,check,pass\n", 0), 0u);
}
