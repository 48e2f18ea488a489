#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "awpi/cli.hpp"
#include "support.hpp"

namespace {

using namespace awpi;
using namespace awpi::testing;

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

// Run the awpi executable; stdout and stderr are captured through files.
Outcome run(const std::string& args)
{
    static int counter = 0;
    const auto dir = std::filesystem::temp_directory_path();
    const auto out = dir / ("awpi_cli_out_" + std::to_string(counter));
    const auto err = dir / ("awpi_cli_err_" + std::to_string(counter++));
    const std::string cmd = std::string("\"") + AWPI_CLI + "\" " + args + " >\"" + out.string() + "\" 2>\"" +
                            err.string() + "\"";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

std::string cfg(const char* name) { return "\"" + config_path(name).string() + "\""; }

std::filesystem::path write_config(const std::string& name, const std::string& text)
{
    const auto p = std::filesystem::temp_directory_path() / name;
    std::ofstream(p, std::ios::binary) << text;
    return p;
}

TEST(Simulate, LinearConfig)
{
    const auto dir = scratch_dir("cli_simulate");
    const auto r = run("simulate " + cfg("linear_decentralized.cfg") + " --out \"" + dir.string() + "\"");
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(std::filesystem::exists(dir / "linear_decentralized.csv"));
    EXPECT_NE(r.out.find("output_points=801"), std::string::npos);
}

TEST(Simulate, SyntaxErrorIsConfigError)
{
    const auto p = write_config("awpi_bad_syntax.cfg", "{\n  \"schema_version\": 1,\n  \"system\": [\n}\n");
    const auto r = run("simulate \"" + p.string() + "\"");
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("line 4, column 1"), std::string::npos) << r.err;
}

TEST(Simulate, UnknownKeyIsConfigError)
{
    std::string text = slurp(config_path("linear_decentralized.cfg"));
    text.replace(text.find("\"kA\": 0.4"), 9, "\"kA\": 0.4, \"kQ\": 1");
    const auto p = write_config("awpi_unknown_key.cfg", text);
    const auto r = run("simulate \"" + p.string() + "\"");
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("controller.kQ: unknown key"), std::string::npos) << r.err;
}

TEST(Simulate, ZeroCapacityIsSolverError)
{
    std::string text = slurp(config_path("dhn_calibrated.cfg"));
    text.replace(text.find("\"capacity_scale\": 1e-3"), 22, "\"capacity_scale\": 0");
    text.replace(text.find("\"fig1_network.json\""), 19, "\"" + config_path("fig1_network.json").string() + "\"");
    const auto p = write_config("awpi_zero_capacity.cfg", text);
    const auto r = run("simulate \"" + p.string() + "\" --out \"" + scratch_dir("cli_zero").string() + "\"");
    EXPECT_EQ(r.code, 3) << r.err;
    EXPECT_NE(r.err.find("solver error"), std::string::npos);
}

TEST(Simulate, UnforcedBadTuningIsConfigError)
{
    std::string text = slurp(config_path("linear_decentralized.cfg"));
    text.replace(text.find("\"kA\": 0.4"), 9, "\"kA\": 0.6");
    const auto p = write_config("awpi_bad_tuning.cfg", text);
    const auto dir = scratch_dir("cli_tuning");
    EXPECT_EQ(run("simulate \"" + p.string() + "\" --out \"" + dir.string() + "\"").code, 2);
    EXPECT_EQ(run("simulate \"" + p.string() + "\" --force --out \"" + dir.string() + "\"").code, 0);
}

TEST(Simulate, MissingFileAndBadFlag)
{
    EXPECT_EQ(run("simulate /nonexistent/config.cfg").code, 2);
    EXPECT_EQ(run("check " + cfg("linear_decentralized.cfg") + " --samples many").code, 2);
    EXPECT_EQ(run("").code, 2);
}

TEST(Check, MMatrixPasses)
{
    const auto r = run("check " + cfg("linear_decentralized.cfg"));
    EXPECT_EQ(r.code, 0) << r.out;
    for (const char* p : {"assumption1: PASS", "lemma1: PASS", "lemma2: PASS", "tuning (decentralized): PASS"})
        EXPECT_NE(r.out.find(p), std::string::npos) << p;
}

TEST(Check, CounterexamplePrinted)
{
    const auto r = run("check " + cfg("counterexample.cfg") + " --assumption1");
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.out.find("counterexample: (i)"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("first=["), std::string::npos);
}

TEST(Check, DhnAssumption)
{
    const auto r = run("check " + cfg("dhn_calibrated.cfg") + " --assumption1 --samples 200");
    EXPECT_EQ(r.code, 0) << r.out;
}

TEST(Check, DhnPublishedGainsFailTuning)
{
    const auto r = run("check " + cfg("dhn_calibrated.cfg") + " --tuning");
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.out.find("kP*a > kI"), std::string::npos);
}

TEST(Check, SameSeedSameOutput)
{
    const std::string args = "check " + cfg("counterexample.cfg") + " --lemma2 --samples 300 --seed 9";
    EXPECT_EQ(run(args).out, run(args).out);
}

TEST(Verify, OptimalityReportsZeroMargin)
{
    const auto report = std::filesystem::temp_directory_path() / "awpi_verify_report.txt";
    const auto r = run("verify " + cfg("linear_decentralized.cfg") + " --optimality --report \"" + report.string() + "\"");
    EXPECT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("verdict.optimality_l1w.pass=true"), std::string::npos);
    EXPECT_NE(r.out.find("verdict.optimality_l1w.margin=0\n"), std::string::npos) << r.out;
    EXPECT_EQ(slurp(report), r.out);
}

TEST(Verify, RejectableStability)
{
    const auto r = run("verify " + cfg("linear_rejectable.cfg") + " --stability");
    EXPECT_EQ(r.code, 0) << r.out;
}

TEST(Verify, ForcedBadTuningMayFail)
{
    std::string text = slurp(config_path("linear_coordinating.cfg"));
    text.replace(text.find("\"kC\": 0.5"), 9, "\"kC\": 30");
    const auto p = write_config("awpi_forced_coord.cfg", text);
    EXPECT_EQ(run("verify \"" + p.string() + "\" --stability").code, 1);
    const auto r = run("verify \"" + p.string() + "\" --stability --force --starts 3 --t-max 50");
    EXPECT_TRUE(r.code == 0 || r.code == 1) << r.err;
    EXPECT_NE(r.out.find("verdict.stability."), std::string::npos);
}

TEST(Reproduce, RejectsUnknownPolicy)
{
    std::ostringstream out, err;
    cli::ReproduceArgs a;
    a.policy = "pid";
    EXPECT_EQ(cli::reproduce_dhn(a, out, err), cli::config_error);
    EXPECT_NE(err.str().find("--policy"), std::string::npos);
}

TEST(Reproduce, RejectsLinearConfig)
{
    std::ostringstream out, err;
    cli::ReproduceArgs a;
    a.config = config_path("linear_decentralized.cfg");
    EXPECT_EQ(cli::reproduce_dhn(a, out, err), cli::config_error);
}

TEST(Reproduce, ShortConfiguredRun)
{
    std::string text = slurp(config_path("dhn_calibrated.cfg"));
    text.replace(text.find("\"t1\": 96.0"), 10, "\"t1\": 1.0");
    text.replace(text.find("\"fig1_network.json\""), 19, "\"" + config_path("fig1_network.json").string() + "\"");
    const auto p = write_config("awpi_short_dhn.cfg", text);
    const auto dir = scratch_dir("cli_reproduce");
    const auto r = run("reproduce-dhn --policy coordinating --config \"" + p.string() + "\" --out \"" + dir.string() + "\"");
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(std::filesystem::exists(dir / "dhn_calibrated_coordinating.csv"));
    EXPECT_TRUE(std::filesystem::exists(dir / "dhn_calibrated_comparison.csv"));
    EXPECT_NE(r.out.find("max_mass_residual="), std::string::npos);
}

}  // namespace
