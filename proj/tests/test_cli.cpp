#include "oracles.hpp"

#include "rawmix/tensor_io.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;

namespace {

struct CliRun {
    int code = -1;
    std::string err;
};

// Runs the CLI with stderr captured to a file.
CliRun cli(const std::string& args)
{
    const fs::path err = fs::temp_directory_path() / "rawmix_cli_stderr.txt";
    const std::string cmd = std::string(RAWMIX_CLI_PATH) + " " + args + " > /dev/null 2> " + err.string();
    const int status = std::system(cmd.c_str());
    CliRun r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(err);
    r.err.assign(std::istreambuf_iterator<char>(in), {});
    return r;
}

fs::path work_dir(const std::string& name)
{
    fs::path d = fs::temp_directory_path() / "rawmix_cli_tests" / name;
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

} // namespace

TEST(Cli, SynthRenderAndWhiteBalanceTwice)
{
    const fs::path d = work_dir("wb");
    ASSERT_EQ(cli("synth --msfa imec4x4 --classes 2 --resolution 32 --patch-size 16 --seed 1 --out " +
                  (d / "scenes").string()).code, 0);
    ASSERT_TRUE(fs::exists(d / "scenes" / "dataset.json"));
    ASSERT_EQ(cli("render --illuminant warm --in " + (d / "scenes" / "scene_000.bin").string() + " --out " +
                  (d / "raw.bin").string()).code, 0);
    ASSERT_EQ(cli("wb --in " + (d / "raw.bin").string() + " --out " + (d / "wb1.bin").string()).code, 0);
    ASSERT_EQ(cli("wb --in " + (d / "wb1.bin").string() + " --out " + (d / "wb2.bin").string()).code, 0);
    const auto a = rawmix::load_raw(d / "wb1.bin"), b = rawmix::load_raw(d / "wb2.bin");
    EXPECT_LT(oracle::max_abs_diff(a.data(), b.data()), 1e-6);
}

TEST(Cli, UnshuffleShuffleRoundTrip)
{
    const fs::path d = work_dir("shuffle");
    std::mt19937_64 rng(3);
    const auto img = oracle::random_raw(rawmix::MsfaPattern::imec5x5(), 3, 4, rng);
    rawmix::save_raw(img, d / "in.bin");
    ASSERT_EQ(cli("unshuffle --in " + (d / "in.bin").string() + " --out " + (d / "cube.bin").string()).code, 0);
    ASSERT_EQ(cli("shuffle --in " + (d / "cube.bin").string() + " --out " + (d / "back.bin").string()).code, 0);
    const auto back = rawmix::load_raw(d / "back.bin");
    EXPECT_TRUE(std::equal(img.data().begin(), img.data().end(), back.data().begin()));
}

TEST(Cli, VerifyPasses)
{
    EXPECT_EQ(cli("verify --msfa imec5x5 --cases 3").code, 0);
    EXPECT_EQ(cli("--kernels scalar verify --msfa imec2x2 --cases 3").code, 0);
}

TEST(Cli, UsageErrorsExitOne)
{
    EXPECT_EQ(cli("frobnicate").code, 1);
    EXPECT_EQ(cli("verify --msfa bogus").code, 1);
}

TEST(Cli, MissingInputIsIoErrorWithJsonLine)
{
    const CliRun r = cli("--json wb --in /nonexistent/raw.bin --out /tmp/x.bin");
    EXPECT_EQ(r.code, 3);
    std::string line = r.err;
    while (!line.empty() && line.back() == '\n')
        line.pop_back();
    EXPECT_EQ(line.find('\n'), std::string::npos) << r.err;
    const auto j = nlohmann::json::parse(line);
    EXPECT_TRUE(j.contains("error"));
}
