#include <dcovsel/commands.hpp>

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

namespace fs = std::filesystem;
using dcovsel::cli::run_cli;

namespace {

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::map<std::string, std::string> tree(const fs::path& dir)
{
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) {
            out[fs::relative(e.path(), dir).string()] = slurp(e.path());
        }
    }
    return out;
}

class Cli : public ::testing::Test {
protected:
    static void SetUpTestSuite()
    {
        root_ = fs::temp_directory_path() / ("dcovsel_cli_" + std::to_string(::getpid()));
        fs::remove_all(root_);
        fs::create_directories(root_);
        std::ostringstream out, err;
        const int code = run_cli({"dcovsel", "synth", "--model", "logistic", "--n", "60", "--p", "40", "--n-active", "2",
                                  "--effect", "2", "--positives", "36", "--seed", "4", "--out-dir",
                                  (root_ / "data").string()},
                                 out, err);
        ASSERT_EQ(code, 0) << err.str();
    }
    static void TearDownTestSuite() { fs::remove_all(root_); }

    int run(std::vector<std::string> args)
    {
        args.insert(args.begin(), "dcovsel");
        out_.str("");
        err_.str("");
        return run_cli(args, out_, err_);
    }

    static std::string data() { return (root_ / "data" / "data.csv").string(); }
    static std::string dir(const std::string& name) { return (root_ / name).string(); }

    /// Replays a run from its manifest (on a different thread count when the
    /// command takes one) and compares every output file.
    void expect_replay(const std::string& first, bool threaded = false)
    {
        const std::string second = first + "_replay";
        std::vector<std::string> args{"--config", dir(first) + "/manifest.txt", "--out-dir", dir(second)};
        if (threaded) {
            args.insert(args.end(), {"--threads", "3"});
        }
        ASSERT_EQ(run(args), 0) << err_.str();
        const auto a = tree(dir(first));
        const auto b = tree(dir(second));
        ASSERT_EQ(a.size(), b.size());
        for (const auto& [name, bytes] : a) {
            ASSERT_TRUE(b.count(name)) << name;
            EXPECT_EQ(bytes, b.at(name)) << name;
        }
    }

    static inline fs::path root_;
    std::ostringstream out_, err_;
};

const std::vector<std::string> fast_grid{"--r-grid", "0.01,0.1", "--d", "0.25,0.2"};

std::vector<std::string> operator+(std::vector<std::string> a, const std::vector<std::string>& b)
{
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

} // namespace

TEST_F(Cli, SynthWritesGroundTruth)
{
    EXPECT_TRUE(fs::exists(root_ / "data" / "truth.csv"));
    EXPECT_TRUE(fs::exists(root_ / "data" / "eta.csv"));
    EXPECT_TRUE(fs::exists(root_ / "data" / "manifest.txt"));
    expect_replay("data");
}

TEST_F(Cli, ScreenAndReplay)
{
    ASSERT_EQ(run({"screen", "--input", data(), "--positive-label", "1", "--out-dir", dir("screen")}), 0) << err_.str();
    for (const char* f : {"ranking.csv", "selection.csv", "trajectory.csv", "screen_summary.csv", "manifest.txt"}) {
        EXPECT_TRUE(fs::exists(fs::path(dir("screen")) / f)) << f;
    }
    expect_replay("screen", true);
    ASSERT_EQ(run({"screen", "--input", data(), "--method", "dcsis", "--model-size", "5", "--out-dir", dir("dcsis")}),
              0)
        << err_.str();
    const auto sel = dcovsel::read_csv(fs::path(dir("dcsis")) / "selection.csv");
    EXPECT_EQ(sel.rows.size(), 5u);
}

TEST_F(Cli, FitPredictAndReplay)
{
    ASSERT_EQ(run({"svmr-fit", "--input", data(), "--positive-label", "1", "--d", "0.25", "--r", "0.05", "--out-dir",
                   dir("fit")}),
              0)
        << err_.str();
    expect_replay("fit");
    ASSERT_EQ(run({"svmr-predict", "--input", data(), "--positive-label", "1", "--model", dir("fit") + "/model.json",
                   "--out-dir", dir("predict")}),
              0)
        << err_.str();
    EXPECT_EQ(slurp(fs::path(dir("predict")) / "predictions.csv"), slurp(fs::path(dir("fit")) / "fit_decisions.csv"));
    expect_replay("predict");
}

TEST_F(Cli, Cv5McvPermuteAndReplay)
{
    ASSERT_EQ(run(std::vector<std::string>{"cv5", "--input", data(), "--positive-label", "1", "--out-dir", dir("cv5")} +
                  fast_grid),
              0)
        << err_.str();
    expect_replay("cv5", true);
    ASSERT_EQ(run(std::vector<std::string>{"mcv", "--input", data(), "--positive-label", "1", "--reps", "3",
                                           "--out-dir", dir("mcv")} +
                  fast_grid),
              0)
        << err_.str();
    for (const char* f : {"records.json", "replications.csv", "summary.csv", "voting.csv", "voting_bins.csv",
                          "frequency.csv"}) {
        EXPECT_TRUE(fs::exists(fs::path(dir("mcv")) / f)) << f;
    }
    expect_replay("mcv", true);
    ASSERT_EQ(run(std::vector<std::string>{"permute-mcv", "--input", data(), "--positive-label", "1", "--reps", "2",
                                           "--out-dir", dir("perm")} +
                  fast_grid),
              0)
        << err_.str();
    EXPECT_TRUE(fs::exists(fs::path(dir("perm")) / "comparison.csv"));
    expect_replay("perm", true);

    for (const auto& [kind, from] : std::vector<std::pair<std::string, std::string>>{{"overlap", "cv5"},
                                                                                     {"mcv-summary", "mcv"},
                                                                                     {"voting-bins", "mcv"},
                                                                                     {"pairwise-distance", "cv5"},
                                                                                     {"frequency-histogram", "mcv"}}) {
        const std::string out = "report_" + kind;
        ASSERT_EQ(run({"report", "--kind", kind, "--from", dir(from), "--input", data(), "--positive-label", "1",
                       "--out-dir", dir(out)}),
                  0)
            << kind << ": " << err_.str();
        expect_replay(out);
    }
    EXPECT_EQ(run({"report", "--kind", "mcv-summary", "--from", dir("screen_missing"), "--out-dir", dir("bad")}), 2);
    EXPECT_EQ(run({"report", "--kind", "overlap", "--from", dir("data"), "--out-dir", dir("bad")}), 2);
}

TEST_F(Cli, ThreadCountDoesNotChangeOutput)
{
    const auto args = std::vector<std::string>{"mcv", "--input", data(), "--positive-label", "1", "--reps", "4"} +
                      fast_grid;
    ASSERT_EQ(run(args + std::vector<std::string>{"--threads", "1", "--out-dir", dir("t1")}), 0) << err_.str();
    ASSERT_EQ(run(args + std::vector<std::string>{"--threads", "3", "--out-dir", dir("t3")}), 0) << err_.str();
    EXPECT_EQ(tree(dir("t1")), tree(dir("t3")));
}

TEST_F(Cli, UsageErrorsExitOne)
{
    EXPECT_EQ(run({}), 1);
    EXPECT_EQ(run({"frobnicate", "--out-dir", dir("x")}), 1);
    EXPECT_EQ(run({"screen", "--out-dir", dir("x")}), 1);
    EXPECT_EQ(run({"screen", "--input", data()}), 1);
    EXPECT_EQ(run({"screen", "--input", data(), "--method", "lasso", "--out-dir", dir("x")}), 1);
    EXPECT_EQ(run({"screen", "--input", data(), "--lookahead", "0", "--out-dir", dir("x")}), 1);
    EXPECT_EQ(run({"svmr-fit", "--input", data(), "--positive-label", "1", "--d", "0.6", "--out-dir", dir("x")}), 1);
    EXPECT_EQ(run({"mcv", "--input", data(), "--positive-label", "1", "--reps", "0", "--out-dir", dir("x")}), 1);
    EXPECT_EQ(run({"screen", "--config", dir("no_such_config"), "--out-dir", dir("x")}), 1);
    EXPECT_EQ(run({"--help"}), 0);
}

TEST_F(Cli, DataErrorsExitTwo)
{
    EXPECT_EQ(run({"screen", "--input", dir("missing.csv"), "--out-dir", dir("x")}), 2);
    const auto bad = root_ / "bad.csv";
    std::ofstream(bad) << "id,g1,g2,label\na,1,NA,1\nb,2,3,-1\n";
    EXPECT_EQ(run({"screen", "--input", bad.string(), "--out-dir", dir("x")}), 2);
    EXPECT_NE(err_.str().find("'g2'"), std::string::npos) << err_.str();
    const auto negative = root_ / "negative.csv";
    std::ofstream(negative) << "g1,label\n1,1\n-2,-1\n3,1\n";
    EXPECT_EQ(run({"screen", "--input", negative.string(), "--log-transform", "--out-dir", dir("x")}), 2);
    EXPECT_EQ(run({"screen", "--input", data(), "--label-col", "nope", "--out-dir", dir("x")}), 2);
    EXPECT_EQ(run({"svmr-fit", "--input", data(), "--features", "g999", "--positive-label", "1", "--out-dir",
                   dir("x")}),
              2);
}

TEST_F(Cli, SolverFailureExitsThree)
{
    EXPECT_EQ(run({"svmr-fit", "--input", data(), "--positive-label", "1", "--max-iterations", "1", "--out-dir",
                   dir("x")}),
              3);
    EXPECT_NE(err_.str().find("solver"), std::string::npos) << err_.str();
}

TEST_F(Cli, CommandLineOverridesConfig)
{
    const auto cfg = root_ / "cfg.txt";
    std::ofstream(cfg) << "# comment\ncommand=screen\ninput=" << data()
                       << "\npositive-label=1\nmethod=dcsis\nmodel-size=3\n";
    ASSERT_EQ(run({"--config", cfg.string(), "--out-dir", dir("cfg_a")}), 0) << err_.str();
    EXPECT_EQ(dcovsel::read_csv(fs::path(dir("cfg_a")) / "selection.csv").rows.size(), 3u);
    ASSERT_EQ(run({"screen", "--config", cfg.string(), "--model-size", "6", "--out-dir", dir("cfg_b")}), 0)
        << err_.str();
    EXPECT_EQ(dcovsel::read_csv(fs::path(dir("cfg_b")) / "selection.csv").rows.size(), 6u);
    const auto manifest = slurp(fs::path(dir("cfg_b")) / "manifest.txt");
    EXPECT_NE(manifest.find("model-size=6\n"), std::string::npos) << manifest;
    EXPECT_NE(manifest.find("command=screen\n"), std::string::npos) << manifest;
    EXPECT_EQ(run({"mcv", "--config", cfg.string(), "--out-dir", dir("cfg_c")}), 1);
}
