// Acceptance run: one PASS/FAIL line per criterion. Exit status is the number
// of failed criteria (capped at 1). Argument: scratch directory for CLI runs.

#include "oracles.hpp"

#include <dcovsel/commands.hpp>
#include <dcovsel/cv.hpp>
#include <dcovsel/dcov.hpp>
#include <dcovsel/rng.hpp>
#include <dcovsel/screening.hpp>
#include <dcovsel/svm_reject.hpp>
#include <dcovsel/synth.hpp>

#include <fmt/format.h>

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

using namespace dcovsel;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

Eigen::MatrixXd gaussian(Rng& rng, Eigen::Index n, Eigen::Index k)
{
    Eigen::MatrixXd m(n, k);
    for (Eigen::Index j = 0; j < k; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) {
            m(i, j) = rng.normal();
        }
    }
    return m;
}

oracle::Rows rows_of(const Eigen::MatrixXd& m)
{
    oracle::Rows r(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            r[static_cast<std::size_t>(i)].push_back(m(i, j));
        }
    }
    return r;
}

double rel_err(double got, long double want)
{
    return static_cast<double>(std::abs(got - want) / std::max<long double>(std::abs(want), 1e-300L));
}

unsigned worker_count() { return std::max(1u, std::thread::hardware_concurrency()); }

// --- 1 ------------------------------------------------------------------------

Verdict dcov_oracle()
{
    Rng rng(20240601);
    double worst = 0.0;
    for (int t = 0; t < 200; ++t) {
        const auto n = static_cast<Eigen::Index>(2 + rng.below(7));
        const auto kx = static_cast<Eigen::Index>(1 + rng.below(3));
        const auto ky = static_cast<Eigen::Index>(1 + rng.below(3));
        const Eigen::MatrixXd xm = gaussian(rng, n, kx);
        const Eigen::MatrixXd ym = gaussian(rng, n, ky);
        const VariableBlock x(xm), y(ym);
        const auto ref = oracle::distance_stats(rows_of(xm), rows_of(ym));
        worst = std::max({worst, rel_err(dcov2(x, y), ref.v2), rel_err(dvar2(x), ref.vx2), rel_err(dvar2(y), ref.vy2),
                          rel_err(dcor2(x, y).r2, ref.r2)});
    }
    return {worst <= 1e-12, fmt::format("200 instances, worst relative error {:.3g}", worst)};
}

// --- 2 ------------------------------------------------------------------------

Verdict appended_noise()
{
    int holds = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng(seed, "acceptance-appended-noise");
        const Eigen::MatrixXd x = gaussian(rng, 200, 1);
        const Eigen::MatrixXd z = gaussian(rng, 200, 1);
        const Eigen::MatrixXd y = x + 0.5 * gaussian(rng, 200, 1);
        Eigen::MatrixXd xz(200, 2);
        xz << x, z;
        if (dcov2(VariableBlock(xz), VariableBlock(y)) <= dcov2(VariableBlock(x), VariableBlock(y))) {
            ++holds;
        }
    }
    return {holds >= 95, fmt::format("V^2((x,z),y) <= V^2(x,y) in {}/100 seeds", holds)};
}

// --- 3 ------------------------------------------------------------------------

Verdict greedy_stopping()
{
    ScreeningConfig c;
    c.method = ScreeningMethod::dcov_greedy;
    bool ties_added = true;
    int stopped = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        Rng rng(seed, "acceptance-stopping");
        Eigen::MatrixXd tie(200, 2);
        tie.col(0) = gaussian(rng, 200, 1).col(0);
        tie.col(1).setConstant(3.0);
        const Eigen::VectorXd driver = tie.col(0);
        const auto with_tie = dcov_greedy(tie, VariableBlock(driver), c);
        ties_added = ties_added && with_tie.selected == std::vector<std::size_t>{0, 1} &&
                     with_tie.trajectory.size() == 2 && with_tie.trajectory[0] == with_tie.trajectory[1];

        const Eigen::MatrixXd noise = gaussian(rng, 200, 2);
        const Eigen::VectorXd y = noise.col(0);
        const auto result = dcov_greedy(noise, VariableBlock(y), c);
        if (result.selected == std::vector<std::size_t>{0} && result.stop_reason == StopReason::decrease_observed) {
            ++stopped;
        }
    }
    return {ties_added && stopped >= 45,
            fmt::format("constant-column tie added in every seed: {}; noise rejected in {}/50 seeds",
                        ties_added ? "yes" : "no", stopped)};
}

// --- 4 ------------------------------------------------------------------------

Verdict screening_recovery()
{
    const Eigen::Index n = 200, p = 1000;
    const std::size_t top = default_model_size(n);
    int recovered = 0;
    std::vector<std::size_t> worst_rank(4, 0);
    std::vector<int> hits(4, 0);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed, "acceptance-recovery");
        const Eigen::MatrixXd x = gaussian(rng, n, p);
        const Eigen::VectorXd e = gaussian(rng, n, 1).col(0);
        const Eigen::VectorXd y =
            x.col(0) + x.col(1) + 0.5 * x.col(2).cwiseProduct(x.col(3)) + e;
        const auto ranking = marginal_rank(x, VariableBlock(y), worker_count());
        bool all = true;
        for (std::size_t k = 0; k < 4; ++k) {
            const auto at = static_cast<std::size_t>(
                std::find(ranking.order.begin(), ranking.order.end(), k) - ranking.order.begin());
            worst_rank[k] = std::max(worst_rank[k], at + 1);
            all = all && at < top;
            hits[k] += at < top ? 1 : 0;
        }
        recovered += all ? 1 : 0;
    }
    return {recovered >= 17,
            fmt::format("all 4 drivers in the top {} in {}/20 seeds (per driver x1..x4: {}, {}, {}, {} of 20; worst "
                        "ranks {}, {}, {}, {})",
                        top, recovered, hits[0], hits[1], hits[2], hits[3], worst_rank[0], worst_rank[1],
                        worst_rank[2], worst_rank[3])};
}

// --- 5 ------------------------------------------------------------------------

Verdict svm_optimality()
{
    Rng rng(77, "acceptance-svm");
    double worst_gap = 0.0, worst_kkt = 0.0;
    bool never_worse = true;
    for (int t = 0; t < 50; ++t) {
        const int n = 6 + static_cast<int>(rng.below(15));
        const int m = 1 + static_cast<int>(rng.below(5));
        Eigen::MatrixXd x = gaussian(rng, n, m);
        std::vector<int> y(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            y[static_cast<std::size_t>(i)] = x(i, 0) - 0.5 * x(i, m - 1) + rng.normal() > 0 ? 1 : -1;
        }
        y[0] = 1;
        y[1] = -1;
        const double d = std::array{1.0 / 3.0, 0.25, 0.2}[static_cast<std::size_t>(t % 3)];
        const double r = 0.002 + 0.2 * rng.uniform();
        FitOptions o;
        o.standardize = false;
        const auto model = fit(x, y, r, RejectLossParams{d}, o);
        const auto ref = oracle::projected_subgradient(rows_of(x), y, r, d, true);
        worst_gap = std::max(worst_gap, std::abs(model.objective - ref.objective));
        worst_kkt = std::max(worst_kkt, model.kkt_residual);
        never_worse = never_worse && model.objective <= ref.objective + 1e-9;
    }
    const RejectLossParams quarter{0.25}, fifth{0.2};
    const bool units = generalized_hinge(-1.0, quarter) == 4.0 && generalized_hinge(0.0, quarter) == 1.0 &&
                       generalized_hinge(0.5, quarter) == 0.5 && generalized_hinge(1.0, quarter) == 0.0 &&
                       generalized_hinge(3.0, quarter) == 0.0 && generalized_hinge(-1.0, fifth) == 5.0 &&
                       generalized_hinge(-0.5, fifth) == 3.0;
    return {worst_gap <= 1e-4 && worst_kkt <= 1e-6 && units,
            fmt::format("50 instances: max |objective - oracle| {:.3g}, max KKT residual {:.3g}, never above oracle: "
                        "{}; unit values of phi_d: {}",
                        worst_gap, worst_kkt, never_worse ? "yes" : "no", units ? "match" : "MISMATCH")};
}

// --- 6 ------------------------------------------------------------------------

SynthOutput logistic_sample(std::size_t n, std::uint64_t seed)
{
    SynthSpec s;
    s.n = n;
    s.p = 2;
    s.model = SynthModel::logistic;
    s.active = {0, 1};
    s.effect = 1.0;
    s.prior = 0.5;
    s.seed = seed;
    return synth_generate(s);
}

std::vector<int> plus_minus(const Dataset& data) { return binary_labels(data, std::string("1")); }

double mean_loss(const RejectModel& model, const Eigen::MatrixXd& x, const std::vector<int>& y, double d)
{
    const auto decisions = predict(model, x);
    double total = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        total += l_loss(decisions[i].label, y[i], d);
    }
    return total / static_cast<double>(y.size());
}

Verdict bayes_consistency()
{
    const auto train = logistic_sample(2000, 601);
    const auto tune = logistic_sample(2000, 602);
    const auto test = logistic_sample(50000, 603);
    const auto y_train = plus_minus(train.data), y_tune = plus_minus(tune.data), y_test = plus_minus(test.data);
    bool pass = true;
    std::string detail;
    for (const double d : {0.25, 0.2}) {
        const RejectLossParams params{d};
        std::optional<RejectModel> best;
        double best_loss = 0.0;
        for (const double r : default_r_grid()) {
            const auto model = fit(train.data.x, y_train, r, params);
            const double loss = mean_loss(model, tune.data.x, y_tune, d);
            if (!best || loss <= best_loss + 1e-12) {
                best = model;
                best_loss = loss;
            }
        }
        const double test_loss = mean_loss(*best, test.data.x, y_test, d);
        const double train_loss = mean_loss(*best, train.data.x, y_train, d);
        const double bayes = bayes_risk(test.eta, d);
        pass = pass && std::abs(test_loss - bayes) <= 0.05;
        detail += fmt::format("{}d = {}: r = {}, l-loss {:.4f} on 50000 fresh subjects ({:.4f} on training), "
                              "E min(eta, 1-eta, d) = {:.4f}",
                              detail.empty() ? "" : "; ", format_real(d), format_real(best->r), test_loss, train_loss,
                              bayes);
    }
    return {pass, detail};
}

// --- 7 and 8 --------------------------------------------------------------------

struct NullAndSignal {
    std::vector<double> d_values;
    std::vector<int> truth;
    std::vector<int> permuted_truth;
    std::vector<ReplicationRecord> original;
    std::vector<ReplicationRecord> permuted;
};

const NullAndSignal& tcga_shaped_runs()
{
    static const NullAndSignal runs = [] {
        SynthSpec spec;
        spec.n = 279;
        spec.p = 2000;
        spec.model = SynthModel::logistic;
        spec.positives = 191;
        spec.active = {0, 500, 1000, 1500};
        // Weak signal: most subjects are withheld often enough to land inside
        // the voting bins, and fewer replications stay decisive as d shrinks.
        spec.effect = 0.65;
        spec.seed = 279;
        const auto synth = synth_generate(spec);
        const Dataset permuted = permute_response(synth.data, spec.seed);
        HarnessConfig config;
        config.reps = 50;
        config.seed = spec.seed;
        config.threads = worker_count();
        NullAndSignal out;
        out.d_values = config.d_values;
        out.truth = plus_minus(synth.data);
        out.permuted_truth = plus_minus(permuted);
        out.original = mcv_run(synth.data.x, out.truth, config);
        out.permuted = mcv_run(permuted.x, out.permuted_truth, config);
        return out;
    }();
    return runs;
}

Verdict null_calibration()
{
    const auto& runs = tcga_shaped_runs();
    const double prior = 191.0 / 279.0;
    const auto rows = summarize(runs.permuted, runs.d_values);
    bool pass = true;
    std::string detail = fmt::format("prior {:.4f}", prior);
    for (const auto& row : rows) {
        const bool near = row.decisive == 0 || std::abs(row.testing_accuracy.mean - prior) <= 0.05;
        pass = pass && near;
        detail += fmt::format("; d = {}: {} decisive reps, testing accuracy {}", format_real(row.d), row.decisive,
                              row.decisive ? fmt::format("{:.4f}", row.testing_accuracy.mean) : std::string("n/a"));
    }
    const auto& third = rows.front();
    const auto& fifth = rows.back();
    const bool fewer = fifth.decisive < third.decisive;
    pass = pass && fewer && third.decisive > 0;
    const auto original = summarize(runs.original, runs.d_values);
    detail += fmt::format(" (planted signal, same grid: {}/{}/{} decisive reps)", original[0].decisive,
                          original[1].decisive, original[2].decisive);
    return {pass, detail};
}

/// P(X >= k) for X ~ Binomial(n, p).
double binomial_upper_tail(std::size_t k, std::size_t n, double p)
{
    double total = 0.0;
    for (std::size_t j = k; j <= n; ++j) {
        const double log_term = std::lgamma(static_cast<double>(n) + 1) - std::lgamma(static_cast<double>(j) + 1) -
                                std::lgamma(static_cast<double>(n - j) + 1) + static_cast<double>(j) * std::log(p) +
                                static_cast<double>(n - j) * std::log1p(-p);
        total += std::exp(log_term);
    }
    return std::min(1.0, total);
}

std::string describe(const VotingTable& table)
{
    std::string out;
    for (const auto& bin : table.bins) {
        out += fmt::format("{}({},{}] {}", out.empty() ? "" : ", ", format_real(bin.lo), format_real(bin.hi),
                           bin.frequency ? fmt::format("{}/{}", bin.positives, bin.frequency) : std::string("-"));
    }
    return out + fmt::format(", below {}, above {}", table.below, table.above);
}

Verdict voting_monotonicity()
{
    const auto& runs = tcga_shaped_runs();
    const std::size_t k = runs.d_values.size() - 1; // d = 1/5
    const auto planted =
        bin_voting_scores(voting_scores(runs.original, runs.truth.size(), k), runs.truth, default_voting_bins());
    double previous = -1.0;
    bool monotone = true;
    std::size_t non_empty = 0;
    for (const auto& bin : planted.bins) {
        if (bin.frequency == 0) {
            continue;
        }
        ++non_empty;
        monotone = monotone && bin.proportion() >= previous;
        previous = bin.proportion();
    }
    const auto permuted = bin_voting_scores(voting_scores(runs.permuted, runs.permuted_truth.size(), k),
                                            runs.permuted_truth, default_voting_bins());
    const auto& top = permuted.bins.back();
    const double prior = 191.0 / 279.0;
    const double tail = top.frequency ? binomial_upper_tail(top.positives, top.frequency, prior) : 1.0;
    const bool null_ok = top.frequency == 0 || tail > 0.05;
    return {monotone && non_empty >= 2 && null_ok,
            fmt::format("d = {}, planted: {} (non-decreasing over {} non-empty bins: {}); permuted: {} (top-bin "
                        "binomial tail {:.3g})",
                        format_real(runs.d_values[k]), describe(planted), non_empty, monotone ? "yes" : "no",
                        describe(permuted), tail)};
}

// --- 9 ------------------------------------------------------------------------

std::map<std::string, std::string> file_tree(const fs::path& dir)
{
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) {
            std::ifstream in(e.path(), std::ios::binary);
            out[fs::relative(e.path(), dir).string()] = {std::istreambuf_iterator<char>(in),
                                                         std::istreambuf_iterator<char>()};
        }
    }
    return out;
}

Verdict cli_determinism(const fs::path& work)
{
    fs::remove_all(work);
    fs::create_directories(work);
    const auto at = [&](const std::string& name) { return (work / name).string(); };
    std::ostringstream sink;
    const auto cli = [&](std::vector<std::string> args) {
        args.insert(args.begin(), "dcovsel");
        return cli::run_cli(args, sink, sink);
    };
    const std::string data = at("synth") + "/data.csv";
    const std::vector<std::string> grid{"--r-grid", "0.01,0.03,0.1", "--positive-label", "1"};
    struct Run {
        std::string dir;
        std::vector<std::string> args;
        bool threaded;
    };
    const std::vector<Run> plan{
        {"synth", {"synth", "--preset", "tcga", "--p", "300"}, false},
        {"screen", {"screen", "--input", data, "--positive-label", "1"}, true},
        {"screen_dcsis", {"screen", "--input", data, "--method", "dcsis", "--positive-label", "1"}, true},
        {"fit", {"svmr-fit", "--input", data, "--positive-label", "1", "--features", "g001,g076,g151,g226"}, false},
        {"predict", {"svmr-predict", "--input", data, "--model", at("fit") + "/model.json"}, false},
        {"cv5", {"cv5", "--input", data}, true},
        {"mcv", {"mcv", "--input", data, "--reps", "6"}, true},
        {"permute", {"permute-mcv", "--input", data, "--reps", "4"}, true},
        {"report_overlap", {"report", "--kind", "overlap", "--from", at("cv5")}, false},
        {"report_summary", {"report", "--kind", "mcv-summary", "--from", at("mcv")}, false},
        {"report_voting", {"report", "--kind", "voting-bins", "--from", at("mcv"), "--input", data,
                           "--positive-label", "1"}, false},
        {"report_distance", {"report", "--kind", "pairwise-distance", "--from", at("cv5"), "--input", data}, false},
        {"report_frequency", {"report", "--kind", "frequency-histogram", "--from", at("mcv"), "--input", data}, false},
    };
    std::size_t files = 0;
    std::vector<std::string> problems;
    for (const auto& run : plan) {
        auto args = run.args;
        if (run.args.front() == "cv5" || run.args.front() == "mcv" || run.args.front() == "permute-mcv") {
            args.insert(args.end(), grid.begin(), grid.end());
        }
        args.insert(args.end(), {"--out-dir", at(run.dir)});
        if (const int code = cli(args); code != 0) {
            problems.push_back(fmt::format("{} exited {}", run.dir, code));
            continue;
        }
        std::vector<std::string> replay{"--config", at(run.dir) + "/manifest.txt", "--out-dir", at(run.dir + "_replay")};
        if (run.threaded) {
            replay.insert(replay.end(), {"--threads", "3"});
        }
        if (const int code = cli(replay); code != 0) {
            problems.push_back(fmt::format("{} replay exited {}", run.dir, code));
            continue;
        }
        const auto a = file_tree(at(run.dir));
        const auto b = file_tree(at(run.dir + "_replay"));
        files += a.size();
        if (a != b) {
            problems.push_back(run.dir + " replay differs");
        }
    }
    std::string detail = fmt::format("{} commands replayed from their manifests, {} files compared byte for byte",
                                     plan.size(), files);
    for (const auto& p : problems) {
        detail += "; " + p;
    }
    return {problems.empty(), detail};
}

} // namespace

int main(int argc, char** argv)
{
    const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "dcovsel_acceptance";
    struct Criterion {
        int id;
        const char* name;
        double limit_seconds; // 0: no runtime bound
        std::function<Verdict()> check;
    };
    const std::vector<Criterion> criteria{
        {1, "dcov oracle equivalence", 5.0, dcov_oracle},
        {2, "appended independent noise does not raise V^2", 30.0, appended_noise},
        {3, "greedy stopping semantics", 60.0, greedy_stopping},
        {4, "marginal screening recovery", 300.0, screening_recovery},
        {5, "SVM-R optimality", 0.0, svm_optimality},
        {6, "Bayes consistency", 0.0, bayes_consistency},
        {7, "null calibration under permuted labels", 0.0, null_calibration},
        {8, "voting monotonicity", 0.0, voting_monotonicity},
        {9, "determinism under manifest replay", 0.0, [&] { return cli_determinism(work); }},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = c.check();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::string timing = fmt::format("{:.2f} s", seconds);
        if (c.limit_seconds > 0) {
            timing += fmt::format(", limit {} s", c.limit_seconds);
            v.pass = v.pass && seconds < c.limit_seconds;
        }
        failed += v.pass ? 0 : 1;
        std::cout << fmt::format("{} criterion {}: {}: {} [{}]", v.pass ? "PASS" : "FAIL", c.id, c.name, v.detail,
                                 timing)
                  << std::endl;
    }
    std::cout << fmt::format("{} of {} criteria passed", criteria.size() - static_cast<std::size_t>(failed),
                             criteria.size())
              << std::endl;
    return failed ? 1 : 0;
}
