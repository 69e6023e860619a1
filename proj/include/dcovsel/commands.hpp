#pragma once

// Command-line front end. run_cli() parses arguments, merges an optional
// key=value config file (command-line flags win), runs one command and maps
// failures to exit codes.

#include "cv.hpp"
#include "dataset.hpp"
#include "errors.hpp"
#include "io.hpp"
#include "knn.hpp"
#include "report.hpp"
#include "screening.hpp"
#include "serialization.hpp"
#include "svm_reject.hpp"
#include "synth.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <Eigen/Core>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#ifndef DCOVSEL_VERSION
#define DCOVSEL_VERSION "0.0.0"
#endif

namespace dcovsel::cli {

namespace fs = std::filesystem;

enum ExitCode : int { exit_ok = 0, exit_usage = 1, exit_data = 2, exit_solver = 3 };

namespace detail {

inline std::string render(const std::string& v) { return v; }
inline std::string render(double v) { return format_real(v); }
inline std::string render(bool v) { return v ? "true" : "false"; }
template <typename T>
    requires std::is_integral_v<T>
std::string render(T v)
{
    return std::to_string(v);
}
template <typename T>
std::string render(const std::vector<T>& v)
{
    std::string out;
    for (std::size_t k = 0; k < v.size(); ++k) {
        out += (k ? "," : "") + render(v[k]);
    }
    return out;
}

/// Options of one subcommand plus the renderers that write them back out as
/// a replayable manifest.
class OptionBook {
public:
    explicit OptionBook(CLI::App* app) : app_(app) {}

    template <typename T>
    CLI::Option* option(const std::string& key, T& var, const std::string& help, bool recorded = true)
    {
        CLI::Option* o = app_->add_option("--" + key, var, help)->capture_default_str();
        if constexpr (requires { var.push_back(var.front()); }) {
            o->delimiter(',');
        }
        if (recorded) {
            entries_.push_back({key, [&var] { return render(var); }});
        }
        return o;
    }

    CLI::Option* flag(const std::string& key, bool& var, const std::string& help)
    {
        CLI::Option* o = app_->add_flag("--" + key, var, help)->capture_default_str();
        entries_.push_back({key, [&var] { return render(var); }});
        return o;
    }

    [[nodiscard]] ConfigEntries manifest() const
    {
        ConfigEntries out{{"command", app_->get_name()}};
        for (const auto& [key, fn] : entries_) {
            auto value = fn();
            if (!value.empty()) {
                out.emplace_back(key, std::move(value));
            }
        }
        return out;
    }

    [[nodiscard]] CLI::App* app() const noexcept { return app_; }

private:
    CLI::App* app_;
    std::vector<std::pair<std::string, std::function<std::string()>>> entries_;
};

} // namespace detail

/// Values of every option across all commands; each command reads its subset.
struct Settings {
    // data
    std::string input;
    std::string label_col = "label";
    std::string id_col = "id";
    std::string positive_label;
    bool log_transform = false;
    std::string out_dir;
    // screening
    std::string method = "dcov";
    std::size_t model_size = 0;
    double epsilon = 0.0;
    std::size_t lookahead = 1;
    bool standardize = true;
    std::string response = "auto";
    // svm
    std::vector<double> d = default_d_values();
    double d_single = 0.25;
    double delta = 0.5;
    double r = 0.01;
    std::vector<double> r_grid = default_r_grid();
    bool intercept = true;
    bool svm_standardize = true;
    std::size_t max_iterations = 0;
    std::vector<std::string> features;
    std::vector<std::string> covariates;
    std::string model;
    // harness
    std::size_t reps = 50;
    std::size_t folds = 5;
    std::uint64_t seed = 1;
    unsigned threads = 1;
    std::string voting = "testing";
    std::vector<double> bins{-0.1, 0.0, 0.1, 0.2, 0.4, 1.5};
    bool skip_original = false;
    // synth
    std::string preset = "none";
    std::string synth_model = "logistic";
    std::size_t n = 100;
    std::size_t p = 50;
    std::vector<std::size_t> active;
    std::size_t n_active = 4;
    double effect = 1.0;
    double noise = 1.0;
    double prior = 0.5;
    std::size_t positives = 0;
    std::size_t classes = 4;
    std::vector<std::size_t> class_sizes;
    // report
    std::string kind;
    std::string from;
    std::string set;
};

namespace detail {

inline void add_data_options(OptionBook& book, Settings& s, bool label_required = true)
{
    book.option("input", s.input, "delimited data file (header row; rows are subjects)")->required();
    book.option("label-col", s.label_col, label_required ? "response column name" : "response column name (optional)");
    book.option("id-col", s.id_col, "subject id column name (row numbers when absent)");
    book.flag("log-transform", s.log_transform, "natural log of every feature value on ingestion");
}

inline void add_screen_options(OptionBook& book, Settings& s)
{
    book.option("method", s.method, "screening method")->check(CLI::IsMember({"dcsis", "dcov"}));
    book.option("model-size", s.model_size, "DC-SIS model size (0 = floor(n / log n))");
    book.option("epsilon", s.epsilon, "greedy tolerance: keep x if V_new >= V_old - epsilon")
        ->check(CLI::NonNegativeNumber);
    book.option("lookahead", s.lookahead, "greedy candidates tested per step")->check(CLI::PositiveNumber);
    book.flag("standardize", s.standardize, "z-score features before screening (--standardize=false to disable)");
}

inline void add_svm_options(OptionBook& book, Settings& s)
{
    book.option("delta", s.delta, "reject half-width: withhold when |f(x)| <= delta");
    book.flag("intercept", s.intercept, "fit an unpenalized intercept");
    book.flag("svm-standardize", s.svm_standardize, "standardize the design before fitting");
    book.option("max-iterations", s.max_iterations, "simplex iteration cap per fit (0 = automatic)");
}

inline void add_harness_options(OptionBook& book, Settings& s)
{
    book.option("positive-label", s.positive_label, "label value coded +1 (others -1); labels must be -1/+1 otherwise");
    add_screen_options(book, s);
    book.option("d", s.d, "rejection costs, comma separated");
    book.option("r-grid", s.r_grid, "penalty grid, comma separated");
    add_svm_options(book, s);
    book.option("covariates", s.covariates, "columns always added to the SVM design");
    book.option("seed", s.seed, "master seed");
    book.option("threads", s.threads, "worker threads (results do not depend on it)", false)
        ->check(CLI::PositiveNumber);
}

inline Dataset load(const Settings& s, bool require_label = true)
{
    IngestOptions o;
    o.label_column = s.label_col;
    o.id_column = s.id_col;
    o.log_transform = s.log_transform;
    o.require_label = require_label;
    return ingest(s.input, o);
}

inline std::optional<std::string> positive(const Settings& s)
{
    return s.positive_label.empty() ? std::nullopt : std::optional<std::string>(s.positive_label);
}

inline std::vector<std::size_t> resolve_columns(const Dataset& data, const std::vector<std::string>& names)
{
    std::map<std::string, std::size_t> index;
    for (std::size_t j = 0; j < data.p(); ++j) {
        index[data.feature_names[j]] = j;
    }
    std::vector<std::size_t> out;
    for (const auto& name : names) {
        const auto it = index.find(name);
        if (it == index.end()) {
            throw DataError("column '" + name + "' not found in the data");
        }
        out.push_back(it->second);
    }
    return out;
}

inline ScreeningConfig screening_config(const Settings& s)
{
    ScreeningConfig c;
    c.method = s.method == "dcsis" ? ScreeningMethod::dc_sis : ScreeningMethod::dcov_greedy;
    if (s.model_size > 0) {
        c.model_size = s.model_size;
    }
    c.epsilon = s.epsilon;
    c.lookahead = s.lookahead;
    c.standardize = s.standardize;
    c.threads = s.threads;
    return c;
}

inline HarnessConfig harness_config(const Settings& s, const Dataset& data)
{
    HarnessConfig c;
    c.screening = screening_config(s);
    c.d_values = s.d;
    c.r_grid = s.r_grid;
    c.delta = s.delta;
    c.fit.intercept = s.intercept;
    c.fit.standardize = s.svm_standardize;
    c.fit.simplex.max_iterations = s.max_iterations;
    c.reps = s.reps;
    c.seed = s.seed;
    c.threads = s.threads;
    c.always_include = resolve_columns(data, s.covariates);
    c.validate(data.p());
    return c;
}

inline std::vector<std::pair<double, double>> bin_pairs(const std::vector<double>& edges)
{
    if (edges.size() < 2) {
        throw ArgumentError("--bins needs at least two edges");
    }
    std::vector<std::pair<double, double>> out;
    for (std::size_t k = 1; k < edges.size(); ++k) {
        if (!(edges[k] > edges[k - 1])) {
            throw ArgumentError("--bins edges must be strictly increasing");
        }
        out.emplace_back(edges[k - 1], edges[k]);
    }
    return out;
}

inline void prepare_out_dir(const Settings& s)
{
    if (s.out_dir.empty()) {
        throw ArgumentError("--out-dir is required");
    }
    std::error_code ec;
    fs::create_directories(s.out_dir, ec);
    if (ec) {
        throw DataError("cannot create output directory '" + s.out_dir + "': " + ec.message());
    }
}

inline void write_manifest(const fs::path& dir, const ConfigEntries& entries)
{
    std::ofstream out(dir / "manifest.txt", std::ios::binary);
    if (!out) {
        throw DataError("cannot write manifest in '" + dir.string() + "'");
    }
    out << "# dcovsel " << DCOVSEL_VERSION << " run manifest (Eigen " << EIGEN_WORLD_VERSION << '.'
        << EIGEN_MAJOR_VERSION << '.' << EIGEN_MINOR_VERSION << ", fmt " << FMT_VERSION / 10000 << '.'
        << FMT_VERSION / 100 % 100 << '.' << FMT_VERSION % 100 << ", nlohmann_json "
        << NLOHMANN_JSON_VERSION_MAJOR << '.' << NLOHMANN_JSON_VERSION_MINOR << '.' << NLOHMANN_JSON_VERSION_PATCH
        << ")\n# replay: dcovsel --config manifest.txt --out-dir <dir>\n";
    write_config(out, entries);
}

// --- screen ------------------------------------------------------------------

inline int run_screen(const Settings& s, std::ostream& out)
{
    const Dataset data = load(s);
    const ScreeningConfig config = screening_config(s);
    const fs::path dir = s.out_dir;

    std::string mode = s.response;
    if (mode == "auto") {
        mode = !s.positive_label.empty() ? "binary" : labels_numeric(data) ? "real" : "classes";
    }
    std::vector<std::pair<std::string, ScreeningResult>> results;
    std::vector<std::string> warnings;
    std::optional<OneVsRestResult> ovr;
    if (mode == "classes") {
        ovr = one_vs_rest_screen(data.x, data.labels, config);
        for (std::size_t c = 0; c < ovr->classes.size(); ++c) {
            if (ovr->per_class[c]) {
                results.emplace_back(ovr->classes[c], *ovr->per_class[c]);
            }
        }
        warnings = ovr->warnings;
    } else {
        const Eigen::VectorXd y = mode == "binary" ? to_vector(binary_labels(data, positive(s))) : numeric_response(data);
        results.emplace_back("all", screen(data.x, VariableBlock(y), config));
    }

    CsvWriter ranking(dir / "ranking.csv");
    ranking.row("set", "rank", "feature", "name", "marginal_r2");
    CsvWriter selection(dir / "selection.csv");
    selection.row("set", "order", "feature", "name");
    CsvWriter trajectory(dir / "trajectory.csv");
    trajectory.row("set", "step", "feature", "name", "value", "accepted");
    CsvWriter summary(dir / "screen_summary.csv");
    summary.row("set", "method", "n", "p", "selected", "stop_reason", "standardized", "constant_response");
    for (const auto& [set, r] : results) {
        for (std::size_t k = 0; k < r.ranking.size(); ++k) {
            ranking.row(set, k + 1, r.ranking[k], data.feature_names[r.ranking[k]], r.marginal_r2[r.ranking[k]]);
        }
        for (std::size_t k = 0; k < r.selected.size(); ++k) {
            selection.row(set, k + 1, r.selected[k], data.feature_names[r.selected[k]]);
        }
        for (std::size_t k = 0; k < r.evaluations.size(); ++k) {
            const auto& e = r.evaluations[k];
            trajectory.row(set, k + 1, e.feature, data.feature_names[e.feature], e.value, e.accepted);
        }
        summary.row(set, to_string(config.method), data.n(), data.p(), r.selected.size(), to_string(r.stop_reason),
                    r.standardized, r.constant_response);
        if (r.constant_response) {
            warnings.push_back("response for set '" + set + "' is constant; every marginal R^2 is 0");
        }
        out << fmt::format("{}: {} of {} features selected ({})\n", set, r.selected.size(), data.p(),
                           to_string(r.stop_reason));
    }
    if (ovr) {
        CsvWriter uni(dir / "union.csv");
        uni.row("feature", "name", "classes");
        for (const auto f : ovr->union_selected) {
            std::string classes;
            for (const auto c : ovr->provenance.at(f)) {
                classes += (classes.empty() ? "" : ";") + ovr->classes[c];
            }
            uni.row(f, data.feature_names[f], classes);
        }
        out << fmt::format("union: {} features\n", ovr->union_selected.size());
    }
    {
        CsvWriter w(dir / "warnings.csv");
        w.row("warning");
        for (const auto& msg : warnings) {
            w.row(msg);
            out << "warning: " << msg << '\n';
        }
    }
    return exit_ok;
}

// --- svmr-fit / svmr-predict ---------------------------------------------------

inline Eigen::MatrixXd columns(const Eigen::MatrixXd& x, const std::vector<std::size_t>& cols)
{
    Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) {
        out.col(static_cast<Eigen::Index>(k)) = x.col(static_cast<Eigen::Index>(cols[k]));
    }
    return out;
}

inline void write_decisions(const fs::path& path, const Dataset& data, const std::vector<Decision>& decisions,
                            const std::optional<std::vector<int>>& truth, double d)
{
    CsvWriter w(path);
    if (truth) {
        w.row("subject", "score", "decision", "truth", "l_loss");
    } else {
        w.row("subject", "score", "decision");
    }
    for (std::size_t i = 0; i < decisions.size(); ++i) {
        if (truth) {
            w.row(data.subject_ids[i], decisions[i].score, decisions[i].label, (*truth)[i],
                  l_loss(decisions[i].label, (*truth)[i], d));
        } else {
            w.row(data.subject_ids[i], decisions[i].score, decisions[i].label);
        }
    }
}

inline void write_decision_summary(const fs::path& path, const std::vector<Decision>& decisions,
                                   const std::vector<int>& truth, double d, std::ostream& out)
{
    std::vector<int> labels;
    std::size_t decided = 0, correct = 0;
    for (std::size_t i = 0; i < decisions.size(); ++i) {
        labels.push_back(decisions[i].label);
        if (decisions[i].label != 0) {
            ++decided;
            correct += decisions[i].label == truth[i] ? 1 : 0;
        }
    }
    const double loss = mean_l_loss(labels, truth, d);
    const double acc = decided ? static_cast<double>(correct) / static_cast<double>(decided) : not_available;
    CsvWriter w(path);
    w.row("n", "with_decision", "accuracy_with_decision", "mean_l_loss");
    w.row(decisions.size(), decided, acc, loss);
    out << fmt::format("decisions on {} of {} subjects; accuracy {}; mean l-loss {}\n", decided, decisions.size(),
                       decided ? format_real(acc) : "n/a", format_real(loss));
}

inline int run_fit(const Settings& s, std::ostream& out)
{
    const Dataset data = load(s);
    const auto y = binary_labels(data, positive(s));
    std::vector<std::size_t> cols;
    if (s.features.empty()) {
        cols.resize(data.p());
        std::iota(cols.begin(), cols.end(), std::size_t{0});
    } else {
        cols = resolve_columns(data, s.features);
    }
    const RejectLossParams params{s.d_single, s.delta};
    FitOptions options;
    options.intercept = s.intercept;
    options.standardize = s.svm_standardize;
    options.simplex.max_iterations = s.max_iterations;
    const Eigen::MatrixXd x = columns(data.x, cols);
    const RejectModel model = fit(x, y, s.r, params, options);
    std::vector<std::string> names;
    for (const auto c : cols) {
        names.push_back(data.feature_names[c]);
    }
    const fs::path dir = s.out_dir;
    write_json(dir / "model.json", model_to_json(model, names));
    {
        CsvWriter w(dir / "coefficients.csv");
        w.row("feature", "name", "lambda");
        w.row(std::string{}, "(intercept)", model.intercept);
        for (std::size_t k = 0; k < cols.size(); ++k) {
            w.row(cols[k], names[k], model.lambda(static_cast<Eigen::Index>(k)));
        }
    }
    const auto decisions = predict(model, x);
    write_decisions(dir / "fit_decisions.csv", data, decisions, y, s.d_single);
    write_decision_summary(dir / "fit_summary.csv", decisions, y, s.d_single, out);
    out << fmt::format("objective {}, duality gap {}, KKT residual {}, {} nonzero coefficients\n",
                       format_real(model.objective), format_real(model.duality_gap), format_real(model.kkt_residual),
                       model.active_features().size());
    return exit_ok;
}

inline int run_predict(const Settings& s, std::ostream& out)
{
    const LoadedModel loaded = model_from_json(read_json(s.model));
    const Dataset data = load(s, false);
    const bool has_truth = std::none_of(data.labels.begin(), data.labels.end(), [](const auto& l) { return l.empty(); });
    const auto cols = resolve_columns(data, loaded.features);
    const auto decisions = predict(loaded.model, columns(data.x, cols));
    std::optional<std::vector<int>> truth;
    if (has_truth) {
        truth = binary_labels(data, positive(s));
    }
    const fs::path dir = s.out_dir;
    write_decisions(dir / "predictions.csv", data, decisions, truth, loaded.model.params.d);
    if (truth) {
        write_decision_summary(dir / "prediction_summary.csv", decisions, *truth, loaded.model.params.d, out);
    } else {
        out << fmt::format("{} subjects scored\n", decisions.size());
    }
    return exit_ok;
}

// --- cv5 / mcv / permute-mcv -------------------------------------------------------

inline std::string joined_names(const Dataset& data, const std::vector<std::size_t>& features)
{
    std::string s;
    for (const auto f : features) {
        s += (s.empty() ? "" : ";") + data.feature_names[f];
    }
    return s;
}

inline void write_replication_outputs(const fs::path& dir, const Dataset& data, const std::vector<int>& y,
                                      const std::vector<ReplicationRecord>& records, const HarnessConfig& config,
                                      const Settings& s, const std::string& source, std::ostream& out)
{
    fs::create_directories(dir);
    json j = records_to_json(records, config.d_values);
    j["source"] = source;
    write_json(dir / "records.json", j);

    CsvWriter reps(dir / "replications.csv");
    reps.row("rep", "d", "skipped", "resampled", "note", "n_selected", "max_marginal_r2", "tuned_r", "tuning_loss",
             "decisive_model_available", "n_post_model", "training_accuracy", "testing_accuracy",
             "n_training_with_decision", "n_testing_with_decision");
    CsvWriter sel(dir / "selection.csv");
    sel.row("set", "order", "feature", "name");
    for (const auto& rec : records) {
        for (std::size_t k = 0; k < rec.selected_features.size(); ++k) {
            sel.row(fmt::format("R{}", rec.rep_id + 1), k + 1, rec.selected_features[k],
                    data.feature_names[rec.selected_features[k]]);
        }
        for (const auto& o : rec.outcomes) {
            reps.row(rec.rep_id + 1, o.d, rec.skipped, rec.resampled, rec.note, rec.selected_features.size(),
                     rec.max_marginal_r2, o.tuned_r, o.tuning_loss, o.decisive_model_available,
                     o.post_model_features.size(), o.training_accuracy, o.testing_accuracy, o.n_with_decision_train,
                     o.n_with_decision_test);
        }
    }
    const auto summary = summarize(records, config.d_values);
    write_mcv_summary(dir / "summary.csv", summary);

    const VotingMode mode = s.voting == "all" ? VotingMode::all_subjects : VotingMode::testing_only;
    const auto edges = bin_pairs(s.bins);
    CsvWriter voting(dir / "voting.csv");
    voting.row("d", "subject", "truth", "s", "w", "r", "v", "saturated");
    CsvWriter bins(dir / "voting_bins.csv");
    bins.row("d", "bin", "frequency", "positives", "proportion_positive");
    std::vector<std::vector<FeatureFrequency>> freq;
    for (std::size_t k = 0; k < config.d_values.size(); ++k) {
        const auto votes = voting_scores(records, y.size(), k, mode);
        for (std::size_t i = 0; i < votes.size(); ++i) {
            voting.row(config.d_values[k], data.subject_ids[i], y[i], votes[i].s, votes[i].w, votes[i].r,
                       displayed_vote(votes[i].v), std::isinf(votes[i].v));
        }
        write_voting_bins(bins, config.d_values[k], bin_voting_scores(votes, y, edges));
        freq.push_back(frequency_histogram(records, k));
    }
    write_frequency(dir / "frequency.csv", config.d_values, freq, data.feature_names);

    out << fmt::format("[{}] {} replications\n", source, records.size());
    for (const auto& row : summary) {
        out << fmt::format("  d={:.4g}: {} with decision; mean testing accuracy {}\n", row.d, row.decisive,
                           std::isnan(row.testing_accuracy.mean) ? std::string("n/a")
                                                                 : fmt::format("{:.4f}", row.testing_accuracy.mean));
    }
}

inline int run_cv5(const Settings& s, std::ostream& out)
{
    const Dataset data = load(s);
    const auto y = binary_labels(data, positive(s));
    const HarnessConfig config = harness_config(s, data);
    const FiveFoldResult result = five_fold_cv(data.x, y, config, s.folds);
    const fs::path dir = s.out_dir;

    // Selection on the full data set, for the last row of the overlap table.
    ScreeningConfig full_config = config.screening;
    const ScreeningResult full = screen(data.x, VariableBlock(to_vector(y)), full_config);

    {
        CsvWriter w(dir / "folds.csv");
        w.row("subject", "fold");
        std::vector<std::size_t> fold_of(data.n());
        for (std::size_t f = 0; f < result.folds.size(); ++f) {
            for (const auto i : result.folds[f]) {
                fold_of[i] = f + 1;
            }
        }
        for (std::size_t i = 0; i < data.n(); ++i) {
            w.row(data.subject_ids[i], fold_of[i]);
        }
    }
    std::vector<std::vector<std::size_t>> sets;
    std::vector<std::string> names;
    CsvWriter sel(dir / "selection.csv");
    sel.row("set", "order", "feature", "name");
    for (const auto& rec : result.records) {
        const auto name = fmt::format("S{}", rec.rep_id + 1);
        sets.push_back(rec.selected_features);
        names.push_back(name);
        for (std::size_t k = 0; k < rec.selected_features.size(); ++k) {
            sel.row(name, k + 1, rec.selected_features[k], data.feature_names[rec.selected_features[k]]);
        }
    }
    for (std::size_t k = 0; k < full.selected.size(); ++k) {
        sel.row("all", k + 1, full.selected[k], data.feature_names[full.selected[k]]);
    }
    sets.push_back(full.selected);
    names.emplace_back("all");
    write_overlap(dir / "overlap.csv", sets, names);

    CsvWriter models(dir / "fold_models.csv");
    models.row("fold", "d", "skipped", "n_selected", "tuned_r", "tuning_loss", "decisive_model_available",
               "n_post_model", "post_model_features", "training_accuracy", "n_training_with_decision",
               "tuning_accuracy", "n_tuning_with_decision");
    for (const auto& rec : result.records) {
        const auto& tuning = result.folds[rec.rep_id];
        for (const auto& o : rec.outcomes) {
            const auto [acc, decided] = dcovsel::detail::accuracy(o.decisions, y, tuning);
            models.row(rec.rep_id + 1, o.d, rec.skipped, rec.selected_features.size(), o.tuned_r, o.tuning_loss,
                       o.decisive_model_available, o.post_model_features.size(),
                       joined_names(data, o.post_model_features), o.training_accuracy, o.n_with_decision_train, acc,
                       decided);
            if (!rec.skipped && !o.decisive_model_available) {
                out << fmt::format("note: fold {} d={:.4g}: every r withholds all tuning decisions\n", rec.rep_id + 1,
                                   o.d);
            }
        }
    }
    json j = records_to_json(result.records, config.d_values);
    j["source"] = "cv5";
    write_json(dir / "records.json", j);
    for (const auto& rec : result.records) {
        out << fmt::format("fold {}: {} features selected{}\n", rec.rep_id + 1, rec.selected_features.size(),
                           rec.skipped ? " (skipped: " + rec.note + ")" : "");
    }
    out << fmt::format("full data: {} features selected\n", full.selected.size());
    return exit_ok;
}

inline int run_mcv(const Settings& s, std::ostream& out)
{
    const Dataset data = load(s);
    const auto y = binary_labels(data, positive(s));
    const HarnessConfig config = harness_config(s, data);
    const auto records = mcv_run(data.x, y, config);
    write_replication_outputs(s.out_dir, data, y, records, config, s, "mcv", out);
    return exit_ok;
}

inline int run_permute(const Settings& s, std::ostream& out)
{
    const Dataset data = load(s);
    const HarnessConfig config = harness_config(s, data);
    const Dataset permuted = permute_response(data, s.seed);
    const fs::path dir = s.out_dir;
    {
        CsvWriter w(dir / "permutation.csv");
        w.row("subject", "label", "permuted_label");
        for (std::size_t i = 0; i < data.n(); ++i) {
            w.row(data.subject_ids[i], data.labels[i], permuted.labels[i]);
        }
    }
    std::optional<std::vector<ReplicationRecord>> original;
    if (!s.skip_original) {
        const auto y = binary_labels(data, positive(s));
        original = mcv_run(data.x, y, config);
        write_replication_outputs(dir / "original", data, y, *original, config, s, "original", out);
    }
    const auto yp = binary_labels(permuted, positive(s));
    const auto perm = mcv_run(permuted.x, yp, config);
    write_replication_outputs(dir / "permuted", permuted, yp, perm, config, s, "permuted", out);

    CsvWriter cmp(dir / "comparison.csv");
    cmp.row("rep", "max_marginal_r2_original", "max_marginal_r2_permuted", "n_selected_original",
            "n_selected_permuted");
    for (std::size_t r = 0; r < perm.size(); ++r) {
        if (original) {
            const auto& o = (*original)[r];
            cmp.row(r + 1, o.max_marginal_r2, perm[r].max_marginal_r2, o.selected_features.size(),
                    perm[r].selected_features.size());
        } else {
            cmp.row(r + 1, not_available, perm[r].max_marginal_r2, std::string{}, perm[r].selected_features.size());
        }
    }
    return exit_ok;
}

// --- synth ---------------------------------------------------------------------

/// Preset values fill every option not given explicitly; the resolved values
/// land in `v`, so the manifest replays without the preset.
inline int run_synth(Settings& v, const CLI::App& app, std::ostream& out)
{
    const Settings& s = v;
    const auto unset = [&](const char* name) { return app.get_option(name)->count() == 0; };
    if (s.preset == "srbct") {
        if (unset("--model")) v.synth_model = "multiclass";
        if (unset("--n")) v.n = 63;
        if (unset("--p")) v.p = 2308;
        if (unset("--classes")) v.classes = 4;
        if (unset("--class-sizes")) v.class_sizes = {23, 8, 12, 20};
        if (unset("--n-active")) v.n_active = 8;
        if (unset("--effect")) v.effect = 2.5;
    } else if (s.preset == "tcga") {
        if (unset("--model")) v.synth_model = "logistic";
        if (unset("--n")) v.n = 279;
        if (unset("--p")) v.p = 12042;
        if (unset("--positives")) v.positives = 191;
        if (unset("--n-active")) v.n_active = 4;
        if (unset("--effect")) v.effect = 1.0;
    }
    SynthSpec spec;
    spec.n = v.n;
    spec.p = v.p;
    spec.model = v.synth_model == "linear"     ? SynthModel::linear
                 : v.synth_model == "logistic" ? SynthModel::logistic
                                               : SynthModel::multiclass;
    spec.active = v.active;
    if (spec.active.empty()) {
        if (v.n_active > v.p) {
            throw ArgumentError("--n-active exceeds --p");
        }
        for (std::size_t k = 0; k < v.n_active; ++k) {
            spec.active.push_back(k * (v.p / std::max<std::size_t>(v.n_active, 1)));
        }
    }
    spec.effect = v.effect;
    spec.noise = v.noise;
    spec.prior = v.prior;
    if (v.positives > 0) {
        spec.positives = v.positives;
    }
    spec.classes = v.classes;
    spec.class_sizes = v.class_sizes;
    spec.seed = v.seed;
    const SynthOutput gen = synth_generate(spec);

    const fs::path dir = s.out_dir;
    {
        std::ofstream f(dir / "data.csv", std::ios::binary);
        emit_dataset(f, gen.data);
    }
    {
        CsvWriter w(dir / "truth.csv");
        w.row("feature", "name", "role");
        const std::size_t per_class =
            spec.model == SynthModel::multiclass ? spec.active.size() / spec.classes : spec.active.size();
        for (std::size_t k = 0; k < gen.active.size(); ++k) {
            const std::string role =
                spec.model == SynthModel::multiclass ? "driver:C" + std::to_string(k / per_class + 1) : "driver";
            w.row(gen.active[k], gen.data.feature_names[gen.active[k]], role);
        }
    }
    if (!gen.eta.empty()) {
        CsvWriter w(dir / "eta.csv");
        w.row("subject", "eta");
        for (std::size_t i = 0; i < gen.eta.size(); ++i) {
            w.row(gen.data.subject_ids[i], gen.eta[i]);
        }
    }
    out << fmt::format("{} data: n={}, p={}, {} active features\n", to_string(spec.model), spec.n, spec.p,
                       spec.active.size());
    return exit_ok;
}

// --- report ------------------------------------------------------------------------

inline int run_report(const Settings& s, std::ostream& out)
{
    const fs::path from = s.from;
    const fs::path dir = s.out_dir;
    const auto need = [&](const char* file, const char* producers) {
        if (!fs::exists(from / file)) {
            throw DataError(fmt::format("report kind '{}' needs {} in '{}' (output of {})", s.kind, file,
                                        from.string(), producers));
        }
    };
    const auto read_sets = [&] {
        const CsvTable t = read_csv(from / "selection.csv");
        const auto set_col = t.column("set");
        const auto feat_col = t.column("feature");
        std::vector<std::string> names;
        std::map<std::string, std::vector<std::size_t>> sets;
        for (const auto& row : t.rows) {
            if (!sets.count(row[set_col])) {
                names.push_back(row[set_col]);
            }
            sets[row[set_col]].push_back(std::stoul(row[feat_col]));
        }
        std::vector<std::vector<std::size_t>> ordered;
        for (const auto& n : names) {
            ordered.push_back(sets[n]);
        }
        return std::make_pair(names, ordered);
    };

    if (s.kind == "overlap") {
        need("selection.csv", "screen, cv5, mcv");
        const auto [names, sets] = read_sets();
        if (sets.empty()) {
            throw DataError("no selections recorded in '" + from.string() + "'");
        }
        write_overlap(dir / "overlap.csv", sets, names);
        out << fmt::format("overlap of {} selections\n", sets.size());
        return exit_ok;
    }
    if (s.kind == "pairwise-distance") {
        need("selection.csv", "screen, cv5, mcv");
        if (s.input.empty()) {
            throw ArgumentError("report kind 'pairwise-distance' needs --input");
        }
        const Dataset data = load(s, false);
        const auto [names, sets] = read_sets();
        std::set<std::size_t> chosen;
        for (std::size_t k = 0; k < names.size(); ++k) {
            if (s.set.empty() || names[k] == s.set) {
                chosen.insert(sets[k].begin(), sets[k].end());
            }
        }
        if (chosen.empty()) {
            throw DataError("no features selected" + (s.set.empty() ? std::string{} : " in set '" + s.set + "'"));
        }
        std::vector<std::size_t> cols(chosen.begin(), chosen.end());
        for (const auto c : cols) {
            if (c >= data.p()) {
                throw DataError("selection refers to column " + std::to_string(c) + " beyond the input data");
            }
        }
        // Subjects grouped by label, features in column order.
        std::vector<std::size_t> rows(data.n());
        std::iota(rows.begin(), rows.end(), std::size_t{0});
        std::stable_sort(rows.begin(), rows.end(),
                         [&](std::size_t a, std::size_t b) { return data.labels[a] < data.labels[b]; });
        const Dataset ordered = data.subset(rows);
        const Eigen::MatrixXd x = columns(ordered.x, cols);
        std::vector<std::string> subject_names, feature_names;
        for (std::size_t i = 0; i < ordered.n(); ++i) {
            subject_names.push_back(ordered.subject_ids[i]);
        }
        for (const auto c : cols) {
            feature_names.push_back(data.feature_names[c]);
        }
        write_matrix(dir / "subject_distances.csv", scaled_distances(x), subject_names);
        write_matrix(dir / "feature_distances.csv", scaled_distances(x.transpose()), feature_names);
        {
            CsvWriter w(dir / "subject_order.csv");
            w.row("position", "subject", "label");
            for (std::size_t i = 0; i < ordered.n(); ++i) {
                w.row(i + 1, ordered.subject_ids[i], ordered.labels[i]);
            }
        }
        out << fmt::format("distance matrices over {} subjects and {} features\n", x.rows(), x.cols());
        return exit_ok;
    }

    need("records.json", "cv5, mcv, permute-mcv (original/ or permuted/)");
    const LoadedRecords loaded = records_from_json(read_json(from / "records.json"));
    if (s.kind == "mcv-summary") {
        write_mcv_summary(dir / "summary.csv", summarize(loaded.records, loaded.d_values));
        out << fmt::format("summary of {} replications\n", loaded.records.size());
        return exit_ok;
    }
    if (s.kind == "frequency-histogram") {
        if (s.input.empty()) {
            throw ArgumentError("report kind 'frequency-histogram' needs --input for feature names");
        }
        const Dataset data = load(s, false);
        std::vector<std::vector<FeatureFrequency>> freq;
        for (std::size_t k = 0; k < loaded.d_values.size(); ++k) {
            freq.push_back(frequency_histogram(loaded.records, k));
        }
        write_frequency(dir / "frequency.csv", loaded.d_values, freq, data.feature_names);
        out << "selection frequencies written\n";
        return exit_ok;
    }
    if (s.kind == "voting-bins") {
        if (s.input.empty()) {
            throw ArgumentError("report kind 'voting-bins' needs --input for the true labels");
        }
        const Dataset data = load(s);
        const auto y = binary_labels(data, positive(s));
        if (!loaded.records.empty() && loaded.records.front().roles.size() != y.size()) {
            throw DataError("records and --input differ in subject count");
        }
        const VotingMode mode = s.voting == "all" ? VotingMode::all_subjects : VotingMode::testing_only;
        const auto edges = bin_pairs(s.bins);
        CsvWriter bins(dir / "voting_bins.csv");
        bins.row("d", "bin", "frequency", "positives", "proportion_positive");
        for (std::size_t k = 0; k < loaded.d_values.size(); ++k) {
            const auto votes = voting_scores(loaded.records, y.size(), k, mode);
            write_voting_bins(bins, loaded.d_values[k], bin_voting_scores(votes, y, edges));
        }
        out << "voting bins written\n";
        return exit_ok;
    }
    throw ArgumentError("unknown report kind '" + s.kind + "'");
}

/// Expand `--config FILE`: entries become `--key=value` tokens unless the
/// same flag appears on the command line. `command=` supplies the
/// subcommand when none is given.
inline std::vector<std::string> merge_config(const std::vector<std::string>& args,
                                             const std::set<std::string>& commands)
{
    std::vector<std::string> user;
    std::optional<std::string> config_path;
    for (std::size_t k = 1; k < args.size(); ++k) {
        if (args[k] == "--config") {
            if (k + 1 >= args.size()) {
                throw CLI::ArgumentMismatch("--config needs a file name");
            }
            config_path = args[++k];
        } else if (args[k].rfind("--config=", 0) == 0) {
            config_path = args[k].substr(9);
        } else {
            user.push_back(args[k]);
        }
    }
    if (!config_path) {
        return args;
    }
    const ConfigEntries entries = read_config(*config_path);
    std::set<std::string> given;
    for (const auto& tok : user) {
        if (tok.rfind("--", 0) == 0) {
            given.insert(tok.substr(2, tok.find('=') == std::string::npos ? std::string::npos : tok.find('=') - 2));
        }
    }
    std::optional<std::string> command;
    if (!user.empty() && commands.count(user.front())) {
        command = user.front();
        user.erase(user.begin());
    }
    std::vector<std::string> from_file;
    for (const auto& [key, value] : entries) {
        if (key == "command") {
            if (command && *command != value) {
                throw CLI::ValidationError("--config", "config is for command '" + value + "', not '" + *command + "'");
            }
            command = value;
        } else if (!given.count(key)) {
            from_file.push_back("--" + key + "=" + value);
        }
    }
    if (!command) {
        throw CLI::RequiredError("a command (none given on the command line or in the config file)");
    }
    std::vector<std::string> merged{args.front(), *command};
    merged.insert(merged.end(), from_file.begin(), from_file.end());
    merged.insert(merged.end(), user.begin(), user.end());
    return merged;
}

} // namespace detail

/// Full command-line entry point; returns the process exit code.
inline int run_cli(std::vector<std::string> args, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    if (args.empty()) {
        args.emplace_back("dcovsel");
    }
    Settings s;
    CLI::App app{"Distance-covariance feature screening and reject-option SVM toolkit", "dcovsel"};
    app.set_version_flag("--version", DCOVSEL_VERSION);
    app.require_subcommand(1);
    app.add_option("--config", "key=value file of option values (command-line flags take precedence)");

    std::vector<std::unique_ptr<detail::OptionBook>> books;
    const auto command = [&](const char* name, const char* help) {
        auto* sub = app.add_subcommand(name, help);
        books.push_back(std::make_unique<detail::OptionBook>(sub));
        sub->add_option("--out-dir", s.out_dir, "output directory")->required();
        return books.back().get();
    };

    auto* screen_cmd = command("screen", "rank and select features against the response");
    detail::add_data_options(*screen_cmd, s);
    screen_cmd->option("positive-label", s.positive_label, "binary response: this label vs the rest");
    screen_cmd->option("response", s.response, "response type (auto: real if numeric, else one-vs-rest classes)")
        ->check(CLI::IsMember({"auto", "real", "binary", "classes"}));
    detail::add_screen_options(*screen_cmd, s);
    screen_cmd->option("threads", s.threads, "worker threads (results do not depend on it)", false)
        ->check(CLI::PositiveNumber);

    auto* fit_cmd = command("svmr-fit", "fit the l1-penalized reject-option SVM");
    detail::add_data_options(*fit_cmd, s);
    fit_cmd->option("positive-label", s.positive_label, "label value coded +1");
    fit_cmd->option("features", s.features, "design columns, comma separated (default: all)");
    fit_cmd->option("d", s.d_single, "rejection cost in (0, 1/2)");
    fit_cmd->option("r", s.r, "l1 penalty")->check(CLI::PositiveNumber);
    detail::add_svm_options(*fit_cmd, s);

    auto* predict_cmd = command("svmr-predict", "apply a fitted model: +1, -1 or 0 (withheld)");
    detail::add_data_options(*predict_cmd, s, false);
    predict_cmd->option("positive-label", s.positive_label, "label value coded +1");
    predict_cmd->option("model", s.model, "model.json from svmr-fit")->required();

    auto* cv5_cmd = command("cv5", "k-fold cross validation (default 5 folds)");
    detail::add_data_options(*cv5_cmd, s);
    detail::add_harness_options(*cv5_cmd, s);
    cv5_cmd->option("folds", s.folds, "number of folds")->check(CLI::Range(2, 1000000));

    const auto add_mcv = [&](detail::OptionBook& book) {
        detail::add_data_options(book, s);
        detail::add_harness_options(book, s);
        book.option("reps", s.reps, "replications")->check(CLI::PositiveNumber);
        book.option("voting", s.voting, "subjects counted in voting scores")
            ->check(CLI::IsMember({"testing", "all"}));
        book.option("bins", s.bins, "voting-score bin edges, comma separated");
    };
    auto* mcv_cmd = command("mcv", "multiple cross validation with tuning/training/testing splits");
    add_mcv(*mcv_cmd);
    auto* perm_cmd = command("permute-mcv", "multiple cross validation on permuted labels (and the original)");
    add_mcv(*perm_cmd);
    perm_cmd->flag("skip-original", s.skip_original, "run only the permuted pipeline");

    auto* synth_cmd = command("synth", "generate a synthetic benchmark with known drivers");
    synth_cmd->option("preset", s.preset, "shape preset (explicit flags override it)")
        ->check(CLI::IsMember({"none", "srbct", "tcga"}));
    synth_cmd->option("model", s.synth_model, "generative model")
        ->check(CLI::IsMember({"linear", "logistic", "multiclass"}));
    synth_cmd->option("n", s.n, "subjects");
    synth_cmd->option("p", s.p, "features");
    synth_cmd->option("active", s.active, "driver columns (0-based), comma separated");
    synth_cmd->option("n-active", s.n_active, "number of evenly spaced drivers when --active is empty");
    synth_cmd->option("effect", s.effect, "signal strength");
    synth_cmd->option("noise", s.noise, "noise sd (linear model)");
    synth_cmd->option("prior", s.prior, "P(y = +1) (logistic, without --positives)");
    synth_cmd->option("positives", s.positives, "exact number of +1 labels (logistic; 0 = random)");
    synth_cmd->option("classes", s.classes, "number of classes (multiclass)");
    synth_cmd->option("class-sizes", s.class_sizes, "exact class sizes, comma separated (multiclass)");
    synth_cmd->option("seed", s.seed, "master seed");

    auto* report_cmd = command("report", "rebuild a table from an earlier run directory");
    report_cmd->option("kind", s.kind, "table to build")
        ->required()
        ->check(CLI::IsMember({"overlap", "mcv-summary", "voting-bins", "pairwise-distance", "frequency-histogram"}));
    report_cmd->option("from", s.from, "output directory of an earlier run")->required();
    report_cmd->option("input", s.input, "data file (pairwise-distance, voting-bins, frequency-histogram)");
    report_cmd->option("label-col", s.label_col, "response column name");
    report_cmd->option("id-col", s.id_col, "subject id column name");
    report_cmd->flag("log-transform", s.log_transform, "natural log of every feature value on ingestion");
    report_cmd->option("positive-label", s.positive_label, "label value coded +1");
    report_cmd->option("voting", s.voting, "subjects counted in voting scores")->check(CLI::IsMember({"testing", "all"}));
    report_cmd->option("bins", s.bins, "voting-score bin edges, comma separated");
    report_cmd->option("set", s.set, "selection set for pairwise-distance (default: union of all sets)");

    std::set<std::string> names;
    for (const auto* sub : app.get_subcommands({})) {
        names.insert(sub->get_name());
    }

    try {
        auto merged = detail::merge_config(args, names);
        std::reverse(merged.begin(), merged.end());
        merged.pop_back(); // program name
        app.parse(merged);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, err, err);
        return exit_usage;
    } catch (const ArgumentError& e) {
        err << "usage error: " << e.what() << '\n';
        return exit_usage;
    }

    detail::OptionBook* book = nullptr;
    for (auto& b : books) {
        if (b->app()->parsed()) {
            book = b.get();
        }
    }
    const std::string name = book->app()->get_name();
    try {
        detail::prepare_out_dir(s);
        int code = exit_ok;
        if (name == "screen") {
            code = detail::run_screen(s, out);
        } else if (name == "svmr-fit") {
            code = detail::run_fit(s, out);
        } else if (name == "svmr-predict") {
            code = detail::run_predict(s, out);
        } else if (name == "cv5") {
            code = detail::run_cv5(s, out);
        } else if (name == "mcv") {
            code = detail::run_mcv(s, out);
        } else if (name == "permute-mcv") {
            code = detail::run_permute(s, out);
        } else if (name == "synth") {
            code = detail::run_synth(s, *book->app(), out);
        } else if (name == "report") {
            code = detail::run_report(s, out);
        }
        detail::write_manifest(s.out_dir, book->manifest());
        return code;
    } catch (const ArgumentError& e) {
        err << "usage error: " << e.what() << '\n';
        return exit_usage;
    } catch (const SolverError& e) {
        err << "solver failure: " << e.what() << '\n';
        return exit_solver;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << '\n';
        return exit_data;
    } catch (const fs::filesystem_error& e) {
        err << "data error: " << e.what() << '\n';
        return exit_data;
    } catch (const std::exception& e) {
        err << "data error: " << e.what() << '\n';
        return exit_data;
    }
}

inline int run_cli(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    return run_cli(std::vector<std::string>(argv, argv + argc), out, err);
}

} // namespace dcovsel::cli
