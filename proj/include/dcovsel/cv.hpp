#pragma once

// Five-fold and multiple cross validation around screening + reject-SVM,
// mean l-loss tuning, voting scores, response permutation and selection
// overlap accounting.

#include "dataset.hpp"
#include "errors.hpp"
#include "rng.hpp"
#include "screening.hpp"
#include "svm_reject.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace dcovsel {

inline constexpr double not_available = std::numeric_limits<double>::quiet_NaN();

/// Geometric grid on the standardized-design scale.
inline std::vector<double> default_r_grid() { return {0.001, 0.003, 0.01, 0.03, 0.1, 0.3, 1.0, 3.0}; }

inline std::vector<double> default_d_values() { return {1.0 / 3.0, 1.0 / 4.0, 1.0 / 5.0}; }

// --- partitions --------------------------------------------------------------

/// k non-overlapping folds of a random permutation of 0..n-1; the first n % k
/// folds hold one extra subject.
inline std::vector<std::vector<std::size_t>> kfold_partition(std::size_t n, std::size_t k, std::uint64_t seed)
{
    if (k < 2) {
        throw ArgumentError("k-fold partition needs k >= 2");
    }
    if (n < k) {
        throw ArgumentError("cannot split " + std::to_string(n) + " subjects into " + std::to_string(k) + " folds");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed, "partition");
    rng.shuffle(std::span<std::size_t>(order));
    std::vector<std::vector<std::size_t>> folds(k);
    std::size_t at = 0;
    for (std::size_t f = 0; f < k; ++f) {
        const std::size_t size = n / k + (f < n % k ? 1 : 0);
        folds[f].assign(order.begin() + static_cast<std::ptrdiff_t>(at),
                        order.begin() + static_cast<std::ptrdiff_t>(at + size));
        std::sort(folds[f].begin(), folds[f].end());
        at += size;
    }
    return folds;
}

/// Tuning / training / testing sizes for the 3/15, 8/15, 4/15 split by
/// largest remainder (ties go to the earlier part).
inline std::array<std::size_t, 3> split_sizes(std::size_t n)
{
    constexpr std::array<std::size_t, 3> weights{3, 8, 4};
    std::array<std::size_t, 3> sizes{};
    std::array<std::size_t, 3> remainders{};
    std::size_t assigned = 0;
    for (std::size_t k = 0; k < 3; ++k) {
        sizes[k] = n * weights[k] / 15;
        remainders[k] = n * weights[k] % 15;
        assigned += sizes[k];
    }
    std::array<std::size_t, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return remainders[a] > remainders[b]; });
    for (std::size_t k = 0; assigned < n; ++k) {
        ++sizes[order[k]];
        ++assigned;
    }
    return sizes;
}

enum class SplitRole : std::uint8_t { tuning, training, testing };

inline const char* to_string(SplitRole r) noexcept
{
    switch (r) {
    case SplitRole::tuning:
        return "tuning";
    case SplitRole::training:
        return "training";
    case SplitRole::testing:
        return "testing";
    }
    return "?";
}

struct TuneTrainTest {
    std::vector<std::size_t> tuning;
    std::vector<std::size_t> training;
    std::vector<std::size_t> testing;
};

inline TuneTrainTest tune_train_test_partition(std::size_t n, Rng& rng)
{
    if (n < 3) {
        throw ArgumentError("tune/train/test split needs at least 3 subjects");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(order));
    const auto sizes = split_sizes(n);
    TuneTrainTest out;
    const auto begin = order.begin();
    out.tuning.assign(begin, begin + static_cast<std::ptrdiff_t>(sizes[0]));
    out.training.assign(begin + static_cast<std::ptrdiff_t>(sizes[0]),
                        begin + static_cast<std::ptrdiff_t>(sizes[0] + sizes[1]));
    out.testing.assign(begin + static_cast<std::ptrdiff_t>(sizes[0] + sizes[1]), order.end());
    std::sort(out.tuning.begin(), out.tuning.end());
    std::sort(out.training.begin(), out.training.end());
    std::sort(out.testing.begin(), out.testing.end());
    return out;
}

// --- losses ------------------------------------------------------------------

/// Average l-loss; withheld decisions cost d.
inline double mean_l_loss(std::span<const int> decisions, std::span<const int> truths, double d)
{
    if (decisions.size() != truths.size()) {
        throw DimensionError("decision and truth vectors differ in length");
    }
    if (decisions.empty()) {
        throw ArgumentError("mean l-loss of an empty set is undefined");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < decisions.size(); ++i) {
        total += l_loss(decisions[i], truths[i], d);
    }
    return total / static_cast<double>(decisions.size());
}

// --- harness -----------------------------------------------------------------

enum class VotingMode { testing_only, all_subjects };

struct HarnessConfig {
    ScreeningConfig screening;
    std::vector<double> d_values = default_d_values();
    std::vector<double> r_grid = default_r_grid();
    double delta = 0.5;
    FitOptions fit;
    std::size_t reps = 50;
    std::uint64_t seed = 1;
    unsigned threads = 1;
    /// Columns always added to the SVM design next to the screened features.
    std::vector<std::size_t> always_include;

    void validate(std::size_t p) const
    {
        screening.validate(p);
        if (d_values.empty()) {
            throw ArgumentError("at least one rejection cost d is required");
        }
        for (const double d : d_values) {
            RejectLossParams{d, delta}.validate();
        }
        if (r_grid.empty()) {
            throw ArgumentError("the r grid is empty");
        }
        for (const double r : r_grid) {
            if (!(r > 0.0) || !std::isfinite(r)) {
                throw ArgumentError("r grid values must be positive and finite");
            }
        }
        if (reps < 1) {
            throw ArgumentError("at least one replication is required");
        }
        for (const auto c : always_include) {
            if (c >= p) {
                throw ArgumentError("always-included column index out of range");
            }
        }
    }
};

/// Outcome of tuning and applying the reject-SVM for one value of d.
struct ModelOutcome {
    double d = 0.0;
    double tuned_r = not_available;
    double tuning_loss = not_available;
    bool decisive_model_available = false; ///< some r gave a definite decision on the tuning set
    std::vector<std::size_t> post_model_features; ///< dataset columns with nonzero coefficient
    std::vector<int> decisions;                   ///< per dataset subject: -1, 0, +1
    double training_accuracy = not_available;     ///< over training subjects with a decision
    double testing_accuracy = not_available;
    std::size_t n_with_decision_train = 0;
    std::size_t n_with_decision_test = 0;
};

struct ReplicationRecord {
    std::size_t rep_id = 0;
    std::vector<SplitRole> roles; ///< per dataset subject
    bool resampled = false;
    bool skipped = false;
    std::string note;
    std::vector<std::size_t> selected_features; ///< screening output, ranked order
    double max_marginal_r2 = not_available;     ///< largest R_n^2 among selected features
    std::vector<ModelOutcome> outcomes;         ///< one per HarnessConfig::d_values entry

    [[nodiscard]] bool decisive(std::size_t d_index) const
    {
        return !skipped && outcomes[d_index].n_with_decision_test > 0;
    }
};

namespace detail {

inline Eigen::MatrixXd rows_cols(const Eigen::MatrixXd& x, const std::vector<std::size_t>& rows,
                                 const std::vector<std::size_t>& cols)
{
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) {
        for (std::size_t r = 0; r < rows.size(); ++r) {
            out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                x(static_cast<Eigen::Index>(rows[r]), static_cast<Eigen::Index>(cols[c]));
        }
    }
    return out;
}

inline std::vector<int> pick(const std::vector<int>& v, const std::vector<std::size_t>& idx)
{
    std::vector<int> out;
    out.reserve(idx.size());
    for (const auto i : idx) {
        out.push_back(v[i]);
    }
    return out;
}

inline bool both_classes(const std::vector<int>& y, const std::vector<std::size_t>& idx)
{
    bool pos = false;
    bool neg = false;
    for (const auto i : idx) {
        (y[i] > 0 ? pos : neg) = true;
    }
    return pos && neg;
}

inline std::vector<std::size_t> with_covariates(std::vector<std::size_t> features,
                                                const std::vector<std::size_t>& always_include)
{
    for (const auto c : always_include) {
        if (std::find(features.begin(), features.end(), c) == features.end()) {
            features.push_back(c);
        }
    }
    return features;
}

inline std::pair<double, std::size_t> accuracy(const std::vector<int>& decisions, const std::vector<int>& y,
                                               const std::vector<std::size_t>& idx)
{
    std::size_t decided = 0;
    std::size_t correct = 0;
    for (const auto i : idx) {
        if (decisions[i] != 0) {
            ++decided;
            correct += decisions[i] == y[i] ? 1 : 0;
        }
    }
    const double acc = decided ? static_cast<double>(correct) / static_cast<double>(decided) : not_available;
    return {acc, decided};
}

/// Screen on `training`, fit over the r grid for every d, tune on `tuning`,
/// and predict every subject.
inline void evaluate_split(const Eigen::MatrixXd& x, const std::vector<int>& y,
                           const std::vector<std::size_t>& training, const std::vector<std::size_t>& tuning,
                           const std::vector<std::size_t>& testing, const HarnessConfig& config,
                           ReplicationRecord& record)
{
    const std::vector<std::size_t> all_features = [&] {
        std::vector<std::size_t> v(static_cast<std::size_t>(x.cols()));
        std::iota(v.begin(), v.end(), std::size_t{0});
        return v;
    }();
    const Eigen::MatrixXd train_x = rows_cols(x, training, all_features);
    const std::vector<int> train_y = pick(y, training);
    ScreeningConfig screening = config.screening;
    screening.threads = 1;
    const ScreeningResult screened = screen(train_x, VariableBlock(to_vector(train_y)), screening);
    record.selected_features = screened.selected;
    record.max_marginal_r2 = 0.0;
    for (const auto f : screened.selected) {
        record.max_marginal_r2 = std::max(record.max_marginal_r2, screened.marginal_r2[f]);
    }

    const std::vector<std::size_t> design = with_covariates(screened.selected, config.always_include);
    const Eigen::MatrixXd design_train = rows_cols(x, training, design);
    const Eigen::MatrixXd design_tune = rows_cols(x, tuning, design);
    const std::vector<int> tune_y = pick(y, tuning);

    std::vector<double> grid = config.r_grid;
    std::sort(grid.begin(), grid.end());

    for (const double d : config.d_values) {
        const RejectLossParams params{d, config.delta};
        ModelOutcome outcome;
        outcome.d = d;
        std::optional<RejectModel> best;
        for (const double r : grid) {
            RejectModel model = fit(design_train, train_y, r, params, config.fit);
            const auto tune_decisions = predict(model, design_tune);
            std::vector<int> labels;
            labels.reserve(tune_decisions.size());
            bool any_decision = false;
            for (const auto& dec : tune_decisions) {
                labels.push_back(dec.label);
                any_decision = any_decision || dec.label != 0;
            }
            outcome.decisive_model_available = outcome.decisive_model_available || any_decision;
            const double loss = mean_l_loss(labels, tune_y, d);
            // Ties go to the larger (sparser) r.
            if (!best || loss <= outcome.tuning_loss + 1e-12) {
                outcome.tuning_loss = loss;
                outcome.tuned_r = r;
                best = std::move(model);
            }
        }
        for (const auto j : best->active_features()) {
            outcome.post_model_features.push_back(design[j]);
        }
        const auto all = predict(*best, rows_cols(x, [&] {
            std::vector<std::size_t> rows(static_cast<std::size_t>(x.rows()));
            std::iota(rows.begin(), rows.end(), std::size_t{0});
            return rows;
        }(), design));
        outcome.decisions.reserve(all.size());
        for (const auto& dec : all) {
            outcome.decisions.push_back(dec.label);
        }
        std::tie(outcome.training_accuracy, outcome.n_with_decision_train) = accuracy(outcome.decisions, y, training);
        std::tie(outcome.testing_accuracy, outcome.n_with_decision_test) = accuracy(outcome.decisions, y, testing);
        record.outcomes.push_back(std::move(outcome));
    }
}

inline void skip_record(ReplicationRecord& record, const HarnessConfig& config, std::size_t n, std::string note)
{
    record.skipped = true;
    record.note = std::move(note);
    record.outcomes.clear();
    for (const double d : config.d_values) {
        ModelOutcome o;
        o.d = d;
        o.decisions.assign(n, 0);
        record.outcomes.push_back(std::move(o));
    }
}

} // namespace detail

struct FiveFoldResult {
    std::vector<std::vector<std::size_t>> folds;
    std::vector<ReplicationRecord> records; ///< one per fold; roles are training / tuning
};

/// Five-fold CV: each fold in turn is the tuning set and the other four train.
inline FiveFoldResult five_fold_cv(const Eigen::MatrixXd& x, const std::vector<int>& y, const HarnessConfig& config,
                                   std::size_t folds = 5)
{
    config.validate(static_cast<std::size_t>(x.cols()));
    if (static_cast<std::size_t>(x.rows()) != y.size()) {
        throw DimensionError("label count does not match feature rows");
    }
    FiveFoldResult out;
    out.folds = kfold_partition(y.size(), folds, config.seed);
    out.records.resize(folds);
    detail::parallel_for(folds, config.threads, [&](std::size_t f) {
        ReplicationRecord& rec = out.records[f];
        rec.rep_id = f;
        rec.roles.assign(y.size(), SplitRole::training);
        std::vector<std::size_t> training;
        for (std::size_t g = 0; g < folds; ++g) {
            for (const auto i : out.folds[g]) {
                if (g == f) {
                    rec.roles[i] = SplitRole::tuning;
                } else {
                    training.push_back(i);
                }
            }
        }
        std::sort(training.begin(), training.end());
        if (!detail::both_classes(y, training)) {
            detail::skip_record(rec, config, y.size(), "training folds contain a single class");
            return;
        }
        detail::evaluate_split(x, y, training, out.folds[f], {}, config, rec);
    });
    return out;
}

/// Multiple cross validation: `config.reps` independent tune/train/test splits.
inline std::vector<ReplicationRecord> mcv_run(const Eigen::MatrixXd& x, const std::vector<int>& y,
                                              const HarnessConfig& config)
{
    config.validate(static_cast<std::size_t>(x.cols()));
    if (static_cast<std::size_t>(x.rows()) != y.size()) {
        throw DimensionError("label count does not match feature rows");
    }
    std::vector<ReplicationRecord> records(config.reps);
    detail::parallel_for(config.reps, config.threads, [&](std::size_t rep) {
        ReplicationRecord& rec = records[rep];
        rec.rep_id = rep;
        Rng rng(config.seed, "partition", rep);
        TuneTrainTest split = tune_train_test_partition(y.size(), rng);
        if (!detail::both_classes(y, split.training)) {
            Rng retry(config.seed, "partition-retry", rep);
            split = tune_train_test_partition(y.size(), retry);
            rec.resampled = true;
        }
        rec.roles.assign(y.size(), SplitRole::training);
        for (const auto i : split.tuning) {
            rec.roles[i] = SplitRole::tuning;
        }
        for (const auto i : split.testing) {
            rec.roles[i] = SplitRole::testing;
        }
        if (!detail::both_classes(y, split.training)) {
            detail::skip_record(rec, config, y.size(), "training split contains a single class after resampling");
            return;
        }
        detail::evaluate_split(x, y, split.training, split.tuning, split.testing, config, rec);
    });
    return records;
}

// --- summaries ---------------------------------------------------------------

struct MeanSd {
    double mean = not_available;
    double sd = not_available; ///< sample standard deviation; NaN for fewer than 2 values
};

inline MeanSd mean_sd(const std::vector<double>& values)
{
    MeanSd out;
    if (values.empty()) {
        return out;
    }
    const double n = static_cast<double>(values.size());
    out.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    if (values.size() > 1) {
        double ss = 0.0;
        for (const double v : values) {
            ss += (v - out.mean) * (v - out.mean);
        }
        out.sd = std::sqrt(ss / (n - 1.0));
    }
    return out;
}

/// Per-d summary restricted to replications with a definite testing decision.
struct McvSummaryRow {
    double d = 0.0;
    std::size_t reps = 0;
    std::size_t skipped = 0;
    std::size_t decisive = 0;
    MeanSd training_accuracy;
    MeanSd testing_accuracy;
    MeanSd n_train_with_decision;
    MeanSd n_test_with_decision;
};

inline std::vector<McvSummaryRow> summarize(const std::vector<ReplicationRecord>& records,
                                            const std::vector<double>& d_values)
{
    std::vector<McvSummaryRow> rows;
    for (std::size_t k = 0; k < d_values.size(); ++k) {
        McvSummaryRow row;
        row.d = d_values[k];
        row.reps = records.size();
        std::vector<double> train_acc, test_acc, n_train, n_test;
        for (const auto& rec : records) {
            if (rec.skipped) {
                ++row.skipped;
                continue;
            }
            if (!rec.decisive(k)) {
                continue;
            }
            ++row.decisive;
            const auto& o = rec.outcomes[k];
            if (!std::isnan(o.training_accuracy)) {
                train_acc.push_back(o.training_accuracy);
            }
            test_acc.push_back(o.testing_accuracy);
            n_train.push_back(static_cast<double>(o.n_with_decision_train));
            n_test.push_back(static_cast<double>(o.n_with_decision_test));
        }
        row.training_accuracy = mean_sd(train_acc);
        row.testing_accuracy = mean_sd(test_acc);
        row.n_train_with_decision = mean_sd(n_train);
        row.n_test_with_decision = mean_sd(n_test);
        rows.push_back(row);
    }
    return rows;
}

// --- voting ------------------------------------------------------------------

/// Reported in tables in place of an infinite voting score.
inline constexpr double voting_saturation = 9.99;

struct VotingRecord {
    std::size_t s = 0; ///< +1 decisions
    std::size_t w = 0; ///< withheld
    std::size_t r = 0; ///< -1 decisions
    double v = 0.0;    ///< (s - r) / w; +-infinity when w = 0 and s != r

    [[nodiscard]] std::size_t count() const noexcept { return s + w + r; }
};

inline double voting_score(std::size_t s, std::size_t w, std::size_t r)
{
    if (w == 0) {
        if (s == r) {
            return 0.0;
        }
        return s > r ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    }
    return (static_cast<double>(s) - static_cast<double>(r)) / static_cast<double>(w);
}

/// Per-subject (s, w, r) counts over the non-skipped replications for d_values[d_index].
inline std::vector<VotingRecord> voting_scores(const std::vector<ReplicationRecord>& records, std::size_t n,
                                               std::size_t d_index, VotingMode mode = VotingMode::testing_only)
{
    std::vector<VotingRecord> votes(n);
    for (const auto& rec : records) {
        if (rec.skipped) {
            continue;
        }
        const auto& decisions = rec.outcomes.at(d_index).decisions;
        for (std::size_t i = 0; i < n; ++i) {
            if (mode == VotingMode::testing_only && rec.roles[i] != SplitRole::testing) {
                continue;
            }
            switch (decisions[i]) {
            case 1:
                ++votes[i].s;
                break;
            case -1:
                ++votes[i].r;
                break;
            default:
                ++votes[i].w;
                break;
            }
        }
    }
    for (auto& v : votes) {
        v.v = voting_score(v.s, v.w, v.r);
    }
    return votes;
}

struct VotingBin {
    double lo = 0.0; ///< exclusive
    double hi = 0.0; ///< inclusive
    std::size_t frequency = 0;
    std::size_t positives = 0;

    [[nodiscard]] double proportion() const
    {
        return frequency ? static_cast<double>(positives) / static_cast<double>(frequency) : not_available;
    }
};

struct VotingTable {
    std::vector<VotingBin> bins;
    std::size_t below = 0;       ///< scores at or under the first lower edge
    std::size_t above = 0;       ///< scores over the last upper edge
    std::size_t unevaluated = 0; ///< subjects without any counted prediction
};

inline std::vector<std::pair<double, double>> default_voting_bins()
{
    return {{-0.1, 0.0}, {0.0, 0.1}, {0.1, 0.2}, {0.2, 0.4}, {0.4, 1.5}};
}

/// Frequency and positive-class proportion per half-open (lo, hi] bin.
inline VotingTable bin_voting_scores(const std::vector<VotingRecord>& votes, const std::vector<int>& truth,
                                     const std::vector<std::pair<double, double>>& edges = default_voting_bins())
{
    if (votes.size() != truth.size()) {
        throw DimensionError("voting records and labels differ in length");
    }
    VotingTable table;
    for (const auto& [lo, hi] : edges) {
        table.bins.push_back({lo, hi, 0, 0});
    }
    for (std::size_t i = 0; i < votes.size(); ++i) {
        if (votes[i].count() == 0) {
            ++table.unevaluated;
            continue;
        }
        const double v = votes[i].v;
        bool placed = false;
        for (auto& bin : table.bins) {
            if (v > bin.lo && v <= bin.hi) {
                ++bin.frequency;
                bin.positives += truth[i] > 0 ? 1 : 0;
                placed = true;
                break;
            }
        }
        if (!placed) {
            if (!table.bins.empty() && v > table.bins.back().hi) {
                ++table.above;
            } else {
                ++table.below;
            }
        }
    }
    return table;
}

// --- permutation & overlap ----------------------------------------------------

/// Copy of `data` with labels (and nothing else) permuted.
inline Dataset permute_response(const Dataset& data, std::uint64_t seed)
{
    Dataset out = data;
    Rng rng(seed, "permutation");
    rng.shuffle(std::span<std::string>(out.labels));
    return out;
}

struct SelectionOverlap {
    std::vector<std::vector<std::size_t>> counts; ///< |S_a ∩ S_b|; diagonal = |S_a|
    std::map<std::size_t, std::size_t> frequency; ///< feature -> number of selections containing it
};

inline SelectionOverlap selection_overlap(const std::vector<std::vector<std::size_t>>& selections)
{
    if (selections.empty()) {
        throw ArgumentError("selection overlap needs at least one selection");
    }
    std::vector<std::set<std::size_t>> sets;
    for (const auto& s : selections) {
        sets.emplace_back(s.begin(), s.end());
    }
    SelectionOverlap out;
    out.counts.assign(sets.size(), std::vector<std::size_t>(sets.size(), 0));
    for (std::size_t a = 0; a < sets.size(); ++a) {
        for (std::size_t b = 0; b < sets.size(); ++b) {
            std::size_t common = 0;
            for (const auto f : sets[a]) {
                common += sets[b].count(f);
            }
            out.counts[a][b] = common;
        }
        for (const auto f : sets[a]) {
            ++out.frequency[f];
        }
    }
    return out;
}

/// Per-feature selection frequency before the SVM and after it (nonzero
/// coefficient at the tuned r) for d_values[d_index].
struct FeatureFrequency {
    std::size_t feature = 0;
    std::size_t pre_model = 0;
    std::size_t post_model = 0;
};

inline std::vector<FeatureFrequency> frequency_histogram(const std::vector<ReplicationRecord>& records,
                                                         std::size_t d_index)
{
    std::map<std::size_t, FeatureFrequency> table;
    for (const auto& rec : records) {
        if (rec.skipped) {
            continue;
        }
        for (const auto f : rec.selected_features) {
            auto& row = table[f];
            row.feature = f;
            ++row.pre_model;
        }
        for (const auto f : rec.outcomes.at(d_index).post_model_features) {
            auto& row = table[f];
            row.feature = f;
            ++row.post_model;
        }
    }
    std::vector<FeatureFrequency> out;
    for (const auto& [f, row] : table) {
        out.push_back(row);
    }
    return out;
}

} // namespace dcovsel
