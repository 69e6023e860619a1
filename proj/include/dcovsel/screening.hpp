#pragma once

// Marginal distance-correlation ranking (DC-SIS) and greedy selection that
// keeps adding ranked features while the joint distance covariance with the
// response does not decrease.

#include "dataset.hpp"
#include "dcov.hpp"
#include "errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace dcovsel {

enum class ScreeningMethod { dc_sis, dcov_greedy };

enum class StopReason { decrease_observed, exhausted, model_size_reached };

inline const char* to_string(StopReason r) noexcept
{
    switch (r) {
    case StopReason::decrease_observed:
        return "decrease_observed";
    case StopReason::exhausted:
        return "exhausted";
    case StopReason::model_size_reached:
        return "model_size_reached";
    }
    return "unknown";
}

inline const char* to_string(ScreeningMethod m) noexcept
{
    return m == ScreeningMethod::dc_sis ? "dcsis" : "dcov";
}

struct ScreeningConfig {
    ScreeningMethod method = ScreeningMethod::dcov_greedy;
    std::optional<std::size_t> model_size; ///< DC-SIS only; defaults to floor(n / log n)
    double epsilon = 0.0;                  ///< accept a step if V_new >= V_old - epsilon
    std::size_t lookahead = 1;             ///< candidates tested per step
    bool standardize = true;               ///< z-score features before any distance computation
    unsigned threads = 1;

    void validate(std::size_t p) const
    {
        if (!(epsilon >= 0.0)) {
            throw ArgumentError("epsilon must be >= 0");
        }
        if (lookahead < 1) {
            throw ArgumentError("lookahead must be >= 1");
        }
        if (model_size && (*model_size < 1 || *model_size > p)) {
            throw ArgumentError("model size must be in [1, " + std::to_string(p) + "]");
        }
    }
};

struct MarginalRanking {
    std::vector<std::size_t> order; ///< feature indices by decreasing R_n^2, ties by index
    std::vector<double> r2;         ///< R_n^2 per feature, original order
    bool constant_response = false; ///< every r2 is 0 through the zero-variance branch
};

/// One evaluation of V_n^2(x_S + candidate, y) during the greedy walk.
struct Evaluation {
    std::size_t feature = 0;
    double value = 0.0;
    bool accepted = false;
};

struct ScreeningResult {
    std::vector<std::size_t> ranking;
    std::vector<double> marginal_r2;
    std::vector<std::size_t> selected;
    /// V_n^2 of each accepted selection, followed by the rejected value that stopped the walk.
    std::vector<double> trajectory;
    std::vector<Evaluation> evaluations;
    StopReason stop_reason = StopReason::exhausted;
    bool standardized = false;
    bool constant_response = false;
};

/// floor(n / log n), the conventional DC-SIS model size.
inline std::size_t default_model_size(std::size_t n)
{
    if (n < 2) {
        throw ArgumentError("default model size needs n >= 2");
    }
    const double v = std::floor(static_cast<double>(n) / std::log(static_cast<double>(n)));
    return std::max<std::size_t>(1, static_cast<std::size_t>(v));
}

namespace detail {

template <typename Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn)
{
    const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(count)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) {
            fn(i);
        }
        return;
    }
    // Static contiguous chunks: each index is computed by exactly one worker.
    // The first failing chunk (by position) decides the rethrown exception.
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    const std::size_t chunk = (count + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(count, begin + chunk);
        pool.emplace_back([begin, end, &fn, &error = errors[w]] {
            try {
                for (std::size_t i = begin; i < end; ++i) {
                    fn(i);
                }
            } catch (...) {
                error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) {
        t.join();
    }
    for (const auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

inline Eigen::MatrixXd prepare_features(const Eigen::MatrixXd& x, bool standardize)
{
    return standardize ? standardize_columns(x) : x;
}

} // namespace detail

/// R_n^2 of every column of `x` against `response`, with the response's
/// centered matrix computed once.
inline MarginalRanking marginal_rank(const Eigen::MatrixXd& x, const VariableBlock& response, unsigned threads = 1)
{
    if (x.cols() < 1) {
        throw DataError("marginal ranking needs at least one feature");
    }
    if (x.rows() != response.n()) {
        throw DimensionError("feature matrix has " + std::to_string(x.rows()) + " rows, response has " +
                             std::to_string(response.n()));
    }
    if (x.rows() < 2) {
        throw DataError("marginal ranking needs n >= 2");
    }
    if (!x.allFinite()) {
        throw DataError("feature matrix contains non-finite values");
    }
    const CenteredDistanceMatrix b = center_block(response);
    const double vy2 = dvar2(b);

    MarginalRanking out;
    const auto p = static_cast<std::size_t>(x.cols());
    out.r2.assign(p, 0.0);
    out.constant_response = !(vy2 > 0.0);
    if (!out.constant_response) {
        detail::parallel_for(p, threads, [&](std::size_t c) {
            const Eigen::MatrixXd d = detail::squared_distances(x.col(static_cast<Eigen::Index>(c))).cwiseSqrt();
            const CenteredDistanceMatrix a = center_unchecked(d);
            const DCovStats s = dcor2(a, b);
            out.r2[c] = s.r2;
        });
    }
    out.order.resize(p);
    std::iota(out.order.begin(), out.order.end(), std::size_t{0});
    std::stable_sort(out.order.begin(), out.order.end(),
                     [&](std::size_t lhs, std::size_t rhs) { return out.r2[lhs] > out.r2[rhs]; });
    return out;
}

/// Top-d prefix of a ranking.
inline std::vector<std::size_t> dc_sis_select(const std::vector<std::size_t>& ranking, std::size_t model_size)
{
    if (model_size < 1 || model_size > ranking.size()) {
        throw ArgumentError("model size " + std::to_string(model_size) + " outside [1, " +
                            std::to_string(ranking.size()) + "]");
    }
    return {ranking.begin(), ranking.begin() + static_cast<std::ptrdiff_t>(model_size)};
}

namespace detail {

/// Greedy walk over an existing ranking. With lookahead m, the first of the
/// next m unconsumed candidates that keeps V_n^2 within epsilon is added;
/// skipped candidates stay eligible.
inline void greedy_walk(const Eigen::MatrixXd& features, const CenteredDistanceMatrix& response_centered,
                        const ScreeningConfig& config, ScreeningResult& result)
{
    const auto& ranking = result.ranking;
    JointDistanceAccumulator joint(features.rows());
    const auto first = ranking.front();
    joint.add(features.col(static_cast<Eigen::Index>(first)));
    double current = dcov2(joint.centered(), response_centered);
    result.selected.push_back(first);
    result.trajectory.push_back(current);
    result.evaluations.push_back({first, current, true});

    std::vector<std::size_t> remaining(ranking.begin() + 1, ranking.end());
    const double floor_shift = config.epsilon;
    for (;;) {
        if (remaining.empty()) {
            result.stop_reason = StopReason::exhausted;
            return;
        }
        const std::size_t window = std::min(config.lookahead, remaining.size());
        std::optional<std::size_t> taken;
        double last_rejected = 0.0;
        for (std::size_t k = 0; k < window; ++k) {
            const std::size_t candidate = remaining[k];
            const auto column = features.col(static_cast<Eigen::Index>(candidate));
            const double value = dcov2(joint.centered_with(column), response_centered);
            const bool accept = value >= current - floor_shift;
            result.evaluations.push_back({candidate, value, accept});
            if (accept) {
                joint.add(column);
                current = value;
                result.selected.push_back(candidate);
                result.trajectory.push_back(value);
                taken = k;
                break;
            }
            last_rejected = value;
        }
        if (!taken) {
            result.trajectory.push_back(last_rejected);
            result.stop_reason = StopReason::decrease_observed;
            return;
        }
        remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(*taken));
    }
}

} // namespace detail

/// Screen the columns of `x` against `response` according to `config`.
inline ScreeningResult screen(const Eigen::MatrixXd& x, const VariableBlock& response, const ScreeningConfig& config)
{
    config.validate(static_cast<std::size_t>(x.cols()));
    const Eigen::MatrixXd features = detail::prepare_features(x, config.standardize);
    MarginalRanking marginal = marginal_rank(features, response, config.threads);

    ScreeningResult result;
    result.ranking = std::move(marginal.order);
    result.marginal_r2 = std::move(marginal.r2);
    result.standardized = config.standardize;
    result.constant_response = marginal.constant_response;

    if (config.method == ScreeningMethod::dc_sis) {
        const std::size_t d = config.model_size.value_or(
            std::min(default_model_size(static_cast<std::size_t>(x.rows())), result.ranking.size()));
        result.selected = dc_sis_select(result.ranking, d);
        result.stop_reason = StopReason::model_size_reached;
        return result;
    }
    detail::greedy_walk(features, center_block(response), config, result);
    return result;
}

/// Greedy DCOV selection (method forced to dcov_greedy).
inline ScreeningResult dcov_greedy(const Eigen::MatrixXd& x, const VariableBlock& response, ScreeningConfig config)
{
    config.method = ScreeningMethod::dcov_greedy;
    return screen(x, response, config);
}

struct OneVsRestResult {
    std::vector<std::string> classes;
    std::vector<std::optional<ScreeningResult>> per_class; ///< empty where the class was skipped
    std::vector<std::size_t> union_selected;               ///< ascending feature index
    std::map<std::size_t, std::vector<std::size_t>> provenance; ///< feature -> class indices that selected it
    std::vector<std::string> warnings;
};

/// One screen per class with the indicator response (0 = in class, 1 = rest);
/// the selections are pooled.
inline OneVsRestResult one_vs_rest_screen(const Eigen::MatrixXd& x, const std::vector<std::string>& labels,
                                          const ScreeningConfig& config)
{
    if (static_cast<std::size_t>(x.rows()) != labels.size()) {
        throw DimensionError("label count does not match feature rows");
    }
    const ClassCoding coding = class_coding(labels);
    if (coding.classes.size() < 2) {
        throw DataError("one-versus-rest screening needs at least 2 classes");
    }
    OneVsRestResult out;
    out.classes = coding.classes;
    out.per_class.resize(coding.classes.size());
    for (std::size_t c = 0; c < coding.classes.size(); ++c) {
        const auto members = static_cast<std::size_t>(
            std::count(coding.ids.begin(), coding.ids.end(), static_cast<int>(c)));
        if (members < 2) {
            out.warnings.push_back("class '" + coding.classes[c] + "' has " + std::to_string(members) +
                                   " member(s); skipped");
            continue;
        }
        Eigen::VectorXd indicator(static_cast<Eigen::Index>(labels.size()));
        for (std::size_t i = 0; i < labels.size(); ++i) {
            indicator(static_cast<Eigen::Index>(i)) = coding.ids[i] == static_cast<int>(c) ? 0.0 : 1.0;
        }
        out.per_class[c] = screen(x, VariableBlock(indicator), config);
        for (const auto f : out.per_class[c]->selected) {
            out.provenance[f].push_back(c);
        }
    }
    for (const auto& [feature, classes] : out.provenance) {
        out.union_selected.push_back(feature);
    }
    return out;
}

} // namespace dcovsel
