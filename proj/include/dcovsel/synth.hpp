#pragma once

// Seeded synthetic benchmarks with known ground truth.
//
//   linear      y = effect * sum(x_active) + noise * e, features N(0, 1)
//   logistic    labels first, then x_active ~ N(+-effect/2, 1) by class, so
//               eta(x) = sigmoid(logit(prior) + effect * sum(x_active)) exactly
//   multiclass  classes C1..CK; class k shifts its own block of drivers by +effect

#include "dataset.hpp"
#include "errors.hpp"
#include "rng.hpp"

#include <fmt/format.h>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace dcovsel {

enum class SynthModel { linear, logistic, multiclass };

inline const char* to_string(SynthModel m) noexcept
{
    switch (m) {
    case SynthModel::linear:
        return "linear";
    case SynthModel::logistic:
        return "logistic";
    case SynthModel::multiclass:
        return "multiclass";
    }
    return "?";
}

struct SynthSpec {
    std::size_t n = 100;
    std::size_t p = 50;
    SynthModel model = SynthModel::linear;
    std::vector<std::size_t> active; ///< 0-based driver columns
    double effect = 1.0;
    double noise = 1.0;              ///< linear model only
    double prior = 0.5;              ///< logistic: P(y = +1) when `positives` is unset
    std::optional<std::size_t> positives; ///< logistic: exact number of +1 labels
    std::size_t classes = 4;              ///< multiclass
    std::vector<std::size_t> class_sizes; ///< multiclass: exact sizes (sum n); balanced otherwise
    std::uint64_t seed = 1;

    void validate() const
    {
        if (n < 2) {
            throw ArgumentError("synthetic n must be >= 2");
        }
        if (p < 1) {
            throw ArgumentError("synthetic p must be >= 1");
        }
        if (active.size() > p) {
            throw ArgumentError("active set is larger than p");
        }
        const std::set<std::size_t> distinct(active.begin(), active.end());
        if (distinct.size() != active.size()) {
            throw ArgumentError("active set has duplicate columns");
        }
        for (const auto a : active) {
            if (a >= p) {
                throw ArgumentError("active column " + std::to_string(a) + " is outside [0, p)");
            }
        }
        if (!std::isfinite(effect) || !(noise >= 0.0) || !std::isfinite(noise)) {
            throw ArgumentError("effect must be finite and noise finite and >= 0");
        }
        if (model == SynthModel::logistic) {
            if (positives && (*positives < 1 || *positives >= n)) {
                throw ArgumentError("positive count must be in [1, n)");
            }
            if (!positives && !(prior > 0.0 && prior < 1.0)) {
                throw ArgumentError("prior must be in (0, 1)");
            }
        }
        if (model == SynthModel::multiclass) {
            if (classes < 2) {
                throw ArgumentError("multiclass model needs >= 2 classes");
            }
            if (active.empty() || active.size() % classes != 0) {
                throw ArgumentError("multiclass active set must split evenly across classes");
            }
            if (!class_sizes.empty()) {
                if (class_sizes.size() != classes) {
                    throw ArgumentError("class size count does not match number of classes");
                }
                if (std::accumulate(class_sizes.begin(), class_sizes.end(), std::size_t{0}) != n) {
                    throw ArgumentError("class sizes do not sum to n");
                }
            } else if (n < classes) {
                throw ArgumentError("fewer subjects than classes");
            }
        }
    }
};

struct SynthOutput {
    Dataset data;
    std::vector<std::size_t> active;
    std::vector<double> eta; ///< logistic only: P(y = +1 | x_i)
};

inline std::string padded_name(char prefix, std::size_t index, std::size_t count)
{
    const auto width = std::to_string(count).size();
    return fmt::format("{}{:0{}}", prefix, index + 1, width);
}

inline SynthOutput synth_generate(const SynthSpec& spec)
{
    spec.validate();
    SynthOutput out;
    out.active = spec.active;
    Dataset& data = out.data;
    const auto n = static_cast<Eigen::Index>(spec.n);
    const auto p = static_cast<Eigen::Index>(spec.p);
    for (std::size_t j = 0; j < spec.p; ++j) {
        data.feature_names.push_back(padded_name('g', j, spec.p));
    }
    for (std::size_t i = 0; i < spec.n; ++i) {
        data.subject_ids.push_back(padded_name('s', i, spec.n));
    }

    // Class assignment, independent of the feature stream.
    std::vector<int> cls(spec.n, 0);
    Rng label_rng(spec.seed, "synthesis-labels");
    if (spec.model == SynthModel::logistic) {
        if (spec.positives) {
            std::fill(cls.begin(), cls.begin() + static_cast<std::ptrdiff_t>(*spec.positives), 1);
            label_rng.shuffle(std::span<int>(cls));
        } else {
            for (auto& c : cls) {
                c = label_rng.bernoulli(spec.prior) ? 1 : 0;
            }
        }
    } else if (spec.model == SynthModel::multiclass) {
        std::vector<std::size_t> sizes = spec.class_sizes;
        if (sizes.empty()) {
            for (std::size_t k = 0; k < spec.classes; ++k) {
                sizes.push_back(spec.n / spec.classes + (k < spec.n % spec.classes ? 1 : 0));
            }
        }
        std::size_t at = 0;
        for (std::size_t k = 0; k < sizes.size(); ++k) {
            for (std::size_t m = 0; m < sizes[k]; ++m) {
                cls[at++] = static_cast<int>(k);
            }
        }
        label_rng.shuffle(std::span<int>(cls));
    }

    Rng feature_rng(spec.seed, "synthesis-features");
    data.x.resize(n, p);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < p; ++j) {
            data.x(i, j) = feature_rng.normal();
        }
    }

    switch (spec.model) {
    case SynthModel::linear: {
        Rng noise_rng(spec.seed, "synthesis-noise");
        for (Eigen::Index i = 0; i < n; ++i) {
            double y = 0.0;
            for (const auto a : spec.active) {
                y += data.x(i, static_cast<Eigen::Index>(a));
            }
            y = spec.effect * y + spec.noise * noise_rng.normal();
            data.labels.push_back(fmt::format("{}", y));
        }
        break;
    }
    case SynthModel::logistic: {
        const double prior = spec.positives ? static_cast<double>(*spec.positives) / static_cast<double>(spec.n)
                                            : spec.prior;
        const double base = std::log(prior / (1.0 - prior));
        for (Eigen::Index i = 0; i < n; ++i) {
            const double shift = cls[static_cast<std::size_t>(i)] ? spec.effect / 2.0 : -spec.effect / 2.0;
            double s = 0.0;
            for (const auto a : spec.active) {
                data.x(i, static_cast<Eigen::Index>(a)) += shift;
                s += data.x(i, static_cast<Eigen::Index>(a));
            }
            out.eta.push_back(1.0 / (1.0 + std::exp(-(base + spec.effect * s))));
            data.labels.emplace_back(cls[static_cast<std::size_t>(i)] ? "1" : "-1");
        }
        break;
    }
    case SynthModel::multiclass: {
        const std::size_t per_class = spec.active.size() / spec.classes;
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto k = static_cast<std::size_t>(cls[static_cast<std::size_t>(i)]);
            for (std::size_t m = 0; m < per_class; ++m) {
                data.x(i, static_cast<Eigen::Index>(spec.active[k * per_class + m])) += spec.effect;
            }
            data.labels.push_back("C" + std::to_string(k + 1));
        }
        break;
    }
    }
    data.validate();
    return out;
}

} // namespace dcovsel
