// Splitting, top-k identification rates, search-space arithmetic, random
// baselines and rank correlation for survey tables.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "pinlog/classifier.hpp"
#include "pinlog/core.hpp"

namespace pinlog::eval {

struct SplitRatios {
    double train = 0.70;
    double val = 0.15;
    double test = 0.15;
};

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
    std::vector<std::size_t> test;
};

/// Stratified per-class split of sample indices (each class needs >= 3
/// samples and lands in every part). Global val/test totals are
/// floor(N * ratio), the remainder goes to train; per-class counts stay
/// within one of the ideal. Index lists are ascending.
SplitIndices split(std::span<const std::string> labels, const SplitRatios& ratios, std::uint64_t seed);

template <class T>
std::vector<T> select(const std::vector<T>& items, const std::vector<std::size_t>& idx) {
    std::vector<T> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(items.at(i));
    return out;
}

struct EvalReport {
    std::map<int, double> top_k_rates;
    std::vector<std::vector<std::size_t>> confusion;  // [true][predicted], top-1
    std::size_t n_test = 0;
    DatasetMode mode = DatasetMode::pin50;
    std::vector<std::string> label_space;
    std::map<std::string, double> baselines;
    std::map<std::string, double> derived;
};

/// Scores one probability vector per sample against its true class index.
EvalReport evaluate_scores(const std::vector<Eigen::VectorXd>& probs, const std::vector<int>& truth,
                           const std::vector<std::string>& label_space, DatasetMode mode,
                           const std::vector<int>& ks = {1, 2, 3});

EvalReport evaluate(const classifier::MlpModel& model, const std::vector<features::FeatureVector>& test_set,
                    DatasetMode mode, const std::vector<int>& ks = {1, 2, 3});

/// Checks rates in [0,1], monotone in k, and confusion row sums.
void check_report(const EvalReport& report, const std::vector<int>& truth);

/// p^4: every digit of a four-digit PIN recovered within its attempts.
double pin_success_from_digit_rate(double p);

/// Size of the candidate PIN set when each digit keeps its top `per_digit` guesses.
std::size_t candidate_set_size(std::size_t per_digit, std::size_t digits = 4);

/// Chance of hitting a uniformly random 4-digit PIN within `attempts` guesses.
double full_space_baseline(std::size_t attempts);

/// Random-guess identification rates for the given mode.
std::map<std::string, double> random_baselines(DatasetMode mode);

/// Average ranks (1-based, ties share the mean of their span).
std::vector<double> average_ranks(std::span<const double> v);

/// Spearman's rho: Pearson correlation of average ranks.
double spearman(std::span<const double> a, std::span<const double> b);

/// Participants x sensors ordinal scores in 1..5.
struct LikertTable {
    std::vector<std::string> sensors;
    std::vector<std::vector<int>> scores;
};

LikertTable likert_from_csv(std::string_view text);

struct SurveyResult {
    std::string group;
    std::size_t participants = 0;
    std::vector<std::string> sensors;
    std::vector<double> knowledge_mean;
    std::vector<double> concern_mean;
    double rho = 0.0;
};

/// Ranks sensors by mean knowledge and mean concern and correlates the ranks.
SurveyResult survey_correlation(const std::string& group, const LikertTable& knowledge, const LikertTable& concern);

std::string survey_table(const std::vector<SurveyResult>& results);

std::string report_to_json(const EvalReport& report);

/// Attempts x modes table of top-k rates, one column per (name, report).
std::string rate_table(const std::vector<std::pair<std::string, const EvalReport*>>& columns);

}  // namespace pinlog::eval
