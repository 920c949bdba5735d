// Stage functions shared by the CLI subcommands, and the end-to-end
// synth -> ingest -> featurize -> train -> eval run.
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pinlog/classifier.hpp"
#include "pinlog/eval.hpp"
#include "pinlog/ingest.hpp"
#include "pinlog/synth.hpp"

namespace pinlog::pipeline {

struct IngestSummary {
    std::size_t sessions = 0;
    std::size_t merged_drops = 0;
    std::size_t dropped_short = 0;
    std::size_t dropped_missing = 0;
};

/// Parses, merges and segments every session file into one dataset.
Dataset ingest_sessions(const std::vector<std::filesystem::path>& files, DatasetMode mode,
                        const SegmentationConfig& cfg, const std::vector<std::string>& label_space,
                        IngestSummary* summary = nullptr);

/// *.jsonl files of a directory in lexicographic order.
std::vector<std::filesystem::path> session_files(const std::filesystem::path& dir);

/// Label space for feature rows: canonical for digit10/activity3, sorted distinct otherwise.
std::vector<std::string> label_space_for(const std::vector<features::FeatureVector>& rows, DatasetMode mode);

/// Deterministically permutes labels across rows (label-shuffle control).
void shuffle_labels(std::vector<features::FeatureVector>& rows, std::uint64_t seed);

struct TrainOutcome {
    classifier::TrainResult result;
    eval::SplitIndices split;
};

TrainOutcome split_and_train(const std::vector<features::FeatureVector>& rows,
                             const std::vector<std::string>& label_space, const classifier::TrainConfig& cfg,
                             std::uint64_t split_seed);

std::string split_to_json(const eval::SplitIndices& s, std::uint64_t seed);
eval::SplitIndices split_from_json(std::string_view text);

/// Per-user classifiers averaged over users; confusion counts are summed.
eval::EvalReport same_user_report(const std::vector<features::FeatureVector>& rows,
                                  const std::vector<std::string>& label_space, DatasetMode mode,
                                  const classifier::TrainConfig& cfg, std::uint64_t split_seed);

struct PipelineOptions {
    synth::SynthConfig synth;
    SegmentationConfig segmentation;
    classifier::TrainConfig train;
    DatasetMode mode = DatasetMode::pin50;
    bool shuffle_labels = false;
    bool same_user = false;
    std::filesystem::path out_dir = "pipeline-out";
};

struct PipelineResult {
    eval::EvalReport multi_user;
    std::optional<eval::EvalReport> same_user;
    classifier::TrainHistory history;
    std::size_t n_segments = 0;
    std::vector<std::filesystem::path> outputs;
};

PipelineResult run_pipeline(const PipelineOptions& opts);

}  // namespace pinlog::pipeline
