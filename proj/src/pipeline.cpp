#include "pinlog/pipeline.hpp"

#include <algorithm>
#include <json.hpp>
#include <map>
#include <random>
#include <set>

#include "pinlog/text.hpp"

namespace pinlog::pipeline {

Dataset ingest_sessions(const std::vector<std::filesystem::path>& files, DatasetMode mode,
                        const SegmentationConfig& cfg, const std::vector<std::string>& label_space,
                        IngestSummary* summary) {
    IngestSummary local;
    std::vector<PinEntrySegment> segments;
    for (const auto& f : files) {
        const auto parsed = read_session_file(f);
        const auto merged = merge_listener_streams(parsed.trace);
        if (const auto v = validate_trace(merged.trace); !v.empty()) {
            throw ValidationError(f.string() + ": sample " + std::to_string(v.front().index) + ": " + v.front().rule);
        }
        auto seg = mode == DatasetMode::digit10 ? segment_digits(merged.trace, parsed.events, cfg, parsed.metadata.user_id)
                                                : segment_pins(merged.trace, parsed.events, cfg, parsed.metadata.user_id);
        ++local.sessions;
        local.merged_drops += merged.dropped;
        local.dropped_short += seg.dropped_short;
        local.dropped_missing += seg.dropped_missing;
        std::move(seg.segments.begin(), seg.segments.end(), std::back_inserter(segments));
    }
    if (summary) *summary = local;
    return make_dataset(std::move(segments), mode, label_space);
}

std::vector<std::filesystem::path> session_files(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw ValidationError(dir.string() + " is not a directory");
    std::vector<std::filesystem::path> out;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".jsonl") out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::string> label_space_for(const std::vector<features::FeatureVector>& rows, DatasetMode mode) {
    if (mode == DatasetMode::pin50) {
        std::set<std::string> labels;
        for (const auto& r : rows) labels.insert(r.label);
        return {labels.begin(), labels.end()};
    }
    return make_dataset({}, mode).label_space;
}

void shuffle_labels(std::vector<features::FeatureVector>& rows, std::uint64_t seed) {
    std::vector<std::string> labels;
    labels.reserve(rows.size());
    for (const auto& r : rows) labels.push_back(r.label);
    std::mt19937_64 rng(synth::substream_seed(seed, 0x5E0FF1EULL, 0));
    std::shuffle(labels.begin(), labels.end(), rng);
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i].label = labels[i];
}

TrainOutcome split_and_train(const std::vector<features::FeatureVector>& rows,
                             const std::vector<std::string>& label_space, const classifier::TrainConfig& cfg,
                             std::uint64_t split_seed) {
    std::vector<std::string> labels;
    labels.reserve(rows.size());
    for (const auto& r : rows) labels.push_back(r.label);
    auto split = eval::split(labels, {}, split_seed);
    const auto train_set = classifier::to_labeled_set(eval::select(rows, split.train), label_space);
    const auto val_set = classifier::to_labeled_set(eval::select(rows, split.val), label_space);
    return {classifier::train_scg(train_set, val_set, label_space, cfg), std::move(split)};
}

std::string split_to_json(const eval::SplitIndices& s, std::uint64_t seed) {
    nlohmann::ordered_json j;
    j["seed"] = seed;
    j["train"] = s.train;
    j["val"] = s.val;
    j["test"] = s.test;
    return j.dump();
}

eval::SplitIndices split_from_json(std::string_view text) {
    const auto j = nlohmann::json::parse(text.begin(), text.end(), nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ValidationError("split file is not a JSON object");
    try {
        return {j.at("train").get<std::vector<std::size_t>>(), j.at("val").get<std::vector<std::size_t>>(),
                j.at("test").get<std::vector<std::size_t>>()};
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("split file: ") + e.what());
    }
}

eval::EvalReport same_user_report(const std::vector<features::FeatureVector>& rows,
                                  const std::vector<std::string>& label_space, DatasetMode mode,
                                  const classifier::TrainConfig& cfg, std::uint64_t split_seed) {
    std::map<std::string, std::vector<features::FeatureVector>> by_user;
    for (const auto& r : rows) by_user[r.user_id].push_back(r);
    if (by_user.empty()) throw ValidationError("same-user mode: no rows");

    eval::EvalReport combined;
    combined.mode = mode;
    combined.label_space = label_space;
    combined.confusion.assign(label_space.size(), std::vector<std::size_t>(label_space.size(), 0));
    combined.baselines = eval::random_baselines(mode);
    for (const auto& [user, user_rows] : by_user) {
        const auto outcome = split_and_train(user_rows, label_space, cfg, split_seed);
        const auto rep = eval::evaluate(outcome.result.model, eval::select(user_rows, outcome.split.test), mode);
        for (const auto& [k, v] : rep.top_k_rates) combined.top_k_rates[k] += v / static_cast<double>(by_user.size());
        for (std::size_t a = 0; a < label_space.size(); ++a)
            for (std::size_t b = 0; b < label_space.size(); ++b) combined.confusion[a][b] += rep.confusion[a][b];
        combined.n_test += rep.n_test;
    }
    if (mode == DatasetMode::digit10 && combined.top_k_rates.contains(3)) {
        combined.derived["pin_success_81_attempts"] = eval::pin_success_from_digit_rate(combined.top_k_rates.at(3));
    }
    return combined;
}

PipelineResult run_pipeline(const PipelineOptions& opts) {
    PipelineResult result;
    const auto& dir = opts.out_dir;
    std::filesystem::create_directories(dir);
    const auto sessions_dir = dir / "sessions";
    std::filesystem::remove_all(sessions_dir);

    auto synth_cfg = opts.synth;
    if (synth_cfg.pins.empty()) synth_cfg.pins = synth::make_pin_list(synth_cfg.seed);
    const auto files = synth::write_protocol(synth_cfg, sessions_dir);

    const std::vector<std::string> pin_labels = opts.mode == DatasetMode::pin50 ? synth_cfg.pins : std::vector<std::string>{};
    const Dataset ds = ingest_sessions(files, opts.mode, opts.segmentation, pin_labels);
    const auto dataset_path = dir / "dataset.json";
    write_file(dataset_path, dataset_to_json(ds));

    auto rows = features::extract_all(valid_only(ds));
    result.n_segments = rows.size();
    if (opts.shuffle_labels) shuffle_labels(rows, opts.train.seed);
    const auto features_path = dir / "features.csv";
    write_file(features_path, features::to_csv(rows));

    const auto& label_space = ds.label_space;
    auto outcome = split_and_train(rows, label_space, opts.train, opts.train.seed);
    result.history = outcome.result.history;
    const auto model_path = dir / "model.json";
    const auto history_path = dir / "history.json";
    const auto split_path = dir / "split.json";
    write_file(model_path, classifier::model_to_json(outcome.result.model));
    write_file(history_path, classifier::history_to_json(outcome.result.history));
    write_file(split_path, split_to_json(outcome.split, opts.train.seed));

    result.multi_user = eval::evaluate(outcome.result.model, eval::select(rows, outcome.split.test), opts.mode);
    const auto report_path = dir / "report.json";
    write_file(report_path, eval::report_to_json(result.multi_user));

    std::vector<std::pair<std::string, const eval::EvalReport*>> columns{{"Multiple-users", &result.multi_user}};
    std::optional<std::filesystem::path> same_user_path;
    if (opts.same_user) {
        result.same_user = same_user_report(rows, label_space, opts.mode, opts.train, opts.train.seed);
        same_user_path = dir / "report_same_user.json";
        write_file(*same_user_path, eval::report_to_json(*result.same_user));
        columns.emplace_back("Same-user", &*result.same_user);
    }
    const auto table_path = dir / "report.txt";
    write_file(table_path, eval::rate_table(columns));

    result.outputs = {sessions_dir, dataset_path, features_path, model_path, history_path, split_path, report_path, table_path};
    if (same_user_path) result.outputs.push_back(*same_user_path);
    return result;
}

}  // namespace pinlog::pipeline
