#include "pinlog/cli.hpp"

#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>
#include <json.hpp>

#include "pinlog/activity.hpp"
#include "pinlog/pipeline.hpp"
#include "pinlog/server.hpp"
#include "pinlog/text.hpp"

namespace pinlog::cli {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

/// Records what a subcommand read and wrote; saved next to its outputs.
struct RunManifest {
    std::string command;
    std::vector<std::string> args;
    ordered_json config = ordered_json::object();
    ordered_json seeds = ordered_json::object();
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;

    void write(const fs::path& path) const {
        ordered_json j;
        j["tool"] = "pinlog";
        j["version"] = kVersion;
        j["command"] = command;
        j["args"] = args;
        j["config"] = config;
        j["seeds"] = seeds;
        j["inputs"] = inputs;
        j["outputs"] = outputs;
        write_file(path, j.dump(2) + "\n");
    }
};

fs::path manifest_for_file(const fs::path& out) {
    auto p = out;
    p += ".manifest.json";
    return p;
}

// Expands --config <file.json> into flags placed right after the subcommand,
// so flags given explicitly on the command line win.
std::vector<std::string> expand_config(std::vector<std::string> args) {
    auto it = std::find(args.begin(), args.end(), "--config");
    if (it == args.end()) return args;
    if (it + 1 == args.end()) throw ValidationError("--config needs a file");
    const fs::path path = *(it + 1);
    args.erase(it, it + 2);
    const auto j = nlohmann::json::parse(read_file(path), nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ValidationError("--config file must hold a JSON object");
    std::vector<std::string> extra;
    for (const auto& [key, value] : j.items()) {
        const std::string flag = "--" + key;
        if (value.is_boolean()) {
            if (value.get<bool>()) extra.push_back(flag);
        } else if (value.is_array()) {
            for (const auto& v : value) {
                extra.push_back(flag);
                extra.push_back(v.is_string() ? v.get<std::string>() : v.dump());
            }
        } else {
            extra.push_back(flag);
            extra.push_back(value.is_string() ? value.get<std::string>() : value.dump());
        }
    }
    const auto insert_at = args.empty() ? args.end() : args.begin() + 1;
    args.insert(insert_at, extra.begin(), extra.end());
    return args;
}

void add_synth_options(CLI::App* cmd, synth::SynthConfig& cfg) {
    cmd->add_option("--seed", cfg.seed, "Random seed");
    cmd->add_option("--users", cfg.n_users, "Number of synthetic users");
    cmd->add_option("--reps", cfg.reps, "Repetitions of every PIN per user");
    cmd->add_option("--rate", cfg.sample_rate_hz, "Sampling rate in Hz");
    cmd->add_option("--tap-amp", cfg.tap_amp, "Tap acceleration per keypad unit (m/s^2)");
    cmd->add_option("--tap-width", cfg.tap_width_ms, "Tap pulse width (ms)");
    cmd->add_option("--noise", cfg.noise_sigma, "Gaussian noise sigma on every channel");
    cmd->add_option("--jitter", cfg.user_jitter, "Per-user gain jitter");
    cmd->add_option("--inter-key", cfg.inter_key_ms, "Time between keydowns (ms)");
    cmd->add_option("--error-rate", cfg.error_rate, "Probability an entry is mistyped");
}

void add_segmentation_options(CLI::App* cmd, SegmentationConfig& cfg) {
    cmd->add_option("--pin-pre", cfg.pin_pre_ms, "Window before the first keydown of a PIN (ms)");
    cmd->add_option("--pin-post", cfg.pin_post_ms, "Window after the last keydown of a PIN (ms)");
    cmd->add_option("--digit-pre", cfg.digit_pre_ms, "Window before a digit keydown (ms)");
    cmd->add_option("--digit-post", cfg.digit_post_ms, "Window after a digit keydown (ms)");
}

void add_train_options(CLI::App* cmd, classifier::TrainConfig& cfg) {
    cmd->add_option("--seed", cfg.seed, "Seed for weights and the split");
    cmd->add_option("--hidden", cfg.hidden_dim, "Hidden layer size");
    cmd->add_option("--max-epochs", cfg.max_epochs, "Maximum SCG iterations");
    cmd->add_option("--patience", cfg.val_patience, "Validation failures before stopping");
    cmd->add_option("--sigma", cfg.scg_sigma, "SCG sigma");
    cmd->add_option("--lambda", cfg.scg_lambda0, "SCG initial lambda");
}

ordered_json synth_json(const synth::SynthConfig& c) {
    return {{"seed", c.seed},        {"users", c.n_users},       {"reps", c.reps},
            {"rate", c.sample_rate_hz}, {"tap_amp", c.tap_amp},  {"tap_width_ms", c.tap_width_ms},
            {"noise", c.noise_sigma}, {"jitter", c.user_jitter}, {"inter_key_ms", c.inter_key_ms},
            {"error_rate", c.error_rate}};
}

ordered_json segmentation_json(const SegmentationConfig& c) {
    return {{"pin_pre_ms", c.pin_pre_ms},
            {"pin_post_ms", c.pin_post_ms},
            {"digit_pre_ms", c.digit_pre_ms},
            {"digit_post_ms", c.digit_post_ms}};
}

ordered_json train_json(const classifier::TrainConfig& c) {
    return {{"seed", c.seed},           {"hidden", c.hidden_dim}, {"max_epochs", c.max_epochs},
            {"patience", c.val_patience}, {"sigma", c.scg_sigma}, {"lambda", c.scg_lambda0}};
}

std::vector<synth::ScriptStep> parse_script(const std::string& text) {
    std::vector<synth::ScriptStep> steps;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto comma = text.find(',', pos);
        if (comma == std::string::npos) comma = text.size();
        const std::string item = text.substr(pos, comma - pos);
        const auto colon = item.find(':');
        if (colon == std::string::npos) throw ValidationError("script step '" + item + "' must be activity:seconds");
        steps.push_back({synth::activity_from_string(item.substr(0, colon)), parse_double(item.substr(colon + 1))});
        pos = comma + 1;
    }
    return steps;
}

std::vector<std::string> read_pin_list(const fs::path& path) {
    const auto j = nlohmann::json::parse(read_file(path), nullptr, false);
    if (j.is_discarded() || !j.is_array()) throw ValidationError(path.string() + ": expected a JSON array of PINs");
    auto pins = j.get<std::vector<std::string>>();
    for (const auto& p : pins) {
        if (!is_pin_string(p)) throw ValidationError(path.string() + ": '" + p + "' is not a 4-digit PIN");
    }
    return pins;
}

std::string env_or(const char* name, const std::string& fallback) {
    const char* v = std::getenv(name);
    return v && *v ? std::string(v) : fallback;
}

}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
    std::vector<std::string> args;
    try {
        args = expand_config(raw_args);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }

    CLI::App app{"pinlog: motion-sensor PIN inference toolkit", "pinlog"};
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.set_version_flag("--version", std::string("pinlog ") + kVersion);
    app.add_option("--config", "JSON file of flag overrides (expanded before parsing)");

    RunManifest manifest;
    fs::path manifest_path;
    std::function<void()> action;

    // synth
    synth::SynthConfig synth_cfg;
    fs::path synth_out = "sessions";
    std::string activity_script;
    auto* synth_cmd = app.add_subcommand("synth", "Write synthetic session files");
    add_synth_options(synth_cmd, synth_cfg);
    synth_cmd->add_option("--out", synth_out, "Output directory");
    synth_cmd->add_option("--activity", activity_script,
                          "Write one activity trace instead, e.g. sitting:22,walking:34,running:25");
    synth_cmd->callback([&] {
        action = [&] {
            manifest.config = synth_json(synth_cfg);
            manifest.seeds["synth"] = synth_cfg.seed;
            if (!activity_script.empty()) {
                const auto at = synth::gen_activity_trace(synth_cfg, parse_script(activity_script));
                synth::GeneratedSession s{at.trace, {}, {"activity", "synthetic", "synthetic", "2017-01-01T00:00:00Z"}};
                const auto trace_path = synth_out / "activity.jsonl";
                write_file(trace_path, synth::session_file_text(s));
                ordered_json truth = ordered_json::array();
                for (const auto& iv : at.intervals) {
                    truth.push_back({{"activity", std::string(synth::to_string(iv.activity))},
                                     {"start_s", iv.start_s},
                                     {"end_s", iv.end_s}});
                }
                const auto truth_path = synth_out / "activity_truth.json";
                write_file(truth_path, truth.dump(2) + "\n");
                manifest.config["activity"] = activity_script;
                manifest.outputs = {trace_path.string(), truth_path.string()};
                out << "wrote " << at.trace.samples.size() << " samples to " << trace_path.string() << "\n";
            } else {
                if (synth_cfg.pins.empty()) synth_cfg.pins = synth::make_pin_list(synth_cfg.seed);
                const auto paths = synth::write_protocol(synth_cfg, synth_out);
                const auto pins_path = synth_out / "pins.json";
                write_file(pins_path, ordered_json(synth_cfg.pins).dump() + "\n");
                for (const auto& p : paths) manifest.outputs.push_back(p.string());
                manifest.outputs.push_back(pins_path.string());
                out << "wrote " << paths.size() << " sessions to " << synth_out.string() << "\n";
            }
            manifest_path = synth_out / "manifest.json";
        };
    });

    // ingest
    fs::path ingest_dir;
    std::vector<fs::path> ingest_files;
    fs::path ingest_out = "dataset.json";
    fs::path pins_file;
    std::string ingest_mode = "pin50";
    SegmentationConfig seg_cfg;
    auto* ingest_cmd = app.add_subcommand("ingest", "Parse and segment session files into a dataset");
    ingest_cmd->add_option("--sessions", ingest_dir, "Directory of *.jsonl session files");
    ingest_cmd->add_option("files", ingest_files, "Session files");
    ingest_cmd->add_option("--out", ingest_out, "Dataset JSON output");
    ingest_cmd->add_option("--mode", ingest_mode, "pin50 or digit10")->check(CLI::IsMember({"pin50", "digit10"}));
    ingest_cmd->add_option("--pins", pins_file, "JSON PIN list fixing the pin50 label order");
    add_segmentation_options(ingest_cmd, seg_cfg);
    ingest_cmd->callback([&] {
        action = [&] {
            auto files = ingest_files;
            if (!ingest_dir.empty()) {
                const auto more = pipeline::session_files(ingest_dir);
                files.insert(files.end(), more.begin(), more.end());
            }
            if (files.empty()) throw ValidationError("ingest: no session files given");
            const auto mode = dataset_mode_from_string(ingest_mode);
            const auto labels = pins_file.empty() || mode != DatasetMode::pin50 ? std::vector<std::string>{}
                                                                                 : read_pin_list(pins_file);
            pipeline::IngestSummary summary;
            const auto ds = pipeline::ingest_sessions(files, mode, seg_cfg, labels, &summary);
            write_file(ingest_out, dataset_to_json(ds));
            manifest.config = segmentation_json(seg_cfg);
            manifest.config["mode"] = ingest_mode;
            for (const auto& f : files) manifest.inputs.push_back(f.string());
            if (!pins_file.empty()) manifest.inputs.push_back(pins_file.string());
            manifest.outputs = {ingest_out.string()};
            manifest_path = manifest_for_file(ingest_out);
            out << "sessions " << summary.sessions << ", segments " << ds.segments.size() << ", dropped (short "
                << summary.dropped_short << ", missing " << summary.dropped_missing << ", unmerged "
                << summary.merged_drops << ")\n";
        };
    });

    // featurize
    fs::path feat_in;
    fs::path feat_out = "features.csv";
    auto* feat_cmd = app.add_subcommand("featurize", "Extract 114-feature vectors from a dataset");
    feat_cmd->add_option("--dataset", feat_in, "Dataset JSON")->required();
    feat_cmd->add_option("--out", feat_out, "Feature CSV output");
    feat_cmd->callback([&] {
        action = [&] {
            const auto ds = dataset_from_json(read_file(feat_in));
            const auto valid = valid_only(ds);
            const auto rows = features::extract_all(valid);
            write_file(feat_out, features::to_csv(rows));
            manifest.config["mode"] = std::string(to_string(ds.mode));
            manifest.inputs = {feat_in.string()};
            manifest.outputs = {feat_out.string()};
            manifest_path = manifest_for_file(feat_out);
            out << "rows " << rows.size() << " (excluded " << ds.segments.size() - valid.segments.size()
                << " invalid entries)\n";
        };
    });

    // train
    fs::path train_in;
    fs::path train_out = "model";
    std::string train_mode = "pin50";
    bool train_shuffle = false;
    classifier::TrainConfig train_cfg;
    auto* train_cmd = app.add_subcommand("train", "Train the SCG classifier on a feature CSV");
    train_cmd->add_option("--features", train_in, "Feature CSV")->required();
    train_cmd->add_option("--out", train_out, "Output directory (model.json, history.json, split.json)");
    train_cmd->add_option("--mode", train_mode, "pin50, digit10 or activity3")
        ->check(CLI::IsMember({"pin50", "digit10", "activity3"}));
    train_cmd->add_flag("--shuffle-labels", train_shuffle, "Permute labels (chance-level control)");
    add_train_options(train_cmd, train_cfg);
    train_cmd->callback([&] {
        action = [&] {
            auto rows = features::from_csv(read_file(train_in));
            const auto mode = dataset_mode_from_string(train_mode);
            if (train_shuffle) pipeline::shuffle_labels(rows, train_cfg.seed);
            const auto labels = pipeline::label_space_for(rows, mode);
            const auto outcome = pipeline::split_and_train(rows, labels, train_cfg, train_cfg.seed);
            const auto model_path = train_out / "model.json";
            const auto history_path = train_out / "history.json";
            const auto split_path = train_out / "split.json";
            write_file(model_path, classifier::model_to_json(outcome.result.model));
            write_file(history_path, classifier::history_to_json(outcome.result.history));
            write_file(split_path, pipeline::split_to_json(outcome.split, train_cfg.seed));
            manifest.config = train_json(train_cfg);
            manifest.config["mode"] = train_mode;
            manifest.config["shuffle_labels"] = train_shuffle;
            manifest.seeds["train"] = train_cfg.seed;
            manifest.seeds["split"] = train_cfg.seed;
            manifest.inputs = {train_in.string()};
            manifest.outputs = {model_path.string(), history_path.string(), split_path.string()};
            manifest_path = train_out / "manifest.json";
            const auto& h = outcome.result.history;
            out << "iterations " << h.train_loss.size() - 1 << ", stop " << classifier::to_string(h.stop_reason)
                << ", best val loss " << h.val_loss[h.best_iteration] << " at " << h.best_iteration << "\n";
        };
    });

    // eval
    fs::path eval_model;
    fs::path eval_features;
    fs::path eval_split;
    fs::path eval_out = "report.json";
    std::string eval_mode = "pin50";
    std::vector<int> eval_ks = {1, 2, 3};
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a model on feature rows");
    eval_cmd->add_option("--model", eval_model, "Model JSON")->required();
    eval_cmd->add_option("--features", eval_features, "Feature CSV")->required();
    eval_cmd->add_option("--split", eval_split, "Split JSON; evaluates its test rows only");
    eval_cmd->add_option("--out", eval_out, "Report JSON (a .txt table is written alongside)");
    eval_cmd->add_option("--mode", eval_mode, "pin50, digit10 or activity3")
        ->check(CLI::IsMember({"pin50", "digit10", "activity3"}));
    eval_cmd->add_option("--k", eval_ks, "Attempt counts to report")->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    eval_cmd->callback([&] {
        action = [&] {
            const auto model = classifier::model_from_json(read_file(eval_model));
            auto rows = features::from_csv(read_file(eval_features));
            if (!eval_split.empty()) rows = eval::select(rows, pipeline::split_from_json(read_file(eval_split)).test);
            const auto report = eval::evaluate(model, rows, dataset_mode_from_string(eval_mode), eval_ks);
            auto table_path = eval_out;
            table_path.replace_extension(".txt");
            write_file(eval_out, eval::report_to_json(report));
            const auto table = eval::rate_table({{"Rate", &report}});
            write_file(table_path, table);
            manifest.config["mode"] = eval_mode;
            manifest.config["k"] = eval_ks;
            manifest.inputs = {eval_model.string(), eval_features.string()};
            if (!eval_split.empty()) manifest.inputs.push_back(eval_split.string());
            manifest.outputs = {eval_out.string(), table_path.string()};
            manifest_path = manifest_for_file(eval_out);
            out << table;
        };
    });

    // activity
    fs::path activity_trace;
    fs::path activity_out;
    activity::ActivityWindowConfig act_cfg;
    auto* act_cmd = app.add_subcommand("activity", "Detect device events and label activity windows");
    act_cmd->add_option("--trace", activity_trace, "Session file holding the trace")->required();
    act_cmd->add_option("--out", activity_out, "JSON output (stdout when omitted)");
    act_cmd->add_option("--window", act_cfg.window_s, "Window length (s)");
    act_cmd->add_option("--hop", act_cfg.hop_s, "Window hop (s)");
    act_cmd->add_option("--event-threshold", act_cfg.event_var_threshold, "Variance threshold of |accG|");
    act_cmd->add_option("--min-gap", act_cfg.min_event_gap_s, "Merge events closer than this (s)");
    act_cmd->add_option("--sitting-threshold", act_cfg.sitting_energy_threshold, "Energy per sample for sitting");
    act_cmd->callback([&] {
        action = [&] {
            const auto parsed = read_session_file(activity_trace);
            const auto merged = merge_listener_streams(parsed.trace);
            ordered_json j;
            j["events"] = ordered_json::parse(activity::events_to_json(activity::detect_events(merged.trace, act_cfg)));
            j["labels"] = ordered_json::parse(activity::labels_to_json(activity::classify_windows(merged.trace, act_cfg)));
            const std::string text = j.dump(2) + "\n";
            manifest.config = {{"window_s", act_cfg.window_s},
                               {"hop_s", act_cfg.hop_s},
                               {"event_var_threshold", act_cfg.event_var_threshold},
                               {"min_event_gap_s", act_cfg.min_event_gap_s},
                               {"sitting_energy_threshold", act_cfg.sitting_energy_threshold}};
            manifest.inputs = {activity_trace.string()};
            if (activity_out.empty()) {
                out << text;
            } else {
                write_file(activity_out, text);
                manifest.outputs = {activity_out.string()};
                manifest_path = manifest_for_file(activity_out);
            }
        };
    });

    // survey
    std::vector<std::string> survey_groups;
    fs::path survey_out;
    auto* survey_cmd = app.add_subcommand("survey", "Spearman correlation of sensor knowledge vs concern");
    survey_cmd->add_option("--group", survey_groups, "name:knowledge.csv:concern.csv (repeatable)")
        ->required()
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    survey_cmd->add_option("--out", survey_out, "Write the table here as well");
    survey_cmd->callback([&] {
        action = [&] {
            std::vector<eval::SurveyResult> results;
            for (const auto& g : survey_groups) {
                const auto a = g.find(':');
                const auto b = a == std::string::npos ? a : g.find(':', a + 1);
                if (b == std::string::npos) throw ValidationError("--group '" + g + "' must be name:knowledge.csv:concern.csv");
                const fs::path kf = g.substr(a + 1, b - a - 1);
                const fs::path cf = g.substr(b + 1);
                results.push_back(eval::survey_correlation(g.substr(0, a), eval::likert_from_csv(read_file(kf)),
                                                           eval::likert_from_csv(read_file(cf))));
                manifest.inputs.push_back(kf.string());
                manifest.inputs.push_back(cf.string());
            }
            const auto table = eval::survey_table(results);
            out << table;
            if (!survey_out.empty()) {
                write_file(survey_out, table);
                manifest.outputs = {survey_out.string()};
                manifest_path = manifest_for_file(survey_out);
            }
        };
    });

    // serve
    server::ServerConfig serve_cfg;
    serve_cfg.bind_address = env_or("PINLOG_BIND", serve_cfg.bind_address);
    serve_cfg.port = std::atoi(env_or("PINLOG_PORT", std::to_string(serve_cfg.port)).c_str());
    serve_cfg.data_dir = env_or("PINLOG_DATA_DIR", serve_cfg.data_dir.string());
    serve_cfg.allowed_origin = env_or("PINLOG_ALLOWED_ORIGIN", serve_cfg.allowed_origin);
    auto* serve_cmd = app.add_subcommand("serve", "Run the collection service");
    serve_cmd->add_option("--bind", serve_cfg.bind_address, "Bind address (env PINLOG_BIND)");
    serve_cmd->add_option("--port", serve_cfg.port, "Port (env PINLOG_PORT)");
    serve_cmd->add_option("--data-dir", serve_cfg.data_dir, "Session directory (env PINLOG_DATA_DIR)");
    serve_cmd->add_option("--origin", serve_cfg.allowed_origin, "Allowed CORS origin (env PINLOG_ALLOWED_ORIGIN)");
    serve_cmd->callback([&] {
        action = [&] {
            server::SessionStore store(serve_cfg.data_dir);
            server::CollectServer srv(store, serve_cfg);
            manifest.config = {{"bind", serve_cfg.bind_address},
                               {"port", serve_cfg.port},
                               {"data_dir", serve_cfg.data_dir.string()},
                               {"origin", serve_cfg.allowed_origin}};
            manifest.outputs = {serve_cfg.data_dir.string()};
            manifest_path = serve_cfg.data_dir / "manifest.json";
            manifest.command = "serve";
            manifest.args = args;
            manifest.write(manifest_path);
            err << "listening on " << serve_cfg.bind_address << ":" << serve_cfg.port << "\n";
            if (!srv.listen()) throw std::runtime_error("could not listen on port " + std::to_string(serve_cfg.port));
        };
    });

    // pipeline
    pipeline::PipelineOptions popts;
    popts.train.hidden_dim = 64;
    std::string pipeline_mode = "pin50";
    auto* pipe_cmd = app.add_subcommand("pipeline", "synth -> ingest -> featurize -> train -> eval");
    add_synth_options(pipe_cmd, popts.synth);
    add_segmentation_options(pipe_cmd, popts.segmentation);
    pipe_cmd->add_option("--hidden", popts.train.hidden_dim, "Hidden layer size");
    pipe_cmd->add_option("--max-epochs", popts.train.max_epochs, "Maximum SCG iterations");
    pipe_cmd->add_option("--patience", popts.train.val_patience, "Validation failures before stopping");
    pipe_cmd->add_option("--out", popts.out_dir, "Output directory");
    pipe_cmd->add_option("--mode", pipeline_mode, "pin50 or digit10")->check(CLI::IsMember({"pin50", "digit10"}));
    pipe_cmd->add_flag("--shuffle-labels", popts.shuffle_labels, "Permute labels (chance-level control)");
    pipe_cmd->add_flag("--same-user", popts.same_user, "Also train and report per-user classifiers");
    pipe_cmd->callback([&] {
        action = [&] {
            popts.mode = dataset_mode_from_string(pipeline_mode);
            popts.train.seed = popts.synth.seed;
            const auto result = pipeline::run_pipeline(popts);
            manifest.config["synth"] = synth_json(popts.synth);
            manifest.config["segmentation"] = segmentation_json(popts.segmentation);
            manifest.config["train"] = train_json(popts.train);
            manifest.config["mode"] = pipeline_mode;
            manifest.config["shuffle_labels"] = popts.shuffle_labels;
            manifest.config["same_user"] = popts.same_user;
            manifest.seeds = {{"synth", popts.synth.seed}, {"train", popts.train.seed}, {"split", popts.train.seed}};
            for (const auto& p : result.outputs) manifest.outputs.push_back(p.string());
            manifest_path = popts.out_dir / "manifest.json";
            out << "segments " << result.n_segments << ", test " << result.multi_user.n_test << "\n";
            out << read_file(popts.out_dir / "report.txt");
        };
    });

    std::vector<const char*> argv{"pinlog"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForVersion& e) {
        out << e.what() << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }

    try {
        if (action) action();
        if (!manifest_path.empty() && manifest.command.empty()) {
            manifest.command = app.get_subcommands().front()->get_name();
            manifest.args = args;
            manifest.write(manifest_path);
        }
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const server::StoreError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "failure: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

}  // namespace pinlog::cli
