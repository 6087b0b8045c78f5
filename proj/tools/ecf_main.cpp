// Command-line front end for the forecasting toolkit: synthetic data
// generation, training, prediction, evaluation, the three-model comparison
// and the extraction-layer sweep.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ecf/dataio.hpp"
#include "ecf/metrics.hpp"
#include "ecf/model_io.hpp"
#include "ecf/pipeline.hpp"

namespace {

struct Options {
    std::string data;
    std::string model;
    std::string out;
    std::string kind = "rcnn-svr";
    std::size_t train_rows = 50;
    std::size_t test_rows = 12;
    std::size_t months = 62;
    std::uint64_t seed = 7;
    std::size_t max_epochs = 500;
    double target_mse = 0.0;
    double learning_rate = 0.01;
    double momentum = 0.9;
    std::size_t batch_size = 10;
    double svr_c = 1.0;
    double svr_epsilon = 0.1;
    long long extraction_layer = -1; // -1: the network's default layer
    double noise_sd = 0.05;

    ecf::TrainConfig train_config() const {
        ecf::TrainConfig tc;
        tc.max_epochs = max_epochs;
        tc.target_mse = target_mse;
        tc.learning_rate = learning_rate;
        tc.momentum = momentum;
        tc.batch_size = batch_size;
        tc.seed = seed;
        return tc;
    }

    ecf::SvrHyperparams svr_hyperparams() const {
        ecf::SvrHyperparams hp;
        hp.C = svr_c;
        hp.epsilon = svr_epsilon;
        return hp;
    }

    std::optional<std::size_t> extraction() const {
        if (extraction_layer < 0) return std::nullopt;
        return static_cast<std::size_t>(extraction_layer);
    }
};

using ConfigMap = std::map<std::string, std::string>;

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

ConfigMap read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) ecf::raise(ecf::ErrorCode::ParseError, "cannot open config file '" + path + "'");
    ConfigMap map;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string text = trim(line);
        if (text.empty() || text[0] == '#') continue;
        std::size_t eq = text.find('=');
        if (eq == std::string::npos) {
            ecf::raise(ecf::ErrorCode::ParseError,
                       path + ": line " + std::to_string(line_no) + " is not 'key = value'");
        }
        map[trim(text.substr(0, eq))] = trim(text.substr(eq + 1));
    }
    return map;
}

/// Seeds an option's default from the config file; explicit flags still win.
void apply_config(CLI::Option* opt, const ConfigMap& cfg, const std::string& key) {
    auto it = cfg.find(key);
    if (it != cfg.end()) opt->default_val(it->second);
}

void echo(const std::string& key, const std::string& value) {
    std::cout << "  " << key << " = " << value << "\n";
}

void echo_training(const Options& o) {
    echo("seed", std::to_string(o.seed));
    echo("max-epochs", std::to_string(o.max_epochs));
    echo("target-mse", ecf::format_double(o.target_mse));
    echo("lr", ecf::format_double(o.learning_rate));
    echo("momentum", ecf::format_double(o.momentum));
    echo("batch-size", std::to_string(o.batch_size));
    echo("c", ecf::format_double(o.svr_c));
    echo("epsilon", ecf::format_double(o.svr_epsilon));
    echo("extraction-layer",
         o.extraction_layer < 0 ? "default" : std::to_string(o.extraction_layer));
}

ecf::Dataset head_rows(const ecf::Dataset& d, std::size_t count) {
    if (count > d.rows()) {
        ecf::raise(ecf::ErrorCode::SplitTooLarge, "requested " + std::to_string(count) +
                                                      " training rows, dataset has " +
                                                      std::to_string(d.rows()));
    }
    ecf::Dataset out;
    out.factor_names = d.factor_names;
    out.factors = ecf::Matrix(count, d.factors.cols);
    for (std::size_t r = 0; r < count; ++r)
        for (std::size_t c = 0; c < d.factors.cols; ++c)
            out.factors.at(r, c) = d.factors.at(r, c);
    out.month_labels.assign(d.month_labels.begin(), d.month_labels.begin() + count);
    if (d.has_targets()) out.targets.assign(d.targets.begin(), d.targets.begin() + count);
    return out;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct ModelRow {
    std::string name;
    ecf::EvalReport report;
    double mse_standardized = 0.0;
    std::vector<double> predictions;
};

ModelRow run_one_model(ecf::PipelineKind kind, const ecf::Dataset& train_set,
                       const ecf::Dataset& test_set, const Options& o) {
    auto t0 = std::chrono::steady_clock::now();
    auto extraction = kind == ecf::PipelineKind::RcnnSvr ? o.extraction() : std::nullopt;
    ecf::FittedPipeline p =
        fit_pipeline(kind, train_set, o.train_config(), o.svr_hyperparams(), extraction);
    ModelRow row;
    row.name = ecf::to_string(kind);
    row.predictions = predict_pipeline(p, test_set.factors);
    double elapsed = seconds_since(t0);
    row.report = ecf::evaluate(test_set.targets, row.predictions, elapsed);
    row.mse_standardized = ecf::mse(standardize_targets(p.scaler, test_set.targets),
                                    standardize_targets(p.scaler, row.predictions));
    return row;
}

void print_metric_table(const std::vector<ModelRow>& rows) {
    std::printf("%-22s", "metric");
    for (const auto& r : rows) std::printf(" %14s", r.name.c_str());
    std::printf("\n");
    auto line = [&](const char* label, auto getter) {
        std::printf("%-22s", label);
        for (const auto& r : rows) std::printf(" %14.6g", getter(r));
        std::printf("\n");
    };
    line("MSE", [](const ModelRow& r) { return r.report.mse; });
    line("MSE (standardized)", [](const ModelRow& r) { return r.mse_standardized; });
    line("MAPE (%)", [](const ModelRow& r) { return r.report.mape_percent; });
    line("CV-RMSE (%)", [](const ModelRow& r) { return r.report.cv_rmse_percent; });
    line("CV-RMSE conv (%)", [](const ModelRow& r) { return r.report.cv_rmse_conventional_percent; });
    line("Time (s)", [](const ModelRow& r) { return r.report.elapsed_seconds; });
}

// --- subcommands -------------------------------------------------------------

void run_gen_data(const Options& o) {
    std::cout << "resolved configuration:\n";
    echo("command", "gen-data");
    echo("months", std::to_string(o.months));
    echo("seed", std::to_string(o.seed));
    echo("noise-sd", ecf::format_double(o.noise_sd));
    echo("out", o.out);
    ecf::Dataset d = ecf::generate_synthetic(o.months, o.seed, o.noise_sd);
    ecf::save_csv(d, o.out);
    std::cout << "wrote " << d.rows() << " rows to " << o.out << "\n";
}

void run_train(const Options& o) {
    std::cout << "resolved configuration:\n";
    echo("command", "train");
    echo("data", o.data);
    echo("kind", o.kind);
    echo("train-rows", o.train_rows == 0 ? "all" : std::to_string(o.train_rows));
    echo_training(o);
    echo("out", o.out);

    ecf::PipelineKind kind = ecf::parse_pipeline_kind(o.kind);
    ecf::Dataset d = ecf::load_csv(o.data);
    ecf::Dataset train_set = o.train_rows == 0 ? d : head_rows(d, o.train_rows);

    auto t0 = std::chrono::steady_clock::now();
    auto extraction = kind == ecf::PipelineKind::RcnnSvr ? o.extraction() : std::nullopt;
    ecf::FittedPipeline p =
        fit_pipeline(kind, train_set, o.train_config(), o.svr_hyperparams(), extraction);
    double elapsed = seconds_since(t0);

    ecf::save_model(p, o.out);
    std::string log_path = o.out + ".log.csv";
    {
        std::ofstream log(log_path, std::ios::binary);
        log << "epoch,mse\n";
        for (std::size_t i = 0; i < p.train_report.mse_per_epoch.size(); ++i) {
            log << (i + 1) << ',' << ecf::format_double(p.train_report.mse_per_epoch[i]) << '\n';
        }
    }
    std::cout << "saved model to " << o.out << "\n";
    std::cout << "epoch log: " << log_path << "\n";
    if (!p.train_report.mse_per_epoch.empty()) {
        std::cout << "epochs: " << p.train_report.epochs_run << " ("
                  << ecf::to_string(p.train_report.stop_reason)
                  << "), final training mse (standardized): "
                  << ecf::format_double(p.train_report.mse_per_epoch.back()) << "\n";
    }
    std::printf("training time (s): %.3f\n", elapsed);
}

void run_predict(const Options& o) {
    std::cout << "resolved configuration:\n";
    echo("command", "predict");
    echo("model", o.model);
    echo("data", o.data);
    echo("out", o.out);

    ecf::FittedPipeline p = ecf::load_model(o.model);
    ecf::Dataset d = ecf::load_csv(o.data);
    std::vector<double> predictions = predict_pipeline(p, d.factors);

    std::ofstream out(o.out, std::ios::binary);
    if (!out) ecf::raise(ecf::ErrorCode::ParseError, "cannot write '" + o.out + "'");
    out << "month,predicted_ev\n";
    for (std::size_t r = 0; r < d.rows(); ++r) {
        out << d.month_labels[r] << ',' << ecf::format_double(predictions[r]) << '\n';
    }
    std::cout << "wrote " << predictions.size() << " predictions to " << o.out << "\n";
}

void run_evaluate(const Options& o) {
    std::cout << "resolved configuration:\n";
    echo("command", "evaluate");
    echo("model", o.model);
    echo("data", o.data);
    echo("out", o.out);

    ecf::FittedPipeline p = ecf::load_model(o.model);
    ecf::Dataset d = ecf::load_csv(o.data);
    if (!d.has_targets()) {
        ecf::raise(ecf::ErrorCode::MissingColumn, o.data + ": evaluation needs an 'ev' column");
    }
    auto t0 = std::chrono::steady_clock::now();
    std::vector<double> predictions = predict_pipeline(p, d.factors);
    double elapsed = seconds_since(t0);
    ecf::EvalReport r = ecf::evaluate(d.targets, predictions, elapsed);
    double mse_std = ecf::mse(standardize_targets(p.scaler, d.targets),
                              standardize_targets(p.scaler, predictions));

    std::printf("%-22s %14.6g\n", "MSE", r.mse);
    std::printf("%-22s %14.6g\n", "MSE (standardized)", mse_std);
    std::printf("%-22s %14.6g\n", "MAPE (%)", r.mape_percent);
    std::printf("%-22s %14.6g\n", "CV-RMSE (%)", r.cv_rmse_percent);
    std::printf("%-22s %14.6g\n", "CV-RMSE conv (%)", r.cv_rmse_conventional_percent);
    std::printf("%-22s %14.6g\n", "Time (s)", r.elapsed_seconds);

    std::ofstream out(o.out, std::ios::binary);
    if (!out) ecf::raise(ecf::ErrorCode::ParseError, "cannot write '" + o.out + "'");
    out << "mse,mse_standardized,mape_percent,cv_rmse_percent,cv_rmse_conventional_percent,n,"
           "time_s\n";
    out << ecf::format_double(r.mse) << ',' << ecf::format_double(mse_std) << ','
        << ecf::format_double(r.mape_percent) << ',' << ecf::format_double(r.cv_rmse_percent)
        << ',' << ecf::format_double(r.cv_rmse_conventional_percent) << ',' << r.n << ','
        << ecf::format_double(r.elapsed_seconds) << '\n';
    std::cout << "wrote report to " << o.out << "\n";
}

void run_compare(const Options& o) {
    std::cout << "resolved configuration:\n";
    echo("command", "compare");
    echo("data", o.data);
    echo("train-rows", std::to_string(o.train_rows));
    echo("test-rows", std::to_string(o.test_rows));
    echo_training(o);
    echo("out", o.out);

    ecf::Dataset d = ecf::load_csv(o.data);
    auto [train_set, test_set] = ecf::split(d, {o.train_rows, o.test_rows});

    std::vector<ModelRow> rows;
    for (auto kind :
         {ecf::PipelineKind::RcnnSvr, ecf::PipelineKind::RcnnOnly, ecf::PipelineKind::SvrOnly}) {
        rows.push_back(run_one_model(kind, train_set, test_set, o));
    }
    print_metric_table(rows);

    // deterministic artifacts: wall time stays out of the files
    std::string metrics_path = o.out + "_metrics.csv";
    std::string predictions_path = o.out + "_predictions.csv";
    {
        std::ofstream out(metrics_path, std::ios::binary);
        if (!out) ecf::raise(ecf::ErrorCode::ParseError, "cannot write '" + metrics_path + "'");
        out << "model,mse,mse_standardized,mape_percent,cv_rmse_percent,"
               "cv_rmse_conventional_percent,n\n";
        for (const auto& row : rows) {
            out << row.name << ',' << ecf::format_double(row.report.mse) << ','
                << ecf::format_double(row.mse_standardized) << ','
                << ecf::format_double(row.report.mape_percent) << ','
                << ecf::format_double(row.report.cv_rmse_percent) << ','
                << ecf::format_double(row.report.cv_rmse_conventional_percent) << ','
                << row.report.n << '\n';
        }
    }
    {
        std::ofstream out(predictions_path, std::ios::binary);
        if (!out) ecf::raise(ecf::ErrorCode::ParseError, "cannot write '" + predictions_path + "'");
        out << "month,model,y_true,y_pred\n";
        for (const auto& row : rows) {
            for (std::size_t r = 0; r < test_set.rows(); ++r) {
                out << test_set.month_labels[r] << ',' << row.name << ','
                    << ecf::format_double(test_set.targets[r]) << ','
                    << ecf::format_double(row.predictions[r]) << '\n';
            }
        }
    }
    std::cout << "wrote " << metrics_path << " and " << predictions_path << "\n";
}

void run_layer_sweep(const Options& o) {
    std::cout << "resolved configuration:\n";
    echo("command", "layer-sweep");
    echo("data", o.data);
    echo("train-rows", std::to_string(o.train_rows));
    echo("test-rows", std::to_string(o.test_rows));
    echo_training(o);
    echo("out", o.out);

    ecf::Dataset d = ecf::load_csv(o.data);
    auto entries = ecf::layer_sweep(d, {o.train_rows, o.test_rows}, o.train_config(),
                                    o.svr_hyperparams());

    std::printf("%-12s %-12s %14s\n", "layer_index", "layer_name", "mse");
    for (const auto& e : entries) {
        std::printf("%-12zu %-12s %14.6g\n", e.layer_index, e.layer_name.c_str(), e.test_mse);
    }

    std::ofstream out(o.out, std::ios::binary);
    if (!out) ecf::raise(ecf::ErrorCode::ParseError, "cannot write '" + o.out + "'");
    out << "layer_index,layer_name,mse\n";
    for (const auto& e : entries) {
        out << e.layer_index << ',' << e.layer_name << ',' << ecf::format_double(e.test_mse)
            << '\n';
    }
    std::cout << "wrote " << o.out << "\n";
}

std::string find_config_path(int argc, char** argv) {
    for (int i = 1; i < argc; ++i) {
        std::string arg = argv[i];
        if (arg == "--config" && i + 1 < argc) return argv[i + 1];
        if (arg.rfind("--config=", 0) == 0) return arg.substr(9);
    }
    return "";
}

} // namespace

int main(int argc, char** argv) {
    ConfigMap cfg;
    try {
        std::string config_path = find_config_path(argc, argv);
        if (!config_path.empty()) cfg = read_config_file(config_path);
    } catch (const ecf::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    CLI::App app{"electricity consumption forecasting toolkit"};
    app.require_subcommand(1);

    Options gen_o, train_o, predict_o, eval_o, compare_o, sweep_o;
    gen_o.out = "synthetic.csv";
    train_o.train_rows = 0; // all rows unless asked otherwise
    train_o.out = "model.ecf";
    predict_o.out = "predictions.csv";
    eval_o.out = "evaluation.csv";
    compare_o.out = "compare";
    sweep_o.out = "layer_sweep.csv";

    auto add_config_flag = [&](CLI::App* sub) {
        sub->add_option("--config", "key = value file; flags override file values")
            ->expected(1);
    };
    auto opt = [&](CLI::App* sub, const std::string& flag, auto& target, const char* help) {
        CLI::Option* option = sub->add_option(flag, target, help)->capture_default_str();
        apply_config(option, cfg, flag.substr(2));
        return option;
    };
    auto add_training_options = [&](CLI::App* sub, Options& o) {
        opt(sub, "--seed", o.seed, "random seed for init, batching and dropout");
        opt(sub, "--max-epochs", o.max_epochs, "epoch budget");
        opt(sub, "--target-mse", o.target_mse, "stop once the epoch MSE reaches this");
        opt(sub, "--lr", o.learning_rate, "learning rate");
        opt(sub, "--momentum", o.momentum, "momentum in [0,1)");
        opt(sub, "--batch-size", o.batch_size, "mini-batch size");
        opt(sub, "--c", o.svr_c, "SVR slack penalty");
        opt(sub, "--epsilon", o.svr_epsilon, "SVR tube half-width");
    };

    try {
        auto* gen = app.add_subcommand("gen-data", "write a synthetic dataset CSV");
        opt(gen, "--months", gen_o.months, "number of months to generate");
        opt(gen, "--seed", gen_o.seed, "generator seed");
        opt(gen, "--noise-sd", gen_o.noise_sd, "noise standard deviation on the target");
        opt(gen, "--out", gen_o.out, "output CSV path");
        add_config_flag(gen);
        gen->callback([&] { run_gen_data(gen_o); });

        auto* train = app.add_subcommand("train", "fit a pipeline and save the model file");
        opt(train, "--data", train_o.data, "training CSV")->required();
        opt(train, "--kind", train_o.kind, "pipeline kind")
            ->check(CLI::IsMember({"rcnn", "svr", "rcnn-svr"}));
        opt(train, "--train-rows", train_o.train_rows, "use the first N rows (0 = all)");
        add_training_options(train, train_o);
        opt(train, "--extraction-layer", train_o.extraction_layer,
            "rcnn-svr feature layer index (-1 = dropout layer)");
        opt(train, "--out", train_o.out, "model file path");
        add_config_flag(train);
        train->callback([&] { run_train(train_o); });

        auto* predict = app.add_subcommand("predict", "predict EVs for a factors CSV");
        opt(predict, "--model", predict_o.model, "model file")->required();
        opt(predict, "--data", predict_o.data, "factors CSV (ev column optional)")->required();
        opt(predict, "--out", predict_o.out, "predictions CSV path");
        add_config_flag(predict);
        predict->callback([&] { run_predict(predict_o); });

        auto* evaluate = app.add_subcommand("evaluate", "score a model on labeled data");
        opt(evaluate, "--model", eval_o.model, "model file")->required();
        opt(evaluate, "--data", eval_o.data, "labeled CSV with an ev column")->required();
        opt(evaluate, "--out", eval_o.out, "report CSV path");
        add_config_flag(evaluate);
        evaluate->callback([&] { run_evaluate(eval_o); });

        auto* compare = app.add_subcommand(
            "compare", "train all three pipelines on one split and tabulate the metrics");
        opt(compare, "--data", compare_o.data, "dataset CSV")->required();
        opt(compare, "--train-rows", compare_o.train_rows, "training rows (earliest months)");
        opt(compare, "--test-rows", compare_o.test_rows, "held-out rows after the training block");
        add_training_options(compare, compare_o);
        opt(compare, "--extraction-layer", compare_o.extraction_layer,
            "rcnn-svr feature layer index (-1 = dropout layer)");
        opt(compare, "--out", compare_o.out, "output prefix for _metrics.csv/_predictions.csv");
        add_config_flag(compare);
        compare->callback([&] { run_compare(compare_o); });

        auto* sweep = app.add_subcommand("layer-sweep",
                                         "held-out MSE per extraction layer of the hybrid model");
        opt(sweep, "--data", sweep_o.data, "dataset CSV")->required();
        opt(sweep, "--train-rows", sweep_o.train_rows, "training rows (earliest months)");
        opt(sweep, "--test-rows", sweep_o.test_rows, "held-out rows after the training block");
        add_training_options(sweep, sweep_o);
        opt(sweep, "--out", sweep_o.out, "output CSV path");
        add_config_flag(sweep);
        sweep->callback([&] { run_layer_sweep(sweep_o); });

        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const CLI::Error& e) {
        std::cerr << "error: " << e.get_name() << ": " << e.what() << "\n";
        return 2;
    } catch (const ecf::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
