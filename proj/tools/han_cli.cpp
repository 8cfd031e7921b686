#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "han/checkpoint.hpp"
#include "han/config.hpp"
#include "han/errors.hpp"
#include "han/corpus.hpp"
#include "han/model.hpp"
#include "han/train.hpp"

namespace {

void write_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw han::Error("cannot write " + path);
    f << content;
}

int run(int argc, char** argv) {
    CLI::App app{"Higher-order attention network for joint intent detection and slot filling"};
    app.require_subcommand(1);

    std::string config_path, model_path, data_path, input_path, output_path, text, lrs_csv;
    std::string out_path, log_path;

    auto* train_cmd = app.add_subcommand("train", "Train a model and write a checkpoint");
    train_cmd->add_option("--config", config_path, "config file (JSON or key=value)")->required();
    train_cmd->add_option("--out", out_path, "checkpoint output path")->default_val("model.json");
    train_cmd->add_option("--log", log_path, "metrics CSV output path");

    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
    eval_cmd->add_option("--model", model_path, "checkpoint path")->required();
    eval_cmd->add_option("--data", data_path, "CoNLL-style dataset")->required();

    auto* predict_cmd = app.add_subcommand("predict", "Tag a dataset and write predictions");
    predict_cmd->add_option("--model", model_path, "checkpoint path")->required();
    predict_cmd->add_option("--input", input_path, "CoNLL-style input")->required();
    predict_cmd->add_option("--output", output_path, "where to write predictions")->required();

    auto* sweep_cmd = app.add_subcommand("sweep-lr", "Train across learning rates and activations");
    sweep_cmd->add_option("--config", config_path, "base config")->required();
    sweep_cmd->add_option("--lrs", lrs_csv, "comma-separated learning rates")->required();
    sweep_cmd->add_option("--out", out_path, "CSV output path")->required();

    auto* dump_cmd = app.add_subcommand("dump-attention", "Export attention maps for one utterance");
    dump_cmd->add_option("--model", model_path, "checkpoint path")->required();
    dump_cmd->add_option("--text", text, "whitespace-tokenized utterance")->required();
    dump_cmd->add_option("--out", out_path, "JSON output path")->required();

    CLI11_PARSE(app, argc, argv);

    if (train_cmd->parsed()) {
        han::Config cfg = han::load_config(config_path);
        han::Dataset train = han::resolve_train_data(cfg);
        han::Dataset dev = han::resolve_dev_data(cfg, train);
        han::Model model = han::Model::from_dataset(cfg, train);
        han::TrainResult result = han::train_model(model, train, dev);
        han::save_checkpoint(model, out_path);
        if (!log_path.empty()) write_file(log_path, result.metrics_csv);
        std::cout << "best epoch " << result.best_epoch << ": " << result.best.summary() << "\n";
        std::cout << "checkpoint written to " << out_path << "\n";
        return 0;
    }
    if (eval_cmd->parsed()) {
        han::Model model = han::load_checkpoint(model_path);
        han::Dataset data = han::load_conll(data_path);
        std::cout << model.evaluate(data).summary() << "\n";
        return 0;
    }
    if (predict_cmd->parsed()) {
        han::Model model = han::load_checkpoint(model_path);
        han::Dataset data = han::load_conll(input_path);
        han::Dataset out = data;
        for (size_t i = 0; i < data.utterances.size(); ++i) {
            han::PredictedUtterance p = model.predict(data.utterances[i].tokens);
            out.utterances[i].slots = p.slots;
            out.utterances[i].intent = p.intent;
        }
        out.rebuild_inventories();
        han::save_conll(out, output_path);
        std::cout << "predictions for " << data.utterances.size() << " utterances written to " << output_path
                  << "\n";
        return 0;
    }
    if (sweep_cmd->parsed()) {
        han::Config cfg = han::load_config(config_path);
        auto rows = han::lr_sweep(cfg, han::parse_lr_list(lrs_csv));
        write_file(out_path, han::sweep_to_csv(rows));
        std::cout << rows.size() << " sweep rows written to " << out_path << "\n";
        return 0;
    }
    if (dump_cmd->parsed()) {
        han::Model model = han::load_checkpoint(model_path);
        auto tokens = han::split_whitespace(text);
        write_file(out_path, han::attention_dump_json(model, tokens));
        std::cout << "attention maps for " << tokens.size() << " tokens written to " << out_path << "\n";
        return 0;
    }
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
}
