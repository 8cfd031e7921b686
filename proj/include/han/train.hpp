#pragma once

#include <string>
#include <vector>

#include "han/corpus.hpp"
#include "han/model.hpp"

namespace han {

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    EvalReport dev;
};

struct TrainResult {
    std::vector<EpochStats> epochs;
    std::string metrics_csv;  // header + one line per epoch; byte-deterministic
    EvalReport best;
    int best_epoch = -1;  // -1 when no epochs ran
};

// Shuffled mini-batch training with the configured optimizer. Evaluates the
// dev split each epoch, keeps the parameters of the best overall-accuracy
// epoch, and restores them into the model afterwards. epochs == 0 only
// evaluates the freshly initialized model.
TrainResult train_model(Model& model, const Dataset& train, const Dataset& dev);

// Dataset selection for a config: load train_data or generate the synthetic
// corpus; dev_data falls back to the training split.
Dataset resolve_train_data(const Config& cfg);
Dataset resolve_dev_data(const Config& cfg, const Dataset& train);

struct SweepRow {
    double lr = 0.0;
    std::string activation;
    double overall_acc = 0.0;
    std::string status;  // "ok" or the failure diagnostic
};

// Independent runs for every lr x {relu, elu}; a failed run is recorded
// (overall_acc 0) and the sweep continues.
std::vector<SweepRow> lr_sweep(const Config& base, const std::vector<double>& lrs);
std::string sweep_to_csv(const std::vector<SweepRow>& rows);
std::vector<double> parse_lr_list(const std::string& comma_separated);

// Per layer and per stream: contextual weights (n x n, rows are query
// positions) and channel gates (n x d), plus the tokens.
std::string attention_dump_json(Model& model, const std::vector<std::string>& tokens);

std::vector<std::string> split_whitespace(const std::string& text);

}  // namespace han
