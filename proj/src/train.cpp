#include "han/train.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>

#include <json.hpp>

#include "han/errors.hpp"
#include "han/optimizer.hpp"
#include "han/rng.hpp"

namespace han {

namespace {

std::string csv_line(int epoch, double loss, const EvalReport& r) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%d,%.9f,%.6f,%.6f,%.6f\n", epoch, loss, r.slot_f1, r.intent_acc, r.overall_acc);
    return buf;
}

}  // namespace

TrainResult train_model(Model& model, const Dataset& train, const Dataset& dev) {
    const Config& cfg = model.config();
    if (train.utterances.empty()) throw ConfigError("train: empty training set");
    // Fail fast on inventory mismatches instead of mid-epoch.
    for (const auto& u : train.utterances) {
        model.gold_intent_id(u);
        model.gold_slot_ids(u);
    }

    Optimizer opt(Optimizer::kind_from_string(cfg.optimizer), cfg.lr);
    Rng order_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

    TrainResult result;
    result.metrics_csv = "epoch,train_loss,dev_slot_f1,dev_intent_acc,dev_overall_acc\n";

    std::map<std::string, Matrix> best_values;
    auto snapshot = [&]() {
        best_values.clear();
        for (const auto& [name, e] : model.params().entries()) best_values.emplace(name, e.value);
    };

    if (cfg.epochs == 0) {
        result.best = model.evaluate(dev);
        result.best_epoch = -1;
        return result;
    }

    std::vector<size_t> order(train.utterances.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        shuffle(order, order_rng);
        double loss_sum = 0.0;
        for (size_t at = 0; at < order.size(); at += cfg.batch_size) {
            size_t end = std::min(at + cfg.batch_size, order.size());
            model.params().zero_grads();
            for (size_t k = at; k < end; ++k) {
                loss_sum += model.accumulate_gradients(train.utterances[order[k]]);
            }
            model.params().scale_grads(1.0 / static_cast<double>(end - at));
            if (cfg.grad_clip > 0.0) clip_gradients(model.params(), cfg.grad_clip);
            opt.step(model.params());
        }
        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = loss_sum / static_cast<double>(order.size());
        stats.dev = model.evaluate(dev);
        result.metrics_csv += csv_line(epoch, stats.train_loss, stats.dev);
        if (result.best_epoch < 0 || stats.dev.overall_acc > result.best.overall_acc) {
            result.best = stats.dev;
            result.best_epoch = epoch;
            snapshot();
        }
        result.epochs.push_back(std::move(stats));
    }

    for (auto& [name, value] : best_values) model.params().value(name) = value;
    return result;
}

Dataset resolve_train_data(const Config& cfg) {
    if (!cfg.train_data.empty()) return load_conll(cfg.train_data);
    return gen_synthetic(cfg.synth_seed, cfg.synth_utts, cfg.synth_intents, cfg.synth_slot_types, cfg.synth_max_len);
}

Dataset resolve_dev_data(const Config& cfg, const Dataset& train) {
    if (!cfg.dev_data.empty()) return load_conll(cfg.dev_data);
    return train;
}

std::vector<SweepRow> lr_sweep(const Config& base, const std::vector<double>& lrs) {
    if (lrs.empty()) throw ConfigError("lr_sweep: empty lr list");
    std::vector<SweepRow> rows;
    for (double lr : lrs) {
        for (const auto* act : {"relu", "elu"}) {
            SweepRow row;
            row.lr = lr;
            row.activation = act;
            try {
                Config cfg = base;
                cfg.lr = lr;
                cfg.activation = act;
                cfg.validate();
                Dataset train = resolve_train_data(cfg);
                Dataset dev = resolve_dev_data(cfg, train);
                Model model = Model::from_dataset(cfg, train);
                TrainResult r = train_model(model, train, dev);
                row.overall_acc = r.best.overall_acc;
                row.status = "ok";
            } catch (const std::exception& e) {
                row.overall_acc = 0.0;
                std::string what = e.what();
                for (auto& c : what) {
                    if (c == '\n' || c == ',') c = ' ';
                }
                row.status = "error: " + what;
            }
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
    std::string out = "lr,activation,overall_acc,status\n";
    for (const auto& r : rows) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "%g,%s,%.6f,", r.lr, r.activation.c_str(), r.overall_acc);
        out += buf;
        out += r.status;
        out += "\n";
    }
    return out;
}

std::vector<double> parse_lr_list(const std::string& comma_separated) {
    std::vector<double> lrs;
    std::stringstream ss(comma_separated);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        double v = 0.0;
        size_t pos = 0;
        try {
            v = std::stod(item, &pos);
        } catch (const std::exception&) {
            throw ConfigError("bad learning rate '" + item + "'");
        }
        if (pos != item.size() || v <= 0.0) throw ConfigError("bad learning rate '" + item + "'");
        lrs.push_back(v);
    }
    if (lrs.empty()) throw ConfigError("no learning rates given");
    return lrs;
}

namespace {

nlohmann::json matrix_to_json(const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (int j = 0; j < m.cols(); ++j) row.push_back(m.at(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

std::string attention_dump_json(Model& model, const std::vector<std::string>& tokens) {
    if (tokens.empty()) throw ShapeError("attention dump: empty utterance");
    ModelTrace trace = model.attention_trace(model.token_ids(tokens));
    nlohmann::json j;
    j["tokens"] = tokens;
    j["layers"] = nlohmann::json::array();
    for (size_t l = 0; l < trace.layers.size(); ++l) {
        nlohmann::json layer;
        layer["layer"] = l;
        layer["streams"] = {
            {"intent",
             {{"beta_s", matrix_to_json(trace.layers[l].intent.beta_s)},
              {"beta_c", matrix_to_json(trace.layers[l].intent.beta_c)}}},
            {"slot",
             {{"beta_s", matrix_to_json(trace.layers[l].slot.beta_s)},
              {"beta_c", matrix_to_json(trace.layers[l].slot.beta_c)}}},
        };
        j["layers"].push_back(std::move(layer));
    }
    return j.dump(2);
}

std::vector<std::string> split_whitespace(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream ss(text);
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
}

}  // namespace han
