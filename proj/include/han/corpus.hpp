#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "han/vocab.hpp"

namespace han {

// One training/eval example: tokens with aligned BIO slot labels plus an
// utterance-level intent.
struct Utterance {
    std::vector<std::string> tokens;
    std::vector<std::string> slots;
    std::string intent;
};

struct Dataset {
    std::vector<Utterance> utterances;
    Vocab vocab;
    std::vector<std::string> slot_labels;    // inventory, "O" first
    std::vector<std::string> intent_labels;  // inventory

    int slot_id(const std::string& label) const;
    int intent_id(const std::string& label) const;
    size_t size() const { return utterances.size(); }

    // Rebuilds vocab + label inventories from the utterances.
    void rebuild_inventories();
};

// Checks |tokens| == |slots| and that every slot label is O / B-x / I-x.
void validate_utterance(const Utterance& u);

// Checks BIO well-formedness: no I-x without a preceding B-x or I-x of the
// same type. Parsing does NOT require this (conlleval-style recovery applies
// at span extraction), but the synthetic generator guarantees it.
bool bio_well_formed(const std::vector<std::string>& slots);

// File grammar (bit-exact, UTF-8): per utterance, one "token\tslot" line per
// token, then "#intent=<label>", then a blank line.
Dataset load_conll(const std::string& path);
Dataset parse_conll(const std::string& text, const std::string& origin);
std::string to_conll(const Dataset& ds);
void save_conll(const Dataset& ds, const std::string& path);

// Template-generated corpus in which the intent is a deterministic function
// of a keyword verb and every slot-value token maps to a fixed BIO label, so
// a model can memorize it exactly. Reproducible given the seed.
Dataset gen_synthetic(uint64_t seed, int n_utts, int n_intents, int n_slot_types, int max_len);

// Exact-match span as (start, end_inclusive, type).
struct Span {
    int start;
    int end;
    std::string type;
    bool operator==(const Span& o) const { return start == o.start && end == o.end && type == o.type; }
};

// conlleval convention: B-x opens a span; I-x continues a span of the same
// type and otherwise opens a new one; O closes.
std::vector<Span> extract_spans(const std::vector<std::string>& slots);

struct PredictedUtterance {
    std::vector<std::string> slots;
    std::string intent;
};

struct EvalReport {
    double slot_f1 = 0.0;
    double intent_acc = 0.0;
    double overall_acc = 0.0;
    long tp = 0, fp = 0, fn = 0;

    std::string summary() const;
};

double slot_f1(const std::vector<Utterance>& gold, const std::vector<PredictedUtterance>& pred,
               long* tp = nullptr, long* fp = nullptr, long* fn = nullptr);
double intent_acc(const std::vector<Utterance>& gold, const std::vector<PredictedUtterance>& pred);
double overall_acc(const std::vector<Utterance>& gold, const std::vector<PredictedUtterance>& pred);
EvalReport evaluate_predictions(const std::vector<Utterance>& gold, const std::vector<PredictedUtterance>& pred);

}  // namespace han
