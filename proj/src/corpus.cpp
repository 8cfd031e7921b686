#include "han/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "han/errors.hpp"
#include "han/rng.hpp"

namespace han {

namespace {

bool is_bio_label(const std::string& s) {
    if (s == "O") return true;
    if (s.size() > 2 && (s[0] == 'B' || s[0] == 'I') && s[1] == '-') return true;
    return false;
}

}  // namespace

int Dataset::slot_id(const std::string& label) const {
    for (size_t i = 0; i < slot_labels.size(); ++i) {
        if (slot_labels[i] == label) return static_cast<int>(i);
    }
    throw Error("unknown slot label: " + label);
}

int Dataset::intent_id(const std::string& label) const {
    for (size_t i = 0; i < intent_labels.size(); ++i) {
        if (intent_labels[i] == label) return static_cast<int>(i);
    }
    throw Error("unknown intent label: " + label);
}

void Dataset::rebuild_inventories() {
    vocab = Vocab();
    slot_labels.clear();
    slot_labels.push_back("O");
    intent_labels.clear();
    for (const auto& u : utterances) {
        for (const auto& t : u.tokens) vocab.add(t);
        for (const auto& s : u.slots) {
            if (std::find(slot_labels.begin(), slot_labels.end(), s) == slot_labels.end()) {
                slot_labels.push_back(s);
            }
        }
        if (std::find(intent_labels.begin(), intent_labels.end(), u.intent) == intent_labels.end()) {
            intent_labels.push_back(u.intent);
        }
    }
}

void validate_utterance(const Utterance& u) {
    if (u.tokens.size() != u.slots.size()) {
        throw ParseError("utterance has " + std::to_string(u.tokens.size()) + " tokens but " +
                         std::to_string(u.slots.size()) + " slot labels");
    }
    for (const auto& s : u.slots) {
        if (!is_bio_label(s)) throw ParseError("bad BIO label '" + s + "'");
    }
    if (u.intent.empty()) throw ParseError("utterance has empty intent");
}

bool bio_well_formed(const std::vector<std::string>& slots) {
    std::string prev = "O";
    for (const auto& s : slots) {
        if (!is_bio_label(s)) return false;
        if (s[0] == 'I') {
            std::string type = s.substr(2);
            bool ok = prev != "O" && prev.substr(2) == type;
            if (!ok) return false;
        }
        prev = s;
    }
    return true;
}

Dataset parse_conll(const std::string& text, const std::string& origin) {
    Dataset ds;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    Utterance cur;
    bool has_intent = false;

    auto flush = [&](int at_line) {
        if (cur.tokens.empty() && !has_intent) return;
        if (!has_intent) {
            throw ParseError(origin + ":" + std::to_string(at_line) + ": utterance block missing '#intent=' line");
        }
        if (cur.tokens.empty()) {
            throw ParseError(origin + ":" + std::to_string(at_line) + ": utterance block has no tokens");
        }
        validate_utterance(cur);
        ds.utterances.push_back(std::move(cur));
        cur = Utterance{};
        has_intent = false;
    };

    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) {
            flush(lineno);
            continue;
        }
        if (line.rfind("#intent=", 0) == 0) {
            if (has_intent) {
                throw ParseError(origin + ":" + std::to_string(lineno) + ": duplicate '#intent=' line");
            }
            cur.intent = line.substr(8);
            if (cur.intent.empty()) {
                throw ParseError(origin + ":" + std::to_string(lineno) + ": empty intent label");
            }
            has_intent = true;
            continue;
        }
        if (has_intent) {
            throw ParseError(origin + ":" + std::to_string(lineno) + ": token line after '#intent=' line");
        }
        size_t tab = line.find('\t');
        if (tab == std::string::npos || tab == 0 || tab + 1 >= line.size()) {
            throw ParseError(origin + ":" + std::to_string(lineno) + ": expected 'token<TAB>slot', got '" + line +
                             "'");
        }
        std::string token = line.substr(0, tab);
        std::string slot = line.substr(tab + 1);
        if (!is_bio_label(slot)) {
            throw ParseError(origin + ":" + std::to_string(lineno) + ": bad BIO label '" + slot + "'");
        }
        cur.tokens.push_back(std::move(token));
        cur.slots.push_back(std::move(slot));
    }
    flush(lineno + 1);
    ds.rebuild_inventories();
    return ds;
}

Dataset load_conll(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ParseError("cannot open " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    return parse_conll(buf.str(), path);
}

std::string to_conll(const Dataset& ds) {
    std::string out;
    for (const auto& u : ds.utterances) {
        for (size_t i = 0; i < u.tokens.size(); ++i) {
            out += u.tokens[i];
            out += '\t';
            out += u.slots[i];
            out += '\n';
        }
        out += "#intent=" + u.intent + "\n\n";
    }
    return out;
}

void save_conll(const Dataset& ds, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write " + path);
    f << to_conll(ds);
}

namespace {

const char* kVerbs[] = {"play", "book", "find", "order", "show", "call", "open", "send"};
const char* kTypes[] = {"song", "city", "date", "food", "team", "color", "artist", "device"};
const char* kFillers[] = {"please", "would", "you", "like", "to", "the", "a", "for", "me", "now"};

std::string verb_for(int i) {
    if (i < 8) return kVerbs[i];
    return "verb" + std::to_string(i);
}

std::string intent_for(int i) {
    std::string v = verb_for(i);
    for (auto& c : v) c = static_cast<char>(std::toupper(c));
    return v;
}

std::string type_for(int i) {
    if (i < 8) return kTypes[i];
    return "kind" + std::to_string(i);
}

}  // namespace

Dataset gen_synthetic(uint64_t seed, int n_utts, int n_intents, int n_slot_types, int max_len) {
    if (n_utts < 1 || n_intents < 1 || n_slot_types < 1 || max_len < 1) {
        throw ConfigError("gen_synthetic: all counts must be >= 1");
    }
    Rng rng(seed);
    Dataset ds;
    ds.utterances.reserve(n_utts);

    auto filler = [&]() { return std::string(kFillers[rng.uniform_int(0, 9)]); };

    for (int u = 0; u < n_utts; ++u) {
        Utterance ut;
        // Cycle intents (and, below, slot types) through the first
        // utterances so every label is guaranteed to appear.
        int intent_idx = u < n_intents ? u : rng.uniform_int(0, n_intents - 1);
        ut.intent = intent_for(intent_idx);

        int budget = max_len;
        auto push = [&](const std::string& tok, const std::string& slot) {
            ut.tokens.push_back(tok);
            ut.slots.push_back(slot);
            --budget;
        };
        auto push_span = [&](int type_idx, int len) {
            std::string type = type_for(type_idx);
            push(type + "_h" + std::to_string(rng.uniform_int(0, 2)), "B-" + type);
            for (int k = 1; k < len; ++k) {
                push(type + "_t" + std::to_string(rng.uniform_int(0, 2)), "I-" + type);
            }
        };

        if (budget >= 5 && rng.uniform() < 0.5) push(filler(), "O");
        push(verb_for(intent_idx), "O");
        if (budget >= 4 && rng.uniform() < 0.6) push(filler(), "O");
        if (budget >= 1) {
            int type_idx = u < n_slot_types ? u % n_slot_types : rng.uniform_int(0, n_slot_types - 1);
            push_span(type_idx, rng.uniform_int(1, std::min(3, budget)));
        }
        if (budget >= 3 && rng.uniform() < 0.4) {
            push(filler(), "O");
            push_span(rng.uniform_int(0, n_slot_types - 1), rng.uniform_int(1, std::min(2, budget)));
        }
        if (budget >= 1 && rng.uniform() < 0.3) push(filler(), "O");

        validate_utterance(ut);
        ds.utterances.push_back(std::move(ut));
    }
    ds.rebuild_inventories();
    return ds;
}

std::vector<Span> extract_spans(const std::vector<std::string>& slots) {
    std::vector<Span> spans;
    int open_start = -1;
    std::string open_type;
    auto close = [&](int end) {
        if (open_start >= 0) spans.push_back(Span{open_start, end, open_type});
        open_start = -1;
        open_type.clear();
    };
    for (int i = 0; i < static_cast<int>(slots.size()); ++i) {
        const std::string& lab = slots[i];
        if (!is_bio_label(lab)) throw Error("extract_spans: bad BIO label '" + lab + "'");
        if (lab == "O") {
            close(i - 1);
        } else if (lab[0] == 'B') {
            close(i - 1);
            open_start = i;
            open_type = lab.substr(2);
        } else {  // I-
            std::string type = lab.substr(2);
            if (open_start >= 0 && open_type == type) continue;
            close(i - 1);  // mismatched I- opens a fresh span (conlleval recovery)
            open_start = i;
            open_type = type;
        }
    }
    close(static_cast<int>(slots.size()) - 1);
    return spans;
}

namespace {

void check_aligned(const std::vector<Utterance>& gold, const std::vector<PredictedUtterance>& pred) {
    if (gold.size() != pred.size()) {
        throw ShapeError("metrics: " + std::to_string(gold.size()) + " gold vs " + std::to_string(pred.size()) +
                         " predicted utterances");
    }
    for (size_t i = 0; i < gold.size(); ++i) {
        if (gold[i].slots.size() != pred[i].slots.size()) {
            throw ShapeError("metrics: utterance " + std::to_string(i) + " length mismatch");
        }
    }
}

}  // namespace

double slot_f1(const std::vector<Utterance>& gold, const std::vector<PredictedUtterance>& pred, long* tp_out,
               long* fp_out, long* fn_out) {
    check_aligned(gold, pred);
    long tp = 0, fp = 0, fn = 0;
    for (size_t i = 0; i < gold.size(); ++i) {
        auto gs = extract_spans(gold[i].slots);
        auto ps = extract_spans(pred[i].slots);
        long matched = 0;
        for (const auto& p : ps) {
            if (std::find(gs.begin(), gs.end(), p) != gs.end()) ++matched;
        }
        tp += matched;
        fp += static_cast<long>(ps.size()) - matched;
        fn += static_cast<long>(gs.size()) - matched;
    }
    if (tp_out) *tp_out = tp;
    if (fp_out) *fp_out = fp;
    if (fn_out) *fn_out = fn;
    double p = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
    double r = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
    return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

double intent_acc(const std::vector<Utterance>& gold, const std::vector<PredictedUtterance>& pred) {
    check_aligned(gold, pred);
    if (gold.empty()) return 1.0;
    long ok = 0;
    for (size_t i = 0; i < gold.size(); ++i) {
        if (gold[i].intent == pred[i].intent) ++ok;
    }
    return static_cast<double>(ok) / gold.size();
}

double overall_acc(const std::vector<Utterance>& gold, const std::vector<PredictedUtterance>& pred) {
    check_aligned(gold, pred);
    if (gold.empty()) return 1.0;
    long ok = 0;
    for (size_t i = 0; i < gold.size(); ++i) {
        if (gold[i].intent == pred[i].intent && gold[i].slots == pred[i].slots) ++ok;
    }
    return static_cast<double>(ok) / gold.size();
}

EvalReport evaluate_predictions(const std::vector<Utterance>& gold, const std::vector<PredictedUtterance>& pred) {
    EvalReport r;
    r.slot_f1 = slot_f1(gold, pred, &r.tp, &r.fp, &r.fn);
    r.intent_acc = intent_acc(gold, pred);
    r.overall_acc = overall_acc(gold, pred);
    return r;
}

std::string EvalReport::summary() const {
    char buf[160];
    std::snprintf(buf, sizeof buf, "slot_f1=%.4f intent_acc=%.4f overall_acc=%.4f (tp=%ld fp=%ld fn=%ld)", slot_f1,
                  intent_acc, overall_acc, tp, fp, fn);
    return buf;
}

}  // namespace han
