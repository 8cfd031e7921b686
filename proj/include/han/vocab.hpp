#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace han {

// Token <-> index map with reserved slots: PAD=0, UNK=1.
class Vocab {
public:
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;

    Vocab();

    // Adds the token if unseen; returns its index either way.
    int add(const std::string& token);

    // Index for a known token, UNK for anything else.
    int id(const std::string& token) const;
    bool contains(const std::string& token) const { return to_id_.count(token) > 0; }

    const std::string& token(int id) const { return tokens_.at(id); }
    int size() const { return static_cast<int>(tokens_.size()); }
    const std::vector<std::string>& tokens() const { return tokens_; }

    static Vocab from_tokens(const std::vector<std::string>& tokens);

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> to_id_;
};

}  // namespace han
