#include "han/vocab.hpp"

namespace han {

Vocab::Vocab() {
    add("<pad>");
    add("<unk>");
}

int Vocab::add(const std::string& token) {
    auto it = to_id_.find(token);
    if (it != to_id_.end()) return it->second;
    int id = static_cast<int>(tokens_.size());
    tokens_.push_back(token);
    to_id_.emplace(token, id);
    return id;
}

int Vocab::id(const std::string& token) const {
    auto it = to_id_.find(token);
    return it == to_id_.end() ? kUnk : it->second;
}

Vocab Vocab::from_tokens(const std::vector<std::string>& tokens) {
    Vocab v;
    for (const auto& t : tokens) v.add(t);
    return v;
}

}  // namespace han
