#include "shad/param_store.hpp"

#include <stdexcept>

namespace shad {

const char* stage_name(Stage s) {
    switch (s) {
    case Stage::pretrain: return "pretrain";
    case Stage::adapter_train: return "adapter_train";
    case Stage::tta: return "tta";
    }
    return "?";
}

Param& ParamStore::add(const std::string& name, Matrix value, bool trainable) {
    if (index_.count(name)) throw std::invalid_argument("ParamStore: duplicate entry '" + name + "'");
    index_[name] = names_.size();
    names_.push_back(name);
    params_.emplace_back(std::move(value), trainable);
    return params_.back();
}

Param& ParamStore::get(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("ParamStore: no entry '" + name + "'");
    return params_[it->second];
}

const Param& ParamStore::get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("ParamStore: no entry '" + name + "'");
    return params_[it->second];
}

bool ParamStore::has(const std::string& name) const { return index_.count(name) > 0; }

void ParamStore::zero_grads() {
    for (auto& p : params_) p.zero_grad();
}

void ParamStore::set_all_trainable(bool trainable) {
    for (auto& p : params_) p.trainable = trainable;
}

void ParamStore::set_trainable(const std::string& name, bool trainable) {
    get(name).trainable = trainable;
}

std::vector<std::string> ParamStore::trainable_names() const {
    std::vector<std::string> out;
    for (size_t i = 0; i < names_.size(); ++i)
        if (params_[i].trainable) out.push_back(names_[i]);
    return out;
}

long long ParamStore::num_values() const {
    long long n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
}

unsigned long long ParamStore::hash(const std::function<bool(const std::string&)>& filter) const {
    unsigned long long h = 1469598103934665603ull;
    for (size_t i = 0; i < names_.size(); ++i) {
        if (filter && !filter(names_[i])) continue;
        h = hash_bytes(names_[i].data(), names_[i].size(), h);
        h = hash_matrix(params_[i].value, h);
    }
    return h;
}

} // namespace shad
