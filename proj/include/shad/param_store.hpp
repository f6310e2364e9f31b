#pragma once

// Named parameter arrays partitioned into frozen / trainable groups, with
// per-entry gradient slots. Insertion order is preserved (checkpoints and
// hashes depend on it).

#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "shad/graph.hpp"
#include "shad/matrix.hpp"

namespace shad {

enum class Stage { pretrain, adapter_train, tta };

const char* stage_name(Stage s);

class ParamStore {
public:
    Param& add(const std::string& name, Matrix value, bool trainable = true);
    Param& get(const std::string& name);
    const Param& get(const std::string& name) const;
    bool has(const std::string& name) const;

    const std::vector<std::string>& names() const { return names_; }
    size_t size() const { return names_.size(); }

    void zero_grads();
    void set_all_trainable(bool trainable);
    void set_trainable(const std::string& name, bool trainable);

    std::vector<std::string> trainable_names() const;
    long long num_values() const;

    // FNV-1a over values of entries accepted by the filter (all when empty).
    unsigned long long hash(const std::function<bool(const std::string&)>& filter = {}) const;

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, size_t> index_;
    std::deque<Param> params_;
};

} // namespace shad
