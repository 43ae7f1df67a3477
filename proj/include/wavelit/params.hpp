#pragma once

#include <string>
#include <utility>
#include <vector>

#include "wavelit/tensor.hpp"

namespace wavelit {

// Ordered, named registry of learnable tensors. Iteration order is creation
// order, which fixes checkpoint layout and makes training deterministic.
struct ParamStore {
    std::vector<std::pair<std::string, Tensor>> items;

    Tensor add(const std::string& name, Tensor t) {
        t.set_requires_grad(true);
        items.emplace_back(name, t);
        return t;
    }

    std::vector<Tensor> tensors() const {
        std::vector<Tensor> out;
        out.reserve(items.size());
        for (const auto& [_, t] : items) out.push_back(t);
        return out;
    }

    const Tensor* find(const std::string& name) const {
        for (const auto& [n, t] : items)
            if (n == name) return &t;
        return nullptr;
    }

    std::int64_t count() const {
        std::int64_t n = 0;
        for (const auto& [_, t] : items) n += t.size();
        return n;
    }

    void zero_grads() {
        for (auto& [_, t] : items) t.zero_grad();
    }
};

}  // namespace wavelit
