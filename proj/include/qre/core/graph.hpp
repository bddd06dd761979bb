#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

namespace qre {

using Adjacency = std::vector<std::vector<std::size_t>>;

// Strongly connected components (iterative Tarjan). Returns the component id
// of every vertex; ids are in reverse topological order of the condensation.
inline std::vector<std::size_t> strong_components(const Adjacency& adj, std::size_t* count = nullptr) {
    const std::size_t n = adj.size();
    constexpr std::size_t unset = static_cast<std::size_t>(-1);
    std::vector<std::size_t> index(n, unset), low(n, 0), comp(n, unset);
    std::vector<bool> on_stack(n, false);
    std::vector<std::size_t> stack;
    std::size_t next_index = 0, next_comp = 0;

    struct Frame {
        std::size_t v;
        std::size_t edge;
    };
    std::vector<Frame> call;

    for (std::size_t root = 0; root < n; ++root) {
        if (index[root] != unset) continue;
        call.push_back({root, 0});
        index[root] = low[root] = next_index++;
        stack.push_back(root);
        on_stack[root] = true;
        while (!call.empty()) {
            Frame& f = call.back();
            if (f.edge < adj[f.v].size()) {
                const std::size_t w = adj[f.v][f.edge++];
                if (index[w] == unset) {
                    index[w] = low[w] = next_index++;
                    stack.push_back(w);
                    on_stack[w] = true;
                    call.push_back({w, 0});
                } else if (on_stack[w]) {
                    low[f.v] = std::min(low[f.v], index[w]);
                }
                continue;
            }
            const std::size_t v = f.v;
            call.pop_back();
            if (!call.empty()) low[call.back().v] = std::min(low[call.back().v], low[v]);
            if (low[v] == index[v]) {
                std::size_t w;
                do {
                    w = stack.back();
                    stack.pop_back();
                    on_stack[w] = false;
                    comp[w] = next_comp;
                } while (w != v);
                ++next_comp;
            }
        }
    }
    if (count) *count = next_comp;
    return comp;
}

// Vertices from which some vertex in `targets` is reachable.
inline std::vector<bool> can_reach(const Adjacency& adj, const std::vector<bool>& targets) {
    const std::size_t n = adj.size();
    Adjacency rev(n);
    for (std::size_t v = 0; v < n; ++v)
        for (std::size_t w : adj[v]) rev[w].push_back(v);
    std::vector<bool> seen = targets;
    std::vector<std::size_t> work;
    for (std::size_t v = 0; v < n; ++v)
        if (targets[v]) work.push_back(v);
    while (!work.empty()) {
        const std::size_t w = work.back();
        work.pop_back();
        for (std::size_t v : rev[w]) {
            if (!seen[v]) {
                seen[v] = true;
                work.push_back(v);
            }
        }
    }
    return seen;
}

}  // namespace qre
