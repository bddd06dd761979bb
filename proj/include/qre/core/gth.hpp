#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "qre/core/error.hpp"
#include "qre/core/graph.hpp"
#include "qre/core/matrix.hpp"

namespace qre {

// Grassmann-Taksar-Heyman elimination for the stationary vector of an
// irreducible generator. Only off-diagonal entries are read; the pivot is
// the sum of rates to remaining states, so no subtraction ever occurs.
inline std::vector<double> gth_stationary(const Matrix& generator) {
    const std::size_t n = generator.rows();
    if (n == 0) return {};
    Matrix p = generator;
    for (std::size_t i = 0; i < n; ++i) p(i, i) = 0.0;

    for (std::size_t k = n - 1; k >= 1; --k) {
        double s = 0.0;
        for (std::size_t j = 0; j < k; ++j) s += p(k, j);
        if (!(s > 0.0)) {
            throw SingularSolve("gth_stationary: state " + std::to_string(k) +
                                " has no exit to the remaining states");
        }
        for (std::size_t i = 0; i < k; ++i) p(i, k) /= s;
        for (std::size_t i = 0; i < k; ++i) {
            const double pik = p(i, k);
            if (pik == 0.0) continue;
            for (std::size_t j = 0; j < k; ++j) {
                if (j != i) p(i, j) += pik * p(k, j);
            }
        }
    }

    std::vector<double> pi(n, 0.0);
    pi[0] = 1.0;
    double total = 1.0;
    for (std::size_t j = 1; j < n; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < j; ++i) acc += pi[i] * p(i, j);
        pi[j] = acc;
        total += acc;
    }
    for (double& x : pi) x /= total;
    return pi;
}

inline Adjacency rate_graph(const Matrix& generator) {
    Adjacency adj(generator.rows());
    for (std::size_t i = 0; i < generator.rows(); ++i)
        for (std::size_t j = 0; j < generator.cols(); ++j)
            if (i != j && generator(i, j) > 0.0) adj[i].push_back(j);
    return adj;
}

// Closed communicating classes of a finite generator, each as a sorted list
// of state indices.
inline std::vector<std::vector<std::size_t>> closed_classes(const Matrix& generator) {
    const Adjacency adj = rate_graph(generator);
    std::size_t count = 0;
    const auto comp = strong_components(adj, &count);
    std::vector<bool> closed(count, true);
    for (std::size_t v = 0; v < adj.size(); ++v)
        for (std::size_t w : adj[v])
            if (comp[w] != comp[v]) closed[comp[v]] = false;
    std::vector<std::vector<std::size_t>> out;
    std::vector<std::size_t> slot(count, static_cast<std::size_t>(-1));
    for (std::size_t v = 0; v < adj.size(); ++v) {
        const std::size_t c = comp[v];
        if (!closed[c]) continue;
        if (slot[c] == static_cast<std::size_t>(-1)) {
            slot[c] = out.size();
            out.emplace_back();
        }
        out[slot[c]].push_back(v);
    }
    return out;
}

// The extreme stationary probability vectors: one per closed class,
// supported on that class.
inline std::vector<std::vector<double>> extreme_stationary_vectors(const Matrix& generator) {
    std::vector<std::vector<double>> out;
    for (const auto& cls : closed_classes(generator)) {
        Matrix sub(cls.size(), cls.size());
        for (std::size_t a = 0; a < cls.size(); ++a)
            for (std::size_t b = 0; b < cls.size(); ++b) sub(a, b) = generator(cls[a], cls[b]);
        const auto local = gth_stationary(sub);
        std::vector<double> full(generator.rows(), 0.0);
        for (std::size_t a = 0; a < cls.size(); ++a) full[cls[a]] = local[a];
        out.push_back(std::move(full));
    }
    return out;
}

}  // namespace qre
