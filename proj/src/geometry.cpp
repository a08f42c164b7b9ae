#include "triplenc/geometry.hpp"

#include <cmath>
#include <string>

namespace triplenc {

double dot(std::span<const float> u, std::span<const float> v) {
    if (u.size() != v.size()) {
        throw DimMismatch(u.size(), v.size());
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        acc += static_cast<double>(u[i]) * static_cast<double>(v[i]);
    }
    return acc;
}

double norm(std::span<const float> u) { return std::sqrt(dot(u, u)); }

double cosine(std::span<const float> u, std::span<const float> v) {
    if (u.size() != v.size()) {
        throw DimMismatch(u.size(), v.size());
    }
    const double nu = norm(u);
    const double nv = norm(v);
    if (nu == 0.0) {
        throw ZeroNorm("left operand");
    }
    if (nv == 0.0) {
        throw ZeroNorm("right operand");
    }
    return dot(u, v) / (nu * nv);
}

Vector mean_pool(std::span<const float> u, std::span<const float> v) {
    if (u.size() != v.size()) {
        throw DimMismatch(u.size(), v.size());
    }
    Vector out(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        out[i] = (u[i] + v[i]) * 0.5F;
    }
    return out;
}

void require_finite(std::span<const float> values, const char* what) {
    for (float x : values) {
        if (!std::isfinite(x)) {
            throw NonFinite(std::string("non-finite value in ") + what);
        }
    }
}

std::vector<double> row_norms(const Matrix& m) {
    std::vector<double> out(m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        out[r] = norm(m.row(r));
    }
    return out;
}

ScoreMatrix batch_pair_candidate_scores(const Matrix& pairs, const Matrix& candidates) {
    const auto norms = row_norms(candidates);
    return batch_pair_candidate_scores(pairs, candidates, norms);
}

ScoreMatrix batch_pair_candidate_scores(const Matrix& pairs, const Matrix& candidates,
                                        std::span<const double> candidate_norms) {
    if (pairs.empty() || candidates.empty()) {
        return ScoreMatrix(pairs.rows(), candidates.rows());
    }
    if (pairs.cols() != candidates.cols()) {
        throw DimMismatch(candidates.cols(), pairs.cols());
    }
    if (candidate_norms.size() != candidates.rows()) {
        throw DimMismatch(candidates.rows(), candidate_norms.size());
    }
    for (std::size_t c = 0; c < candidates.rows(); ++c) {
        if (candidate_norms[c] == 0.0) {
            throw ZeroNorm("candidate", c);
        }
    }
    ScoreMatrix out(pairs.rows(), candidates.rows());
    for (std::size_t p = 0; p < pairs.rows(); ++p) {
        const auto pr = pairs.row(p);
        const double np = norm(pr);
        if (np == 0.0) {
            throw ZeroNorm("pair", p);
        }
        for (std::size_t c = 0; c < candidates.rows(); ++c) {
            out(p, c) = dot(pr, candidates.row(c)) / (np * candidate_norms[c]);
        }
    }
    return out;
}

}  // namespace triplenc
