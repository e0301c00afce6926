#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace sfit {

// Area under the ROC curve for binary labels (0/1) via the rank-sum
// identity, ties handled by midranks.
inline double auc(const Eigen::VectorXd& scores, const Eigen::VectorXi& labels) {
    const Eigen::Index n = scores.size();
    if (labels.size() != n) throw std::invalid_argument("score/label length mismatch");
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](Eigen::Index a, Eigen::Index b) { return scores[a] < scores[b]; });

    std::vector<double> rank(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        const double mid = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
        for (std::size_t k = i; k < j; ++k) rank[static_cast<std::size_t>(order[k])] = mid;
        i = j;
    }

    double pos_rank_sum = 0.0;
    Eigen::Index n_pos = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (labels[i] == 1) {
            pos_rank_sum += rank[static_cast<std::size_t>(i)];
            ++n_pos;
        } else if (labels[i] != 0) {
            throw std::invalid_argument("auc needs 0/1 labels");
        }
    }
    const Eigen::Index n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) throw std::invalid_argument("auc needs both classes present");
    const double u = pos_rank_sum - static_cast<double>(n_pos) *
                                        (static_cast<double>(n_pos) + 1.0) / 2.0;
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

// Mean per-class recall under argmax classification.
inline double balanced_accuracy(const Eigen::MatrixXd& prob, const Eigen::VectorXi& labels) {
    if (prob.rows() != labels.size()) throw std::invalid_argument("probability/label mismatch");
    const Eigen::Index C = prob.cols();
    std::vector<double> correct(static_cast<std::size_t>(C), 0.0);
    std::vector<double> total(static_cast<std::size_t>(C), 0.0);
    for (Eigen::Index i = 0; i < prob.rows(); ++i) {
        Eigen::Index pred;
        prob.row(i).maxCoeff(&pred);
        const int c = labels[i];
        if (c < 0 || c >= C) throw std::out_of_range("class label out of range");
        total[static_cast<std::size_t>(c)] += 1.0;
        if (pred == c) correct[static_cast<std::size_t>(c)] += 1.0;
    }
    double acc = 0.0;
    Eigen::Index seen = 0;
    for (Eigen::Index c = 0; c < C; ++c) {
        if (total[static_cast<std::size_t>(c)] == 0.0) continue;
        acc += correct[static_cast<std::size_t>(c)] / total[static_cast<std::size_t>(c)];
        ++seen;
    }
    if (seen == 0) throw std::invalid_argument("no labelled rows");
    return acc / static_cast<double>(seen);
}

}  // namespace sfit
