#include "sage/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "sage/errors.hpp"
#include "sage/kernels.hpp"

namespace sage::scoring {

namespace {

// Neumaier running sum: acc holds the sum, comp the lost low-order bits.
inline void compensated_add(double& acc, double& comp, double value) {
    const double t = acc + value;
    if (std::abs(acc) >= std::abs(value)) {
        comp += (acc - t) + value;
    } else {
        comp += (value - t) + acc;
    }
    acc = t;
}

// Goodness order: higher alpha wins, then smaller index.
inline bool better(const std::pair<double, std::size_t>& a,
                   const std::pair<double, std::size_t>& b) {
    if (a.first != b.first) {
        return a.first > b.first;
    }
    return a.second < b.second;
}

}  // namespace

double zero_norm_threshold(std::size_t dim) {
    return 1e-12 * std::sqrt(static_cast<double>(dim));
}

std::vector<double> project(const sketch::FrozenSketch& fs,
                            std::span<const double> g) {
    return num::matvec(fs.matrix(), g);
}

std::vector<double> normalize_or_zero(std::span<const double> z) {
    std::vector<double> out(z.begin(), z.end());
    const double norm = num::vec_norm(z);
    if (norm <= zero_norm_threshold(z.size())) {
        std::fill(out.begin(), out.end(), 0.0);
        return out;
    }
    kernels::scale(1.0 / norm, out.data(), out.size());
    return out;
}

ConsensusAccumulator::ConsensusAccumulator(std::size_t dim)
    : sum_(dim, 0.0), comp_(dim, 0.0) {}

void ConsensusAccumulator::add(std::span<const double> z_hat) {
    if (z_hat.size() != sum_.size()) {
        throw ShapeError("consensus: projection length mismatch");
    }
    for (std::size_t i = 0; i < sum_.size(); ++i) {
        compensated_add(sum_[i], comp_[i], z_hat[i]);
    }
    ++count_;
}

void ConsensusAccumulator::merge(const ConsensusAccumulator& other) {
    if (other.sum_.size() != sum_.size()) {
        throw ShapeError("consensus: merge dimension mismatch");
    }
    for (std::size_t i = 0; i < sum_.size(); ++i) {
        compensated_add(sum_[i], comp_[i], other.sum_[i]);
        compensated_add(sum_[i], comp_[i], other.comp_[i]);
    }
    count_ += other.count_;
}

ConsensusState ConsensusAccumulator::finalize() const {
    ConsensusState st;
    st.count = count_;
    st.sum_unit.resize(sum_.size());
    for (std::size_t i = 0; i < sum_.size(); ++i) {
        st.sum_unit[i] = sum_[i] + comp_[i];
    }
    const double sum_norm = num::vec_norm(st.sum_unit);
    st.mean_norm = (count_ > 0) ? sum_norm / static_cast<double>(count_) : 0.0;
    st.u = normalize_or_zero(st.sum_unit);
    st.degenerate = (num::vec_norm(st.u) == 0.0);
    return st;
}

double agreement(std::span<const double> z_hat, std::span<const double> u) {
    if (z_hat.size() != u.size()) {
        throw ShapeError("agreement: length mismatch");
    }
    const double a = kernels::dot(z_hat.data(), u.data(), z_hat.size());
    return std::clamp(a, -1.0, 1.0);
}

TopKSelector::TopKSelector(std::size_t k) : k_(k) {
    if (k == 0) {
        throw ConfigError("top-k selection requires k >= 1");
    }
    heap_.reserve(k + 1);
}

void TopKSelector::offer(double alpha, std::size_t index) {
    ++offered_;
    if (heap_.size() < k_) {
        heap_.emplace_back(alpha, index);
        std::push_heap(heap_.begin(), heap_.end(), better);
        return;
    }
    if (better({alpha, index}, heap_.front())) {
        std::pop_heap(heap_.begin(), heap_.end(), better);
        heap_.back() = {alpha, index};
        std::push_heap(heap_.begin(), heap_.end(), better);
    }
}

std::vector<std::size_t> TopKSelector::sorted_indices() const {
    std::vector<std::size_t> out;
    out.reserve(heap_.size());
    for (const auto& [alpha, index] : heap_) {
        out.push_back(index);
    }
    std::sort(out.begin(), out.end());
    return out;
}

SelectionResult select_top_k(std::span<const ScoreRecord> scores,
                             std::size_t k) {
    TopKSelector sel(k);
    for (const ScoreRecord& r : scores) {
        sel.offer(r.alpha, r.index);
    }
    SelectionResult res;
    res.indices = sel.sorted_indices();
    res.budget = k;
    res.truncated = (k > scores.size());
    return res;
}

std::map<std::uint32_t, std::size_t> allocate_class_budgets(
    const std::map<std::uint32_t, std::size_t>& class_sizes, std::size_t k) {
    std::size_t total = 0;
    for (const auto& [cls, size] : class_sizes) {
        total += size;
    }
    if (k > total) {
        throw BudgetError("class budget " + std::to_string(k) +
                          " exceeds population " + std::to_string(total));
    }

    std::map<std::uint32_t, std::size_t> quotas;
    for (const auto& [cls, size] : class_sizes) {
        quotas[cls] = 0;
    }

    // Largest-remainder apportionment over the classes that still have
    // headroom; classes that hit their size cap drop out and their
    // surplus is re-apportioned until everything fits.
    std::map<std::uint32_t, std::size_t> active = class_sizes;
    std::size_t remaining = k;
    while (remaining > 0 && !active.empty()) {
        std::size_t active_total = 0;
        for (const auto& [cls, size] : active) {
            active_total += size;
        }
        std::vector<std::pair<double, std::uint32_t>> remainders;
        std::size_t assigned = 0;
        std::map<std::uint32_t, std::size_t> round;
        for (const auto& [cls, size] : active) {
            const double ideal = static_cast<double>(remaining) *
                                 static_cast<double>(size) /
                                 static_cast<double>(active_total);
            const std::size_t base = static_cast<std::size_t>(ideal);
            round[cls] = base;
            assigned += base;
            remainders.emplace_back(ideal - static_cast<double>(base), cls);
        }
        // Extra seats by largest remainder, ties to the lower class id.
        std::sort(remainders.begin(), remainders.end(),
                  [](const auto& a, const auto& b) {
                      if (a.first != b.first) {
                          return a.first > b.first;
                      }
                      return a.second < b.second;
                  });
        std::size_t extra = remaining - assigned;
        for (const auto& [rem, cls] : remainders) {
            if (extra == 0) {
                break;
            }
            ++round[cls];
            --extra;
        }

        bool capped_any = false;
        for (auto it = active.begin(); it != active.end();) {
            const std::uint32_t cls = it->first;
            const std::size_t size = it->second;
            if (round[cls] >= size) {
                quotas[cls] += size;
                remaining -= size;
                it = active.erase(it);
                capped_any = true;
            } else {
                ++it;
            }
        }
        if (!capped_any) {
            for (const auto& [cls, cnt] : round) {
                quotas[cls] += cnt;
            }
            remaining = 0;
        }
    }

    // Guarantee representation: every nonempty class gets one slot when
    // k covers them all. Donors are the richest classes, highest class
    // id first on ties.
    std::size_t nonempty = 0;
    for (const auto& [cls, size] : class_sizes) {
        if (size > 0) {
            ++nonempty;
        }
    }
    if (k >= nonempty) {
        for (const auto& [cls, size] : class_sizes) {
            if (size == 0 || quotas[cls] > 0) {
                continue;
            }
            // Donor: largest quota, ties to the larger class id. With
            // sum(quotas) = k >= nonempty and a zero-quota class present,
            // some donor holds at least 2.
            std::uint32_t donor = 0;
            std::size_t donor_q = 0;
            for (const auto& [dc, dq] : quotas) {
                if (dq > donor_q || (dq == donor_q && dq > 0 && dc > donor)) {
                    donor = dc;
                    donor_q = dq;
                }
            }
            if (donor_q >= 2) {
                --quotas[donor];
                quotas[cls] = 1;
            }
        }
    }

    return quotas;
}

SelectionResult select_class_balanced(
    std::span<const ScoreRecord> scores,
    const std::map<std::uint32_t, std::size_t>& quotas,
    const std::set<std::uint32_t>& degenerate_classes) {
    std::map<std::uint32_t, TopKSelector> selectors;
    for (const auto& [cls, quota] : quotas) {
        if (quota > 0) {
            selectors.emplace(cls, TopKSelector(quota));
        }
    }

    for (const ScoreRecord& r : scores) {
        if (!r.label.has_value()) {
            throw DataError("class-balanced selection: record " +
                            std::to_string(r.index) + " has no label");
        }
        const auto it = quotas.find(*r.label);
        if (it == quotas.end()) {
            throw DataError("class-balanced selection: record " +
                            std::to_string(r.index) +
                            " has label outside the quota map");
        }
        const auto sel = selectors.find(*r.label);
        if (sel != selectors.end()) {
            sel->second.offer(r.alpha, r.index);
        }
    }

    SelectionResult res;
    std::size_t budget = 0;
    for (const auto& [cls, quota] : quotas) {
        budget += quota;
    }
    res.budget = budget;
    res.per_class_quotas = quotas;
    res.degenerate_consensus = !degenerate_classes.empty();
    for (const auto& [cls, sel] : selectors) {
        const auto idx = sel.sorted_indices();
        res.indices.insert(res.indices.end(), idx.begin(), idx.end());
    }
    std::sort(res.indices.begin(), res.indices.end());
    return res;
}

void write_scores_csv(const std::string& path,
                      std::span<const ScoreRecord> records) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot open score CSV for writing: " + path);
    }
    out << "index,label,z_norm,alpha\n";
    char buf[64];
    for (const ScoreRecord& r : records) {
        out << r.index << ',';
        if (r.label.has_value()) {
            out << *r.label;
        }
        std::snprintf(buf, sizeof(buf), ",%.17g,%.17g\n", r.z_norm, r.alpha);
        out << buf;
    }
    if (!out) {
        throw IoError("failed writing score CSV: " + path);
    }
}

}  // namespace sage::scoring
