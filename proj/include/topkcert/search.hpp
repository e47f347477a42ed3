#pragma once

#include "topkcert/distribution.hpp"
#include "topkcert/index.hpp"

#include <iosfwd>
#include <optional>
#include <vector>

namespace topkcert {

struct SearchConfig {
    // Keys scored per step; 0 scores the whole selected cell.
    Index batch_size = 0;
    bool record_trail = false;
};

struct TrailStep {
    Index step = 0;
    Index cell = 0;
    Index scored = 0;
    double l_k = kNegInf;
    double u_out = kNegInf;
    double tau_hat = 1.0;
};

enum class SearchStage { Gap, Mass, Exhaustive };

std::string_view to_string(SearchStage stage);

struct SearchResult {
    std::vector<Index> ids;  // certified set, by descending score
    Index scored_count = 0;
    Certificate certificate;
    bool certified = false;
    SearchStage stage = SearchStage::Exhaustive;
    std::optional<Index> k_mc;
    std::vector<TrailStep> trail;
};

/// Partial-scoring state shared by the certified searches.
///
/// Cells are visited in descending order of U_j(q) (ties: smaller id). A cell
/// stays unexplored until all of its keys are scored; its remaining keys are
/// bounded by (#unscored) * e^{U_j(q)}.
class SearchState {
public:
    SearchState(const CellIndex& index, const Eigen::VectorXd& q);

    Index n() const { return index_->size(); }
    Index scored_count() const { return static_cast<Index>(scored_.size()); }
    bool all_scored() const { return scored_count() == n(); }

    // Scores up to `batch_size` keys (0: rest of the cell) from the unexplored
    // cell with the largest bound; returns that cell id.
    Index score_next_batch(Index batch_size);

    // Scored keys by descending score, ties by smaller id; rank is 0-based.
    ScoredKey scored(Index rank) const {
        const Entry& e = scored_[static_cast<std::size_t>(rank)];
        return {e.id, e.score};
    }

    // k-th largest scored value (k <= scored_count()).
    double kth_score(Index k) const { return scored_[static_cast<std::size_t>(k - 1)].score; }
    // Largest scored value ranked below k; -inf if none.
    double best_scored_outside(Index k) const;
    // max U_j(q) over unexplored cells; -inf if none.
    double max_unscored_bound() const;
    // log of sum over unexplored cells of (#unscored) * e^{U_j(q)}.
    double log_unscored_mass() const;

    double log_known_head(Index k) const { return top_ + std::log(prefix_[static_cast<std::size_t>(k)]); }
    double log_known_tail(Index k) const { return top_ + std::log(suffix_[static_cast<std::size_t>(k)]); }
    double log_known_total() const { return top_ + std::log(prefix_.back()); }

    // log of the mass-certificate estimate for keeping the top `kept` scored keys.
    double log_tau_hat(Index kept) const;

    std::vector<Index> top_ids(Index kept) const;

private:
    const CellIndex* index_;
    Eigen::VectorXd query_;
    std::vector<Index> cell_order_;
    std::vector<double> bounds_;           // by position in cell_order_
    std::vector<double> log_bound_suffix_; // sum over positions >= p of |B| e^U
    std::size_t next_cell_ = 0;
    std::size_t offset_in_cell_ = 0;
    // Masses are kept as e^{s - top_} with top_ the largest scored value.
    struct Entry {
        Index id;
        double score;
        double weight;
    };
    std::vector<Entry> scored_;
    double top_ = kNegInf;
    std::vector<double> prefix_{0.0};
    std::vector<double> suffix_{0.0};
};

// Gap-certified Top-k (single boundary gap against cell upper bounds).
SearchResult delta_k_search(const CellIndex& index, const Eigen::VectorXd& q, Index k, double eps,
                            const SearchConfig& config = {});

// Mass-certified Top-k. In adaptive mode k only validates the request; the
// result carries the minimal certified size found online as k_mc.
SearchResult mc_search(const CellIndex& index, const Eigen::VectorXd& q, Index k, double eps,
                       const SearchConfig& config = {}, bool adaptive_k = false);

// Gap certificate first, adaptive mass certificate on the same scored state.
SearchResult hybrid_search(const CellIndex& index, const Eigen::VectorXd& q, Index k, double eps,
                           const SearchConfig& config = {});

// Smallest k whose discarded softmax mass is <= eps.
Index min_k_exact(const ScoreVector& sv, double eps);
Index min_k_exact(const SoftmaxSummary& summary, double eps);

// One JSON object per line: step, cell, scored, l_k, u_out, tau_hat.
void write_trail_jsonl(std::ostream& out, const std::vector<TrailStep>& trail);

}  // namespace topkcert
