#include "topkcert/search.hpp"

#include <json.hpp>

#include <algorithm>
#include <numeric>
#include <ostream>

namespace topkcert {

namespace {

template <typename A, typename B>
bool ranks_before(const A& a, const B& b) {
    return a.score > b.score || (a.score == b.score && a.id < b.id);
}

void require_search_args(const CellIndex& index, const Eigen::VectorXd& q, Index k, double eps) {
    require_epsilon(eps);
    if (k < 1 || k >= index.size()) throw DomainError("search needs 1 <= k < n");
    if (q.size() != index.dim()) throw InvalidInput("query dimension mismatch");
    if (!q.allFinite()) throw InvalidInput("query must be finite");
}

}  // namespace

std::string_view to_string(SearchStage stage) {
    switch (stage) {
        case SearchStage::Gap: return "gap";
        case SearchStage::Mass: return "mass";
        case SearchStage::Exhaustive: return "exhaustive";
    }
    return "unknown";
}

SearchState::SearchState(const CellIndex& index, const Eigen::VectorXd& q) : index_(&index), query_(q) {
    const Index m = index.num_cells();
    std::vector<double> by_cell(static_cast<std::size_t>(m));
    for (Index j = 0; j < m; ++j) by_cell[static_cast<std::size_t>(j)] = cell_upper_bound(index, j, q);

    cell_order_.resize(static_cast<std::size_t>(m));
    std::iota(cell_order_.begin(), cell_order_.end(), Index{0});
    std::stable_sort(cell_order_.begin(), cell_order_.end(), [&](Index a, Index b) {
        return by_cell[static_cast<std::size_t>(a)] > by_cell[static_cast<std::size_t>(b)];
    });

    bounds_.resize(static_cast<std::size_t>(m));
    log_bound_suffix_.assign(static_cast<std::size_t>(m) + 1, kNegInf);
    for (std::size_t p = static_cast<std::size_t>(m); p-- > 0;) {
        const Index j = cell_order_[p];
        bounds_[p] = by_cell[static_cast<std::size_t>(j)];
        const double count = static_cast<double>(index.cell(j).members.size());
        log_bound_suffix_[p] = log_add_exp(log_bound_suffix_[p + 1], std::log(count) + bounds_[p]);
    }
    scored_.reserve(static_cast<std::size_t>(index.size()));
}

Index SearchState::score_next_batch(Index batch_size) {
    if (next_cell_ >= cell_order_.size()) throw DomainError("every key is already scored");
    const Index j = cell_order_[next_cell_];
    const auto& members = index_->cell(j).members;

    std::size_t end = members.size();
    if (batch_size > 0) end = std::min(end, offset_in_cell_ + static_cast<std::size_t>(batch_size));

    const double scale = index_->store().scale();
    const auto mid = static_cast<std::ptrdiff_t>(scored_.size());
    double batch_top = kNegInf;
    for (std::size_t t = offset_in_cell_; t < end; ++t) {
        const Index id = members[t];
        const double s = index_->store().keys().row(id).dot(query_) * scale;
        batch_top = std::max(batch_top, s);
        scored_.push_back({id, s, 0.0});
    }
    if (batch_top > top_) {
        const double rescale = std::exp(top_ - batch_top);
        for (auto it = scored_.begin(); it != scored_.begin() + mid; ++it) it->weight *= rescale;
        top_ = batch_top;
    }
    for (auto it = scored_.begin() + mid; it != scored_.end(); ++it) it->weight = std::exp(it->score - top_);
    std::sort(scored_.begin() + mid, scored_.end(), ranks_before<Entry, Entry>);
    std::inplace_merge(scored_.begin(), scored_.begin() + mid, scored_.end(), ranks_before<Entry, Entry>);

    offset_in_cell_ = end;
    if (offset_in_cell_ == members.size()) {
        ++next_cell_;
        offset_in_cell_ = 0;
    }

    const std::size_t s = scored_.size();
    prefix_.assign(s + 1, 0.0);
    suffix_.assign(s + 1, 0.0);
    for (std::size_t r = 0; r < s; ++r) prefix_[r + 1] = prefix_[r] + scored_[r].weight;
    for (std::size_t r = s; r-- > 0;) suffix_[r] = suffix_[r + 1] + scored_[r].weight;
    return j;
}

double SearchState::best_scored_outside(Index k) const {
    return k < scored_count() ? scored_[static_cast<std::size_t>(k)].score : kNegInf;
}

double SearchState::max_unscored_bound() const {
    return next_cell_ < cell_order_.size() ? bounds_[next_cell_] : kNegInf;
}

double SearchState::log_unscored_mass() const {
    if (next_cell_ >= cell_order_.size()) return kNegInf;
    const Index j = cell_order_[next_cell_];
    const double remaining = static_cast<double>(index_->cell(j).members.size() - offset_in_cell_);
    return log_add_exp(std::log(remaining) + bounds_[next_cell_], log_bound_suffix_[next_cell_ + 1]);
}

double SearchState::log_tau_hat(Index kept) const {
    if (scored_.empty()) return std::numeric_limits<double>::infinity();
    kept = std::min(kept, scored_count());
    const double numerator = log_add_exp(log_known_tail(kept), log_unscored_mass());
    if (numerator == kNegInf) return kNegInf;
    return numerator - log_known_total();
}

std::vector<Index> SearchState::top_ids(Index kept) const {
    kept = std::min(kept, scored_count());
    std::vector<Index> ids(static_cast<std::size_t>(kept));
    for (Index r = 0; r < kept; ++r) ids[static_cast<std::size_t>(r)] = scored_[static_cast<std::size_t>(r)].id;
    return ids;
}

namespace {

struct GapCheck {
    double l_k = kNegInf;
    double u_out = kNegInf;
    Certificate certificate;
};

// Gap certificate for the current top-k of `state` (requires >= k scored).
GapCheck check_gap(const SearchState& state, Index k, double eps) {
    GapCheck g;
    g.l_k = state.kth_score(k);
    g.u_out = std::max(state.best_scored_outside(k), state.max_unscored_bound());
    const double gap = g.l_k - g.u_out;
    const double log_ratio = std::log(static_cast<double>(k) / static_cast<double>(state.n() - k));
    const double bound = g.u_out == kNegInf ? 0.0 : logistic(-(gap + log_ratio));
    g.certificate = make_certificate(CertificateKind::SingleGap, bound, eps, SingleGapWitness{k, gap});
    return g;
}

// Fixed-size mass certificate for the top `kept` scored keys.
Certificate mass_certificate(const SearchState& state, Index kept, double eps) {
    kept = std::min(kept, state.scored_count());
    const double log_tau = state.log_tau_hat(kept);
    const double unscored = state.log_unscored_mass();
    const double bound = std::exp(std::min(log_tau, 0.0));
    if (unscored == kNegInf)
        return make_certificate(CertificateKind::ExactMass, bound, eps, ExactMassWitness{kept});
    return make_certificate(CertificateKind::MassBound, bound, eps,
                            MassBoundWitness{kept, state.log_known_head(kept), state.log_known_tail(kept), unscored});
}

// Smallest kept count whose mass certificate passes, if any.
std::optional<Index> minimal_certified_size(const SearchState& state, double eps) {
    const Index s = state.scored_count();
    if (s == 0) return std::nullopt;
    const double log_eps = std::log(eps);
    if (state.log_tau_hat(s) > log_eps) return std::nullopt;
    Index lo = 1, hi = s;  // tau_hat is non-increasing in the kept count
    while (lo < hi) {
        const Index mid = lo + (hi - lo) / 2;
        if (state.log_tau_hat(mid) <= log_eps)
            hi = mid;
        else
            lo = mid + 1;
    }
    return lo;
}

void record(SearchResult& result, const SearchConfig& config, const SearchState& state, Index cell, Index k) {
    if (!config.record_trail) return;
    TrailStep t;
    t.step = static_cast<Index>(result.trail.size());
    t.cell = cell;
    t.scored = state.scored_count();
    if (state.scored_count() >= k) t.l_k = state.kth_score(k);
    t.u_out = std::max(state.best_scored_outside(k), state.max_unscored_bound());
    t.tau_hat = std::exp(std::min(state.log_tau_hat(k), 0.0));
    result.trail.push_back(t);
}

void finish(SearchResult& result, const SearchState& state, Certificate certificate, Index kept, SearchStage stage) {
    result.certificate = std::move(certificate);
    result.certified = result.certificate.passed;
    result.ids = state.top_ids(kept);
    result.scored_count = state.scored_count();
    result.stage = stage;
}

}  // namespace

SearchResult delta_k_search(const CellIndex& index, const Eigen::VectorXd& q, Index k, double eps,
                            const SearchConfig& config) {
    require_search_args(index, q, k, eps);
    SearchState state(index, q);
    SearchResult result;
    for (;;) {
        const Index cell = state.score_next_batch(config.batch_size);
        record(result, config, state, cell, k);
        if (state.all_scored()) {
            finish(result, state, mass_certificate(state, k, eps), k, SearchStage::Exhaustive);
            return result;
        }
        if (state.scored_count() < k) continue;
        GapCheck g = check_gap(state, k, eps);
        if (g.certificate.passed) {
            finish(result, state, std::move(g.certificate), k, SearchStage::Gap);
            return result;
        }
    }
}

SearchResult mc_search(const CellIndex& index, const Eigen::VectorXd& q, Index k, double eps,
                       const SearchConfig& config, bool adaptive_k) {
    require_search_args(index, q, k, eps);
    SearchState state(index, q);
    SearchResult result;
    for (;;) {
        const Index cell = state.score_next_batch(config.batch_size);
        record(result, config, state, cell, k);
        const SearchStage stage = state.all_scored() ? SearchStage::Exhaustive : SearchStage::Mass;
        if (adaptive_k) {
            if (auto kept = minimal_certified_size(state, eps)) {
                finish(result, state, mass_certificate(state, *kept, eps), *kept, stage);
                result.k_mc = *kept;
                return result;
            }
        } else {
            Certificate c = mass_certificate(state, k, eps);
            if (c.passed || state.all_scored()) {
                finish(result, state, std::move(c), k, stage);
                return result;
            }
        }
    }
}

SearchResult hybrid_search(const CellIndex& index, const Eigen::VectorXd& q, Index k, double eps,
                           const SearchConfig& config) {
    require_search_args(index, q, k, eps);
    SearchState state(index, q);
    SearchResult result;
    for (;;) {
        const Index cell = state.score_next_batch(config.batch_size);
        record(result, config, state, cell, k);
        if (state.scored_count() >= k) {
            GapCheck g = check_gap(state, k, eps);
            if (g.certificate.passed) {
                finish(result, state, std::move(g.certificate), k, SearchStage::Gap);
                return result;
            }
        }
        if (auto kept = minimal_certified_size(state, eps)) {
            finish(result, state, mass_certificate(state, *kept, eps), *kept,
                   state.all_scored() ? SearchStage::Exhaustive : SearchStage::Mass);
            result.k_mc = *kept;
            return result;
        }
    }
}

Index min_k_exact(const SoftmaxSummary& summary, double eps) {
    require_epsilon(eps);
    Index lo = 1, hi = summary.size();
    while (lo < hi) {
        const Index mid = lo + (hi - lo) / 2;
        if (summary.tail_mass(mid) <= eps)
            hi = mid;
        else
            lo = mid + 1;
    }
    return lo;
}

Index min_k_exact(const ScoreVector& sv, double eps) { return min_k_exact(SoftmaxSummary(sv), eps); }

void write_trail_jsonl(std::ostream& out, const std::vector<TrailStep>& trail) {
    auto finite_or_null = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
    for (const TrailStep& t : trail) {
        nlohmann::json j{{"step", t.step},
                         {"cell", t.cell},
                         {"scored", t.scored},
                         {"l_k", finite_or_null(t.l_k)},
                         {"u_out", finite_or_null(t.u_out)},
                         {"tau_hat", t.tau_hat}};
        out << j.dump() << '\n';
    }
}

}  // namespace topkcert
