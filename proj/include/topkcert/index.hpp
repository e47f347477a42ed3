#pragma once

#include "topkcert/common.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

namespace topkcert {

// Keys k_1..k_n as rows of an n x d matrix. Scores are q.k / sqrt(d).
class KeyStore {
public:
    KeyStore() = default;
    explicit KeyStore(Eigen::MatrixXd keys);

    Index size() const { return keys_.rows(); }
    Index dim() const { return keys_.cols(); }
    const Eigen::MatrixXd& keys() const { return keys_; }
    double scale() const { return 1.0 / std::sqrt(static_cast<double>(keys_.cols())); }

    // Exact scaled scores of every key.
    Eigen::VectorXd scores(const Eigen::VectorXd& q) const;

private:
    Eigen::MatrixXd keys_;
};

struct Cell {
    Eigen::VectorXd center;
    double radius = 0.0;
    std::vector<Index> members;
};

enum class Partitioning { KMeans, Chunked };

struct IndexOptions {
    Index num_cells = 1;
    std::uint64_t seed = 0;
    Partitioning method = Partitioning::KMeans;
    int kmeans_iterations = 25;
};

struct ScoredKey {
    Index id = 0;
    double score = 0.0;
};

/// Keys partitioned into balls (center, radius). Immutable after build.
class CellIndex {
public:
    CellIndex(KeyStore store, std::vector<Cell> cells);

    const KeyStore& store() const { return store_; }
    Index size() const { return store_.size(); }
    Index dim() const { return store_.dim(); }
    Index num_cells() const { return static_cast<Index>(cells_.size()); }
    const Cell& cell(Index j) const;
    const std::vector<Cell>& cells() const { return cells_; }
    Index cell_of(Index key) const { return assignment_[static_cast<std::size_t>(key)]; }

private:
    KeyStore store_;
    std::vector<Cell> cells_;
    std::vector<Index> assignment_;
};

CellIndex build_index(KeyStore store, const IndexOptions& options);

// (q.c_j + ||q|| r_j) / sqrt(d): no member of cell j scores higher.
double cell_upper_bound(const CellIndex& index, Index j, const Eigen::VectorXd& q);

std::vector<ScoredKey> score_cell(const CellIndex& index, Index j, const Eigen::VectorXd& q);

// Binary format, little-endian:
//   "TKCIDX\0\0" | u32 version=1 | u64 d | u64 n | u64 cells |
//   n*d f64 keys (row-major) | per cell: d f64 center, f64 radius, u64 count, count u64 ids
void save_index(const CellIndex& index, std::ostream& out);
CellIndex load_index(std::istream& in);
void save_index(const CellIndex& index, const std::filesystem::path& path);
CellIndex load_index(const std::filesystem::path& path);

}  // namespace topkcert
