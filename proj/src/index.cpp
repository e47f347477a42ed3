#include "topkcert/index.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>

namespace topkcert {

KeyStore::KeyStore(Eigen::MatrixXd keys) : keys_(std::move(keys)) {
    if (keys_.rows() < 1) throw InvalidInput("key store is empty");
    if (keys_.cols() < 1) throw InvalidInput("keys need dimension >= 1");
    if (!keys_.allFinite()) throw InvalidInput("keys must be finite");
}

Eigen::VectorXd KeyStore::scores(const Eigen::VectorXd& q) const {
    if (q.size() != dim()) throw InvalidInput("query dimension mismatch");
    Eigen::VectorXd s(size());
    for (Index i = 0; i < size(); ++i) s[i] = keys_.row(i).dot(q) * scale();
    return s;
}

CellIndex::CellIndex(KeyStore store, std::vector<Cell> cells)
    : store_(std::move(store)), cells_(std::move(cells)), assignment_(static_cast<std::size_t>(store_.size()), -1) {
    if (cells_.empty()) throw InvalidInput("index needs at least one cell");
    for (std::size_t j = 0; j < cells_.size(); ++j) {
        const Cell& c = cells_[j];
        if (c.members.empty()) throw InvalidInput("cells must be non-empty");
        if (c.center.size() != store_.dim()) throw InvalidInput("cell center dimension mismatch");
        if (!(c.radius >= 0.0)) throw InvalidInput("cell radius must be >= 0");
        for (Index i : c.members) {
            if (i < 0 || i >= store_.size()) throw InvalidInput("cell member out of range");
            auto& slot = assignment_[static_cast<std::size_t>(i)];
            if (slot != -1) throw InvalidInput("key assigned to two cells");
            slot = static_cast<Index>(j);
            if ((store_.keys().row(i).transpose() - c.center).norm() > c.radius)
                throw InvalidInput("cell radius does not contain every member");
        }
    }
    if (std::find(assignment_.begin(), assignment_.end(), Index{-1}) != assignment_.end())
        throw InvalidInput("cells do not cover every key");
}

const Cell& CellIndex::cell(Index j) const {
    if (j < 0 || j >= num_cells()) throw DomainError("invalid cell id " + std::to_string(j));
    return cells_[static_cast<std::size_t>(j)];
}

namespace {

// Slack so a rounded dot product can never exceed the Cauchy-Schwarz bound.
constexpr double kRadiusSlack = 1.0 + 4.0 * std::numeric_limits<double>::epsilon();

void finalize_cell(const Eigen::MatrixXd& keys, Cell& cell) {
    cell.center = Eigen::VectorXd::Zero(keys.cols());
    for (Index i : cell.members) cell.center += keys.row(i).transpose();
    cell.center /= static_cast<double>(cell.members.size());
    double r = 0.0;
    for (Index i : cell.members) r = std::max(r, (keys.row(i).transpose() - cell.center).norm());
    cell.radius = r * kRadiusSlack;
}

std::vector<Cell> chunked_cells(const Eigen::MatrixXd& keys, Index num_cells) {
    const Index n = keys.rows();
    std::vector<Cell> cells(static_cast<std::size_t>(num_cells));
    for (Index i = 0; i < n; ++i)
        cells[static_cast<std::size_t>(i * num_cells / n)].members.push_back(i);
    return cells;
}

std::vector<Cell> kmeans_cells(const Eigen::MatrixXd& keys, Index num_cells, std::uint64_t seed, int iterations) {
    const Index n = keys.rows();
    std::mt19937_64 gen(seed);

    // k-means++ seeding
    Eigen::MatrixXd centers(num_cells, keys.cols());
    std::uniform_int_distribution<Index> first(0, n - 1);
    centers.row(0) = keys.row(first(gen));
    Eigen::VectorXd d2 = (keys.rowwise() - centers.row(0)).rowwise().squaredNorm();
    for (Index c = 1; c < num_cells; ++c) {
        const double total = d2.sum();
        Index pick;
        if (total > 0.0) {
            std::discrete_distribution<Index> weighted(d2.data(), d2.data() + n);
            pick = weighted(gen);
        } else {
            pick = first(gen);
        }
        centers.row(c) = keys.row(pick);
        d2 = d2.cwiseMin((keys.rowwise() - centers.row(c)).rowwise().squaredNorm());
    }

    std::vector<Index> assign(static_cast<std::size_t>(n), 0);
    for (int it = 0; it <= iterations; ++it) {
        bool changed = false;
        for (Index i = 0; i < n; ++i) {
            Index best;
            (centers.rowwise() - keys.row(i)).rowwise().squaredNorm().minCoeff(&best);
            if (assign[static_cast<std::size_t>(i)] != best) changed = true;
            assign[static_cast<std::size_t>(i)] = best;
        }
        if (it == iterations || (!changed && it > 0)) break;

        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(num_cells, keys.cols());
        std::vector<Index> counts(static_cast<std::size_t>(num_cells), 0);
        for (Index i = 0; i < n; ++i) {
            sums.row(assign[static_cast<std::size_t>(i)]) += keys.row(i);
            ++counts[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])];
        }
        for (Index c = 0; c < num_cells; ++c)
            if (counts[static_cast<std::size_t>(c)] > 0)
                centers.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
    }

    // Re-seed empty clusters with the point farthest from its own center.
    for (;;) {
        std::vector<Index> counts(static_cast<std::size_t>(num_cells), 0);
        for (Index a : assign) ++counts[static_cast<std::size_t>(a)];
        const auto empty = std::find(counts.begin(), counts.end(), Index{0});
        if (empty == counts.end()) break;
        Index far = -1;
        double far_d = -1.0;
        for (Index i = 0; i < n; ++i) {
            const Index a = assign[static_cast<std::size_t>(i)];
            if (counts[static_cast<std::size_t>(a)] < 2) continue;
            const double d = (keys.row(i) - centers.row(a)).squaredNorm();
            if (d > far_d) {
                far_d = d;
                far = i;
            }
        }
        const Index c = std::distance(counts.begin(), empty);
        assign[static_cast<std::size_t>(far)] = c;
        centers.row(c) = keys.row(far);
    }

    std::vector<Cell> cells(static_cast<std::size_t>(num_cells));
    for (Index i = 0; i < n; ++i) cells[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])].members.push_back(i);
    return cells;
}

}  // namespace

CellIndex build_index(KeyStore store, const IndexOptions& options) {
    const Index n = store.size();
    if (n < 1) throw InvalidInput("cannot index an empty store");
    if (options.num_cells < 1 || options.num_cells > n)
        throw DomainError("num_cells must satisfy 1 <= num_cells <= n");

    std::vector<Cell> cells = options.method == Partitioning::Chunked
                                  ? chunked_cells(store.keys(), options.num_cells)
                                  : kmeans_cells(store.keys(), options.num_cells, options.seed, options.kmeans_iterations);
    for (Cell& c : cells) finalize_cell(store.keys(), c);
    return CellIndex(std::move(store), std::move(cells));
}

double cell_upper_bound(const CellIndex& index, Index j, const Eigen::VectorXd& q) {
    const Cell& c = index.cell(j);
    if (q.size() != index.dim()) throw InvalidInput("query dimension mismatch");
    // Cauchy-Schwarz bound plus a forward-error margin so that it also
    // dominates member scores as computed in floating point.
    const double qn = q.norm();
    const double d = static_cast<double>(index.dim());
    const double margin = 4.0 * (d + 4.0) * std::numeric_limits<double>::epsilon() * qn * (c.center.norm() + c.radius);
    return (q.dot(c.center) + qn * c.radius + margin) * index.store().scale();
}

std::vector<ScoredKey> score_cell(const CellIndex& index, Index j, const Eigen::VectorXd& q) {
    const Cell& c = index.cell(j);
    if (q.size() != index.dim()) throw InvalidInput("query dimension mismatch");
    std::vector<ScoredKey> out;
    out.reserve(c.members.size());
    const double scale = index.store().scale();
    for (Index i : c.members) out.push_back({i, index.store().keys().row(i).dot(q) * scale});
    return out;
}

namespace {

constexpr std::array<char, 8> kMagic{'T', 'K', 'C', 'I', 'D', 'X', '\0', '\0'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put_le(std::ostream& out, T value) {
    std::array<unsigned char, sizeof(T)> bytes;
    std::memcpy(bytes.data(), &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    out.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
    std::array<unsigned char, sizeof(T)> bytes;
    if (!in.read(reinterpret_cast<char*>(bytes.data()), sizeof(T))) throw InvalidInput("truncated index file");
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    T value;
    std::memcpy(&value, bytes.data(), sizeof(T));
    return value;
}

}  // namespace

void save_index(const CellIndex& index, std::ostream& out) {
    out.write(kMagic.data(), kMagic.size());
    put_le<std::uint32_t>(out, kVersion);
    put_le<std::uint64_t>(out, static_cast<std::uint64_t>(index.dim()));
    put_le<std::uint64_t>(out, static_cast<std::uint64_t>(index.size()));
    put_le<std::uint64_t>(out, static_cast<std::uint64_t>(index.num_cells()));
    const auto& keys = index.store().keys();
    for (Index i = 0; i < keys.rows(); ++i)
        for (Index c = 0; c < keys.cols(); ++c) put_le<double>(out, keys(i, c));
    for (const Cell& cell : index.cells()) {
        for (Index c = 0; c < cell.center.size(); ++c) put_le<double>(out, cell.center[c]);
        put_le<double>(out, cell.radius);
        put_le<std::uint64_t>(out, cell.members.size());
        for (Index id : cell.members) put_le<std::uint64_t>(out, static_cast<std::uint64_t>(id));
    }
    if (!out) throw InvalidInput("failed to write index");
}

CellIndex load_index(std::istream& in) {
    std::array<char, 8> magic{};
    if (!in.read(magic.data(), magic.size()) || magic != kMagic) throw InvalidInput("not an index file");
    if (get_le<std::uint32_t>(in) != kVersion) throw InvalidInput("unsupported index version");
    const auto d = static_cast<Index>(get_le<std::uint64_t>(in));
    const auto n = static_cast<Index>(get_le<std::uint64_t>(in));
    const auto m = static_cast<Index>(get_le<std::uint64_t>(in));
    if (d < 1 || n < 1 || m < 1 || m > n) throw InvalidInput("corrupt index header");

    Eigen::MatrixXd keys(n, d);
    for (Index i = 0; i < n; ++i)
        for (Index c = 0; c < d; ++c) keys(i, c) = get_le<double>(in);
    std::vector<Cell> cells(static_cast<std::size_t>(m));
    for (Cell& cell : cells) {
        cell.center.resize(d);
        for (Index c = 0; c < d; ++c) cell.center[c] = get_le<double>(in);
        cell.radius = get_le<double>(in);
        const auto count = get_le<std::uint64_t>(in);
        if (count > static_cast<std::uint64_t>(n)) throw InvalidInput("corrupt cell size");
        cell.members.resize(count);
        for (Index& id : cell.members) id = static_cast<Index>(get_le<std::uint64_t>(in));
    }
    return CellIndex(KeyStore(std::move(keys)), std::move(cells));
}

void save_index(const CellIndex& index, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidInput("cannot open " + path.string());
    save_index(index, out);
}

CellIndex load_index(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput("cannot open " + path.string());
    return load_index(in);
}

}  // namespace topkcert
