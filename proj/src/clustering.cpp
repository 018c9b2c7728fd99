#include "opensetiq/clustering.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>

#include "opensetiq/error.hpp"
#include "opensetiq/rng.hpp"

namespace osiq {

std::vector<std::size_t> ClusterSet::members_of(int cluster) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignments.size(); ++i) {
        if (assignments[i] == cluster) out.push_back(i);
    }
    return out;
}

std::vector<std::size_t> ClusterSet::sizes() const {
    std::vector<std::size_t> out(static_cast<std::size_t>(n), 0);
    for (int a : assignments) {
        if (a >= 0) ++out[static_cast<std::size_t>(a)];
    }
    return out;
}

const char* algorithm_name(ClusterAlgorithm a) {
    switch (a) {
        case ClusterAlgorithm::kmeans: return "kmeans";
        case ClusterAlgorithm::birch: return "birch";
        case ClusterAlgorithm::dbscan: return "dbscan";
        case ClusterAlgorithm::spectral: return "spectral";
    }
    return "?";
}

ClusterAlgorithm algorithm_from_name(const std::string& name) {
    if (name == "kmeans") return ClusterAlgorithm::kmeans;
    if (name == "birch") return ClusterAlgorithm::birch;
    if (name == "dbscan") return ClusterAlgorithm::dbscan;
    if (name == "spectral") return ClusterAlgorithm::spectral;
    throw ParamError("unknown clustering algorithm: " + name);
}

namespace {

using Points = std::vector<Eigen::VectorXd>;

/// Compacts raw assignments (noise = -1 preserved) and computes centroids
/// and dispersions in the space of `points`. Every algorithm funnels its
/// output through here, so the stored values always match the members.
ClusterSet finalize_clusters(const Points& points, const std::vector<int>& raw) {
    ClusterSet cs;
    cs.assignments.assign(raw.size(), -1);
    std::vector<int> id_map;  // raw id -> compact id, in first-appearance order
    std::vector<int> seen;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (raw[i] < 0) continue;
        auto it = std::find(seen.begin(), seen.end(), raw[i]);
        int compact;
        if (it == seen.end()) {
            compact = static_cast<int>(seen.size());
            seen.push_back(raw[i]);
        } else {
            compact = static_cast<int>(it - seen.begin());
        }
        cs.assignments[i] = compact;
    }
    cs.n = static_cast<int>(seen.size());
    if (cs.n == 0) return cs;

    const Eigen::Index dim = points.empty() ? 0 : points[0].size();
    cs.centroids.assign(static_cast<std::size_t>(cs.n), Eigen::VectorXd::Zero(dim));
    std::vector<long> counts(static_cast<std::size_t>(cs.n), 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (cs.assignments[i] >= 0) {
            cs.centroids[static_cast<std::size_t>(cs.assignments[i])] += points[i];
            ++counts[static_cast<std::size_t>(cs.assignments[i])];
        }
    }
    for (int c = 0; c < cs.n; ++c) {
        cs.centroids[static_cast<std::size_t>(c)] /= static_cast<double>(counts[static_cast<std::size_t>(c)]);
    }
    cs.dispersions.assign(static_cast<std::size_t>(cs.n), 0.0);
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (cs.assignments[i] >= 0) {
            cs.dispersions[static_cast<std::size_t>(cs.assignments[i])] +=
                (points[i] - cs.centroids[static_cast<std::size_t>(cs.assignments[i])]).norm();
        }
    }
    for (int c = 0; c < cs.n; ++c) {
        cs.dispersions[static_cast<std::size_t>(c)] /= static_cast<double>(counts[static_cast<std::size_t>(c)]);
    }
    return cs;
}

int nearest_center(const Eigen::VectorXd& x, const Points& centers) {
    int best = 0;
    double best_d = (x - centers[0]).squaredNorm();
    for (std::size_t c = 1; c < centers.size(); ++c) {
        const double d = (x - centers[c]).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(c);
        }
    }
    return best;
}

Points kmeanspp_seeds(const Points& points, const std::vector<double>& weights, int k, Rng& rng) {
    const std::size_t n = points.size();
    Points centers;
    centers.reserve(static_cast<std::size_t>(k));
    std::vector<char> chosen(n, 0);

    auto pick_by_weight = [&](const std::vector<double>& w) -> std::size_t {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (!chosen[i]) total += w[i];
        }
        if (total <= 0.0) {
            for (std::size_t i = 0; i < n; ++i) {
                if (!chosen[i]) return i;  // duplicates; lowest free index
            }
            return 0;
        }
        const double target = rng.uniform() * total;
        double acc = 0.0;
        std::size_t last = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (chosen[i]) continue;
            acc += w[i];
            last = i;
            if (acc > target) return i;
        }
        return last;
    };

    const std::size_t first = pick_by_weight(weights);
    chosen[first] = 1;
    centers.push_back(points[first]);

    std::vector<double> d2(n);
    for (int c = 1; c < k; ++c) {
        std::vector<double> probs(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            if (chosen[i]) continue;
            d2[i] = (points[i] - centers[static_cast<std::size_t>(nearest_center(points[i], centers))]).squaredNorm();
            probs[i] = weights[i] * d2[i];
        }
        const std::size_t pick = pick_by_weight(probs);
        chosen[pick] = 1;
        centers.push_back(points[pick]);
    }
    return centers;
}

struct LloydResult {
    std::vector<int> assignments;
    Points centers;
    std::vector<double> inertia_history;
};

constexpr int kLloydMaxIter = 300;
constexpr double kLloydTol = 1e-6;

LloydResult lloyd(const Points& points, const std::vector<double>& weights, int k,
                  std::uint64_t seed) {
    const std::size_t n = points.size();
    if (k < 1) throw ParamError("kmeans: k must be >= 1");
    if (static_cast<std::size_t>(k) > n) throw ParamError("kmeans: k exceeds number of points");

    Rng rng(derive_seed(seed, 0x5EEDED));
    LloydResult result;
    result.centers = kmeanspp_seeds(points, weights, k, rng);
    result.assignments.assign(n, 0);

    for (int iter = 0; iter < kLloydMaxIter; ++iter) {
        double inertia = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            result.assignments[i] = nearest_center(points[i], result.centers);
            inertia += weights[i] *
                       (points[i] - result.centers[static_cast<std::size_t>(result.assignments[i])]).squaredNorm();
        }

        // repair empty clusters with the point farthest from its centroid
        for (int c = 0; c < k; ++c) {
            const bool empty = std::none_of(result.assignments.begin(), result.assignments.end(),
                                            [c](int a) { return a == c; });
            if (!empty) continue;
            double worst = -1.0;
            std::size_t steal = 0;
            for (std::size_t i = 0; i < n; ++i) {
                const double d =
                    (points[i] - result.centers[static_cast<std::size_t>(result.assignments[i])]).squaredNorm();
                if (d > worst) {
                    worst = d;
                    steal = i;
                }
            }
            inertia -= weights[steal] * worst;
            result.assignments[steal] = c;
            result.centers[static_cast<std::size_t>(c)] = points[steal];
        }
        result.inertia_history.push_back(inertia);

        const Eigen::Index dim = points[0].size();
        Points next(static_cast<std::size_t>(k), Eigen::VectorXd::Zero(dim));
        std::vector<double> mass(static_cast<std::size_t>(k), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            next[static_cast<std::size_t>(result.assignments[i])] += weights[i] * points[i];
            mass[static_cast<std::size_t>(result.assignments[i])] += weights[i];
        }
        double shift = 0.0;
        for (int c = 0; c < k; ++c) {
            if (mass[static_cast<std::size_t>(c)] > 0.0) {
                next[static_cast<std::size_t>(c)] /= mass[static_cast<std::size_t>(c)];
            } else {
                next[static_cast<std::size_t>(c)] = result.centers[static_cast<std::size_t>(c)];
            }
            shift = std::max(shift, (next[static_cast<std::size_t>(c)] -
                                     result.centers[static_cast<std::size_t>(c)]).norm());
        }
        result.centers = std::move(next);
        if (shift < kLloydTol) break;
    }
    // final assignment against the converged centers
    for (std::size_t i = 0; i < n; ++i) {
        result.assignments[i] = nearest_center(points[i], result.centers);
    }
    return result;
}

}  // namespace

ClusterSet cluster_set_from_assignments(const Points& points,
                                        const std::vector<int>& assignments) {
    if (points.size() != assignments.size()) {
        throw ShapeError("cluster_set_from_assignments: size mismatch");
    }
    return finalize_clusters(points, assignments);
}

ClusterSet kmeans(const Points& points, int k, std::uint64_t seed) {
    if (points.empty()) throw ParamError("kmeans: no points");
    const std::vector<double> weights(points.size(), 1.0);
    return finalize_clusters(points, lloyd(points, weights, k, seed).assignments);
}

std::vector<double> kmeans_inertia_history(const Points& points, int k, std::uint64_t seed) {
    if (points.empty()) throw ParamError("kmeans: no points");
    const std::vector<double> weights(points.size(), 1.0);
    return lloyd(points, weights, k, seed).inertia_history;
}

// ---------------------------------------------------------------------------
// BIRCH

namespace {

struct CfNode;

struct CfEntry {
    double n = 0.0;
    Eigen::VectorXd ls;
    double ss = 0.0;
    std::unique_ptr<CfNode> child;       // non-leaf entries only
    std::vector<std::size_t> point_ids;  // leaf entries only

    Eigen::VectorXd centroid() const { return ls / n; }

    double radius_if_added(const Eigen::VectorXd& x) const {
        const double m = n + 1.0;
        const Eigen::VectorXd mean = (ls + x) / m;
        const double r2 = (ss + x.squaredNorm()) / m - mean.squaredNorm();
        return std::sqrt(std::max(0.0, r2));
    }

    void absorb(const Eigen::VectorXd& x, std::size_t id) {
        n += 1.0;
        ls += x;
        ss += x.squaredNorm();
        point_ids.push_back(id);
    }
};

struct CfNode {
    bool leaf = true;
    std::vector<CfEntry> entries;
};

CfEntry entry_for_point(const Eigen::VectorXd& x, std::size_t id) {
    CfEntry e;
    e.n = 1.0;
    e.ls = x;
    e.ss = x.squaredNorm();
    e.point_ids.push_back(id);
    return e;
}

void refresh_from_child(CfEntry& e) {
    e.n = 0.0;
    e.ls.setZero();
    e.ss = 0.0;
    for (const CfEntry& c : e.child->entries) {
        e.n += c.n;
        e.ls += c.ls;
        e.ss += c.ss;
    }
}

std::size_t closest_entry(const std::vector<CfEntry>& entries, const Eigen::VectorXd& x) {
    std::size_t best = 0;
    double best_d = (entries[0].centroid() - x).squaredNorm();
    for (std::size_t i = 1; i < entries.size(); ++i) {
        const double d = (entries[i].centroid() - x).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

/// Splits an over-full node around its two farthest entries; returns the
/// new sibling holding the second half.
std::unique_ptr<CfNode> split_node(CfNode& node) {
    std::size_t seed_a = 0, seed_b = 1;
    double far = -1.0;
    for (std::size_t i = 0; i < node.entries.size(); ++i) {
        for (std::size_t j = i + 1; j < node.entries.size(); ++j) {
            const double d = (node.entries[i].centroid() - node.entries[j].centroid()).squaredNorm();
            if (d > far) {
                far = d;
                seed_a = i;
                seed_b = j;
            }
        }
    }
    auto sibling = std::make_unique<CfNode>();
    sibling->leaf = node.leaf;
    const Eigen::VectorXd ca = node.entries[seed_a].centroid();
    const Eigen::VectorXd cb = node.entries[seed_b].centroid();
    std::vector<CfEntry> keep;
    for (std::size_t i = 0; i < node.entries.size(); ++i) {
        const Eigen::VectorXd c = node.entries[i].centroid();
        const bool to_sibling =
            i == seed_b || (i != seed_a && (c - cb).squaredNorm() < (c - ca).squaredNorm());
        (to_sibling ? sibling->entries : keep).push_back(std::move(node.entries[i]));
    }
    node.entries = std::move(keep);
    return sibling;
}

struct InsertOutcome {
    std::unique_ptr<CfNode> sibling;  // set when the child node split
};

InsertOutcome insert_point(CfNode& node, const Eigen::VectorXd& x, std::size_t id,
                           double threshold, int branching) {
    InsertOutcome out;
    if (node.leaf) {
        if (node.entries.empty()) {
            node.entries.push_back(entry_for_point(x, id));
            return out;
        }
        const std::size_t nearest = closest_entry(node.entries, x);
        if (node.entries[nearest].radius_if_added(x) <= threshold) {
            node.entries[nearest].absorb(x, id);
        } else {
            node.entries.push_back(entry_for_point(x, id));
        }
    } else {
        const std::size_t nearest = closest_entry(node.entries, x);
        CfEntry& down = node.entries[nearest];
        InsertOutcome child_out = insert_point(*down.child, x, id, threshold, branching);
        refresh_from_child(down);
        if (child_out.sibling) {
            CfEntry extra;
            extra.child = std::move(child_out.sibling);
            extra.ls = Eigen::VectorXd::Zero(x.size());
            refresh_from_child(extra);
            node.entries.push_back(std::move(extra));
        }
    }
    if (static_cast<int>(node.entries.size()) > branching) {
        out.sibling = split_node(node);
    }
    return out;
}

void collect_leaf_entries(const CfNode& node, std::vector<const CfEntry*>& out) {
    if (node.leaf) {
        for (const CfEntry& e : node.entries) out.push_back(&e);
    } else {
        for (const CfEntry& e : node.entries) collect_leaf_entries(*e.child, out);
    }
}

}  // namespace

ClusterSet birch(const Points& points, double threshold, int branching, int k,
                 std::uint64_t seed) {
    if (points.empty()) throw ParamError("birch: no points");
    if (branching < 2) throw ParamError("birch: branching factor must be >= 2");
    if (threshold < 0.0) throw ParamError("birch: threshold must be >= 0");
    if (k < 1 || static_cast<std::size_t>(k) > points.size()) {
        throw ParamError("birch: k out of range");
    }

    auto root = std::make_unique<CfNode>();
    for (std::size_t i = 0; i < points.size(); ++i) {
        InsertOutcome out = insert_point(*root, points[i], i, threshold, branching);
        if (out.sibling) {
            auto new_root = std::make_unique<CfNode>();
            new_root->leaf = false;
            CfEntry left, right;
            left.child = std::move(root);
            left.ls = Eigen::VectorXd::Zero(points[i].size());
            refresh_from_child(left);
            right.child = std::move(out.sibling);
            right.ls = Eigen::VectorXd::Zero(points[i].size());
            refresh_from_child(right);
            new_root->entries.push_back(std::move(left));
            new_root->entries.push_back(std::move(right));
            root = std::move(new_root);
        }
    }

    std::vector<const CfEntry*> leaves;
    collect_leaf_entries(*root, leaves);
    Points entry_centroids;
    std::vector<double> entry_weights;
    entry_centroids.reserve(leaves.size());
    for (const CfEntry* e : leaves) {
        entry_centroids.push_back(e->centroid());
        entry_weights.push_back(e->n);
    }
    const int k_eff = std::min<int>(k, static_cast<int>(entry_centroids.size()));
    const LloydResult grouped = lloyd(entry_centroids, entry_weights, k_eff, seed);

    std::vector<int> assignments(points.size(), -1);
    for (std::size_t e = 0; e < leaves.size(); ++e) {
        for (std::size_t id : leaves[e]->point_ids) {
            assignments[id] = grouped.assignments[e];
        }
    }
    return finalize_clusters(points, assignments);
}

// ---------------------------------------------------------------------------
// DBSCAN

ClusterSet dbscan(const Points& points, double eps, int min_pts) {
    if (points.empty()) throw ParamError("dbscan: no points");
    if (eps <= 0.0) throw ParamError("dbscan: eps must be > 0");
    if (min_pts < 1) throw ParamError("dbscan: min_pts must be >= 1");

    const std::size_t n = points.size();
    const double eps2 = eps * eps;
    auto region = [&](std::size_t p) {
        std::vector<std::size_t> out;
        for (std::size_t q = 0; q < n; ++q) {
            if ((points[p] - points[q]).squaredNorm() <= eps2) out.push_back(q);
        }
        return out;
    };

    constexpr int kUnvisited = -2;
    std::vector<int> assignments(n, kUnvisited);
    int next_cluster = 0;
    for (std::size_t p = 0; p < n; ++p) {
        if (assignments[p] != kUnvisited) continue;
        auto neighbors = region(p);
        if (static_cast<int>(neighbors.size()) < min_pts) {
            assignments[p] = -1;  // noise unless a later core point claims it
            continue;
        }
        const int cluster = next_cluster++;
        assignments[p] = cluster;
        std::vector<std::size_t> queue(neighbors.begin(), neighbors.end());
        for (std::size_t qi = 0; qi < queue.size(); ++qi) {
            const std::size_t q = queue[qi];
            if (assignments[q] == -1) assignments[q] = cluster;  // border point
            if (assignments[q] != kUnvisited) continue;
            assignments[q] = cluster;
            auto q_neighbors = region(q);
            if (static_cast<int>(q_neighbors.size()) >= min_pts) {
                queue.insert(queue.end(), q_neighbors.begin(), q_neighbors.end());
            }
        }
    }
    return finalize_clusters(points, assignments);
}

// ---------------------------------------------------------------------------
// Spectral

namespace {

double median_pairwise_distance(const Points& points) {
    std::vector<double> d;
    d.reserve(points.size() * (points.size() - 1) / 2);
    for (std::size_t i = 0; i < points.size(); ++i) {
        for (std::size_t j = i + 1; j < points.size(); ++j) {
            d.push_back((points[i] - points[j]).norm());
        }
    }
    if (d.empty()) return 1.0;
    const std::size_t mid = d.size() / 2;
    std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid), d.end());
    return std::max(d[mid], 1e-12);
}

// median distance to the 7th nearest neighbor: a local scale that keeps
// far-apart clusters disconnected where the global median would blur them
double local_scale_bandwidth(const Points& points) {
    const std::size_t n = points.size();
    const std::size_t k = std::min<std::size_t>(7, n - 1);
    std::vector<double> scales(n);
    std::vector<double> dist(n);
    for (std::size_t i = 0; i < n; ++i) {
        dist.clear();
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) dist.push_back((points[i] - points[j]).norm());
        }
        std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k - 1),
                         dist.end());
        scales[i] = dist[k - 1];
    }
    std::nth_element(scales.begin(), scales.begin() + static_cast<std::ptrdiff_t>(n / 2),
                     scales.end());
    return std::max(scales[n / 2], 1e-12);
}

Eigen::MatrixXd normalized_laplacian(const Points& points, std::optional<double> bandwidth) {
    const auto n = static_cast<Eigen::Index>(points.size());
    const double sigma = bandwidth.value_or(median_pairwise_distance(points));
    if (sigma <= 0.0) throw ParamError("spectral: bandwidth must be > 0");
    const double inv = 1.0 / (2.0 * sigma * sigma);

    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double w = std::exp(-(points[static_cast<std::size_t>(i)] -
                                        points[static_cast<std::size_t>(j)]).squaredNorm() * inv);
            a(i, j) = w;
            a(j, i) = w;
        }
    }
    Eigen::VectorXd degree = a.rowwise().sum();
    for (Eigen::Index i = 0; i < n; ++i) {
        if (degree[i] <= 0.0) {  // isolated point: tiny self-loop keeps D invertible
            a(i, i) = 1e-12;
            degree[i] = 1e-12;
        }
    }
    const Eigen::VectorXd inv_sqrt = degree.array().rsqrt();
    Eigen::MatrixXd l = -(inv_sqrt.asDiagonal() * a * inv_sqrt.asDiagonal());
    l.diagonal().array() += 1.0;
    return l;
}

}  // namespace

ClusterSet spectral(const Points& points, int k, std::optional<double> bandwidth,
                    std::uint64_t seed) {
    if (points.size() < 2) throw ParamError("spectral: need at least 2 points");
    if (k < 2 || static_cast<std::size_t>(k) > points.size()) {
        throw ParamError("spectral: k out of range");
    }
    const Eigen::MatrixXd l = normalized_laplacian(points, bandwidth);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(l);
    if (solver.info() != Eigen::Success) throw NumericError("spectral: eigensolver failed");

    const Eigen::MatrixXd embedding = solver.eigenvectors().leftCols(k);
    Points rows(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        Eigen::VectorXd row = embedding.row(static_cast<Eigen::Index>(i));
        const double norm = row.norm();
        if (norm > 0.0) row /= norm;
        rows[i] = std::move(row);
    }
    const std::vector<double> weights(points.size(), 1.0);
    const LloydResult grouped = lloyd(rows, weights, k, seed);
    return finalize_clusters(points, grouped.assignments);
}

int eigengap_k(const Points& points, std::optional<double> bandwidth, int k_max) {
    if (points.size() < 2) return 1;
    const Eigen::MatrixXd l =
        normalized_laplacian(points, bandwidth.value_or(local_scale_bandwidth(points)));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(l);
    if (solver.info() != Eigen::Success) throw NumericError("eigengap: eigensolver failed");
    const Eigen::VectorXd ev = solver.eigenvalues();
    const Eigen::Index limit = std::min<Eigen::Index>(k_max, ev.size());
    int k = 1;
    double best_gap = -1.0;
    for (Eigen::Index i = 1; i < limit; ++i) {
        const double gap = ev[i] - ev[i - 1];
        if (gap > best_gap) {
            best_gap = gap;
            k = static_cast<int>(i);
        }
    }
    return std::max(k, 1);
}

ClusterSet cluster(const Points& points, const ClusterParams& params,
                   std::optional<int> default_k) {
    int k = 0;
    if (params.algorithm != ClusterAlgorithm::dbscan) {
        if (params.k) {
            k = *params.k;
        } else if (!params.eigengap_k && default_k) {
            k = *default_k;
        } else {
            k = eigengap_k(points, params.rbf_bandwidth);
        }
        k = std::clamp<int>(k, 1, static_cast<int>(points.size()));
    }
    switch (params.algorithm) {
        case ClusterAlgorithm::kmeans:
            return kmeans(points, k, params.seed);
        case ClusterAlgorithm::birch:
            return birch(points, params.birch_threshold, params.branching, k, params.seed);
        case ClusterAlgorithm::dbscan:
            return dbscan(points, params.eps, params.min_pts);
        case ClusterAlgorithm::spectral:
            return spectral(points, std::max(k, 2), params.rbf_bandwidth, params.seed);
    }
    throw ParamError("unknown clustering algorithm");
}

std::vector<DominantCluster> select_dominant(const ClusterSet& cs, int k_new, int m_min,
                                             int iteration) {
    if (k_new < 1) throw ParamError("select_dominant: k_new must be >= 1");
    std::vector<std::pair<std::size_t, int>> ranked;  // (size, cluster), sorted below
    const auto sizes = cs.sizes();
    for (int c = 0; c < cs.n; ++c) {
        if (sizes[static_cast<std::size_t>(c)] >= static_cast<std::size_t>(std::max(m_min, 1))) {
            ranked.emplace_back(sizes[static_cast<std::size_t>(c)], c);
        }
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    if (ranked.size() > static_cast<std::size_t>(k_new)) ranked.resize(static_cast<std::size_t>(k_new));

    std::vector<DominantCluster> out;
    for (std::size_t r = 0; r < ranked.size(); ++r) {
        DominantCluster dc;
        dc.label = std::string(kNovelPrefix) + std::to_string(iteration) + "-" + std::to_string(r + 1);
        dc.cluster = ranked[r].second;
        dc.members = cs.members_of(ranked[r].second);
        out.push_back(std::move(dc));
    }
    return out;
}

}  // namespace osiq
