#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace osiq {

/// Pseudo-labels for promoted clusters start with this; corpus labels
/// never may, which keeps ground truth out of the training namespace.
inline constexpr const char* kNovelPrefix = "novel-";

/// Result of any clustering run. Noise (DBSCAN only) is -1; all other
/// assignments are cluster indices in [0, n). Centroids are member means
/// in the ORIGINAL feature space; dispersion i is the mean Euclidean
/// distance of cluster i's members to its centroid.
struct ClusterSet {
    std::vector<int> assignments;
    std::vector<Eigen::VectorXd> centroids;
    std::vector<double> dispersions;
    int n = 0;

    std::vector<std::size_t> members_of(int cluster) const;
    std::vector<std::size_t> sizes() const;
};

enum class ClusterAlgorithm { kmeans, birch, dbscan, spectral };

struct ClusterParams {
    ClusterAlgorithm algorithm = ClusterAlgorithm::spectral;
    std::optional<int> k;           // cluster count; empty lets the caller decide
    bool eigengap_k = false;        // pick k by the Laplacian eigengap instead
    double eps = 0.5;               // dbscan, in normalized feature space
    int min_pts = 5;                // dbscan
    double birch_threshold = 0.5;   // CF subcluster radius bound
    int branching = 50;             // CF-tree branching factor, >= 2
    std::optional<double> rbf_bandwidth;  // spectral; empty = median heuristic
    std::uint64_t seed = 0;
};

const char* algorithm_name(ClusterAlgorithm a);
ClusterAlgorithm algorithm_from_name(const std::string& name);

/// Lloyd's algorithm with k-means++ seeding. Runs at most 300 iterations
/// or until the largest centroid shift drops below 1e-6; empty clusters
/// are repaired by stealing the point farthest from its centroid.
ClusterSet kmeans(const std::vector<Eigen::VectorXd>& points, int k, std::uint64_t seed);

/// Per-iteration within-cluster sum of squares of the kmeans run;
/// non-increasing by construction.
std::vector<double> kmeans_inertia_history(const std::vector<Eigen::VectorXd>& points, int k,
                                           std::uint64_t seed);

/// Single-pass CF-tree (radius threshold, branching factor), then weighted
/// k-means over the leaf entries; points inherit their entry's cluster.
ClusterSet birch(const std::vector<Eigen::VectorXd>& points, double threshold, int branching,
                 int k, std::uint64_t seed);

/// Classic density clustering; border points join the first core cluster
/// that reaches them, so results are deterministic given input order.
ClusterSet dbscan(const std::vector<Eigen::VectorXd>& points, double eps, int min_pts);

/// Normalized spectral clustering: RBF affinity (zero diagonal),
/// L_sym = I - D^(-1/2) A D^(-1/2), the k bottom eigenvectors row-normalized,
/// then k-means in the embedding. Centroids/dispersions are reported in the
/// original space. Empty bandwidth uses the median pairwise distance.
ClusterSet spectral(const std::vector<Eigen::VectorXd>& points, int k,
                    std::optional<double> bandwidth, std::uint64_t seed);

/// Dispatch on params; `k` falls back (in order) to params.k, the eigengap
/// heuristic when eigengap_k is set, then `default_k`.
ClusterSet cluster(const std::vector<Eigen::VectorXd>& points, const ClusterParams& params,
                   std::optional<int> default_k = std::nullopt);

/// Largest gap among the first 10 eigenvalues of the normalized Laplacian.
/// With no explicit bandwidth this uses a local scale (median 7-NN
/// distance) rather than the global median, which washes out gaps between
/// well-separated groups.
int eigengap_k(const std::vector<Eigen::VectorXd>& points, std::optional<double> bandwidth,
               int k_max = 10);

/// Builds a ClusterSet (compacted ids, centroids, dispersions) from raw
/// assignments; -1 stays noise.
ClusterSet cluster_set_from_assignments(const std::vector<Eigen::VectorXd>& points,
                                        const std::vector<int>& assignments);

struct DominantCluster {
    std::string label;                 // "novel-<iteration>-<rank>", rank from 1
    int cluster = -1;                  // index into the ClusterSet
    std::vector<std::size_t> members;  // point indices
};

/// The k_new largest non-noise clusters of size >= m_min, biggest first
/// (ties by lower cluster index). May return fewer, or none: an empty
/// result means no discovery this round.
std::vector<DominantCluster> select_dominant(const ClusterSet& cs, int k_new, int m_min,
                                             int iteration);

}  // namespace osiq
