#pragma once

#include "spinebench/types.hpp"

#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace spinebench {

using LabelPair = std::pair<VertebraLabel, VertebraLabel>;

/// Mean displacement d(i->j) between consecutive vertebrae seen in training data.
struct DisplacementStats {
    std::map<LabelPair, Point3> mean_vec;
    std::map<LabelPair, int> counts;

    [[nodiscard]] std::set<LabelPair> neighbor_pairs() const;
    [[nodiscard]] std::string to_json() const;
    [[nodiscard]] static DisplacementStats from_json(const std::string& text);
};

/// Averages x_j - x_i over every pair of labels that are consecutive among
/// the labels annotated in a training scan.
[[nodiscard]] DisplacementStats displacement_stats(std::span<const CentroidSet> training);

/// Default anatomical successor edges: C1..T12, then T12->L1, T12->T13,
/// T13->L1, L1..L5 and L5->L6.
[[nodiscard]] const std::set<LabelPair>& default_chain_edges();

struct MrfParams {
    double lambda = 0.2;
    double bias = 2.0;
    double heat_threshold = 0.05;
    double borrow_penalty = 0.1;
    /// Borrow only from neighbours of the same region (cervical/thoracic/lumbar).
    bool borrow_within_region = true;

    void validate() const;
};

enum class CandidateOrigin { own, borrowed_prev, borrowed_next };

struct Candidate {
    Point3 position;
    /// Heat after any borrowing penalty.
    double heat = 0.0;
    CandidateOrigin origin = CandidateOrigin::own;
    /// The heatmap maximum this candidate came from.
    VertebraLabel source_label;
    std::size_t source_index = 0;

    friend bool operator==(const Candidate&, const Candidate&) = default;
};

struct RawCandidate {
    Point3 position;
    double heat = 0.0;
};

using RawCandidates = std::map<VertebraLabel, std::vector<RawCandidate>, AnatomicalLess>;

struct CandidateGraph {
    std::map<VertebraLabel, std::vector<Candidate>, AnatomicalLess> candidates;
    MrfParams params;
    DisplacementStats stats;

    [[nodiscard]] double unary(const Candidate& c) const { return params.lambda * c.heat + params.bias; }
};

/// Pairwise reward: (1 - lambda) * (1 - |2 (mean - d) / |mean||^2).
[[nodiscard]] double pairwise_term(const Point3& mean_vec, const Point3& d, double lambda);

/// Thresholds raw candidates, then adds penalised copies of the surviving
/// candidates of each label's chain neighbours.
[[nodiscard]] CandidateGraph build_candidate_graph(const RawCandidates& raw, DisplacementStats stats,
                                                   const MrfParams& params = {});

struct SelectedSequence {
    /// Chosen candidates in anatomical order.
    std::vector<std::pair<VertebraLabel, Candidate>> chain;
    double total_score = 0.0;
};

/// Best chain of candidates under unary + pairwise terms, found as a longest
/// path through the label DAG between a virtual source and sink. A physical
/// candidate is never used in two slots. Ties prefer longer chains, then the
/// lexicographically smallest label sequence.
[[nodiscard]] SelectedSequence solve_sequence(const CandidateGraph& graph);

[[nodiscard]] CentroidSet to_centroids(const SelectedSequence& sequence);

enum class ViolationKind { too_close, too_far, ordering };
[[nodiscard]] std::string to_string(ViolationKind kind);

struct SequenceViolation {
    ViolationKind kind;
    VertebraLabel upper;
    VertebraLabel lower;
    double distance_mm = 0.0;
};

struct SequenceConstraints {
    double min_distance_mm = 12.5;
    double max_distance_mm = 50.0;
    /// World axis pointing superior (0=x, 1=y, 2=z) and its sign.
    int cranial_axis = 2;
    double cranial_sign = 1.0;

    /// Uses the world axis that dominates the affine's third voxel column.
    [[nodiscard]] static SequenceConstraints from_affine(const Affine& affine);
};

/// Distance bounds and cranio-caudal ordering between consecutive annotated vertebrae.
[[nodiscard]] std::vector<SequenceViolation> check_sequence(const CentroidSet& centroids,
                                                            const SequenceConstraints& constraints = {});

/// Unweighted mean of world voxel centers per label.
[[nodiscard]] CentroidSet centroids_from_mask(const LabelVolume& volume);

/// Least-squares offset per label mapping mask centroids onto annotated ones:
/// the mean over paired instances of (annotated - mask).
[[nodiscard]] std::map<VertebraLabel, Point3, AnatomicalLess> estimate_centroid_offset(
    std::span<const CentroidSet> mask_centroids, std::span<const CentroidSet> annotated);

/// Candidate file: {"candidates": {"<code>": [{"pos": [x,y,z], "heat": h}, ...]}, "params": {...}}.
struct CandidateFile {
    RawCandidates candidates;
    MrfParams params;
};
[[nodiscard]] CandidateFile parse_candidate_file(const std::string& text, const MrfParams& defaults = {});

[[nodiscard]] std::string sequence_to_json(const SelectedSequence& sequence);
[[nodiscard]] std::string violations_to_json(const std::vector<SequenceViolation>& violations);

}  // namespace spinebench
