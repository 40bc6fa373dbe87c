#include "spinebench/labelseq.hpp"

#include "spinebench/analysis.hpp"
#include "spinebench/error.hpp"

#include "json.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>

namespace spinebench {

using nlohmann::json;

namespace {

std::string pair_key(const LabelPair& p) {
    return std::to_string(p.first.code()) + "->" + std::to_string(p.second.code());
}

LabelPair parse_pair_key(const std::string& key) {
    const auto arrow = key.find("->");
    if (arrow == std::string::npos) throw Error(ErrorCode::format, "bad label pair key '" + key + "'");
    try {
        return {VertebraLabel(std::stoi(key.substr(0, arrow))), VertebraLabel(std::stoi(key.substr(arrow + 2)))};
    } catch (const std::logic_error&) {
        throw Error(ErrorCode::format, "bad label pair key '" + key + "'");
    }
}

void require_forward(const LabelPair& p) {
    if (p.first.anatomical_rank() >= p.second.anatomical_rank())
        throw Error(ErrorCode::format, "label pair " + pair_key(p) + " does not run cranio-caudally");
}

Point3 parse_vec(const json& v) {
    if (!v.is_array() || v.size() != 3) throw Error(ErrorCode::format, "expected a 3-vector");
    Point3 p{v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
    if (!p.finite()) throw Error(ErrorCode::format, "non-finite vector component");
    return p;
}

json vec_json(const Point3& p) { return json::array({p.x, p.y, p.z}); }

}  // namespace

std::set<LabelPair> DisplacementStats::neighbor_pairs() const {
    std::set<LabelPair> out;
    for (const auto& [pair, v] : mean_vec) out.insert(pair);
    return out;
}

std::string DisplacementStats::to_json() const {
    json doc;
    doc["pairs"] = json::array();
    doc["mean_vec"] = json::object();
    doc["counts"] = json::object();
    for (const auto& [pair, v] : mean_vec) {
        doc["pairs"].push_back({pair.first.code(), pair.second.code()});
        doc["mean_vec"][pair_key(pair)] = vec_json(v);
        auto c = counts.find(pair);
        doc["counts"][pair_key(pair)] = c == counts.end() ? 0 : c->second;
    }
    return doc.dump(2) + "\n";
}

DisplacementStats DisplacementStats::from_json(const std::string& text) {
    DisplacementStats s;
    try {
        const auto doc = json::parse(text);
        for (const auto& [key, v] : doc.at("mean_vec").items()) {
            const auto pair = parse_pair_key(key);
            require_forward(pair);
            const Point3 vec = parse_vec(v);
            if (squared_norm(vec) == 0.0)
                throw Error(ErrorCode::format, "zero mean displacement for " + key);
            s.mean_vec[pair] = vec;
        }
        if (doc.contains("pairs")) {
            for (const auto& p : doc["pairs"]) {
                const LabelPair pair{VertebraLabel(p.at(0).get<int>()), VertebraLabel(p.at(1).get<int>())};
                if (!s.mean_vec.count(pair))
                    throw Error(ErrorCode::format, "pair " + pair_key(pair) + " has no mean vector");
            }
        }
        if (doc.contains("counts"))
            for (const auto& [key, v] : doc["counts"].items()) s.counts[parse_pair_key(key)] = v.get<int>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::format, std::string("invalid displacement stats: ") + e.what());
    }
    if (s.mean_vec.empty()) throw Error(ErrorCode::format, "displacement stats contain no pairs");
    return s;
}

DisplacementStats displacement_stats(std::span<const CentroidSet> training) {
    if (training.empty()) throw Error(ErrorCode::empty_input, "no training centroid sets");
    std::map<LabelPair, Point3> sums;
    DisplacementStats out;
    for (const auto& set : training) {
        const auto& e = set.entries();
        for (auto it = e.begin(); it != e.end() && std::next(it) != e.end(); ++it) {
            auto next = std::next(it);
            const LabelPair pair{it->first, next->first};
            sums[pair] = sums[pair] + (next->second - it->second);
            ++out.counts[pair];
        }
    }
    if (sums.empty()) throw Error(ErrorCode::empty_input, "no consecutive vertebra pair in the training data");
    for (const auto& [pair, sum] : sums) {
        const Point3 mean = (1.0 / out.counts[pair]) * sum;
        if (squared_norm(mean) == 0.0)
            throw Error(ErrorCode::format, "degenerate zero mean displacement for " + pair_key(pair));
        out.mean_vec[pair] = mean;
    }
    return out;
}

const std::set<LabelPair>& default_chain_edges() {
    static const std::set<LabelPair> edges = [] {
        std::set<LabelPair> e;
        auto add = [&](int a, int b) { e.insert({VertebraLabel(a), VertebraLabel(b)}); };
        for (int c = 1; c < 19; ++c) add(c, c + 1);
        add(19, 20);
        add(19, 28);
        add(28, 20);
        for (int c = 20; c < 25; ++c) add(c, c + 1);
        return e;
    }();
    return edges;
}

void MrfParams::validate() const {
    if (!(lambda > 0.0 && lambda <= 1.0)) throw Error(ErrorCode::invalid_argument, "lambda must lie in (0, 1]");
    if (!(bias > 0.0)) throw Error(ErrorCode::invalid_argument, "bias must be positive");
    if (!(heat_threshold > 0.0)) throw Error(ErrorCode::invalid_argument, "heat threshold must be positive");
    if (!(borrow_penalty > 0.0)) throw Error(ErrorCode::invalid_argument, "borrow penalty must be positive");
}

double pairwise_term(const Point3& mean_vec, const Point3& d, double lambda) {
    const Point3 scaled = (2.0 / norm(mean_vec)) * (mean_vec - d);
    return (1.0 - lambda) * (1.0 - squared_norm(scaled));
}

CandidateGraph build_candidate_graph(const RawCandidates& raw, DisplacementStats stats, const MrfParams& params) {
    params.validate();
    CandidateGraph g;
    g.params = params;
    g.stats = std::move(stats);

    std::map<VertebraLabel, std::vector<Candidate>, AnatomicalLess> own;
    for (const auto& [label, list] : raw) {
        for (std::size_t n = 0; n < list.size(); ++n) {
            const auto& rc = list[n];
            if (!rc.position.finite() || !std::isfinite(rc.heat))
                throw Error(ErrorCode::format, "non-finite candidate for " + label.name());
            if (rc.heat <= params.heat_threshold) continue;
            own[label].push_back({rc.position, rc.heat, CandidateOrigin::own, label, n});
        }
    }

    for (const auto& [label, list] : own) g.candidates[label] = list;
    for (const auto& [from, to] : default_chain_edges()) {
        if (params.borrow_within_region && region_of(from) != region_of(to)) continue;
        // "to" borrows its predecessor's candidates and vice versa
        auto lend = [&](VertebraLabel donor, VertebraLabel receiver, CandidateOrigin origin) {
            auto it = own.find(donor);
            if (it == own.end()) return;
            for (auto c : it->second) {
                c.heat *= params.borrow_penalty;
                c.origin = origin;
                g.candidates[receiver].push_back(c);
            }
        };
        lend(from, to, CandidateOrigin::borrowed_prev);
        lend(to, from, CandidateOrigin::borrowed_next);
    }
    return g;
}

namespace {

struct Node {
    VertebraLabel label;
    const Candidate* candidate;
    double unary;
};

struct PartialChain {
    double score = -std::numeric_limits<double>::infinity();
    std::vector<int> nodes;
};

/// Strict "a is preferable to b" order over chains with known labels.
bool better_chain(const PartialChain& a, const PartialChain& b, const std::vector<Node>& nodes) {
    if (a.score != b.score) return a.score > b.score;
    if (a.nodes.size() != b.nodes.size()) return a.nodes.size() > b.nodes.size();
    for (std::size_t n = 0; n < a.nodes.size(); ++n) {
        const int la = nodes[static_cast<std::size_t>(a.nodes[n])].label.anatomical_rank();
        const int lb = nodes[static_cast<std::size_t>(b.nodes[n])].label.anatomical_rank();
        if (la != lb) return la < lb;
    }
    return a.nodes < b.nodes;
}

bool same_source(const Candidate& a, const Candidate& b) {
    return a.source_label == b.source_label && a.source_index == b.source_index;
}

}  // namespace

SelectedSequence solve_sequence(const CandidateGraph& graph) {
    // Flatten candidates in anatomical label order.
    std::vector<Node> nodes;
    std::map<VertebraLabel, std::vector<int>, AnatomicalLess> by_label;
    for (const auto& [label, list] : graph.candidates) {
        for (const auto& c : list) {
            by_label[label].push_back(static_cast<int>(nodes.size()));
            nodes.push_back({label, &c, graph.unary(c)});
        }
    }
    SelectedSequence out;
    if (nodes.empty()) return out;

    std::map<VertebraLabel, std::vector<std::pair<VertebraLabel, Point3>>, AnatomicalLess> successors;
    for (const auto& [pair, vec] : graph.stats.mean_vec) {
        require_forward(pair);
        successors[pair.first].push_back({pair.second, vec});
    }

    // A borrowed candidate can recur at most within four consecutive chain
    // slots (its own label, a neighbour on each side, and T13 between T12 and
    // L1), so each state remembers the last three nodes.
    using Key = std::array<int, 3>;
    std::map<VertebraLabel, std::map<Key, PartialChain>, AnatomicalLess> states;
    auto offer = [&](const Key& key, PartialChain&& chain) {
        auto& slot = states[nodes[static_cast<std::size_t>(key[2])].label][key];
        if (slot.nodes.empty() || better_chain(chain, slot, nodes)) slot = std::move(chain);
    };

    for (std::size_t n = 0; n < nodes.size(); ++n) {
        PartialChain start;
        start.score = nodes[n].unary;
        start.nodes = {static_cast<int>(n)};
        offer({-1, -1, static_cast<int>(n)}, std::move(start));
    }

    PartialChain best;
    // states keyed by a label only receive entries from lower-ranked labels
    for (const auto& [label, ids] : by_label) {
        auto sit = states.find(label);
        if (sit == states.end()) continue;
        auto succ = successors.find(label);
        for (const auto& [key, chain] : sit->second) {
            if (best.nodes.empty() || better_chain(chain, best, nodes)) best = chain;
            if (succ == successors.end()) continue;
            const Node& u = nodes[static_cast<std::size_t>(key[2])];
            for (const auto& [next_label, mean] : succ->second) {
                auto nit = by_label.find(next_label);
                if (nit == by_label.end()) continue;
                for (int v : nit->second) {
                    const Node& vn = nodes[static_cast<std::size_t>(v)];
                    bool reused = false;
                    for (int k : key)
                        if (k >= 0 && same_source(*nodes[static_cast<std::size_t>(k)].candidate, *vn.candidate))
                            reused = true;
                    if (reused) continue;
                    PartialChain next;
                    next.score = chain.score +
                                 pairwise_term(mean, vn.candidate->position - u.candidate->position,
                                               graph.params.lambda) +
                                 vn.unary;
                    next.nodes = chain.nodes;
                    next.nodes.push_back(v);
                    offer({key[1], key[2], v}, std::move(next));
                }
            }
        }
    }

    out.total_score = best.score;
    for (int id : best.nodes) {
        const Node& n = nodes[static_cast<std::size_t>(id)];
        out.chain.emplace_back(n.label, *n.candidate);
    }
    return out;
}

CentroidSet to_centroids(const SelectedSequence& sequence) {
    CentroidSet out;
    for (const auto& [label, c] : sequence.chain) out.insert(label, c.position);
    return out;
}

std::string to_string(ViolationKind kind) {
    switch (kind) {
        case ViolationKind::too_close: return "too_close";
        case ViolationKind::too_far: return "too_far";
        case ViolationKind::ordering: return "ordering";
    }
    return "ordering";
}

SequenceConstraints SequenceConstraints::from_affine(const Affine& affine) {
    SequenceConstraints c;
    int axis = 0;
    for (int r = 1; r < 3; ++r)
        if (std::abs(affine[static_cast<std::size_t>(r)][2]) > std::abs(affine[static_cast<std::size_t>(axis)][2])) axis = r;
    c.cranial_axis = axis;
    return c;
}

std::vector<SequenceViolation> check_sequence(const CentroidSet& centroids, const SequenceConstraints& constraints) {
    if (centroids.size() < 2) throw Error(ErrorCode::invalid_argument, "sequence check needs at least two centroids");
    if (constraints.cranial_axis < 0 || constraints.cranial_axis > 2)
        throw Error(ErrorCode::invalid_argument, "cranial axis must be 0, 1 or 2");

    auto height = [&](const Point3& p) {
        const double v = constraints.cranial_axis == 0 ? p.x : (constraints.cranial_axis == 1 ? p.y : p.z);
        return constraints.cranial_sign * v;
    };

    std::vector<SequenceViolation> out;
    const auto& e = centroids.entries();
    for (auto it = e.begin(); std::next(it) != e.end(); ++it) {
        const auto next = std::next(it);
        const double d = distance(it->second, next->second);
        if (d < constraints.min_distance_mm) out.push_back({ViolationKind::too_close, it->first, next->first, d});
        if (d > constraints.max_distance_mm) out.push_back({ViolationKind::too_far, it->first, next->first, d});
        if (height(next->second) > height(it->second))
            out.push_back({ViolationKind::ordering, it->first, next->first, d});
    }
    return out;
}

CentroidSet centroids_from_mask(const LabelVolume& volume) {
    constexpr std::size_t n_codes = VertebraLabel::max_code + 1;
    std::array<std::array<std::int64_t, 3>, n_codes> sums{};
    const auto [nx, ny, nz] = volume.dims();
    const auto vox = volume.voxels();
    std::size_t n = 0;
    for (std::int64_t k = 0; k < nz; ++k)
        for (std::int64_t j = 0; j < ny; ++j)
            for (std::int64_t i = 0; i < nx; ++i, ++n) {
                const auto c = vox[n];
                if (c == 0) continue;
                sums[c][0] += i;
                sums[c][1] += j;
                sums[c][2] += k;
            }

    CentroidSet out;
    for (auto label : volume.labels()) {
        const auto c = static_cast<std::size_t>(label.code());
        const auto count = static_cast<double>(volume.histogram()[c]);
        out.insert(label, apply_affine(volume.affine(), static_cast<double>(sums[c][0]) / count,
                                       static_cast<double>(sums[c][1]) / count,
                                       static_cast<double>(sums[c][2]) / count));
    }
    if (out.empty()) throw Error(ErrorCode::empty_input, "volume contains no labelled voxel");
    return out;
}

std::map<VertebraLabel, Point3, AnatomicalLess> estimate_centroid_offset(std::span<const CentroidSet> mask_centroids,
                                                                         std::span<const CentroidSet> annotated) {
    if (mask_centroids.size() != annotated.size())
        throw Error(ErrorCode::invalid_argument, "mask and annotated centroid lists differ in length");
    std::map<VertebraLabel, std::pair<Point3, int>, AnatomicalLess> acc;
    for (std::size_t n = 0; n < annotated.size(); ++n) {
        for (const auto& [label, v] : annotated[n].entries()) {
            if (auto v_hat = mask_centroids[n].find(label)) {
                auto& [sum, count] = acc[label];
                sum = sum + (v - *v_hat);
                ++count;
            }
        }
    }
    if (acc.empty()) throw Error(ErrorCode::empty_input, "no label shared by mask and annotated centroids");
    std::map<VertebraLabel, Point3, AnatomicalLess> out;
    for (const auto& [label, sc] : acc) out[label] = (1.0 / sc.second) * sc.first;
    return out;
}

CandidateFile parse_candidate_file(const std::string& text, const MrfParams& defaults) {
    CandidateFile f;
    f.params = defaults;
    try {
        const auto doc = json::parse(text);
        for (const auto& [key, list] : doc.at("candidates").items()) {
            const VertebraLabel label(std::stoi(key));
            auto& dst = f.candidates[label];
            for (const auto& c : list) dst.push_back({parse_vec(c.at("pos")), c.at("heat").get<double>()});
        }
        if (doc.contains("params")) {
            const auto& p = doc["params"];
            f.params.lambda = p.value("lambda", f.params.lambda);
            f.params.bias = p.value("bias", f.params.bias);
            f.params.heat_threshold = p.value("threshold", p.value("heat_threshold", f.params.heat_threshold));
            f.params.borrow_penalty = p.value("penalty", p.value("borrow_penalty", f.params.borrow_penalty));
            f.params.borrow_within_region = p.value("borrow_within_region", f.params.borrow_within_region);
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::format, std::string("invalid candidate file: ") + e.what());
    } catch (const std::invalid_argument&) {
        throw Error(ErrorCode::format, "candidate labels must be integer codes");
    }
    return f;
}

std::string sequence_to_json(const SelectedSequence& sequence) {
    json doc;
    doc["total_score"] = sequence.total_score;
    doc["sequence"] = json::array();
    for (const auto& [label, c] : sequence.chain) {
        const char* origin = c.origin == CandidateOrigin::own             ? "own"
                             : c.origin == CandidateOrigin::borrowed_prev ? "borrowed_prev"
                                                                          : "borrowed_next";
        doc["sequence"].push_back({{"label", label.code()},
                                   {"name", label.name()},
                                   {"pos", vec_json(c.position)},
                                   {"heat", c.heat},
                                   {"origin", origin},
                                   {"source_label", c.source_label.code()},
                                   {"source_index", c.source_index}});
    }
    return doc.dump(2) + "\n";
}

std::string violations_to_json(const std::vector<SequenceViolation>& violations) {
    json doc;
    doc["ok"] = violations.empty();
    doc["violations"] = json::array();
    for (const auto& v : violations)
        doc["violations"].push_back({{"kind", to_string(v.kind)},
                                     {"upper", v.upper.code()},
                                     {"lower", v.lower.code()},
                                     {"distance_mm", v.distance_mm}});
    return doc.dump(2) + "\n";
}

}  // namespace spinebench
