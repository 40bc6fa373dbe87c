#include "spinebench/error.hpp"
#include "spinebench/ranking.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>

namespace spinebench {

using nlohmann::json;

std::string to_string(RankMetric metric) {
    switch (metric) {
        case RankMetric::id_rate: return "id_rate";
        case RankMetric::d_mean: return "d_mean";
        case RankMetric::dice: return "dice";
        case RankMetric::hd: return "hd";
    }
    return "id_rate";
}

std::string to_string(Task task) { return task == Task::labelling ? "labelling" : "segmentation"; }

RankMetric parse_rank_metric(const std::string& text) {
    for (auto m : {RankMetric::id_rate, RankMetric::d_mean, RankMetric::dice, RankMetric::hd})
        if (to_string(m) == text) return m;
    throw Error(ErrorCode::invalid_argument, "unknown ranking metric '" + text + "'");
}

Task parse_task(const std::string& text) {
    if (text == "labelling") return Task::labelling;
    if (text == "segmentation") return Task::segmentation;
    throw Error(ErrorCode::invalid_argument, "unknown task '" + text + "'");
}

Task task_of(RankMetric metric) {
    return metric == RankMetric::id_rate || metric == RankMetric::d_mean ? Task::labelling : Task::segmentation;
}

Direction direction_of(RankMetric metric) {
    return metric == RankMetric::id_rate || metric == RankMetric::dice ? Direction::higher_better
                                                                       : Direction::lower_better;
}

PairwisePoints pairwise_points(const MetricSampleTable& table, double alpha) {
    const std::size_t n_teams = table.teams.size();
    if (n_teams < 2) throw Error(ErrorCode::invalid_argument, "ranking needs at least two teams");
    if (table.values.size() != n_teams) throw Error(ErrorCode::invalid_argument, "sample table is ragged");

    // "better" means larger values for higher_better metrics
    const Alternative better = table.direction == Direction::higher_better ? Alternative::greater : Alternative::less;
    const Alternative worse = better == Alternative::greater ? Alternative::less : Alternative::greater;

    PairwisePoints out;
    out.raw.assign(n_teams, 0);
    for (std::size_t a = 0; a < n_teams; ++a) {
        for (std::size_t b = a + 1; b < n_teams; ++b) {
            PairComparison cmp;
            cmp.first = a;
            cmp.second = b;
            cmp.p_first_better = wilcoxon_signed_rank(table.values[a], table.values[b], better).p_value;
            cmp.p_second_better = wilcoxon_signed_rank(table.values[a], table.values[b], worse).p_value;
            if (cmp.p_first_better && *cmp.p_first_better < alpha)
                cmp.winner = a;
            else if (cmp.p_second_better && *cmp.p_second_better < alpha)
                cmp.winner = b;
            if (cmp.winner) ++out.raw[*cmp.winner];
            out.comparisons.push_back(cmp);
        }
    }
    return out;
}

std::vector<double> normalize_points(std::span<const int> raw, std::size_t team_count) {
    if (team_count == 0) throw Error(ErrorCode::invalid_argument, "team count must be positive");
    std::vector<double> out;
    out.reserve(raw.size());
    for (int r : raw) out.push_back(static_cast<double>(r) / static_cast<double>(team_count));
    return out;
}

WeightConfig WeightConfig::verse19() {
    WeightConfig c;
    c.alpha = default_significance;
    c.metric_weights = {{RankMetric::id_rate, 2.0}, {RankMetric::d_mean, 1.0}, {RankMetric::dice, 2.0}, {RankMetric::hd, 1.0}};
    c.phase_weights = {{"public", 1.0}, {"hidden", 2.0}};
    c.task_weights = {{Task::labelling, 1.0}, {Task::segmentation, 2.0}};
    return c;
}

WeightConfig WeightConfig::verse20() {
    WeightConfig c = verse19();
    c.metric_weights = {{RankMetric::id_rate, 1.0}, {RankMetric::dice, 1.0}};
    return c;
}

WeightConfig WeightConfig::preset(const std::string& name) {
    if (name == "verse19") return verse19();
    if (name == "verse20") return verse20();
    throw Error(ErrorCode::invalid_argument, "unknown weight preset '" + name + "'");
}

WeightConfig WeightConfig::from_json(const std::string& text) {
    WeightConfig c;
    try {
        const auto doc = json::parse(text);
        c.alpha = doc.value("alpha", default_significance);
        for (const auto& [k, v] : doc.at("metric_weights").items()) c.metric_weights[parse_rank_metric(k)] = v.get<double>();
        for (const auto& [k, v] : doc.at("phase_weights").items()) c.phase_weights[k] = v.get<double>();
        for (const auto& [k, v] : doc.at("task_weights").items()) c.task_weights[parse_task(k)] = v.get<double>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::format, std::string("invalid weight config: ") + e.what());
    }
    c.validate();
    return c;
}

std::string WeightConfig::to_json() const {
    json doc;
    doc["alpha"] = alpha;
    for (const auto& [m, w] : metric_weights) doc["metric_weights"][to_string(m)] = w;
    for (const auto& [p, w] : phase_weights) doc["phase_weights"][p] = w;
    for (const auto& [t, w] : task_weights) doc["task_weights"][to_string(t)] = w;
    return doc.dump(2);
}

void WeightConfig::validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::invalid_argument, "alpha must lie in (0, 1)");
    if (metric_weights.empty() || phase_weights.empty())
        throw Error(ErrorCode::invalid_argument, "weight config needs metrics and phases");
    auto positive = [](double w) { return w > 0.0 && std::isfinite(w); };
    for (const auto& [m, w] : metric_weights) {
        if (!positive(w)) throw Error(ErrorCode::invalid_argument, "weight of " + to_string(m) + " must be positive");
        if (!task_weights.count(task_of(m)))
            throw Error(ErrorCode::invalid_argument, "no task weight for " + to_string(task_of(m)));
    }
    for (const auto& [p, w] : phase_weights)
        if (!positive(w)) throw Error(ErrorCode::invalid_argument, "weight of phase " + p + " must be positive");
    for (const auto& [t, w] : task_weights)
        if (!positive(w)) throw Error(ErrorCode::invalid_argument, "weight of task " + to_string(t) + " must be positive");
}

std::vector<LeaderboardRow> combine_scores(const PointsTable& table, const WeightConfig& config) {
    config.validate();
    std::vector<LeaderboardRow> rows;
    for (const auto& team : table.teams) rows.push_back({team, 0.0, 1});

    for (const auto& [phase, points] : table.phases)
        if (!config.phase_weights.count(phase))
            throw Error(ErrorCode::invalid_argument, "phase '" + phase + "' has no weight in the config");
    if (table.phases.empty()) throw Error(ErrorCode::empty_input, "points table has no phase");

    for (const auto& [phase, phase_weight] : config.phase_weights) {
        auto phase_it = table.phases.find(phase);
        if (phase_it == table.phases.end()) continue;
        for (const auto& [metric, metric_weight] : config.metric_weights) {
            auto metric_it = phase_it->second.find(metric);
            if (metric_it == phase_it->second.end())
                throw Error(ErrorCode::invalid_argument,
                            "points table lacks " + to_string(metric) + " in phase '" + phase + "'");
            const double w = config.task_weights.at(task_of(metric)) * phase_weight * metric_weight;
            for (auto& row : rows) {
                auto entry = metric_it->second.find(row.team);
                if (entry != metric_it->second.end()) row.score += w * entry->second.normalized;
            }
        }
    }

    std::stable_sort(rows.begin(), rows.end(), [](const LeaderboardRow& a, const LeaderboardRow& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.team < b.team;
    });
    for (std::size_t n = 0; n < rows.size(); ++n)
        rows[n].rank = n > 0 && rows[n].score == rows[n - 1].score ? rows[n - 1].rank : static_cast<int>(n) + 1;
    return rows;
}

}  // namespace spinebench
