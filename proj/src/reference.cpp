#include "centile/reference.hpp"

#include <cmath>

#include "centile/errors.hpp"

namespace centile {

void validate(const ReferenceCriteria& c) {
  if (c.age_window < 0.0 || c.weight_window < 0.0 || c.target_window < 0.0) {
    throw ValidationError("reference criteria: windows must be nonnegative");
  }
  if (!(c.target_age > c.anchor_age)) {
    throw ValidationError("reference criteria: target age must follow the anchor age");
  }
}

namespace {

// Weighed visit nearest `centre` among those accepted by `ok`.
template <typename Pred>
const Measurement* nearest(const std::vector<Measurement>& visits, double centre, Pred ok) {
  const Measurement* best = nullptr;
  for (const auto& m : visits) {
    if (!m.weight || !ok(m)) continue;
    if (best == nullptr || std::abs(m.age - centre) < std::abs(best->age - centre)) best = &m;
  }
  return best;
}

}  // namespace

PeerSet select_peers(const Cohort& cohort, const std::string& subject_id,
                     const ReferenceCriteria& c) {
  validate(c);
  auto probe = cohort.subjects.find(subject_id);
  if (probe == cohort.subjects.end()) {
    throw ValidationError("select_peers: unknown subject " + subject_id);
  }
  auto in_anchor_age = [&](const Measurement& m) {
    return std::abs(m.age - c.anchor_age) <= c.age_window;
  };
  auto in_target = [&](const Measurement& m) {
    return std::abs(m.age - c.target_age) <= c.target_window;
  };
  const Measurement* anchor = nearest(probe->second, c.anchor_age, in_anchor_age);
  if (anchor == nullptr) {
    throw ValidationError("select_peers: subject " + subject_id +
                          " has no weight measurement in the anchor window");
  }
  PeerSet out;
  out.probe_anchor = *anchor;
  if (const Measurement* t = nearest(probe->second, c.target_age, in_target)) {
    out.probe_target = *t;
  }
  const double w0 = *anchor->weight;
  auto in_anchor = [&](const Measurement& m) {
    return in_anchor_age(m) && std::abs(*m.weight - w0) <= c.weight_window;
  };
  for (const auto& [id, visits] : cohort.subjects) {
    if (id == subject_id) continue;
    const Measurement* a = nearest(visits, c.anchor_age, in_anchor);
    if (a == nullptr) continue;
    const Measurement* t = nearest(visits, c.target_age, in_target);
    if (t == nullptr) continue;
    out.peers.push_back({id, *a, *t});
  }
  if (out.peers.empty()) out.empty_warnings = 1;
  return out;
}

double empirical_percentile(std::span<const double> peer_values, double subject_value) {
  if (peer_values.empty()) throw ValidationError("empirical_percentile: empty peer set");
  double below = 0.0;
  double equal = 0.0;
  for (double v : peer_values) {
    if (v < subject_value) {
      below += 1.0;
    } else if (v == subject_value) {
      equal += 1.0;
    }
  }
  return 100.0 * (below + 0.5 * equal) / static_cast<double>(peer_values.size());
}

PeerComparisonReport peer_comparison_report(std::span<const PeerMatch> peers,
                                            const Measurement& subject_target) {
  PeerComparisonReport report;
  if (!subject_target.weight) return report;
  const double w = *subject_target.weight;
  for (const auto& p : peers) {
    if (!p.target.weight || !(*p.target.weight > w)) continue;
    HeightComparison row{p.subject_id, *p.target.weight, std::nullopt};
    if (p.target.height && subject_target.height) {
      const double diff = *p.target.height - *subject_target.height;
      row.height_difference = diff;
      if (diff > 0.0) {
        ++report.taller;
      } else if (diff < 0.0) {
        ++report.shorter;
      } else {
        ++report.same_height;
      }
    } else {
      ++report.unknown;
    }
    report.heavier.push_back(std::move(row));
  }
  return report;
}

}  // namespace centile
