#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "centile/cohort.hpp"

namespace centile {

/// Peer-matching windows.  A peer must have been weighed within age_window
/// of anchor_age at a weight within weight_window of the probe's anchor
/// weight, and weighed again within target_window of target_age.
struct ReferenceCriteria {
  double anchor_age = 0.0;
  double age_window = 0.04;
  double weight_window = 0.25;
  double target_age = 0.0;
  double target_window = 0.05;
};

void validate(const ReferenceCriteria& criteria);

struct PeerMatch {
  std::string subject_id;
  Measurement anchor;
  Measurement target;
};

struct PeerSet {
  Measurement probe_anchor;
  std::optional<Measurement> probe_target;
  std::vector<PeerMatch> peers;  // in subject id order
  std::size_t empty_warnings = 0;  // 1 when no peer qualified
};

/// Selects every other subject satisfying both windows; within a window the
/// visit nearest the window centre is used (earlier visit on ties).  Throws
/// ValidationError when the probe is unknown or has no anchor measurement.
PeerSet select_peers(const Cohort& cohort, const std::string& subject_id,
                     const ReferenceCriteria& criteria);

/// Midrank percentile: 100 * (#below + #equal / 2) / #peers.
double empirical_percentile(std::span<const double> peer_values, double subject_value);

struct HeightComparison {
  std::string subject_id;
  double weight = 0.0;
  std::optional<double> height_difference;  // peer minus subject, cm
};

struct PeerComparisonReport {
  std::vector<HeightComparison> heavier;
  std::size_t taller = 0;
  std::size_t shorter = 0;
  std::size_t same_height = 0;
  std::size_t unknown = 0;
};

/// Lists peers heavier than the subject at the target visit with their
/// height difference; rows lacking a height on either side are unknown.
PeerComparisonReport peer_comparison_report(std::span<const PeerMatch> peers,
                                            const Measurement& subject_target);

}  // namespace centile
