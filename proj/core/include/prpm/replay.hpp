#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "prpm/allocator.hpp"
#include "prpm/event_log.hpp"
#include "prpm/future_state.hpp"
#include "prpm/pipeline.hpp"
#include "prpm/policy.hpp"

namespace prpm {

struct ReplayEvent {
  Timestamp time = 0;
  std::string case_id;
  /// Prefix length after this event.
  std::size_t prefix_len = 0;
};

/// Events of all traces ordered by (time, case_id, prefix_len).
std::vector<ReplayEvent> replay_events(std::span<const Trace> traces);

struct ScoredPrefix {
  Timestamp as_of = 0;
  ScoreTriple current;
  ScoreTriple future;
};

/// Precomputed scores of one test case. `prefixes[j]` belongs to prefix length
/// j + 1; only prefixes that still have an unobserved event are scored.
struct ScoredCase {
  std::string case_id;
  Timestamp arrival = 0;
  std::vector<Timestamp> event_times;
  std::vector<ScoredPrefix> prefixes;
  std::optional<Outcome> label;
};

/// Scores every candidate prefix of every trace. Cases are scored
/// concurrently; the result does not depend on the thread count.
/// Throws SchemaMismatch when the bundle's models do not fit its schema.
std::vector<ScoredCase> score_cases(std::span<const Trace> traces, const ModelBundle& bundle,
                                    std::size_t knn_k);

struct PoolConfig {
  std::size_t capacity = 1;
  DurationDist duration;
};

struct LedgerEntry {
  std::string case_id;
  std::size_t treated_at_prefix = 0;
  Timestamp treated_at = 0;
  std::size_t resource_id = 0;
  Timestamp release_at = 0;
  double avg_pred = 0;
  double total_uncer = 0;
  double cate = 0;
  double c_gain = 0;
  double adj_gain = 0;
  Decision decision = Decision::neutral;
  /// Diagnostic: cate * c_uout credited only when the case really ended
  /// negatively, minus c_t1. Not part of total_gain.
  double outcome_aware_gain = 0;
};

struct ReplayReport {
  std::string policy_name;
  std::size_t resources = 0;
  std::size_t treated_count = 0;
  /// Sum of the ledger's c_gain.
  double total_gain = 0;
  double gain_per_treated = 0;
  double outcome_aware_gain = 0;
  std::vector<LedgerEntry> ledger;
};

/// Event-driven replay of the scored cases under one policy. At every
/// distinct event time: due resources are released, the emitting cases move
/// to their new prefix, and while a resource is free the best-ranked
/// untreated candidate that passes the policy filter is treated. A case is a
/// candidate from its first event until its last one.
ReplayReport run(std::span<const ScoredCase> cases, const PolicyConfig& policy,
                 const PoolConfig& pool, const CostParams& costs, std::uint64_t seed);

/// One report per (policy, resource level), policy-major. Every cell uses
/// the same seed, so duration samples line up across policies.
std::vector<ReplayReport> sweep(std::span<const ScoredCase> cases,
                                std::span<const PolicyConfig> policies,
                                std::span<const std::size_t> resource_levels,
                                const DurationDist& duration, const CostParams& costs,
                                std::uint64_t seed);

/// Writes summary.csv and ledgers/<policy>_R<resources>.csv under `dir`.
/// Throws IoError when a file cannot be written.
void emit_report(std::span<const ReplayReport> reports, const std::filesystem::path& dir);

void write_summary(std::ostream& out, std::span<const ReplayReport> reports);
void write_ledger(std::ostream& out, std::span<const LedgerEntry> ledger);
std::string ledger_file_name(const ReplayReport& report);

/// Summary rows without ledgers.
std::vector<ReplayReport> read_summary(std::istream& in);
std::vector<LedgerEntry> read_ledger(std::istream& in);

}  // namespace prpm
