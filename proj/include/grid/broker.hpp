// Brokering and replica selection. Pure library calls over index and
// catalog state; no service of their own.

#ifndef GRID_BROKER_HPP_
#define GRID_BROKER_HPP_

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "grid/client.hpp"

namespace grid {

struct Requirements {
  std::int64_t min_slots = 0;  // free slots needed
  std::set<std::string> tags;  // all must be present
  std::int64_t max_queue = 1LL << 40;
  std::string type;  // "compute" | "storage" | "catalog" | "" (any)
};

/// Candidates meeting every hard requirement, ranked by free_slots
/// descending, then queue_length ascending, then name ascending. Total
/// order: identical snapshots always rank identically.
std::vector<Value> rank_descriptors(const std::vector<Value>& descriptors,
                                    const Requirements& req);

/// Query the index and rank. Empty result is a valid answer.
Result<std::vector<Value>> discover_and_rank(GridClient& client, const EndpointAddress& index,
                                             const Requirements& req);

// ---- Replica catalog (stored in a catalog host's "replicas" table) ----

struct ReplicaCopy {
  EndpointAddress endpoint;
  std::string path;
  std::int64_t latency_ms = 0;
  std::int64_t load_pct = 0;  // load as a percentage, 50 = 0.5

  Value to_value() const;
  static ReplicaCopy from_value(const Value& v);
};

/// Register one physical copy. Proof of existence: the copy is stat'ed
/// at its storage endpoint and the size must match `size` and every
/// previously registered copy.
Status replica_register(GridClient& client, const EndpointAddress& catalog,
                        const std::string& logical, const ReplicaCopy& copy, std::int64_t size);

Result<std::vector<ReplicaCopy>> replica_locate(GridClient& client,
                                                const EndpointAddress& catalog,
                                                const std::string& logical);
Result<std::int64_t> replica_size(GridClient& client, const EndpointAddress& catalog,
                                  const std::string& logical);

/// argmin of latency x (1 + load), ties by endpoint name ascending.
Result<ReplicaCopy> replica_select(const std::vector<ReplicaCopy>& copies);

}  // namespace grid

#endif  // GRID_BROKER_HPP_
