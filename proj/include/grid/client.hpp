// Typed client operations over the resource-layer protocols.

#ifndef GRID_CLIENT_HPP_
#define GRID_CLIENT_HPP_

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "grid/authproto.hpp"
#include "grid/capability.hpp"

namespace grid {

struct JobSpec {
  std::string executable;
  std::int64_t work_units = 1;
  std::vector<std::string> inputs;
  std::string output;
  std::string vo;
  ValueRecord constraints;
  // Optional staging: the host pulls these paths from `stage_source`
  // under the caller's delegated chain before queueing the task.
  std::optional<EndpointAddress> stage_source;
  std::vector<std::string> stage_paths;
  std::optional<Capability> capability;

  Value to_payload(const EndpointAddress& /*unused*/ = {}) const;
};

class GridClient {
 public:
  GridClient(Transport& net, EndpointAddress self, std::shared_ptr<KeyStore> keys,
             TrustStore trust, Chain chain);

  void set_chain(Chain chain) { chain_ = std::move(chain); }
  const Chain& chain() const { return chain_; }

  /// Exactly-once under retries: pass the same request_id again and the
  /// host replays the original job id. Empty request_id draws a fresh one.
  Result<std::string> allocate(const EndpointAddress& host, const JobSpec& job,
                               std::string request_id = "");
  Result<Value> job_status(const EndpointAddress& host, const std::string& job_id);
  Result<Value> cancel(const EndpointAddress& host, const std::string& job_id);

  Result<std::vector<Value>> query_descriptors(const EndpointAddress& host,
                                               const ValueRecord& filter = {});
  Result<std::int64_t> stat_file(const EndpointAddress& host, const std::string& path);
  Result<std::vector<Value>> catalog_query(const EndpointAddress& host, const std::string& table,
                                           const std::optional<std::string>& key,
                                           const ValueRecord& filter = {});
  Status catalog_update(const EndpointAddress& host, const std::string& table,
                        const std::string& key, Value record);

  /// Third-party transfer: ask `source` to push to `dest`. Data never
  /// touches this client. Returns the DONE payload.
  Result<Value> transfer(const EndpointAddress& source, const std::string& source_path,
                         const EndpointAddress& dest, const std::string& dest_path,
                         const std::string& vo = "", std::int64_t streams = 1,
                         std::optional<std::int64_t> offset = std::nullopt,
                         std::optional<std::int64_t> length = std::nullopt);

  Result<std::string> reserve(const EndpointAddress& host, std::int64_t start_ms,
                              std::int64_t end_ms, std::int64_t amount,
                              const std::string& vo = "", std::string request_id = "");
  Status confirm(const EndpointAddress& host, const std::string& reservation_id);
  Status release(const EndpointAddress& host, const std::string& reservation_id);

  AuthClient& raw() { return client_; }
  const EndpointAddress& self() const { return client_.self(); }

 private:
  Result<Value> call(const EndpointAddress& host, const char* protocol, const std::string& type,
                     Value payload, std::string request_id = "");

  AuthClient client_;
  Chain chain_;
};

}  // namespace grid

#endif  // GRID_CLIENT_HPP_
