#pragma once

#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "srlab/policy.hpp"

namespace srlab {

// One request/response exchange over a byte stream carrying newline-delimited
// JSON. round_trip writes line + '\n', then blocks for a single reply line
// (returned without the newline). A stream that closes or stays silent past
// timeout_ms surfaces as TimeoutError, so the caller can abandon the
// candidate; ProtocolError is reserved for replies that arrive but are
// malformed.
class LineTransport {
 public:
  virtual ~LineTransport() = default;
  virtual std::string round_trip(const std::string& line, int timeout_ms) = 0;
};

// in-process responder, for tests and embedding
class CallbackTransport final : public LineTransport {
 public:
  explicit CallbackTransport(std::function<std::string(const std::string&)> fn)
      : fn_(std::move(fn)) {}
  std::string round_trip(const std::string& line, int timeout_ms) override;

 private:
  std::function<std::string(const std::string&)> fn_;
};

// one TCP connection, opened eagerly in the constructor
class TcpTransport final : public LineTransport {
 public:
  TcpTransport(const std::string& host, int port);
  ~TcpTransport() override;
  TcpTransport(const TcpTransport&) = delete;
  TcpTransport& operator=(const TcpTransport&) = delete;

  std::string round_trip(const std::string& line, int timeout_ms) override;

 private:
  int fd_ = -1;
  std::string buf_;
};

// spawns `/bin/sh -c command` and speaks over its stdin/stdout
class ProcessTransport final : public LineTransport {
 public:
  explicit ProcessTransport(const std::string& command);
  ~ProcessTransport() override;
  ProcessTransport(const ProcessTransport&) = delete;
  ProcessTransport& operator=(const ProcessTransport&) = delete;

  std::string round_trip(const std::string& line, int timeout_ms) override;

 private:
  long pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buf_;
};

// Adapter satisfying the policy contract over the wire protocol:
//   -> {"op":"register","dataset_id":id,"inputs":[[...]],"targets":[...]}
//   <- {"ok":true}
//   -> {"op":"next","dataset_id":id,"prefix":[tok...],"prompt":[tok...]}
//   <- {"probs":{tok:p,...}}            errors as {"error":msg}
// Each dataset is registered once per adapter, keyed by content hash, and
// referenced by its id afterwards; queries without a dataset use the empty id
// and skip registration. Responses are masked to the legal token set; a total
// off by at most 1e-3 (including stray mass on illegal tokens) is
// renormalized, anything further off raises NonDistributionResponse. Wire
// calls are serialized on one connection.
class ExternalPolicy final : public Policy {
 public:
  ExternalPolicy(std::unique_ptr<LineTransport> transport, Vocabulary vocab,
                 int timeout_ms = 30000);

  const Vocabulary& vocabulary() const override { return vocab_; }

 private:
  std::vector<TokenProb> dist(const TokenSeq& prefix, const Dataset* data,
                              const TokenSeq* prompt) const override;
  std::string ensure_registered(const Dataset* data) const;

  std::unique_ptr<LineTransport> transport_;
  Vocabulary vocab_;
  int timeout_ms_;
  mutable std::mutex mutex_;
  mutable std::unordered_map<std::uint64_t, std::string> registered_;
};

// endpoint grammar: "tcp://host:port" or "cmd://shell command line"
std::unique_ptr<Policy> connect_external(const std::string& endpoint,
                                         Vocabulary vocab,
                                         int timeout_ms = 30000);

}  // namespace srlab
