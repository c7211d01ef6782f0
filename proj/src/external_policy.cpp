#include "srlab/external_policy.hpp"

#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <json.hpp>

#include "srlab/errors.hpp"

namespace srlab {

using nlohmann::json;

namespace {

// Reads from fd into buf until it holds a full line; returns the line without
// its newline. deadline_ms counts down across partial reads.
std::string read_line_fd(int fd, std::string& buf, int timeout_ms) {
  for (;;) {
    auto nl = buf.find('\n');
    if (nl != std::string::npos) {
      std::string line = buf.substr(0, nl);
      buf.erase(0, nl + 1);
      return line;
    }
    struct pollfd pfd {};
    pfd.fd = fd;
    pfd.events = POLLIN;
    int rc = ::poll(&pfd, 1, timeout_ms);
    if (rc == 0) throw TimeoutError("no reply within the call deadline");
    if (rc < 0) throw TimeoutError(std::strerror(errno));
    char chunk[4096];
    ssize_t n = ::read(fd, chunk, sizeof chunk);
    if (n == 0) throw TimeoutError("connection closed before reply");
    if (n < 0) throw TimeoutError(std::strerror(errno));
    buf.append(chunk, std::size_t(n));
  }
}

void write_all_fd(int fd, const std::string& line) {
  std::string payload = line + "\n";
  std::size_t off = 0;
  while (off < payload.size()) {
    ssize_t n = ::write(fd, payload.data() + off, payload.size() - off);
    if (n <= 0) throw TimeoutError("connection closed while sending");
    off += std::size_t(n);
  }
}

}  // namespace

std::string CallbackTransport::round_trip(const std::string& line, int) {
  return fn_(line);
}

// --- tcp ----------------------------------------------------------------------

TcpTransport::TcpTransport(const std::string& host, int port) {
  struct addrinfo hints {};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  struct addrinfo* res = nullptr;
  std::string service = std::to_string(port);
  int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &res);
  if (rc != 0) throw ProtocolError(std::string("resolve: ") + gai_strerror(rc));
  int fd = -1;
  for (struct addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw ProtocolError("endpoint unreachable: " + host + ":" + service);
  fd_ = fd;
}

TcpTransport::~TcpTransport() {
  if (fd_ >= 0) ::close(fd_);
}

std::string TcpTransport::round_trip(const std::string& line, int timeout_ms) {
  write_all_fd(fd_, line);
  return read_line_fd(fd_, buf_, timeout_ms);
}

// --- child process -------------------------------------------------------------

ProcessTransport::ProcessTransport(const std::string& command) {
  int to_child[2], from_child[2];
  if (::pipe(to_child) != 0 || ::pipe(from_child) != 0)
    throw ProtocolError("pipe setup failed");
  pid_t pid = ::fork();
  if (pid < 0) throw ProtocolError("fork failed");
  if (pid == 0) {
    ::dup2(to_child[0], STDIN_FILENO);
    ::dup2(from_child[1], STDOUT_FILENO);
    ::close(to_child[0]);
    ::close(to_child[1]);
    ::close(from_child[0]);
    ::close(from_child[1]);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), (char*)nullptr);
    _exit(127);
  }
  ::close(to_child[0]);
  ::close(from_child[1]);
  pid_ = pid;
  to_child_ = to_child[1];
  from_child_ = from_child[0];
  // a dying child must not kill the whole process on the next write
  ::signal(SIGPIPE, SIG_IGN);
}

ProcessTransport::~ProcessTransport() {
  if (to_child_ >= 0) ::close(to_child_);
  if (from_child_ >= 0) ::close(from_child_);
  if (pid_ > 0) {
    ::kill(pid_t(pid_), SIGTERM);
    int status = 0;
    ::waitpid(pid_t(pid_), &status, 0);
  }
}

std::string ProcessTransport::round_trip(const std::string& line,
                                         int timeout_ms) {
  write_all_fd(to_child_, line);
  return read_line_fd(from_child_, buf_, timeout_ms);
}

// --- adapter -------------------------------------------------------------------

ExternalPolicy::ExternalPolicy(std::unique_ptr<LineTransport> transport,
                               Vocabulary vocab, int timeout_ms)
    : transport_(std::move(transport)),
      vocab_(std::move(vocab)),
      timeout_ms_(timeout_ms) {
  if (transport_ == nullptr)
    throw std::invalid_argument("external policy needs a transport");
}

std::string ExternalPolicy::ensure_registered(const Dataset* data) const {
  if (data == nullptr) return "";
  std::uint64_t key = data->content_hash();
  auto it = registered_.find(key);
  if (it != registered_.end()) return it->second;

  char idbuf[32];
  std::snprintf(idbuf, sizeof idbuf, "d%016llx",
                static_cast<unsigned long long>(key));
  std::string id = idbuf;

  json req;
  req["op"] = "register";
  req["dataset_id"] = id;
  json inputs = json::array();
  for (std::size_t i = 0; i < data->rows(); ++i) {
    json row = json::array();
    for (double v : data->row(i)) row.push_back(v);
    inputs.push_back(std::move(row));
  }
  req["inputs"] = std::move(inputs);
  req["targets"] = data->targets;

  std::string reply = transport_->round_trip(req.dump(), timeout_ms_);
  json ack = json::parse(reply, nullptr, false);
  if (ack.is_discarded() || !ack.is_object())
    throw ProtocolError("unparseable register reply: " + reply);
  if (ack.contains("error"))
    throw ProtocolError(ack["error"].get<std::string>());
  if (!(ack.contains("ok") && ack["ok"].is_boolean() && ack["ok"].get<bool>()))
    throw ProtocolError("register was not acknowledged: " + reply);

  registered_.emplace(key, id);
  return id;
}

std::vector<TokenProb> ExternalPolicy::dist(const TokenSeq& prefix,
                                            const Dataset* data,
                                            const TokenSeq* prompt) const {
  int deficit = checked_deficit(prefix);
  std::lock_guard<std::mutex> lock(mutex_);
  std::string id = ensure_registered(data);

  json req;
  req["op"] = "next";
  req["dataset_id"] = id;
  req["prefix"] = texts_from_tokens(prefix);
  req["prompt"] = prompt != nullptr ? texts_from_tokens(*prompt)
                                    : std::vector<std::string>{};

  std::string reply = transport_->round_trip(req.dump(), timeout_ms_);
  json resp = json::parse(reply, nullptr, false);
  if (resp.is_discarded() || !resp.is_object())
    throw ProtocolError("unparseable reply: " + reply);
  if (resp.contains("error"))
    throw ProtocolError(resp["error"].get<std::string>());
  if (!resp.contains("probs") || !resp["probs"].is_object())
    throw ProtocolError("reply carries no probability map: " + reply);

  std::vector<Token> legal = legal_tokens(vocab_, deficit);
  std::vector<TokenProb> out;
  double total = 0.0, stray = 0.0;
  for (const auto& [name, value] : resp["probs"].items()) {
    if (!value.is_number())
      throw ProtocolError("non-numeric probability for token " + name);
    double p = value.get<double>();
    if (!(p >= 0.0) || !std::isfinite(p))
      throw NonDistributionResponse("probability " + std::to_string(p) +
                                    " for token " + name);
    Token tok;
    try {
      tok = token_from_text(name);
    } catch (const UnknownToken&) {
      throw ProtocolError("unknown token in reply: " + name);
    }
    total += p;
    if (std::find(legal.begin(), legal.end(), tok) == legal.end())
      stray += p;  // masked out below if small enough
    else
      out.push_back({tok, p});
  }
  if (std::fabs(total - 1.0) > 1e-3)
    throw NonDistributionResponse("probabilities sum to " +
                                  std::to_string(total));
  if (stray > 1e-3)
    throw NonDistributionResponse("mass " + std::to_string(stray) +
                                  " on tokens illegal at this prefix");
  double kept = total - stray;
  if (!(kept > 0.0))
    throw NonDistributionResponse("no mass on legal tokens");
  for (TokenProb& tp : out) tp.prob /= kept;
  std::sort(out.begin(), out.end(),
            [](const TokenProb& a, const TokenProb& b) { return a.token < b.token; });
  return out;
}

std::unique_ptr<Policy> connect_external(const std::string& endpoint,
                                         Vocabulary vocab, int timeout_ms) {
  std::unique_ptr<LineTransport> transport;
  if (endpoint.rfind("tcp://", 0) == 0) {
    std::string rest = endpoint.substr(6);
    auto colon = rest.rfind(':');
    if (colon == std::string::npos)
      throw ProtocolError("tcp endpoint needs host:port, got " + endpoint);
    transport = std::make_unique<TcpTransport>(rest.substr(0, colon),
                                               std::stoi(rest.substr(colon + 1)));
  } else if (endpoint.rfind("cmd://", 0) == 0) {
    transport = std::make_unique<ProcessTransport>(endpoint.substr(6));
  } else {
    throw ProtocolError("unsupported endpoint: " + endpoint);
  }
  return std::make_unique<ExternalPolicy>(std::move(transport), std::move(vocab),
                                          timeout_ms);
}

}  // namespace srlab
